//! Deterministic report rendering and data dumps.
//!
//! Reports are flat `key = value` texts.  Every float is printed with 17
//! significant digits so that re-running a command reproduces the output
//! byte for byte, and so that values survive a parse round trip exactly.

use crate::degree::BoundarySample;
use num_complex::Complex64;
use std::fmt::Write as _;

/// 17 significant digits, enough to reconstruct the exact f64.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// FNV-1a 64-bit hash, used to fingerprint the configuration block.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Ordered `key = value` report text.
#[derive(Clone, Debug, Default)]
pub struct Report {
    lines: Vec<String>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: &str, value: &str) {
        self.lines.push(format!("{key} = {value}"));
    }

    pub fn int(&mut self, key: &str, value: i64) {
        self.lines.push(format!("{key} = {value}"));
    }

    pub fn uint(&mut self, key: &str, value: usize) {
        self.lines.push(format!("{key} = {value}"));
    }

    pub fn float(&mut self, key: &str, value: f64) {
        self.lines.push(format!("{key} = {}", fmt_f(value)));
    }

    pub fn complex(&mut self, key: &str, value: Complex64) {
        self.float(&format!("{key}_re"), value.re);
        self.float(&format!("{key}_im"), value.im);
    }

    pub fn blank(&mut self) {
        self.lines.push(String::new());
    }

    /// Hash of everything pushed so far; call after the config block so
    /// later result lines do not perturb the fingerprint.
    pub fn hash_so_far(&self) -> u64 {
        fnv1a64(self.render().as_bytes())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}

/// Boundary samples as CSV: rectangle point, determinant value and
/// unwrapped argument.
pub fn boundary_csv(samples: &[BoundarySample]) -> String {
    let mut out = String::from("t,s,re_rho,im_rho,unwrapped_arg\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f(s.z.re),
            fmt_f(s.z.im),
            fmt_f(s.rho.re),
            fmt_f(s.rho.im),
            fmt_f(s.unwrapped_arg)
        );
    }
    out
}

/// Eigenvalue trajectories as CSV, one row per parameter value.  Rows are
/// padded to the widest row since the in-window count can change along the
/// family.
pub fn eigen_csv(rows: &[(f64, Vec<f64>)]) -> String {
    let width = rows.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let mut out = String::from("t");
    for j in 1..=width {
        let _ = write!(out, ",lambda_{j}");
    }
    out.push('\n');
    for (t, eigs) in rows {
        out.push_str(&fmt_f(*t));
        for j in 0..width {
            out.push(',');
            if let Some(l) = eigs.get(j) {
                out.push_str(&fmt_f(*l));
            }
        }
        out.push('\n');
    }
    out
}

/// Hill eigenvalues as CSV with the running product of (1 - 1/lambda_j).
pub fn hill_csv(lambdas: &[Complex64]) -> String {
    let mut out = String::from("j,re_lambda,im_lambda,re_partial,im_partial\n");
    let mut partial = Complex64::new(1.0, 0.0);
    for (j, &l) in lambdas.iter().enumerate() {
        partial *= Complex64::new(1.0, 0.0) - Complex64::new(1.0, 0.0) / l;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            j + 1,
            fmt_f(l.re),
            fmt_f(l.im),
            fmt_f(partial.re),
            fmt_f(partial.im)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_survive_a_parse_round_trip() {
        for &x in &[
            0.0,
            -2.5,
            1.0 / 3.0,
            std::f64::consts::PI,
            1e-300,
            -f64::MAX,
            6.02e23,
        ] {
            let back: f64 = fmt_f(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x}");
        }
    }

    #[test]
    fn fnv_matches_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn report_renders_in_push_order_and_hash_is_prefix_stable() {
        let mut r = Report::new();
        r.text("tool", "degree");
        r.float("tol", 1e-10);
        let h = r.hash_so_far();
        r.int("winding", -1);
        assert!(r.render().starts_with("tool = degree\ntol = 1.0000000000000000e-10\n"));
        let mut again = Report::new();
        again.text("tool", "degree");
        again.float("tol", 1e-10);
        assert_eq!(again.hash_so_far(), h);
    }

    #[test]
    fn eigen_csv_pads_ragged_rows() {
        let rows = vec![(0.0, vec![-1.0, 2.0]), (1.0, vec![0.5])];
        let text = eigen_csv(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,lambda_1,lambda_2");
        assert_eq!(lines[2].matches(',').count(), 2);
        assert!(lines[2].ends_with(','));
    }

    #[test]
    fn hill_csv_accumulates_the_product() {
        let text = hill_csv(&[Complex64::new(2.0, 0.0), Complex64::new(-1.0, 0.0)]);
        let last = text.lines().last().unwrap();
        let cols: Vec<&str> = last.split(',').collect();
        let re_partial: f64 = cols[3].parse().unwrap();
        assert!((re_partial - 0.5 * 2.0).abs() < 1e-15);
    }
}
