//! Plain-text problem files.
//!
//! The format is INI-like: `[section]` headers followed by `key = value`
//! lines, with `#` and `;` starting comments.  Matrices are written as
//! whitespace-separated entries in row-major order.  Sections:
//!
//! ```text
//! [problem]      n = 1            dimension (required)
//!                height = 1.0     rectangle half height (optional)
//! [P] [Q] [G]    coefficient fields (optional; defaults Id, 0, 0)
//! [perturbation] mode = linear    slope field keys inline
//!                mode = grid      t_nodes = 0 0.5 1, snapshots in
//!                                 [perturbation.t0], [perturbation.t1], ...
//! [boundary]     preset = dirichlet | neumann | periodic | general
//!                r0 = ..., r1 = ...   (2n x 2n, general only)
//! ```
//!
//! A coefficient field section carries `type = polynomial` with keys
//! `deg0, deg1, ...`, or `type = fourier` with `const`, `cos1, sin1, ...`
//! (harmonics of period one), or `type = sampled` with `order = 1 | 3`
//! and uniformly spaced node values `v0 ... v{m-1}`.  Unknown sections
//! and keys are rejected with their line number.

use crate::linalg::RMatrix;
use crate::problem::{
    BoundaryCondition, CoefficientField, MorseSturmProblem, PerturbationFamily,
};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Debug, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

/// `key -> (value, line)` for one section, plus the header line.
struct Section {
    line: usize,
    entries: BTreeMap<String, (String, usize)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn finish(self, name: &str) -> Result<(), ParseError> {
        if let Some((key, (_, line))) = self.entries.into_iter().next() {
            return Err(err(line, format!("unknown key `{key}` in [{name}]")));
        }
        Ok(())
    }
}

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>, ParseError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let stripped = match raw.find(['#', ';']) {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let t = stripped.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(inner) = t.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| err(line, "unterminated section header"))?
                .trim()
                .to_string();
            if name.is_empty() {
                return Err(err(line, "empty section name"));
            }
            if sections.contains_key(&name) {
                return Err(err(line, format!("duplicate section [{name}]")));
            }
            sections.insert(
                name.clone(),
                Section {
                    line,
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| err(line, "expected `key = value`"))?;
        let key = k.trim().to_string();
        let value = v.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(err(line, "empty key or value"));
        }
        let name = current
            .as_ref()
            .ok_or_else(|| err(line, "entry before any [section] header"))?;
        let section = sections.get_mut(name).unwrap();
        if section.entries.contains_key(&key) {
            return Err(err(line, format!("duplicate key `{key}` in [{name}]")));
        }
        section.entries.insert(key, (value, line));
    }
    Ok(sections)
}

fn parse_floats(value: &str, line: usize) -> Result<Vec<f64>, ParseError> {
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| err(line, format!("`{tok}` is not a number")))
        })
        .collect()
}

fn parse_matrix(value: &str, n: usize, line: usize) -> Result<RMatrix, ParseError> {
    let vals = parse_floats(value, line)?;
    if vals.len() != n * n {
        return Err(err(
            line,
            format!("expected {} entries for a {n}x{n} matrix, found {}", n * n, vals.len()),
        ));
    }
    Ok(RMatrix::from_row_slice(n, n, &vals))
}

/// Largest accepted polynomial degree, Fourier harmonic, or sample count.
const MAX_TERMS: usize = 4096;

/// Collects `prefix0, prefix1, ...` keys into a dense vector of matrices,
/// absent indices filled with zeros.
fn indexed_matrices(
    section: &mut Section,
    prefix: &str,
    start: usize,
    n: usize,
    header_line: usize,
    required_contiguous: bool,
) -> Result<Vec<RMatrix>, ParseError> {
    let keys: Vec<String> = section
        .entries
        .keys()
        .filter(|k| {
            k.strip_prefix(prefix)
                .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
        })
        .cloned()
        .collect();
    let mut found: BTreeMap<usize, RMatrix> = BTreeMap::new();
    for key in keys {
        let (value, line) = section.take(&key).unwrap();
        let idx: usize = key[prefix.len()..]
            .parse()
            .map_err(|_| err(line, format!("bad index in `{key}`")))?;
        if idx < start || idx > MAX_TERMS {
            return Err(err(line, format!("index out of range in `{key}`")));
        }
        found.insert(idx, parse_matrix(&value, n, line)?);
    }
    if found.is_empty() {
        return Ok(Vec::new());
    }
    let top = *found.keys().next_back().unwrap();
    let mut out = Vec::with_capacity(top + 1 - start);
    for i in start..=top {
        match found.remove(&i) {
            Some(m) => out.push(m),
            None if required_contiguous => {
                return Err(err(
                    header_line,
                    format!("missing `{prefix}{i}` in an indexed list ending at {prefix}{top}"),
                ));
            }
            None => out.push(RMatrix::zeros(n, n)),
        }
    }
    Ok(out)
}

fn parse_field(mut section: Section, name: &str, n: usize) -> Result<CoefficientField, ParseError> {
    let header = section.line;
    let (kind, kind_line) = section
        .take("type")
        .ok_or_else(|| err(header, format!("[{name}] needs a `type` key")))?;
    let field = match kind.as_str() {
        "polynomial" => {
            let coeffs = indexed_matrices(&mut section, "deg", 0, n, header, false)?;
            if coeffs.is_empty() {
                return Err(err(header, format!("[{name}] has no `deg0` coefficient")));
            }
            CoefficientField::Polynomial { coeffs }
        }
        "fourier" => {
            let a0 = match section.take("const") {
                Some((v, line)) => parse_matrix(&v, n, line)?,
                None => RMatrix::zeros(n, n),
            };
            let cos = indexed_matrices(&mut section, "cos", 1, n, header, false)?;
            let sin = indexed_matrices(&mut section, "sin", 1, n, header, false)?;
            CoefficientField::Fourier { a0, cos, sin }
        }
        "sampled" => {
            let order = match section.take("order") {
                Some((v, line)) => v
                    .parse::<usize>()
                    .ok()
                    .filter(|o| *o == 1 || *o == 3)
                    .ok_or_else(|| err(line, "interpolation `order` must be 1 or 3"))?,
                None => 1,
            };
            let values = indexed_matrices(&mut section, "v", 0, n, header, true)?;
            let min = if order == 3 { 4 } else { 2 };
            if values.len() < min {
                return Err(err(
                    header,
                    format!("[{name}] needs at least {min} sample values for order {order}"),
                ));
            }
            CoefficientField::Sampled { values, order }
        }
        other => {
            return Err(err(
                kind_line,
                format!("unknown field type `{other}` (expected polynomial, fourier, sampled)"),
            ));
        }
    };
    section.finish(name)?;
    Ok(field)
}

/// Parses a problem file into an unvalidated problem description.
pub fn parse_problem(text: &str) -> Result<MorseSturmProblem, ParseError> {
    let mut sections = split_sections(text)?;

    let mut prob_sec = sections
        .remove("problem")
        .ok_or_else(|| err(0, "missing [problem] section"))?;
    let (n_str, n_line) = prob_sec
        .take("n")
        .ok_or_else(|| err(prob_sec.line, "[problem] needs `n`"))?;
    let n: usize = n_str
        .parse()
        .ok()
        .filter(|&v| v >= 1 && v <= 64)
        .ok_or_else(|| err(n_line, "`n` must be an integer in 1..=64"))?;
    let half_height = match prob_sec.take("height") {
        Some((v, line)) => v
            .parse::<f64>()
            .ok()
            .filter(|h| h.is_finite() && *h > 0.0)
            .ok_or_else(|| err(line, "`height` must be a positive number"))?,
        None => 1.0,
    };
    prob_sec.finish("problem")?;

    let p = match sections.remove("P") {
        Some(s) => parse_field(s, "P", n)?,
        None => CoefficientField::constant(RMatrix::identity(n, n)),
    };
    let q = match sections.remove("Q") {
        Some(s) => parse_field(s, "Q", n)?,
        None => CoefficientField::zero(n),
    };
    let g = match sections.remove("G") {
        Some(s) => parse_field(s, "G", n)?,
        None => CoefficientField::zero(n),
    };

    let mut pert = sections
        .remove("perturbation")
        .ok_or_else(|| err(0, "missing [perturbation] section"))?;
    let (mode, mode_line) = pert
        .take("mode")
        .ok_or_else(|| err(pert.line, "[perturbation] needs `mode`"))?;
    let family = match mode.as_str() {
        "linear" => {
            let c1 = parse_field(pert, "perturbation", n)?;
            PerturbationFamily::Linear { c1 }
        }
        "grid" => {
            let (nodes_str, nodes_line) = pert
                .take("t_nodes")
                .ok_or_else(|| err(pert.line, "grid mode needs `t_nodes`"))?;
            let t_nodes = parse_floats(&nodes_str, nodes_line)?;
            if t_nodes.len() < 2 {
                return Err(err(nodes_line, "`t_nodes` needs at least two values"));
            }
            pert.finish("perturbation")?;
            let mut snapshots = Vec::with_capacity(t_nodes.len());
            for k in 0..t_nodes.len() {
                let name = format!("perturbation.t{k}");
                let sec = sections
                    .remove(&name)
                    .ok_or_else(|| err(0, format!("missing [{name}] snapshot section")))?;
                snapshots.push(parse_field(sec, &name, n)?);
            }
            PerturbationFamily::Grid { t_nodes, snapshots }
        }
        other => {
            return Err(err(
                mode_line,
                format!("unknown perturbation mode `{other}` (expected linear or grid)"),
            ));
        }
    };

    let mut bc_sec = sections
        .remove("boundary")
        .ok_or_else(|| err(0, "missing [boundary] section"))?;
    let (preset, preset_line) = bc_sec
        .take("preset")
        .ok_or_else(|| err(bc_sec.line, "[boundary] needs `preset`"))?;
    let bc = match preset.as_str() {
        "dirichlet" => BoundaryCondition::dirichlet(n),
        "neumann" => BoundaryCondition::neumann(n),
        "periodic" => BoundaryCondition::periodic(n),
        "general" => {
            let (r0_str, r0_line) = bc_sec
                .take("r0")
                .ok_or_else(|| err(bc_sec.line, "general boundary needs `r0`"))?;
            let (r1_str, r1_line) = bc_sec
                .take("r1")
                .ok_or_else(|| err(bc_sec.line, "general boundary needs `r1`"))?;
            let r0 = parse_matrix(&r0_str, 2 * n, r0_line)?;
            let r1 = parse_matrix(&r1_str, 2 * n, r1_line)?;
            BoundaryCondition::general(r0, r1)
        }
        other => {
            return Err(err(
                preset_line,
                format!(
                    "unknown boundary preset `{other}` (expected dirichlet, neumann, periodic, general)"
                ),
            ));
        }
    };
    bc_sec.finish("boundary")?;

    if let Some((name, sec)) = sections.into_iter().next() {
        return Err(err(sec.line, format!("unknown section [{name}]")));
    }

    Ok(MorseSturmProblem {
        n,
        p,
        q,
        g,
        family,
        bc,
        half_height,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{validate, BoundaryPreset};

    const RUNNING: &str = "
# the running scalar family
[problem]
n = 1

[G]
type = polynomial
deg0 = 0.0

[perturbation]
mode = linear
type = polynomial
deg0 = -15.0

[boundary]
preset = dirichlet
";

    #[test]
    fn parses_the_running_example() {
        let prob = parse_problem(RUNNING).unwrap();
        assert_eq!(prob.n, 1);
        assert_eq!(prob.half_height, 1.0);
        assert_eq!(prob.bc.preset, BoundaryPreset::Dirichlet);
        assert!((prob.family.eval(0.5, 0.3)[(0, 0)] + 7.5).abs() < 1e-15);
        assert!((prob.p.eval(0.7)[(0, 0)] - 1.0).abs() < 1e-15);
        validate(prob).unwrap();
    }

    #[test]
    fn parses_every_field_representation() {
        let text = "
[problem]
n = 2
height = 0.5

[P]
type = fourier
const = 2 0 0 2
cos1 = 0.1 0 0 0.1

[Q]
type = polynomial
deg0 = 0 0.2 -0.2 0
deg2 = 0 0.1 -0.1 0

[G]
type = sampled
order = 3
v0 = 1 0 0 1
v1 = 2 0 0 2
v2 = 3 0 0 3
v3 = 4 0 0 4

[perturbation]
mode = linear
type = polynomial
deg0 = -1 0 0 -2

[boundary]
preset = neumann
";
        let prob = parse_problem(text).unwrap();
        assert_eq!(prob.n, 2);
        assert_eq!(prob.half_height, 0.5);
        let p0 = prob.p.eval(0.0);
        assert!((p0[(0, 0)] - 2.1).abs() < 1e-15);
        // skipped deg1 is zero-filled
        let q = prob.q.eval(1.0);
        assert!((q[(0, 1)] - 0.3).abs() < 1e-15);
        let g = prob.g.eval(1.0);
        assert!((g[(0, 0)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn parses_a_grid_family() {
        let text = "
[problem]
n = 1

[perturbation]
mode = grid
t_nodes = 0 0.5 1

[perturbation.t0]
type = polynomial
deg0 = 0

[perturbation.t1]
type = polynomial
deg0 = 2

[perturbation.t2]
type = polynomial
deg0 = -1

[boundary]
preset = periodic
";
        let prob = parse_problem(text).unwrap();
        assert!((prob.family.eval(0.25, 0.0)[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((prob.family.eval(0.75, 0.0)[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn parses_a_general_boundary_pair() {
        let text = "
[problem]
n = 1

[perturbation]
mode = linear
type = polynomial
deg0 = -15

[boundary]
preset = general
r0 = 0 1 0 0
r1 = 0 0 0 1
";
        let prob = parse_problem(text).unwrap();
        assert_eq!(prob.bc.preset, BoundaryPreset::General);
        assert!((prob.bc.r0[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((prob.bc.r1[(1, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_malformed_input_with_line_numbers() {
        let cases: &[(&str, usize, &str)] = &[
            ("[problem]\nn = 1\nbogus = 2\n", 3, "unknown key"),
            ("[problem]\nn = one\n", 2, "must be an integer"),
            ("x = 1\n", 1, "before any"),
            ("[problem]\nn = 1\n[problem]\n", 3, "duplicate section"),
            ("[problem]\nn = 1\nn = 2\n", 3, "duplicate key"),
            ("[problem\nn = 1\n", 1, "unterminated"),
            (
                "[problem]\nn = 1\n[perturbation]\nmode = nope\n",
                4,
                "unknown perturbation mode",
            ),
            (
                "[problem]\nn = 2\n[G]\ntype = polynomial\ndeg0 = 1 2 3\n",
                5,
                "expected 4 entries",
            ),
            (
                "[problem]\nn = 1\n[G]\ntype = sampled\norder = 2\nv0 = 1\nv1 = 1\n",
                5,
                "must be 1 or 3",
            ),
        ];
        for (text, line, frag) in cases {
            let e = parse_problem(text).unwrap_err();
            assert_eq!(e.line, *line, "wrong line for {frag:?}: {e}");
            assert!(e.message.contains(frag), "message {e} missing {frag:?}");
        }
    }

    #[test]
    fn rejects_missing_sections_and_snapshots() {
        let e = parse_problem("[problem]\nn = 1\n").unwrap_err();
        assert!(e.message.contains("missing [perturbation]"));
        let text = "
[problem]
n = 1
[perturbation]
mode = grid
t_nodes = 0 1
[perturbation.t0]
type = polynomial
deg0 = 0
[boundary]
preset = dirichlet
";
        let e = parse_problem(text).unwrap_err();
        assert!(e.message.contains("perturbation.t1"));
    }

    #[test]
    fn rejects_boundary_matrices_outside_general_mode() {
        let text = "
[problem]
n = 1
[perturbation]
mode = linear
type = polynomial
deg0 = -1
[boundary]
preset = dirichlet
r0 = 0 1 0 0
";
        let e = parse_problem(text).unwrap_err();
        assert!(e.message.contains("unknown key `r0`"), "{e}");
    }
}
