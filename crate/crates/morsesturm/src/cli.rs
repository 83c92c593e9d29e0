//! Command-line front end: problem files in, key-value reports and CSV
//! dumps out.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 violated hypothesis
//! (inadmissible family, unsupported boundary preset, irregular crossing,
//! and the like), 3 numerical failure (refinement budgets, non-integer
//! windings, lost eigenvalues).  Stdout carries the machine-readable
//! report; with `--out DIR` the same text lands in `report.kv` next to a
//! prose `report.txt` and any requested CSV dumps.

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use std::path::PathBuf;

use crate::degree::{self, WindingConfig};
use crate::hilltrace;
use crate::linalg::{real_part, RMatrix};
use crate::probfile;
use crate::problem::{validate, BoundaryPreset, PerturbationFamily, ValidatedProblem};
use crate::propagator::{monodromy, IntegratorConfig, PropagatorError};
use crate::report::{boundary_csv, eigen_csv, fmt_f, hill_csv, Report};
use crate::spectralflow::{self, SpectralFlowError};
use crate::symplectic::{self, Orientation};

/// Relative discrepancy below which the Hill product check passes.
pub const HILL_PASS_TOL: f64 = 1e-3;
/// Relative error below which the trace-formula check passes.
pub const TRACE_PASS_TOL: f64 = 1e-6;
/// Relative error below which the pointwise Fredholm check passes.
pub const FREDHOLM_PASS_TOL: f64 = 2e-2;

#[derive(Parser)]
#[command(
    name = "morsesturm",
    version,
    about = "Spectral indices of self-adjoint Morse-Sturm boundary value problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Problem file
    pub file: PathBuf,
    /// Relative tolerance of the adaptive ODE integrator
    #[arg(long, default_value_t = 1e-10)]
    pub tol_ode: f64,
    /// Bracket width for locating real degeneracy instants
    #[arg(long, default_value_t = 1e-10)]
    pub tol_zero: f64,
    /// Sampling density: t-grids, scan grids, and boundary samples
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    /// Interior mesh size of the finite-difference discretization
    #[arg(long, default_value_t = 800)]
    pub fd_size: usize,
    /// Number of factors kept in truncated eigenvalue products
    #[arg(long, default_value_t = 2000)]
    pub cutoff: usize,
    /// Overrides the rectangle half height from the problem file
    #[arg(long)]
    pub height: Option<f64>,
    /// Subtracts delta times the identity from G before computing
    #[arg(long, default_value_t = 0.0)]
    pub delta_shift: f64,
    /// Caps the worker-thread count
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Writes boundary determinant samples to boundary.csv (needs --out)
    #[arg(long)]
    pub dump_boundary: bool,
    /// Writes eigenvalue trajectories to eigen.csv (needs --out)
    #[arg(long)]
    pub dump_eigen: bool,
    /// Output directory for report.txt, report.kv and CSV dumps
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrientationArg {
    Preserving,
    NonPreserving,
}

#[derive(Subcommand)]
pub enum Command {
    /// Winding of the boundary determinant over the parameter rectangle
    Degree(Common),
    /// Spectral flow by crossing forms and by eigenvalue tracking
    Sf(Common),
    /// Real-axis degeneracy instants with multiplicities
    ConjugatePoints(Common),
    /// Negative-eigenvalue counts of the endpoint operators
    Morse(Common),
    /// Determinant ratio against its truncated eigenvalue product
    Hill(Common),
    /// Two-variable determinant identity and its boundary winding
    Fredholm {
        #[command(flatten)]
        common: Common,
        /// Evaluation point, e.g. 0.5+0.5i
        #[arg(long, default_value = "0.5+0.5i")]
        z: String,
    },
    /// Green-kernel trace pair against log-derivatives of the determinant
    Trace {
        #[command(flatten)]
        common: Common,
        /// Comma-separated evaluation points off the real axis
        #[arg(long, value_delimiter = ',', default_value = "0.3+0.4i")]
        z: Vec<String>,
    },
    /// Maslov index of the family path against the boundary subspace
    Maslov(Common),
    /// Parity instability test with monodromy classification
    Stability {
        #[command(flatten)]
        common: Common,
        /// Orientation class of the underlying periodic orbit
        #[arg(long, value_enum, default_value_t = OrientationArg::Preserving)]
        orientation: OrientationArg,
    },
    /// Parses and validates a problem file
    Validate(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Degree(c)
            | Command::Sf(c)
            | Command::ConjugatePoints(c)
            | Command::Morse(c)
            | Command::Hill(c)
            | Command::Maslov(c)
            | Command::Validate(c) => c,
            Command::Fredholm { common, .. }
            | Command::Trace { common, .. }
            | Command::Stability { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Degree(_) => "degree",
            Command::Sf(_) => "sf",
            Command::ConjugatePoints(_) => "conjugate-points",
            Command::Morse(_) => "morse",
            Command::Hill(_) => "hill",
            Command::Fredholm { .. } => "fredholm",
            Command::Trace { .. } => "trace",
            Command::Maslov(_) => "maslov",
            Command::Stability { .. } => "stability",
            Command::Validate(_) => "validate",
        }
    }
}

/// A failed run: exit code plus the message printed to stderr.
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn hypothesis(name: &str, detail: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: format!("{name}: {detail}"),
    }
}

fn numerical(name: &str, detail: impl std::fmt::Display) -> Failure {
    Failure {
        code: 3,
        message: format!("{name}: {detail}"),
    }
}

fn from_prop(e: PropagatorError) -> Failure {
    match &e {
        PropagatorError::BadConfig(_) => usage(e.to_string()),
        PropagatorError::StepSizeUnderflow { .. } => numerical("StepSizeUnderflow", e),
        PropagatorError::SymplecticityLost { .. } => numerical("SymplecticityLost", e),
        PropagatorError::DegenerateFundamental { .. } => numerical("DegenerateFundamental", e),
        PropagatorError::StepBudgetExceeded => numerical("StepBudgetExceeded", e),
    }
}

fn from_degree(e: degree::DegreeError) -> Failure {
    use degree::DegreeError::*;
    match e {
        NotAdmissible { .. } => hypothesis("NotAdmissible", e),
        BoundaryZero { .. } => hypothesis("BoundaryZero", e),
        RefinementBudgetExceeded { .. } => numerical("RefinementBudgetExceeded", e),
        WindingNotInteger { .. } => numerical("WindingNotInteger", e),
        ClusterUnresolved { .. } => numerical("ClusterUnresolved", e),
        Propagator(p) => from_prop(p),
    }
}

fn from_sf(e: SpectralFlowError) -> Failure {
    use SpectralFlowError::*;
    match e {
        EmptyKernel { .. } => numerical("EmptyKernel", e),
        KernelGramSingular { .. } => numerical("KernelGramSingular", e),
        WindowTooSmall { .. } => numerical("WindowTooSmall", e),
        GridTooCoarse { .. } => numerical("GridTooCoarse", e),
        IrregularCrossing { .. } => hypothesis("IrregularCrossing", e),
        UnsupportedBoundary => hypothesis("UnsupportedBoundary", e),
        IndefiniteP { .. } => hypothesis("IndefiniteP", e),
        Degree(d) => from_degree(d),
        Propagator(p) => from_prop(p),
    }
}

fn from_hill(e: hilltrace::HillError) -> Failure {
    use hilltrace::HillError::*;
    match e {
        SingularRz { .. } => hypothesis("SingularRz", e),
        NotAdmissible { .. } => hypothesis("NotAdmissible", e),
        SingularG1h => hypothesis("SingularG1h", e),
        NonlinearFamily => hypothesis("NonlinearFamily", e),
        SpectralFlow(s) => from_sf(s),
        Degree(d) => from_degree(d),
        Propagator(p) => from_prop(p),
    }
}

fn from_symp(e: symplectic::SymplecticError) -> Failure {
    use symplectic::SymplecticError::*;
    match e {
        RankDeficientFrame { .. } => hypothesis("RankDeficientFrame", e),
        NotLagrangian { .. } => hypothesis("NotLagrangian", e),
        NotSymplectic { .. } => hypothesis("NotSymplectic", e),
        IrregularCrossing { .. } => hypothesis("IrregularCrossing", e),
        DegeneratePath => hypothesis("DegeneratePath", e),
        Propagator(p) => from_prop(p),
        SpectralFlow(s) => from_sf(s),
    }
}

fn preset_label(p: BoundaryPreset) -> &'static str {
    match p {
        BoundaryPreset::Dirichlet => "dirichlet",
        BoundaryPreset::Neumann => "neumann",
        BoundaryPreset::Periodic => "periodic",
        BoundaryPreset::General => "general",
    }
}

/// Parses "a", "bi", "a+bi", "a-bi" with an optional exponent on either
/// part.
pub fn parse_complex(text: &str) -> Result<Complex64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("`{text}` is not a complex number (try 0.3+0.4i)");
    if s.is_empty() {
        return Err(bad());
    }
    let parse_re = |p: &str| p.parse::<f64>().map_err(|_| bad());
    let parse_im = |p: &str| match p {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => p.parse::<f64>().map_err(|_| bad()),
    };
    if let Some(body) = s.strip_suffix('i') {
        // split at the last +/- that is not leading and not an exponent sign
        let split = body
            .char_indices()
            .rev()
            .filter(|(i, c)| {
                *i > 0
                    && (*c == '+' || *c == '-')
                    && !matches!(body.as_bytes()[i - 1], b'e' | b'E')
            })
            .map(|(i, _)| i)
            .next();
        match split {
            Some(i) => Ok(Complex64::new(
                parse_re(&body[..i])?,
                parse_im(&body[i..])?,
            )),
            None => Ok(Complex64::new(0.0, parse_im(body)?)),
        }
    } else {
        Ok(Complex64::new(parse_re(&s)?, 0.0))
    }
}

struct Run {
    vp: ValidatedProblem,
    icfg: IntegratorConfig,
    wcfg: WindingConfig,
    report: Report,
    human: String,
}

impl Run {
    fn note(&mut self, line: &str) {
        self.human.push_str(line);
        self.human.push('\n');
    }
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be positive, got {v}")))
    }
}

fn load(tool: &str, c: &Common) -> Result<Run, Failure> {
    positive("tol-ode", c.tol_ode)?;
    positive("tol-zero", c.tol_zero)?;
    if c.grid == 0 || c.fd_size < 4 || c.cutoff == 0 {
        return Err(usage("--grid, --cutoff must be >= 1 and --fd-size >= 4"));
    }
    if let Some(h) = c.height {
        positive("height", h)?;
    }
    if !c.delta_shift.is_finite() {
        return Err(usage("--delta-shift must be finite"));
    }
    if let Some(j) = c.jobs {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        // ignored when a pool already exists (library users, repeat calls)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    if (c.dump_boundary || c.dump_eigen) && c.out.is_none() {
        return Err(usage("--dump-boundary/--dump-eigen need --out DIR"));
    }

    let text = std::fs::read_to_string(&c.file)
        .map_err(|e| usage(format!("cannot read {}: {e}", c.file.display())))?;
    let mut prob = probfile::parse_problem(&text).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", c.file.display()),
    })?;
    if let Some(h) = c.height {
        prob.half_height = h;
    }
    if c.delta_shift != 0.0 {
        let shift = RMatrix::identity(prob.n, prob.n) * (-c.delta_shift);
        prob.g = prob.g.plus_constant(&shift);
    }
    let vp = validate(prob).map_err(|errs| {
        let list: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        Failure {
            code: 2,
            message: format!("invalid problem: {}", list.join("; ")),
        }
    })?;

    let icfg = IntegratorConfig {
        rtol: c.tol_ode,
        atol: c.tol_ode * 1e-2,
        ..IntegratorConfig::default()
    };
    let wcfg = WindingConfig {
        samples_per_edge: (c.grid / 4).max(8),
        ..WindingConfig::default()
    };

    let mut report = Report::new();
    report.text("tool", tool);
    report.uint("n", vp.n);
    report.text("boundary", preset_label(vp.bc.preset));
    report.float("half_height", vp.half_height);
    report.float("tol_ode", c.tol_ode);
    report.float("tol_zero", c.tol_zero);
    report.uint("grid", c.grid);
    report.uint("fd_size", c.fd_size);
    report.uint("cutoff", c.cutoff);
    report.float("delta_shift", c.delta_shift);
    let hash = report.hash_so_far();
    report.text("config_hash", &format!("{hash:016x}"));

    Ok(Run {
        vp,
        icfg,
        wcfg,
        report,
        human: String::new(),
    })
}

fn write_outputs(c: &Common, run: &Run, extra: &[(&str, String)]) -> Result<(), Failure> {
    let kv = run.report.render();
    print!("{kv}");
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
        let put = |name: &str, content: &str| -> Result<(), Failure> {
            std::fs::write(dir.join(name), content)
                .map_err(|e| usage(format!("cannot write {name}: {e}")))
        };
        put("report.kv", &kv)?;
        put("report.txt", &run.human)?;
        for (name, content) in extra {
            put(name, content)?;
        }
    }
    Ok(())
}

fn cmd_degree(c: &Common) -> Result<(), Failure> {
    let mut run = load("degree", c)?;
    let (iota, trace) =
        degree::winding_number(&run.vp, &run.icfg, &run.wcfg).map_err(from_degree)?;
    run.report.int("iota_PW", iota);
    run.report.float("total_turn", trace.total_turn);
    run.report.float("min_abs_rho", trace.min_abs_rho);
    run.report.float("max_abs_rho", trace.max_abs_rho);
    run.report.float("max_arg_step", trace.max_arg_step);
    run.report.uint("boundary_samples", trace.samples.len());
    run.note(&format!(
        "The boundary determinant winds {iota} times around the origin \
         along the rectangle boundary ({} samples, smallest modulus {:.3e}).",
        trace.samples.len(),
        trace.min_abs_rho
    ));
    let mut extra = Vec::new();
    if c.dump_boundary {
        extra.push(("boundary.csv", boundary_csv(&trace.samples)));
    }
    write_outputs(c, &run, &extra)
}

fn cmd_sf(c: &Common) -> Result<(), Failure> {
    let mut run = load("sf", c)?;
    let crossing =
        spectralflow::spectral_flow_crossing_method(&run.vp, &run.icfg).map_err(from_sf)?;
    let tracking = match spectralflow::spectral_flow_tracking(&run.vp, c.fd_size, c.grid) {
        Ok(t) => Some(t),
        Err(SpectralFlowError::UnsupportedBoundary) => None,
        Err(e) => return Err(from_sf(e)),
    };
    let (iota_pw, trace) =
        degree::winding_number(&run.vp, &run.icfg, &run.wcfg).map_err(from_degree)?;

    run.report.int("iota_SP_crossing", crossing.sf);
    run.report.uint("crossing_count", crossing.forms.len());
    for (i, f) in crossing.forms.iter().enumerate() {
        run.report.float(&format!("crossing_{i}_t0"), f.t0);
        run.report.uint(&format!("crossing_{i}_multiplicity"), f.gamma.nrows());
        run.report
            .int(&format!("crossing_{i}_signature"), f.signature());
    }
    for (i, w) in crossing.warnings.iter().enumerate() {
        run.report.text(&format!("warning_{i}"), w);
    }
    match &tracking {
        Some(t) => {
            run.report.int("iota_SP_tracking", t.sf);
            run.report.uint("m_minus_first", t.m_first);
            run.report.uint("m_minus_last", t.m_last);
            run.report.float("tracking_window", t.lambda);
        }
        None => run.report.text("iota_SP_tracking", "unsupported-boundary"),
    }
    run.report.int("iota_PW", iota_pw);
    let agree = crossing.sf == iota_pw && tracking.as_ref().is_none_or(|t| t.sf == iota_pw);
    run.report
        .text("main_theorem", if agree { "VERIFIED" } else { "FAILED" });
    run.note(&format!(
        "Spectral flow: {} by crossing forms, {} by eigenvalue tracking; \
         degree index {iota_pw}; equality {}.",
        crossing.sf,
        tracking
            .as_ref()
            .map_or("unavailable".to_string(), |t| t.sf.to_string()),
        if agree { "VERIFIED" } else { "FAILED" }
    ));

    let mut extra = Vec::new();
    if c.dump_boundary {
        extra.push(("boundary.csv", boundary_csv(&trace.samples)));
    }
    if c.dump_eigen {
        let window = spectralflow::default_window(&run.vp);
        let points = c.grid.min(512);
        let mut rows = Vec::with_capacity(points + 1);
        for i in 0..=points {
            let t = i as f64 / points as f64;
            let eigs = spectralflow::eigenvalues_in_window(&run.vp, t, c.fd_size, window)
                .map_err(from_sf)?;
            rows.push((t, eigs));
        }
        extra.push(("eigen.csv", eigen_csv(&rows)));
    }
    write_outputs(c, &run, &extra)?;
    if tracking.is_none() {
        return Err(hypothesis(
            "UnsupportedBoundary",
            "eigenvalue tracking needs a preset boundary condition; crossing method reported above",
        ));
    }
    Ok(())
}

fn cmd_conjugate_points(c: &Common) -> Result<(), Failure> {
    let mut run = load("conjugate-points", c)?;
    let (instants, warnings) =
        degree::conjugate_instants(&run.vp, &run.icfg, c.grid, 1e-3, c.tol_zero)
            .map_err(from_degree)?;
    run.report.uint("instant_count", instants.len());
    for (i, inst) in instants.iter().enumerate() {
        run.report.float(&format!("instant_{i}_t0"), inst.t0);
        run.report
            .uint(&format!("instant_{i}_multiplicity"), inst.multiplicity);
        run.report
            .float(&format!("instant_{i}_bracket_lo"), inst.bracket.0);
        run.report
            .float(&format!("instant_{i}_bracket_hi"), inst.bracket.1);
        run.report.text(
            &format!("instant_{i}_sign_change"),
            if inst.sign_change { "yes" } else { "no" },
        );
    }
    for (i, w) in warnings.iter().enumerate() {
        run.report.text(&format!("warning_{i}"), w);
    }
    run.note(&format!(
        "Found {} degeneracy instant(s) of the family on (0, 1).",
        instants.len()
    ));
    for inst in &instants {
        run.note(&format!(
            "  t0 = {:.12} with kernel dimension {}",
            inst.t0, inst.multiplicity
        ));
    }
    write_outputs(c, &run, &[])
}

fn cmd_morse(c: &Common) -> Result<(), Failure> {
    let mut run = load("morse", c)?;
    let m0 = spectralflow::morse_index(&run.vp, 0.0, c.fd_size).map_err(from_sf)?;
    let m1 = spectralflow::morse_index(&run.vp, 1.0, c.fd_size).map_err(from_sf)?;
    let (iota_pw, _) =
        degree::winding_number(&run.vp, &run.icfg, &run.wcfg).map_err(from_degree)?;
    let diff = m0 as i64 - m1 as i64;
    run.report.uint("m_minus_0", m0);
    run.report.uint("m_minus_1", m1);
    run.report.int("index_difference", diff);
    run.report.int("iota_PW", iota_pw);
    run.report.text(
        "corollary",
        if diff == iota_pw { "VERIFIED" } else { "FAILED" },
    );
    run.note(&format!(
        "Morse indices: {m0} at t = 0, {m1} at t = 1; difference {diff} \
         against degree index {iota_pw}."
    ));
    write_outputs(c, &run, &[])
}

fn cmd_hill(c: &Common) -> Result<(), Failure> {
    let mut run = load("hill", c)?;
    let rep = hilltrace::hill_check(&run.vp, c.cutoff, c.fd_size, &run.icfg).map_err(from_hill)?;
    run.report.complex("rho_0", rep.rho0);
    run.report.complex("rho_1", rep.rho1);
    run.report.complex("ratio", rep.ratio);
    run.report.complex("product", rep.product);
    run.report.float("tail_estimate", rep.tail);
    run.report.float("rel_discrepancy", rep.rel_discrepancy);
    run.report.uint("factors", rep.lambdas.len());
    run.report.float("pass_tol", HILL_PASS_TOL);
    let pass = rep.rel_discrepancy <= HILL_PASS_TOL;
    run.report.text("verdict", if pass { "PASS" } else { "FAIL" });
    run.note(&format!(
        "Determinant ratio {} vs truncated product over {} factors: \
         relative discrepancy {:.3e} ({}).",
        fmt_f(rep.ratio.re),
        rep.lambdas.len(),
        rep.rel_discrepancy,
        if pass { "PASS" } else { "FAIL" }
    ));
    let mut extra = Vec::new();
    if c.out.is_some() {
        extra.push(("lambdas.csv", hill_csv(&rep.lambdas)));
    }
    write_outputs(c, &run, &extra)
}

fn cmd_fredholm(c: &Common, z_text: &str) -> Result<(), Failure> {
    let mut run = load("fredholm", c)?;
    let z = parse_complex(z_text).map_err(usage)?;
    let rep = hilltrace::fredholm_identity_check(&run.vp, z, c.cutoff, c.fd_size, &run.icfg)
        .map_err(from_hill)?;
    run.report.complex("z", rep.z);
    run.report.complex("f", rep.f);
    run.report.complex("ratio", rep.ratio);
    run.report.float("rel_err", rep.rel_err);
    run.report.int("winding_f", rep.winding);
    run.report.int("iota_PW", rep.iota_pw);
    run.report.text(
        "winding_consistent",
        if rep.winding_consistent { "yes" } else { "no" },
    );
    run.report.float("pass_tol", FREDHOLM_PASS_TOL);
    let pass = rep.rel_err <= FREDHOLM_PASS_TOL && rep.winding_consistent;
    run.report.text("verdict", if pass { "PASS" } else { "FAIL" });
    run.note(&format!(
        "Two-variable determinant at z = {}: relative error {:.3e} against \
         the determinant ratio; boundary winding {} vs degree index {} ({}).",
        z_text,
        rep.rel_err,
        rep.winding,
        rep.iota_pw,
        if pass { "PASS" } else { "FAIL" }
    ));
    write_outputs(c, &run, &[])
}

fn cmd_trace(c: &Common, z_texts: &[String]) -> Result<(), Failure> {
    let mut run = load("trace", c)?;
    let mut all_pass = true;
    for (i, zt) in z_texts.iter().enumerate() {
        let z = parse_complex(zt).map_err(usage)?;
        if z.im == 0.0 {
            return Err(usage(format!("--z {zt} lies on the real axis")));
        }
        let chk =
            hilltrace::trace_formula_check(&run.vp, z, 1e-5, &run.icfg).map_err(from_hill)?;
        run.report.complex(&format!("z_{i}"), z);
        run.report.complex(&format!("theta_t_{i}"), chk.theta_t);
        run.report.complex(&format!("theta_s_{i}"), chk.theta_s);
        run.report.float(&format!("rel_t_{i}"), chk.rel_t);
        run.report.float(&format!("rel_s_{i}"), chk.rel_s);
        let pass = chk.rel_t <= TRACE_PASS_TOL && chk.rel_s <= TRACE_PASS_TOL;
        all_pass &= pass;
        run.report
            .text(&format!("point_{i}"), if pass { "PASS" } else { "FAIL" });
        run.note(&format!(
            "At z = {}: trace pair matches the log-derivative of the \
             determinant to {:.3e} (t) and {:.3e} (s).",
            zt, chk.rel_t, chk.rel_s
        ));
    }
    let contour = hilltrace::trace_contour_index(&run.vp, &run.icfg).map_err(from_hill)?;
    let (iota_pw, _) =
        degree::winding_number(&run.vp, &run.icfg, &run.wcfg).map_err(from_degree)?;
    let contour_err = (contour - Complex64::new(iota_pw as f64, 0.0)).norm();
    run.report.complex("contour_index", contour);
    run.report.int("iota_PW", iota_pw);
    run.report.float("contour_err", contour_err);
    run.report.float("pass_tol", TRACE_PASS_TOL);
    let pass = all_pass && contour_err <= TRACE_PASS_TOL;
    run.report.text("verdict", if pass { "PASS" } else { "FAIL" });
    run.note(&format!(
        "Contour integral of the trace pair: {} + {}i against integer {} \
         (error {:.3e}).",
        fmt_f(contour.re),
        fmt_f(contour.im),
        iota_pw,
        contour_err
    ));
    write_outputs(c, &run, &[])
}

fn cmd_maslov(c: &Common) -> Result<(), Failure> {
    let mut run = load("maslov", c)?;
    let samples = c.grid.clamp(33, 513) | 1;
    let rep = symplectic::spectral_flow_formula_check(&run.vp, samples, &run.icfg)
        .map_err(from_symp)?;
    run.report.int("iota_CLM", rep.iota_clm);
    run.report.int("iota_SP", rep.iota_sp);
    run.report.uint("path_samples", samples);
    run.report.text(
        "endpoint_crossing",
        if rep.endpoint_crossing { "yes" } else { "no" },
    );
    run.report.text(
        "flow_formula",
        if rep.consistent { "VERIFIED" } else { "FAILED" },
    );
    run.note(&format!(
        "Maslov index {} against spectral flow {}: identity {}.",
        rep.iota_clm,
        rep.iota_sp,
        if rep.consistent { "VERIFIED" } else { "FAILED" }
    ));
    write_outputs(c, &run, &[])
}

fn cmd_stability(c: &Common, orientation: OrientationArg) -> Result<(), Failure> {
    let mut run = load("stability", c)?;
    let (iota_pw, _) =
        degree::winding_number(&run.vp, &run.icfg, &run.wcfg).map_err(from_degree)?;
    let orient = match orientation {
        OrientationArg::Preserving => Orientation::Preserving,
        OrientationArg::NonPreserving => Orientation::NonPreserving,
    };
    let verdict = symplectic::instability_verdict(iota_pw, run.vp.n, orient);
    run.report.int("iota_PW", iota_pw);
    run.report.uint("n", run.vp.n);
    run.report.text(
        "orientation",
        match orient {
            Orientation::Preserving => "preserving",
            Orientation::NonPreserving => "non-preserving",
        },
    );
    run.report.text(
        "parity",
        if (iota_pw + run.vp.n as i64).rem_euclid(2) == 1 {
            "odd"
        } else {
            "even"
        },
    );
    run.report.text("verdict", &verdict.to_string());
    run.note(&format!(
        "Degree index {iota_pw} with n = {}: parity verdict {verdict}.",
        run.vp.n
    ));

    if run.vp.bc.preset == BoundaryPreset::Periodic {
        let m1 = monodromy(&run.vp, Complex64::new(1.0, 0.0), &run.icfg).map_err(from_prop)?;
        let analysis = symplectic::analyze_monodromy(&real_part(&m1)).map_err(from_symp)?;
        run.report
            .text("monodromy_component", &analysis.component.to_string());
        run.report
            .text("monodromy_stability", &analysis.stability.verdict.to_string());
        run.report
            .float("monodromy_modulus_defect", analysis.stability.modulus_defect);
        run.note(&format!(
            "Endpoint monodromy lies in {} and is {} by its spectrum.",
            analysis.component, analysis.stability.verdict
        ));
    }
    write_outputs(c, &run, &[])
}

fn cmd_validate(c: &Common) -> Result<(), Failure> {
    let mut run = load("validate", c)?;
    let family = match &run.vp.family {
        PerturbationFamily::Linear { .. } => "linear",
        PerturbationFamily::Grid { .. } => "grid",
    };
    run.report.text("family", family);
    run.report.text("validation", "OK");
    run.note(&format!(
        "Problem file is valid: n = {}, {} boundary, {} family.",
        run.vp.n,
        preset_label(run.vp.bc.preset),
        family
    ));
    write_outputs(c, &run, &[])
}

fn dispatch(cmd: &Command) -> Result<(), Failure> {
    match cmd {
        Command::Degree(c) => cmd_degree(c),
        Command::Sf(c) => cmd_sf(c),
        Command::ConjugatePoints(c) => cmd_conjugate_points(c),
        Command::Morse(c) => cmd_morse(c),
        Command::Hill(c) => cmd_hill(c),
        Command::Fredholm { common, z } => cmd_fredholm(common, z),
        Command::Trace { common, z } => cmd_trace(common, z),
        Command::Maslov(c) => cmd_maslov(c),
        Command::Stability {
            common,
            orientation,
        } => cmd_stability(common, *orientation),
        Command::Validate(c) => cmd_validate(c),
    }
}

/// Runs the CLI on the given argument vector and returns the process exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    let _ = cli.command.common();
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error [{}]: {}", cli.command.name(), f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_arguments_parse_in_all_spellings() {
        let cases = [
            ("0.5", Complex64::new(0.5, 0.0)),
            ("-2", Complex64::new(-2.0, 0.0)),
            ("0.3+0.4i", Complex64::new(0.3, 0.4)),
            ("0.3-0.4i", Complex64::new(0.3, -0.4)),
            ("0.4i", Complex64::new(0.0, 0.4)),
            ("-i", Complex64::new(0.0, -1.0)),
            ("i", Complex64::new(0.0, 1.0)),
            ("1e-2+2e-3i", Complex64::new(0.01, 0.002)),
            ("1E2-3i", Complex64::new(100.0, -3.0)),
            (" 0.5 + 0.5i ", Complex64::new(0.5, 0.5)),
        ];
        for (text, want) in cases {
            let got = parse_complex(text).unwrap();
            assert_eq!(got, want, "{text}");
        }
        for bad in ["", "abc", "1+2", "2ii", "--3"] {
            assert!(parse_complex(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn bad_flag_values_map_to_usage_failures() {
        let c = Common {
            file: PathBuf::from("/nonexistent.prob"),
            tol_ode: -1.0,
            tol_zero: 1e-10,
            grid: 256,
            fd_size: 800,
            cutoff: 2000,
            height: None,
            delta_shift: 0.0,
            jobs: None,
            dump_boundary: false,
            dump_eigen: false,
            out: None,
        };
        let f = load("degree", &c).err().expect("load should fail");
        assert_eq!(f.code, 1);
        assert!(f.message.contains("tol-ode"));
    }

    #[test]
    fn missing_file_is_a_usage_failure() {
        let c = Common {
            file: PathBuf::from("/no/such/file.prob"),
            tol_ode: 1e-10,
            tol_zero: 1e-10,
            grid: 256,
            fd_size: 800,
            cutoff: 2000,
            height: None,
            delta_shift: 0.0,
            jobs: None,
            dump_boundary: false,
            dump_eigen: false,
            out: None,
        };
        let f = load("degree", &c).err().expect("load should fail");
        assert_eq!(f.code, 1);
        assert!(f.message.contains("cannot read"));
    }
}
