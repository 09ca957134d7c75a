//! One function per subcommand.

use equilib::certificate::{
    certify_extremal_gap, check_internal_force_monotonicity, detect_periodic_tail, gap_ratio_report, Certificate,
};
use equilib::diagnostics::{
    blaschke_partial_sum, blaschke_table, eval_difference_field, reconstruct_left_tail, ReconstructionProblem,
};
use equilib::solver::{
    extend_right, probe_extensions, solve_circle_equilibrium, solve_pinned_segment, solve_zero_centered, sweep_relax,
    CircleInit, Direction, ZeroCenteredProblem,
};
use equilib::{
    circle_residual_report, residual_report, Configuration, EquilibError, LineConfig, ResidualReport, Side, TailModel,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::Table;
use crate::problem::{Problem, Task, ValidationError};

/// Tolerance for residual reports attached to results.
const REPORT_TOL: f64 = 1e-14;

#[derive(Debug, Default)]
pub struct Outcome {
    pub output: Value,
    pub residual_report: Option<ResidualReport>,
    pub iterations: Option<usize>,
    pub table: Option<Table>,
    pub plot: Option<Configuration>,
    /// Human-readable text for stderr.
    pub note: Option<String>,
}

#[derive(Debug)]
pub enum TaskError {
    Invalid(ValidationError),
    /// The solver ran but did not deliver.
    Failed(EquilibError),
}

impl From<ValidationError> for TaskError {
    fn from(e: ValidationError) -> Self {
        TaskError::Invalid(e)
    }
}

impl From<EquilibError> for TaskError {
    fn from(e: EquilibError) -> Self {
        match e {
            EquilibError::NoConvergence { .. } | EquilibError::InfeasibleBracket(_) | EquilibError::Postcondition(_) => {
                TaskError::Failed(e)
            }
            other => TaskError::Invalid(other.into()),
        }
    }
}

type TResult<T> = Result<T, TaskError>;

fn json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result types serialize")
}

fn report_for(config: &Configuration, p: &Problem) -> TResult<ResidualReport> {
    let law = p.law()?;
    Ok(match config {
        Configuration::Line(c) => residual_report(c, law, REPORT_TOL)?,
        Configuration::Circle(c) => circle_residual_report(c, law)?,
    })
}

fn residual_table(r: &ResidualReport) -> Table {
    let mut t = Table::new(&["index", "F_minus", "F_plus", "net", "error_bound"]);
    for p in &r.particles {
        t.push(vec![p.index as f64, p.f_minus, p.f_plus, p.net, p.error_bound]);
    }
    t
}

fn certificate_outcome(cert: Certificate, report: Option<ResidualReport>) -> Outcome {
    let mut t = Table::new(&["term", "lhs", "rhs", "margin", "error", "padding"]);
    for e in &cert.evidence {
        t.push(vec![e.term as f64, e.lhs, e.rhs, e.margin, e.error, if e.padding { 1.0 } else { 0.0 }]);
    }
    Outcome {
        output: json(&cert),
        residual_report: report,
        table: Some(t),
        note: Some(cert.to_string()),
        ..Default::default()
    }
}

pub fn run(p: &Problem) -> TResult<Outcome> {
    match p.task {
        Task::SolveCircle => solve_circle(p),
        Task::SolveSegment => solve_segment(p),
        Task::Relax => relax(p),
        Task::ZeroCentered => zero_centered(p),
        Task::Extend => extend(p),
        Task::CertifyGap => certify_gap(p),
        Task::CheckMonotone => check_monotone(p),
        Task::GapRatio => gap_ratio(p),
        Task::DetectPeriod => detect_period(p),
        Task::Residuals => residuals(p),
        Task::DiffField => diff_field(p),
        Task::Blaschke => blaschke(p),
        Task::Reconstruct => reconstruct(p),
    }
}

fn solve_circle(p: &Problem) -> TResult<Outcome> {
    let n: usize = p.required("n")?;
    let init = match &p.config {
        Some(Configuration::Circle(c)) => CircleInit::Given(c.clone()),
        Some(Configuration::Line(_)) => return Err(ValidationError::schema("config: solve-circle takes a circle").into()),
        None => CircleInit::Random,
    };
    let s = solve_circle_equilibrium(n, p.law()?, &init, &p.options)?;
    let config = Configuration::Circle(s.config.clone());
    let r = report_for(&config, p)?;
    let mut t = Table::new(&["index", "angle", "net"]);
    for (i, &a) in s.config.angles.iter().enumerate() {
        t.push(vec![i as f64, a, r.particles[i].net]);
    }
    Ok(Outcome {
        output: json(&s),
        residual_report: Some(r),
        iterations: Some(s.iterations),
        table: Some(t),
        plot: Some(config),
        note: None,
    })
}

fn solve_segment(p: &Problem) -> TResult<Outcome> {
    let left: Vec<f64> = p.required("fixed_left")?;
    let right: Vec<f64> = p.required("fixed_right")?;
    let n: usize = p.required("n_interior")?;
    let law = p.law()?;
    let s = solve_pinned_segment(&left, &right, n, law, &p.options)?;
    let mut x = left.clone();
    x.sort_by(f64::total_cmp);
    x.extend(&s.interior);
    let mut r_sorted = right.clone();
    r_sorted.sort_by(f64::total_cmp);
    x.extend(&r_sorted);
    let config = LineConfig::finite(x).map_err(TaskError::from)?;
    let r = residual_report(&config, law, REPORT_TOL)?;
    let mut t = Table::new(&["step", "energy"]);
    for (k, &e) in s.energy_trace.iter().enumerate() {
        t.push(vec![k as f64, e]);
    }
    let output = json!({
        "interior": s.interior,
        "sweeps": s.sweeps,
        "max_residual": s.max_residual,
        "energy_initial": s.energy_trace.first(),
        "energy_final": s.energy_trace.last(),
        "energy_updates": s.energy_trace.len().saturating_sub(1),
    });
    Ok(Outcome {
        output,
        residual_report: Some(r),
        iterations: Some(s.sweeps),
        table: Some(t),
        plot: Some(config.into()),
        note: None,
    })
}

fn relax(p: &Problem) -> TResult<Outcome> {
    let mut c = p.line()?.clone();
    let law = p.law()?;
    let fixed: Vec<usize> = p.param("fixed")?.unwrap_or_else(|| vec![0, c.len().saturating_sub(1)]);
    let direction: Direction = p.param("direction")?.unwrap_or(Direction::LeftToRight);
    let sweeps: usize = p.param("sweeps")?.unwrap_or(1);
    let mut t = Table::new(&["sweep", "index", "position", "displacement"]);
    let mut stats = Vec::with_capacity(sweeps);
    for k in 0..sweeps {
        let (next, s) = sweep_relax(&c, &fixed, law, direction)?;
        for (i, (&x, &d)) in next.window.iter().zip(&s.displacements).enumerate() {
            t.push(vec![(k + 1) as f64, i as f64, x, d]);
        }
        stats.push(json!({"max_displacement": s.max_displacement, "flagged": s.flagged}));
        c = next;
    }
    let r = residual_report(&c, law, REPORT_TOL)?;
    Ok(Outcome {
        output: json!({"config": c, "sweeps": stats}),
        residual_report: Some(r),
        iterations: Some(sweeps),
        table: Some(t),
        plot: Some(c.into()),
        note: None,
    })
}

fn zero_centered(p: &Problem) -> TResult<Outcome> {
    let problem = ZeroCenteredProblem {
        a: p.required("a")?,
        b: p.required("b")?,
        n: p.required("n")?,
        law: p.law()?.clone(),
    };
    let s = solve_zero_centered(&problem, &p.options)?;
    let r = residual_report(&s.config, &problem.law, REPORT_TOL)?;
    let n = problem.n as f64;
    let mut t = Table::new(&["index", "position", "net"]);
    for (i, &x) in s.config.window.iter().enumerate() {
        t.push(vec![i as f64 - n, x, r.particles[i].net]);
    }
    Ok(Outcome {
        output: json(&s),
        residual_report: Some(r),
        iterations: Some(s.outer_iterations),
        table: Some(t),
        plot: Some(s.config.into()),
        note: None,
    })
}

#[derive(serde::Deserialize)]
struct ProbeParams {
    starts: usize,
    #[serde(default = "default_radius")]
    radius: f64,
}

fn default_radius() -> f64 {
    1e-3
}

fn extend(p: &Problem) -> TResult<Outcome> {
    let s = p.line()?;
    let law = p.law()?;
    let x0: f64 = p.required("x0")?;
    let ext = extend_right(s, x0, law, &p.options)?;
    let probe = match p.param::<ProbeParams>("probe")? {
        Some(pp) => Some(probe_extensions(s, x0, law, pp.starts, pp.radius, &p.options)?),
        None => None,
    };
    let mut window = s.window.clone();
    window.extend(&ext.positions);
    let n = ext.positions.len() - 1;
    let right = TailModel::Arithmetic {
        first: ext.positions[n] + ext.tail_gap,
        gap: ext.tail_gap,
    };
    let full = LineConfig::with_bounds(window, s.left_tail.clone(), right, None, None)?;
    let r = residual_report(&full, law, REPORT_TOL)?;
    let mut t = Table::new(&["index", "position", "gap"]);
    for (i, &x) in ext.positions.iter().enumerate() {
        let gap = if i == 0 { x0 - s.window[s.len() - 1] } else { x - ext.positions[i - 1] };
        t.push(vec![i as f64, x, gap]);
    }
    Ok(Outcome {
        output: json!({"extension": ext, "gaps": ext.gaps(), "probe": probe}),
        residual_report: Some(r),
        iterations: Some(ext.levels),
        table: Some(t),
        plot: Some(full.into()),
        note: None,
    })
}

/// First strict extremal gap, maximum preferred.
fn default_gap_index(config: &Configuration) -> usize {
    let ext = match config {
        Configuration::Line(c) => c.extremal_gaps(),
        Configuration::Circle(c) => Some(c.extremal_gaps()),
    };
    ext.and_then(|e| {
        if e.max_strict {
            e.max_indices.first().copied()
        } else if e.min_strict {
            e.min_indices.first().copied()
        } else {
            None
        }
    })
    .unwrap_or(0)
}

fn certify_gap(p: &Problem) -> TResult<Outcome> {
    let config = p.config.as_ref().ok_or_else(|| ValidationError::schema("config: required"))?;
    let gi = match p.param::<usize>("gap_index")? {
        Some(i) => i,
        None => default_gap_index(config),
    };
    let cert = certify_extremal_gap(config, p.law()?, gi)?;
    let r = report_for(config, p)?;
    let mut out = certificate_outcome(cert, Some(r));
    out.plot = Some(config.clone());
    Ok(out)
}

fn check_monotone(p: &Problem) -> TResult<Outcome> {
    let c = p.line()?;
    let start: usize = p.param("start")?.unwrap_or(0);
    let end: usize = p.param("end")?.unwrap_or(c.len());
    let tol: f64 = p.param("tol")?.unwrap_or(0.0);
    if start > end {
        return Err(ValidationError::schema("params.start: must not exceed params.end").into());
    }
    let cert = check_internal_force_monotonicity(c, p.law()?, start..end, tol)?;
    Ok(certificate_outcome(cert, None))
}

fn gap_ratio(p: &Problem) -> TResult<Outcome> {
    let c = p.line()?;
    let g = gap_ratio_report(c)?;
    let mut t = Table::new(&["pair", "ratio"]);
    for (i, &q) in g.ratios.iter().enumerate() {
        t.push(vec![i as f64, q]);
    }
    Ok(Outcome {
        output: json(&g),
        table: Some(t),
        plot: Some(c.clone().into()),
        ..Default::default()
    })
}

fn detect_period(p: &Problem) -> TResult<Outcome> {
    let c = p.line()?;
    let side: Side = p.param("side")?.unwrap_or(Side::Right);
    let max_period: usize = p.param("max_period")?.unwrap_or(8);
    let tol: f64 = p.param("tol")?.unwrap_or(1e-9);
    let found = detect_periodic_tail(c, side, max_period, tol);
    let mut t = Table::new(&["k", "gap"]);
    if let Some(f) = &found {
        for (k, &g) in f.pattern.iter().enumerate() {
            t.push(vec![k as f64, g]);
        }
    }
    Ok(Outcome {
        output: json!({"periodic_tail": found}),
        table: Some(t),
        ..Default::default()
    })
}

fn residuals(p: &Problem) -> TResult<Outcome> {
    let config = p.config.as_ref().ok_or_else(|| ValidationError::schema("config: required"))?;
    let tol: f64 = p.param("tol")?.unwrap_or(REPORT_TOL);
    let r = match config {
        Configuration::Line(c) => residual_report(c, p.law()?, tol)?,
        Configuration::Circle(c) => circle_residual_report(c, p.law()?)?,
    };
    Ok(Outcome {
        output: json(&r),
        table: Some(residual_table(&r)),
        residual_report: Some(r),
        plot: Some(config.clone()),
        ..Default::default()
    })
}

fn diff_field(p: &Problem) -> TResult<Outcome> {
    let x: LineConfig = p.required("x")?;
    let y: LineConfig = p.required("y")?;
    let w: Vec<f64> = match p.params.get("w") {
        Some(Value::Array(_)) => p.required("w")?,
        Some(_) => vec![p.required::<f64>("w")?],
        None => return Err(ValidationError::schema("params.w: required").into()),
    };
    let law = p.law()?;
    let mut t = Table::new(&["w", "value", "error_bound"]);
    let mut values = Vec::with_capacity(w.len());
    for &wi in &w {
        let (v, e) = eval_difference_field(&x, &y, wi, law)?;
        t.push(vec![wi, v, e]);
        values.push(json!({"w": wi, "value": v, "error_bound": e}));
    }
    Ok(Outcome {
        output: Value::Array(values),
        table: Some(t),
        ..Default::default()
    })
}

fn blaschke(p: &Problem) -> TResult<Outcome> {
    let w = p.line()?;
    // C counts as known only when stated, not when derived from the gaps
    let stated_c = p.raw.get("config").and_then(|c| c.get("C")).and_then(Value::as_f64);
    let c = p.param::<f64>("C")?.or(stated_c);
    let n: usize = p.param("n")?.unwrap_or(w.len().saturating_sub(1));
    if c.is_none() {
        return Err(ValidationError::new("invalid_input", "C: required (params.C or config.C)").into());
    }
    let r = blaschke_partial_sum(w, n, c)?;
    let mut t = Table::new(&["n", "w_n", "z_n", "one_minus_z", "cumulative"]);
    for row in blaschke_table(w, n)? {
        t.push(vec![row.n as f64, row.w_n, row.z_n, row.one_minus_z, row.cumulative]);
    }
    Ok(Outcome {
        output: json(&r),
        table: Some(t),
        ..Default::default()
    })
}

fn reconstruct(p: &Problem) -> TResult<Outcome> {
    let problem = ReconstructionProblem {
        observed: p.line()?.clone(),
        m: p.required("m")?,
        far_left_tail: p.param("far_left_tail")?.unwrap_or_default(),
        law: p.law()?.clone(),
        starts: p.param("starts")?.unwrap_or(20),
        gap_range: p.param("gap_range")?,
    };
    let r = reconstruct_left_tail(&problem, &p.options)?;
    let mut t = Table::new(&["cluster", "members", "residual", "k", "position"]);
    for (ci, c) in r.clusters.iter().enumerate() {
        for (k, &u) in c.center.iter().enumerate() {
            t.push(vec![ci as f64, c.members as f64, c.residual, (k + 1) as f64, u]);
        }
    }
    Ok(Outcome {
        output: json(&r),
        table: Some(t),
        ..Default::default()
    })
}
