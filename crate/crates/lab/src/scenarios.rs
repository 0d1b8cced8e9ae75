//! The studies: each takes a validated configuration and returns a [`Report`].

use log::{debug, info, warn};
use pucci_core::grid::{cylinder_nodes, Grid, GridFunction, NodeIndex, SpaceTimePoint};
use pucci_core::operators::{
    class_membership, solution_class_membership, ClassReport, EllipticityPair, Operator, PLaplaceParams,
};
use pucci_core::regularity::{
    boundary_decay_sequence_at, coefficient_cauchy_check, decay_sequence, default_depth, rescale_affine, CauchyCheck,
    DecayReport, FACE_TOL,
};
use pucci_core::solver::{cfl_ratio, epsilon_continuation, solve_dirichlet, stable_substeps, DirichletProblem};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{ScenarioConfig, ScenarioKind, Substeps};
use crate::fields::FieldSpec;
use crate::points::{sample_face, sample_interior, snap};
use crate::report::{class_tolerance, coords, num, opt_num, Report, Table};
use crate::LabError;

/// Runs the study `kind` on `cfg`.
pub fn run(kind: ScenarioKind, cfg: &ScenarioConfig) -> Result<Report, LabError> {
    if let Some(tag) = cfg.scenario {
        if tag != kind {
            info!("config is tagged {tag}; running {kind}");
        }
    }
    match kind {
        ScenarioKind::Solve => run_solve(cfg),
        ScenarioKind::ClassCheck => run_class_check(cfg),
        ScenarioKind::Decay => run_decay(cfg),
        ScenarioKind::Boundary => run_boundary_study(cfg),
        ScenarioKind::Counterexample => run_counterexample(cfg),
        ScenarioKind::PSweep => run_p_sweep(cfg),
        ScenarioKind::EllipticitySweep => run_ellipticity_sweep(cfg),
        ScenarioKind::EpsSweep => run_eps_continuation(cfg),
    }
}

fn field_or_zero(spec: Option<&FieldSpec>, grid: &Grid, cfg: &ScenarioConfig) -> Result<GridFunction, LabError> {
    spec.unwrap_or(&FieldSpec::Zero).realize(grid, cfg)
}

/// Boundary data: `data.g`, falling back to `data.u`.
fn boundary_data(grid: &Grid, cfg: &ScenarioConfig) -> Result<GridFunction, LabError> {
    let spec = cfg
        .data
        .g
        .as_ref()
        .or(cfg.data.u.as_ref())
        .ok_or_else(|| LabError::invalid("boundary data missing: set data.g (or data.u)"))?;
    spec.realize(grid, cfg)
}

fn substeps(cfg: &ScenarioConfig, grid: &Grid, op: &Operator, auto_by_default: bool) -> usize {
    match cfg.substeps {
        Some(Substeps::Count(n)) => n,
        Some(Substeps::Auto(_)) => stable_substeps(grid, op),
        None if auto_by_default => stable_substeps(grid, op),
        None => 1,
    }
}

fn solve(op: Operator, f: &GridFunction, g: &GridFunction, substeps: usize) -> Result<GridFunction, LabError> {
    debug!("solving {op:?} with {substeps} substeps");
    Ok(solve_dirichlet(&DirichletProblem::new(op, f, g).with_substeps(substeps))?)
}

/// The field under study: `data.u`, the solution of the configured
/// Dirichlet problem, or the counterexample field for `params.delta`.
fn study_field(grid: &Grid, cfg: &ScenarioConfig) -> Result<GridFunction, LabError> {
    if let Some(u) = &cfg.data.u {
        return u.realize(grid, cfg);
    }
    if let Some(spec) = &cfg.operator {
        let op = spec.build(grid.h())?;
        let f = field_or_zero(cfg.data.f.as_ref(), grid, cfg)?;
        let g = boundary_data(grid, cfg)?;
        return solve(op, &f, &g, substeps(cfg, grid, &op, false));
    }
    if let Some(delta) = cfg.params.delta {
        return FieldSpec::Counterexample { delta }.realize(grid, cfg);
    }
    Err(LabError::invalid("no field to analyse: set data.u, an operator with data.g, or params.delta"))
}

fn ellipticity(cfg: &ScenarioConfig, grid: &Grid) -> Result<EllipticityPair, LabError> {
    if let Some(e) = cfg.analysis.ellipticity {
        return Ok(EllipticityPair::new(e.lambda, e.big_lambda)?);
    }
    if let Some(op) = &cfg.operator {
        return Ok(op.build(grid.h())?.ellipticity()?);
    }
    if let Some(delta) = cfg.params.delta {
        return Ok(EllipticityPair::new(1.0, 1.0 + delta)?);
    }
    Err(LabError::invalid("no ellipticity pair: set analysis.ellipticity, an operator, or params.delta"))
}

fn interior_points(cfg: &ScenarioConfig, grid: &Grid) -> Vec<SpaceTimePoint> {
    let a = &cfg.analysis;
    let mut pts: Vec<_> = a.points.iter().map(|p| snap(grid, p, false)).collect();
    pts.extend(sample_interior(grid, a.sample_points, cfg.seed, a.region));
    pts
}

fn face_points(cfg: &ScenarioConfig, grid: &Grid) -> Vec<SpaceTimePoint> {
    let a = &cfg.analysis;
    let mut pts: Vec<_> = a.boundary_points.iter().map(|p| snap(grid, p, true)).collect();
    pts.extend(sample_face(grid, a.boundary_samples, cfg.seed, a.region));
    pts
}

fn depth(cfg: &ScenarioConfig, grid: &Grid) -> usize {
    cfg.analysis.depth.unwrap_or_else(|| default_depth(grid, cfg.analysis.eta))
}

/// Decay analysis at one point; failures are kept in `error`.
#[derive(Debug, Clone, Serialize)]
pub struct PointDecay {
    pub index: usize,
    pub point: SpaceTimePoint,
    pub alpha_est: Option<f64>,
    pub decay: Option<DecayReport>,
    pub cauchy: Option<CauchyCheck>,
    pub error: Option<String>,
}

fn analyse_points(
    u: &GridFunction,
    points: &[SpaceTimePoint],
    cfg: &ScenarioConfig,
    depth: usize,
    boundary: bool,
) -> Vec<PointDecay> {
    let a = &cfg.analysis;
    let face_tol = a.face_tolerance;
    points
        .par_iter()
        .enumerate()
        .map(|(index, point)| {
            let decay = if boundary {
                boundary_decay_sequence_at(u, point, a.eta, depth, face_tol)
            } else {
                decay_sequence(u, point, a.eta, depth)
            };
            match decay {
                Ok(d) => PointDecay {
                    index,
                    point: point.clone(),
                    alpha_est: Some(d.alpha_est),
                    cauchy: Some(coefficient_cauchy_check(&d, a.c1, a.alpha)),
                    decay: Some(d),
                    error: None,
                },
                Err(e) => {
                    warn!("decay at {:?}, t = {} failed: {e}", point.x, point.t);
                    PointDecay {
                        index,
                        point: point.clone(),
                        alpha_est: None,
                        decay: None,
                        cauchy: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AlphaSummary {
    pub min: Option<f64>,
    pub mean: Option<f64>,
    pub analysed: usize,
    pub failed: usize,
}

fn alpha_summary(items: &[PointDecay]) -> AlphaSummary {
    let alphas: Vec<f64> = items.iter().filter_map(|p| p.alpha_est).collect();
    AlphaSummary {
        min: alphas.iter().copied().reduce(f64::min),
        mean: (!alphas.is_empty()).then(|| alphas.iter().sum::<f64>() / alphas.len() as f64),
        analysed: alphas.len(),
        failed: items.len() - alphas.len(),
    }
}

fn decay_table(items: &[PointDecay], n_dim: usize, boundary: bool) -> Table {
    let mut header = vec!["point".to_string(), "k".into(), "radius".into(), "a".into()];
    if !boundary {
        header.extend((1..=n_dim).map(|i| format!("b{i}")));
    }
    header.extend(["E_k", "step_exponent", "resolved", "nodes", "error"].map(String::from));
    let mut table = Table { header, rows: Vec::new() };
    for item in items {
        match &item.decay {
            Some(d) => {
                for e in &d.entries {
                    let mut row = vec![item.index.to_string(), e.k.to_string(), num(e.radius), num(e.a)];
                    if !boundary {
                        row.extend(e.b.iter().map(|v| num(*v)));
                    }
                    row.extend([
                        num(e.error),
                        opt_num(e.step_exponent),
                        e.resolved.to_string(),
                        e.nodes.to_string(),
                        String::new(),
                    ]);
                    table.push(row);
                }
            }
            None => {
                let blanks = table.header.len() - 2;
                let mut row = vec![item.index.to_string()];
                row.extend(std::iter::repeat_n(String::new(), blanks));
                row.push(item.error.clone().unwrap_or_default());
                table.push(row);
            }
        }
    }
    table
}

fn node_coords(grid: &Grid, node: NodeIndex) -> String {
    let p = grid.node_point(node);
    format!("{} {}", coords(&p.x), num(p.t))
}

fn class_table(checks: &[(&str, &ClassReport)], grid: &Grid) -> Table {
    let mut t = Table::new(&[
        "check",
        "passed",
        "worst_sub_slack",
        "worst_sub_node",
        "worst_super_slack",
        "worst_super_node",
        "tolerance",
        "f_bound",
        "nodes_checked",
    ]);
    for (name, r) in checks {
        t.push(vec![
            name.to_string(),
            r.passed.to_string(),
            num(r.worst_sub_slack),
            node_coords(grid, r.worst_sub_node),
            num(r.worst_super_slack),
            node_coords(grid, r.worst_super_node),
            num(r.tolerance),
            num(r.f_bound),
            r.nodes_checked.to_string(),
        ]);
    }
    t
}

/// `u(r x, r^2 t) / r^2` on the reference lattice: the values of `u` on
/// `Q_r(0)` with unchanged PDE slacks.
fn region_view(u: &GridFunction, r: f64) -> Result<GridFunction, LabError> {
    let n = u.grid().n_dim();
    Ok(rescale_affine(u, &SpaceTimePoint::origin(n), 0.0, &vec![0.0; n], r, 1.0)?)
}

/// Class check of a solved field on `Q_region(0)`, away from the initial layer.
fn region_class_check(
    u: &GridFunction,
    ell: &EllipticityPair,
    f_bound: f64,
    cfg: &ScenarioConfig,
) -> Result<(ClassReport, f64), LabError> {
    let tol = class_tolerance(cfg, u);
    let view = region_view(u, cfg.analysis.region)?;
    Ok((class_membership(&view, ell, f_bound, Some(tol))?, tol))
}

/// Maximum of `|u - v|` over `Q_r(0)`.
fn sup_error_on(u: &GridFunction, v: &GridFunction, r: f64) -> Result<f64, LabError> {
    let cyl = cylinder_nodes(u.grid(), &SpaceTimePoint::origin(u.grid().n_dim()), r)?;
    Ok(cyl.nodes().map(|node| (u.value(node) - v.value(node)).abs()).fold(0.0, f64::max))
}

/// Solves the configured Dirichlet problem; compares with `data.u` when given.
pub fn run_solve(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let grid = cfg.validate()?;
    let op = cfg.operator.ok_or_else(|| LabError::invalid("solve needs an operator"))?.build(grid.h())?;
    let g = cfg
        .data
        .g
        .as_ref()
        .ok_or_else(|| LabError::invalid("solve needs boundary data data.g"))?
        .realize(&grid, cfg)?;
    let f = field_or_zero(cfg.data.f.as_ref(), &grid, cfg)?;
    let steps = substeps(cfg, &grid, &op, false);
    let (ratio, limit) = cfl_ratio(&grid, &op, grid.tau() / steps as f64);
    let u = solve(op, &f, &g, steps)?;
    info!("solved on {} nodes", grid.node_count());

    let mut t = Table::new(&["metric", "value"]);
    let mut push = |k: &str, v: String| t.push(vec![k.to_string(), v]);
    push("max_abs", num(u.max_abs()));
    push("substeps", steps.to_string());
    push("cfl_ratio", num(ratio));
    push("cfl_limit", num(limit));

    let tol = class_tolerance(cfg, &u);
    let class = match op.ellipticity() {
        Ok(ell) => Some(region_class_check(&u, &ell, f.max_abs(), cfg)?.0),
        Err(_) => None,
    };
    if let Some(c) = &class {
        push("class_passed", c.passed.to_string());
        push("worst_sub_slack", num(c.worst_sub_slack));
        push("worst_super_slack", num(c.worst_super_slack));
    }
    let mut reference = None;
    if let Some(spec) = &cfg.data.u {
        let realized;
        let exact = if cfg.data.g.as_ref() == Some(spec) {
            &g
        } else {
            realized = spec.realize(&grid, cfg)?;
            &realized
        };
        let sup_error = u.sup_distance(exact)?;
        let region_error = sup_error_on(&u, exact, cfg.analysis.region)?;
        let eps = match op {
            Operator::PLaplace(p) => p.epsilon(),
            _ => 0.0,
        };
        let scale = grid.h() * grid.h() + grid.tau() + eps * eps;
        push("sup_error", num(sup_error));
        push("region_error", num(region_error));
        push("consistency_scale", num(scale));
        push("error_ratio", num(region_error / scale));
        reference = Some(json!({
            "sup_error": sup_error,
            "region_radius": cfg.analysis.region,
            "region_error": region_error,
            "consistency_scale": scale,
            "error_ratio": region_error / scale,
        }));
    }
    let result = json!({
        "operator": op,
        "substeps": steps,
        "cfl": { "ratio": ratio, "limit": limit },
        "max_abs": u.max_abs(),
        "class": class,
        "reference": reference,
    });
    let mut report = Report::new(ScenarioKind::Solve, t, result);
    report.class_tolerance = Some(tol);
    report.fields.push(("solution".into(), u));
    Ok(report)
}

/// Discrete membership of the study field in `S*` and, with pointwise `f`, in `S`.
pub fn run_class_check(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let grid = cfg.validate()?;
    let u = study_field(&grid, cfg)?;
    let ell = ellipticity(cfg, &grid)?;
    let f = cfg.data.f.as_ref().map(|s| s.realize(&grid, cfg)).transpose()?;
    let f_bound = match (cfg.analysis.f_bound, &f) {
        (Some(b), _) => b,
        (None, Some(f)) => f.max_abs(),
        (None, None) if cfg.data.u.is_none() && cfg.operator.is_none() => 2.0,
        (None, None) => 0.0,
    };
    let tol = class_tolerance(cfg, &u);
    let extended = class_membership(&u, &ell, f_bound, Some(tol))?;
    let pointwise = f.as_ref().map(|f| solution_class_membership(&u, &ell, f, Some(tol))).transpose()?;
    let mut checks = vec![("extended", &extended)];
    if let Some(p) = &pointwise {
        checks.push(("pointwise", p));
    }
    let table = class_table(&checks, &grid);
    let result = json!({ "ellipticity": ell, "extended": extended, "pointwise": pointwise });
    let mut report = Report::new(ScenarioKind::ClassCheck, table, result);
    report.class_tolerance = Some(tol);
    Ok(report)
}

/// Interior decay sequences at configured and sampled points.
pub fn run_decay(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let grid = cfg.validate()?;
    let u = study_field(&grid, cfg)?;
    let mut points = interior_points(cfg, &grid);
    if points.is_empty() {
        points.push(snap(&grid, &SpaceTimePoint::origin(grid.n_dim()), false));
    }
    let k = depth(cfg, &grid);
    let items = analyse_points(&u, &points, cfg, k, false);
    let table = decay_table(&items, grid.n_dim(), false);
    let result = json!({ "depth": k, "summary": alpha_summary(&items), "points": items });
    Ok(Report::new(ScenarioKind::Decay, table, result))
}

/// Subtracts the affine boundary part and measures boundary decay at face points.
pub fn run_boundary_study(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let grid = cfg.validate()?;
    if !grid.half_space() {
        return Err(LabError::invalid("boundary study needs a half-space lattice (grid.half_space = true)"));
    }
    let u = study_field(&grid, cfg)?;
    let (a0, b0) = match &cfg.data.face_affine {
        Some(l) => (l.a, l.b.clone()),
        None => (0.0, vec![0.0; grid.n_dim()]),
    };
    let v = u.minus_affine(a0, &b0);
    let face_tol = cfg.analysis.face_tolerance.unwrap_or(FACE_TOL * (1.0 + u.max_abs()));
    let face_residual = (0..grid.level_count())
        .flat_map(|level| {
            (0..grid.space_count()).filter(|&s| grid.is_face(s)).map(move |space| NodeIndex { level, space })
        })
        .map(|node| v.value(node).abs())
        .fold(0.0, f64::max);
    if face_residual > face_tol {
        return Err(LabError::invalid(format!(
            "face residual after subtracting L_g is {face_residual:.3e} > {face_tol:.3e}"
        )));
    }
    let mut points = face_points(cfg, &grid);
    if points.is_empty() {
        points.push(SpaceTimePoint::origin(grid.n_dim()));
    }
    let k = depth(cfg, &grid);
    let items = analyse_points(&v, &points, cfg, k, true);
    let normal_slopes: Vec<Option<f64>> =
        items.iter().map(|p| p.decay.as_ref().and_then(|d| d.entries.last()).map(|e| e.a.abs())).collect();
    let table = decay_table(&items, grid.n_dim(), true);
    let result = json!({
        "face_affine": { "a": a0, "b": b0 },
        "face_residual": face_residual,
        "face_tolerance": face_tol,
        "depth": k,
        "normal_slope_abs": normal_slopes,
        "summary": alpha_summary(&items),
        "points": items,
    });
    Ok(Report::new(ScenarioKind::Boundary, table, result))
}

/// One-sided second differences in `x_n` at `x' = 0`, `t = 0`, on both sides
/// of the staggered interface: `(D+, D-)`.
pub fn interface_second_differences(u: &GridFunction) -> Result<(f64, f64), LabError> {
    let grid = u.grid();
    let n = grid.n_dim();
    let h = grid.h();
    let level = grid.time_steps();
    let value = |xn: f64| -> Result<f64, LabError> {
        let mut x = vec![0.0; n];
        x[n - 1] = xn;
        let node = grid
            .node_of(&SpaceTimePoint::new(x, 0.0))
            .ok_or_else(|| LabError::invalid(format!("x_n = {xn} is not on the lattice")))?;
        Ok(u.value(NodeIndex { level, ..node }))
    };
    let plus = (value(2.5 * h)? - 2.0 * value(1.5 * h)? + value(0.5 * h)?) / (h * h);
    let minus = (value(-0.5 * h)? - 2.0 * value(-1.5 * h)? + value(-2.5 * h)?) / (h * h);
    Ok((plus, minus))
}

/// The Hessian-jump example: a class member that is not twice differentiable.
pub fn run_counterexample(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let grid = cfg.validate()?;
    let delta = cfg.params.delta.ok_or_else(|| LabError::invalid("counterexample needs params.delta"))?;
    if !grid.stagger() {
        return Err(LabError::invalid("counterexample needs a staggered lattice (grid.stagger = true)"));
    }
    let u = FieldSpec::Counterexample { delta }.realize(&grid, cfg)?;
    let tol = class_tolerance(cfg, &u);
    let f_bound = cfg.analysis.f_bound.unwrap_or(2.0);
    let membership = class_membership(&u, &EllipticityPair::new(1.0, 1.0 + delta)?, f_bound, Some(tol))?;
    let (d_plus, d_minus) = interface_second_differences(&u)?;
    let ratio = d_plus / d_minus;
    let target = 1.0 / (1.0 + delta);
    let k = depth(cfg, &grid);
    let decay = decay_sequence(&u, &SpaceTimePoint::origin(grid.n_dim()), cfg.analysis.eta, k)?;
    let single = class_membership(&u, &EllipticityPair::unit(), f_bound, Some(tol))?;
    let f = FieldSpec::Constant { value: -f_bound }.realize(&grid, cfg)?;
    let single_pointwise = solution_class_membership(&u, &EllipticityPair::unit(), &f, Some(tol))?;

    let mut t = Table::new(&["quantity", "value", "reference"]);
    t.push(vec!["membership_passed".into(), membership.passed.to_string(), "true".into()]);
    t.push(vec!["membership_worst_sub_slack".into(), num(membership.worst_sub_slack), num(-tol)]);
    t.push(vec!["membership_worst_super_slack".into(), num(membership.worst_super_slack), num(-tol)]);
    t.push(vec!["second_difference_plus".into(), num(d_plus), num(2.0 * target)]);
    t.push(vec!["second_difference_minus".into(), num(d_minus), num(2.0)]);
    t.push(vec!["second_difference_ratio".into(), num(ratio), num(target)]);
    t.push(vec!["alpha_est".into(), num(decay.alpha_est), num(1.0)]);
    t.push(vec!["raw_exponent".into(), opt_num(decay.raw_exponent), String::new()]);
    t.push(vec!["single_operator_passed".into(), single.passed.to_string(), "false".into()]);
    t.push(vec!["single_operator_worst_sub_slack".into(), num(single.worst_sub_slack), num(-0.5)]);
    t.push(vec!["single_operator_worst_super_slack".into(), num(single.worst_super_slack), String::new()]);
    t.push(vec!["single_operator_pointwise_passed".into(), single_pointwise.passed.to_string(), "false".into()]);
    t.push(vec![
        "single_operator_pointwise_worst_slack".into(),
        num(single_pointwise.worst_sub_slack.min(single_pointwise.worst_super_slack)),
        String::new(),
    ]);
    let result = json!({
        "delta": delta,
        "membership": membership,
        "second_differences": { "plus": d_plus, "minus": d_minus, "ratio": ratio, "target": target,
                                "relative_error": (ratio - target).abs() / target },
        "decay": decay,
        "single_operator": single,
        "single_operator_pointwise": single_pointwise,
    });
    let mut report = Report::new(ScenarioKind::Counterexample, t, result);
    report.class_tolerance = Some(tol);
    Ok(report)
}

/// One row of a sweep: the parameter, the class check and the decay summary.
#[derive(Debug, Clone, Serialize)]
pub struct SweepItem {
    pub parameter: f64,
    pub substeps: Option<usize>,
    pub class: Option<ClassReport>,
    pub interior: Vec<PointDecay>,
    pub interior_summary: Option<AlphaSummary>,
    pub boundary: Vec<PointDecay>,
    pub boundary_summary: Option<AlphaSummary>,
    pub error: Option<String>,
}

impl SweepItem {
    fn failed(parameter: f64, e: LabError) -> Self {
        warn!("sweep item {parameter} failed: {e}");
        Self {
            parameter,
            substeps: None,
            class: None,
            interior: Vec::new(),
            interior_summary: None,
            boundary: Vec::new(),
            boundary_summary: None,
            error: Some(e.to_string()),
        }
    }
}

fn sweep_table(name: &str, items: &[SweepItem]) -> Table {
    let mut t = Table::new(&[
        name,
        "status",
        "class_passed",
        "worst_sub_slack",
        "worst_super_slack",
        "alpha_min",
        "alpha_mean",
        "points",
        "boundary_alpha_min",
        "error",
    ]);
    for it in items {
        let c = it.class.as_ref();
        let s = it.interior_summary;
        t.push(vec![
            num(it.parameter),
            if it.error.is_some() { "failed" } else { "ok" }.into(),
            c.map(|c| c.passed.to_string()).unwrap_or_default(),
            opt_num(c.map(|c| c.worst_sub_slack)),
            opt_num(c.map(|c| c.worst_super_slack)),
            opt_num(s.and_then(|s| s.min)),
            opt_num(s.and_then(|s| s.mean)),
            s.map(|s| s.analysed.to_string()).unwrap_or_default(),
            opt_num(it.boundary_summary.and_then(|s| s.min)),
            it.error.clone().unwrap_or_default(),
        ]);
    }
    t
}

/// Shared inputs of the items of a sweep.
struct Sweep<'a> {
    grid: &'a Grid,
    cfg: &'a ScenarioConfig,
    f: &'a GridFunction,
    g: &'a GridFunction,
}

impl Sweep<'_> {
    /// Solves with `op`, checks the class `ell` and analyses the solution.
    fn item(&self, parameter: f64, op: Operator, ell: EllipticityPair) -> Result<(SweepItem, GridFunction), LabError> {
        let (grid, cfg) = (self.grid, self.cfg);
        let steps = substeps(cfg, grid, &op, true);
        let u = solve(op, self.f, self.g, steps)?;
        let (class, _) = region_class_check(&u, &ell, self.f.max_abs(), cfg)?;
        let k = depth(cfg, grid);
        let interior = analyse_points(&u, &interior_points(cfg, grid), cfg, k, false);
        let mut boundary = Vec::new();
        if grid.half_space() {
            let pts = face_points(cfg, grid);
            if !pts.is_empty() {
                let v = match &cfg.data.face_affine {
                    Some(l) => u.minus_affine(l.a, &l.b),
                    None => u.clone(),
                };
                boundary = analyse_points(&v, &pts, cfg, k, true);
            }
        }
        let item = SweepItem {
            parameter,
            substeps: Some(steps),
            class: Some(class),
            interior_summary: Some(alpha_summary(&interior)),
            boundary_summary: (!boundary.is_empty()).then(|| alpha_summary(&boundary)),
            interior,
            boundary,
            error: None,
        };
        Ok((item, u))
    }

    /// Runs one item, isolating failures and keeping the field when asked.
    fn run_item(
        &self,
        parameter: f64,
        setup: Result<(Operator, EllipticityPair), LabError>,
        field_name: String,
        fields: &mut Vec<(String, GridFunction)>,
    ) -> SweepItem {
        match setup.and_then(|(op, ell)| self.item(parameter, op, ell)) {
            Ok((item, u)) => {
                if self.cfg.write_fields {
                    fields.push((field_name, u));
                }
                item
            }
            Err(e) => SweepItem::failed(parameter, e),
        }
    }
}

/// Regularized normalized p-Laplace solutions for each `p` in `params.p_list`.
pub fn run_p_sweep(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let grid = cfg.validate()?;
    let mut fields = Vec::new();
    let mut items = Vec::with_capacity(cfg.params.p_list.len());
    if !cfg.params.p_list.is_empty() {
        let f = field_or_zero(cfg.data.f.as_ref(), &grid, cfg)?;
        let g = boundary_data(&grid, cfg)?;
        let eps = cfg.params.epsilon.unwrap_or(grid.h());
        let sweep = Sweep { grid: &grid, cfg, f: &f, g: &g };
        for &p in &cfg.params.p_list {
            info!("p = {p}");
            let setup = PLaplaceParams::new(p, eps)
                .and_then(|params| Ok((Operator::PLaplace(params), EllipticityPair::for_p(p)?)))
                .map_err(LabError::from);
            items.push(sweep.run_item(p, setup, format!("solution_p{p}"), &mut fields));
        }
    }
    let table = sweep_table("p", &items);
    let result = json!({
        "epsilon": cfg.params.epsilon.unwrap_or(grid.h()),
        "depth": depth(cfg, &grid),
        "items": items,
    });
    let mut report = Report::new(ScenarioKind::PSweep, table, result);
    report.fields = fields;
    Ok(report)
}

/// Solutions of `u_t = M+_{1, 1+delta}(D^2u) + f` for each `delta` in `params.delta_list`.
pub fn run_ellipticity_sweep(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let grid = cfg.validate()?;
    let mut fields = Vec::new();
    let mut items = Vec::with_capacity(cfg.params.delta_list.len());
    if !cfg.params.delta_list.is_empty() {
        let f = field_or_zero(cfg.data.f.as_ref(), &grid, cfg)?;
        let g = boundary_data(&grid, cfg)?;
        let sweep = Sweep { grid: &grid, cfg, f: &f, g: &g };
        for &delta in &cfg.params.delta_list {
            info!("delta = {delta}");
            let setup = EllipticityPair::new(1.0, 1.0 + delta)
                .map(|ell| (Operator::PucciPlus(ell), ell))
                .map_err(LabError::from);
            items.push(sweep.run_item(delta, setup, format!("solution_delta{delta}"), &mut fields));
        }
    }
    let mins: Vec<f64> = items.iter().filter_map(|i| i.interior_summary.and_then(|s| s.min)).collect();
    let nonincreasing = mins.windows(2).all(|w| w[1] <= w[0]);
    let table = sweep_table("delta", &items);
    let result = json!({
        "depth": depth(cfg, &grid),
        "alpha_min_nonincreasing_in_delta": nonincreasing,
        "items": items,
    });
    let mut report = Report::new(ScenarioKind::EllipticitySweep, table, result);
    report.fields = fields;
    Ok(report)
}

/// Regularized solutions along a decreasing `eps` schedule (default `h, h/2, h/4`).
pub fn run_eps_continuation(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let grid = cfg.validate()?;
    let p = cfg.params.p.ok_or_else(|| LabError::invalid("eps continuation needs params.p"))?;
    let h = grid.h();
    let schedule = cfg.params.eps_schedule.clone().unwrap_or_else(|| vec![h, h / 2.0, h / 4.0]);
    let f = field_or_zero(cfg.data.f.as_ref(), &grid, cfg)?;
    let g = boundary_data(&grid, cfg)?;
    let mut cont = epsilon_continuation(p, &schedule, &f, &g, &grid)?;
    let mut t = Table::new(&["index", "eps_from", "eps_to", "distance"]);
    for (i, d) in cont.distances.iter().enumerate() {
        t.push(vec![i.to_string(), num(schedule[i]), num(schedule[i + 1]), num(*d)]);
    }
    let mut fields = Vec::new();
    if cfg.write_fields {
        if let Some(last) = cont.solutions.pop() {
            fields.push(("solution_finest".to_string(), last));
        }
    }
    let mut report = Report::new(ScenarioKind::EpsSweep, t, &cont);
    report.fields = fields;
    Ok(report)
}
