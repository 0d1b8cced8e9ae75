//! Linear fits on shrinking parabolic cylinders and the exponents they reveal.
//!
//! Interior analysis fits `L(x) = a + b.(x - x0)` on `Q_{eta^k}(x0, t0)`;
//! boundary analysis fits `a x_n` on the half cylinders `Q+_{eta^k}` of a
//! half-space lattice whose data vanish on the face. The fit is least squares;
//! its sup-norm error `E_k` over the cylinder nodes drives the exponent
//! estimate `alpha_est = slope(log E_k vs log eta^k) - 1`, clamped to
//! `[ALPHA_FLOOR, 1]`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{cylinder_nodes, CylinderIndex, Grid, GridError, GridFunction, GridSpec, SpaceTimePoint};
use crate::linalg::{cholesky_solve, LinalgError, SymMatrix};

/// Scales with `E_k < RESOLVED_TOL (1 + max|u|)` are treated as exact.
pub const RESOLVED_TOL: f64 = 1e-13;
/// Smallest reported exponent; keeps `alpha_est` inside `(0, 1]`.
pub const ALPHA_FLOOR: f64 = 1e-6;
/// Default face tolerance for boundary analysis, relative to `1 + max|u|`.
pub const FACE_TOL: f64 = 1e-10;
/// Face tolerance required by the odd reflection, relative to `1 + max|u|`.
pub const REFLECTION_FACE_TOL: f64 = 1e-12;

const FIT_PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum RegularityError {
    #[error("degenerate fit on the cylinder of radius {radius}: {nodes} nodes, rank-deficient design")]
    DegenerateFit { radius: f64, nodes: usize },
    #[error(
        "data on the face x_n = 0 reach {max_abs:.3e} > tolerance {tolerance:.3e}; \
         subtract the boundary data first"
    )]
    FaceNotZero { max_abs: f64, tolerance: f64 },
    #[error("operation needs a half-space lattice with the face on nodes")]
    NotHalfSpace,
    #[error("radius {radius} is not aligned with the lattice around the centre; valid dyadic radii: {valid:?}")]
    Misaligned { radius: f64, valid: Vec<f64> },
    #[error("point x = {x:?}, t = {t} is not a lattice node")]
    NotANode { x: Vec<f64>, t: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Affine fit `L(x) = a + b.(x - x0)` with its sup error over the cylinder.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub a: f64,
    pub b: Vec<f64>,
    pub sup_error: f64,
    pub cylinder: CylinderIndex,
}

impl LinearFit {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.a + self.b.iter().zip(x).zip(&self.cylinder.center.x).map(|((b, x), c)| b * (x - c)).sum::<f64>()
    }
}

fn centered_coords(grid: &Grid, cyl: &CylinderIndex) -> Vec<Vec<f64>> {
    cyl.spatial
        .iter()
        .map(|&s| grid.point(s).iter().zip(&cyl.center.x).map(|(x, c)| (x - c) / cyl.radius).collect())
        .collect()
}

/// Per-level sum of `u` at the cylinder's spatial nodes, in spatial order.
fn level_sums(u: &GridFunction, cyl: &CylinderIndex) -> Vec<f64> {
    let per_level: Vec<Vec<f64>> = cyl
        .levels
        .par_iter()
        .map(|&l| {
            let slice = u.level(l);
            cyl.spatial.iter().map(|&s| slice[s]).collect()
        })
        .collect();
    let mut sums = vec![0.0; cyl.spatial.len()];
    for row in per_level {
        for (acc, v) in sums.iter_mut().zip(row) {
            *acc += v;
        }
    }
    sums
}

/// `max |u - model(s)|` over the cylinder, `model` indexed by position in `cyl.spatial`.
fn sup_error(u: &GridFunction, cyl: &CylinderIndex, model: &[f64]) -> f64 {
    cyl.levels
        .par_iter()
        .map(|&l| {
            let slice = u.level(l);
            cyl.spatial.iter().zip(model).fold(0.0f64, |m, (&s, v)| m.max((slice[s] - v).abs()))
        })
        .reduce(|| 0.0, f64::max)
}

/// Least-squares affine fit over the cylinder nodes; the stored error is the
/// exact sup error of that fit.
pub fn best_linear_fit(u: &GridFunction, cyl: &CylinderIndex) -> Result<LinearFit, RegularityError> {
    let grid = u.grid();
    let n = grid.n_dim();
    let degenerate = || RegularityError::DegenerateFit { radius: cyl.radius, nodes: cyl.len() };
    if cyl.len() < n + 2 {
        return Err(degenerate());
    }
    let z = centered_coords(grid, cyl);
    let sums = level_sums(u, cyl);
    let levels = cyl.levels.len() as f64;
    // normal equations in the basis (1, z_1, .., z_n)
    let mut gram = SymMatrix::zeros(n + 1);
    let mut rhs = vec![0.0; n + 1];
    for (zs, &us) in z.iter().zip(&sums) {
        let row: Vec<f64> = std::iter::once(1.0).chain(zs.iter().copied()).collect();
        for i in 0..=n {
            rhs[i] += row[i] * us;
            for j in i..=n {
                gram.set(i, j, gram.get(i, j) + levels * row[i] * row[j]);
            }
        }
    }
    let coef = cholesky_solve(&gram, &rhs, FIT_PIVOT_TOL).map_err(|e| match e {
        LinalgError::NotPositiveDefinite { .. } => degenerate(),
        other => other.into(),
    })?;
    let a = coef[0];
    let b: Vec<f64> = coef[1..].iter().map(|c| c / cyl.radius).collect();
    let model: Vec<f64> =
        z.iter().map(|zs| a + zs.iter().zip(&coef[1..]).map(|(zi, ci)| zi * ci).sum::<f64>()).collect();
    Ok(LinearFit { a, b, sup_error: sup_error(u, cyl, &model), cylinder: cyl.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    Interior,
    Boundary,
}

/// One scale of a decay sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayEntry {
    pub k: usize,
    pub radius: f64,
    /// Interior: value coefficient of `L_k`. Boundary: slope `a_k` of `a_k x_n`.
    pub a: f64,
    /// Interior: gradient coefficient of `L_k`. Boundary: empty.
    pub b: Vec<f64>,
    pub error: f64,
    /// `log(E_k / E_{k-1}) / log(eta) - 1`, unclamped; absent at `k = 0`
    /// and next to resolved scales.
    pub step_exponent: Option<f64>,
    pub resolved: bool,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub kind: DecayKind,
    pub center: SpaceTimePoint,
    pub eta: f64,
    pub entries: Vec<DecayEntry>,
    /// Regression slope minus one, before clamping.
    pub raw_exponent: Option<f64>,
    pub alpha_est: f64,
    /// Root-mean-square residual of the log-log regression.
    pub regression_residual: f64,
}

impl DecayReport {
    pub fn errors(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.error).collect()
    }
}

/// Largest `K` such that `Q_{eta^K}` still spans at least three nodes per
/// axis and three time levels (`eta^K >= 2h`, `eta^{2K} >= 3 tau`).
pub fn default_depth(grid: &Grid, eta: f64) -> usize {
    let mut k = 0;
    loop {
        let r = eta.powi(k as i32 + 1);
        if r < 2.0 * grid.h() * (1.0 - 1e-9) || r * r < 3.0 * grid.tau() * (1.0 - 1e-9) {
            return k;
        }
        k += 1;
    }
}

fn check_eta(eta: f64) -> Result<(), RegularityError> {
    if eta > 0.0 && eta < 1.0 {
        Ok(())
    } else {
        Err(RegularityError::InvalidParameter(format!("eta must lie in (0, 1), got {eta}")))
    }
}

fn finish_report(
    kind: DecayKind,
    center: &SpaceTimePoint,
    eta: f64,
    mut entries: Vec<DecayEntry>,
    scale: f64,
) -> DecayReport {
    let floor = RESOLVED_TOL * (1.0 + scale);
    for e in entries.iter_mut() {
        e.resolved = e.error < floor;
    }
    let log_eta = eta.ln();
    for i in 1..entries.len() {
        let (prev, cur) = (&entries[i - 1], &entries[i]);
        entries[i].step_exponent =
            (!prev.resolved && !cur.resolved).then(|| (cur.error / prev.error).ln() / log_eta - 1.0);
    }
    let pts: Vec<(f64, f64)> = entries.iter().filter(|e| !e.resolved).map(|e| (e.radius.ln(), e.error.ln())).collect();
    let (raw_exponent, alpha_est, regression_residual) = if pts.len() < 2 {
        (None, 1.0, 0.0)
    } else {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
        let raw = slope - 1.0;
        let alpha = if raw.is_nan() { ALPHA_FLOOR } else { raw.clamp(ALPHA_FLOOR, 1.0) };
        (Some(raw), alpha, (rss / m).sqrt())
    };
    DecayReport { kind, center: center.clone(), eta, entries, raw_exponent, alpha_est, regression_residual }
}

/// Interior decay: best affine fits on `Q_{eta^k}(center)` for `k = 0..=depth`.
pub fn decay_sequence(
    u: &GridFunction,
    center: &SpaceTimePoint,
    eta: f64,
    depth: usize,
) -> Result<DecayReport, RegularityError> {
    check_eta(eta)?;
    let mut entries = Vec::with_capacity(depth + 1);
    for k in 0..=depth {
        let radius = eta.powi(k as i32);
        let cyl = cylinder_nodes(u.grid(), center, radius)?;
        let fit = best_linear_fit(u, &cyl)?;
        entries.push(DecayEntry {
            k,
            radius,
            a: fit.a,
            b: fit.b,
            error: fit.sup_error,
            step_exponent: None,
            resolved: false,
            nodes: cyl.len(),
        });
    }
    Ok(finish_report(DecayKind::Interior, center, eta, entries, u.max_abs()))
}

fn face_max(u: &GridFunction) -> Result<f64, RegularityError> {
    let grid = u.grid();
    if !grid.half_space() {
        return Err(RegularityError::NotHalfSpace);
    }
    let face: Vec<usize> = (0..grid.space_count()).filter(|&s| grid.is_face(s)).collect();
    Ok((0..grid.level_count()).fold(0.0f64, |m, l| {
        let slice = u.level(l);
        face.iter().fold(m, |m, &s| m.max(slice[s].abs()))
    }))
}

fn check_face(u: &GridFunction, tolerance: f64) -> Result<(), RegularityError> {
    let max_abs = face_max(u)?;
    if max_abs > tolerance {
        return Err(RegularityError::FaceNotZero { max_abs, tolerance });
    }
    Ok(())
}

/// Boundary decay at the origin of a half-space lattice.
pub fn boundary_decay_sequence(
    u: &GridFunction,
    eta: f64,
    depth: usize,
    face_tol: Option<f64>,
) -> Result<DecayReport, RegularityError> {
    boundary_decay_sequence_at(u, &SpaceTimePoint::origin(u.grid().n_dim()), eta, depth, face_tol)
}

/// Boundary decay at a face point: one-parameter fits `a_k x_n` on
/// `Q+_{eta^k}(point)`. The face data must vanish within `face_tol`
/// (default `FACE_TOL (1 + max|u|)`).
pub fn boundary_decay_sequence_at(
    u: &GridFunction,
    point: &SpaceTimePoint,
    eta: f64,
    depth: usize,
    face_tol: Option<f64>,
) -> Result<DecayReport, RegularityError> {
    check_eta(eta)?;
    let grid = u.grid();
    check_face(u, face_tol.unwrap_or(FACE_TOL * (1.0 + u.max_abs())))?;
    let n = grid.n_dim();
    if point.x.len() != n || point.x[n - 1] != 0.0 {
        return Err(RegularityError::InvalidParameter("boundary point must lie on the face x_n = 0".into()));
    }
    let mut entries = Vec::with_capacity(depth + 1);
    for k in 0..=depth {
        let radius = eta.powi(k as i32);
        let cyl = cylinder_nodes(grid, point, radius)?;
        let xn: Vec<f64> = cyl.spatial.iter().map(|&s| grid.point(s)[n - 1]).collect();
        let sums = level_sums(u, &cyl);
        let num: f64 = xn.iter().zip(&sums).map(|(x, s)| x * s).sum();
        let den: f64 = xn.iter().map(|x| x * x).sum::<f64>() * cyl.levels.len() as f64;
        if den == 0.0 {
            return Err(RegularityError::DegenerateFit { radius, nodes: cyl.len() });
        }
        let a = num / den;
        let model: Vec<f64> = xn.iter().map(|x| a * x).collect();
        entries.push(DecayEntry {
            k,
            radius,
            a,
            b: Vec::new(),
            error: sup_error(u, &cyl, &model),
            step_exponent: None,
            resolved: false,
            nodes: cyl.len(),
        });
    }
    Ok(finish_report(DecayKind::Boundary, point, eta, entries, u.max_abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyRow {
    pub k: usize,
    pub increment: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyCheck {
    pub passed: bool,
    pub c1: f64,
    pub alpha: f64,
    /// Smallest constant for which every row passes.
    pub minimal_c1: f64,
    pub rows: Vec<CauchyRow>,
}

/// Geometric bounds on coefficient increments. Interior:
/// `|a_k - a_{k-1}| + eta^k |b_k - b_{k-1}| <= 2 C1 eta^{(k-1)(1+alpha)}`.
/// Boundary: `|a_k - a_{k-1}| <= C1 eta^{(k-1) alpha}`. A roundoff allowance
/// of `1e-12` times the coefficient scale is granted.
pub fn coefficient_cauchy_check(report: &DecayReport, c1: f64, alpha: f64) -> CauchyCheck {
    let eta = report.eta;
    let coef_scale =
        report.entries.iter().map(|e| e.b.iter().fold(e.a.abs(), |m, b| m.max(b.abs()))).fold(0.0f64, f64::max);
    let allowance = 1e-12 * (1.0 + coef_scale);
    let mut rows = Vec::new();
    let mut minimal_c1 = 0.0f64;
    for w in report.entries.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let k = cur.k as i32;
        let (increment, unit) = match report.kind {
            DecayKind::Interior => {
                let db = prev.b.iter().zip(&cur.b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                ((cur.a - prev.a).abs() + eta.powi(k) * db, 2.0 * eta.powf((k - 1) as f64 * (1.0 + alpha)))
            }
            DecayKind::Boundary => ((cur.a - prev.a).abs(), eta.powf((k - 1) as f64 * alpha)),
        };
        let bound = c1 * unit;
        minimal_c1 = minimal_c1.max((increment - allowance).max(0.0) / unit);
        rows.push(CauchyRow { k: cur.k, increment, bound, margin: bound + allowance - increment });
    }
    CauchyCheck { passed: rows.iter().all(|r| r.margin >= 0.0), c1, alpha, minimal_c1, rows }
}

/// Odd extension `u~(x', x_n, t) = -u(x', -x_n, t)` of half-space data to the
/// full lattice. The face is set to exactly zero.
pub fn odd_reflection(u: &GridFunction) -> Result<GridFunction, RegularityError> {
    check_face(u, REFLECTION_FACE_TOL * (1.0 + u.max_abs()))?;
    let half = u.grid();
    let full = half.full_space()?;
    let n = full.n_dim();
    let steps = full.space_steps();
    let mut data = Vec::with_capacity(full.node_count());
    let mut half_multi = vec![0usize; n];
    for level in 0..full.level_count() {
        let slice = u.level(level);
        for s in 0..full.space_count() {
            let m = full.multi_index(s);
            half_multi[..n - 1].copy_from_slice(&m[..n - 1]);
            let k = m[n - 1] as i64 - steps as i64;
            half_multi[n - 1] = k.unsigned_abs() as usize;
            let v = slice[half.space_flat(&half_multi)];
            data.push(match k.signum() {
                1 => v,
                -1 => -v,
                _ => 0.0,
            });
        }
    }
    Ok(GridFunction::from_data(full, data)?)
}

/// Restriction of full-lattice data to `x_n >= 0`.
pub fn restrict_to_half_space(u: &GridFunction) -> Result<GridFunction, RegularityError> {
    let full = u.grid();
    if full.half_space() || full.stagger() {
        return Err(RegularityError::InvalidParameter("restriction needs a full, unstaggered lattice".into()));
    }
    let half = Grid::new(GridSpec { half_space: true, ..*full.spec() })?;
    let n = full.n_dim();
    let steps = full.space_steps();
    let mut data = Vec::with_capacity(half.node_count());
    for level in 0..half.level_count() {
        let slice = u.level(level);
        for s in 0..half.space_count() {
            let mut m = half.multi_index(s);
            m[n - 1] += steps;
            data.push(slice[full.space_flat(&m)]);
        }
    }
    Ok(GridFunction::from_data(half, data)?)
}

fn aligned(grid: &Grid, center: &SpaceTimePoint, r: f64) -> bool {
    let ratio_ok = |num: f64, den: f64| {
        let q = num / den;
        q >= 1.0 - 1e-9 && (q - q.round()).abs() <= 1e-9 * q.round().max(1.0)
    };
    let spec = grid.spec();
    let inside_space = center.x.iter().enumerate().all(|(a, &c)| {
        let lower_ok = if grid.half_space() && a == grid.n_dim() - 1 {
            c == 0.0
        } else {
            c - r >= -spec.spatial_extent * (1.0 + 1e-12)
        };
        lower_ok && c + r <= spec.spatial_extent * (1.0 + 1e-12)
    });
    ratio_ok(r, grid.h())
        && ratio_ok(r * r, grid.tau())
        && inside_space
        && center.t - r * r >= -spec.time_extent * (1.0 + 1e-12)
}

fn valid_dyadic_radii(grid: &Grid, center: &SpaceTimePoint) -> Vec<f64> {
    (0..64).map(|k| 0.5f64.powi(k)).filter(|&r| r >= grid.h() && aligned(grid, center, r)).collect()
}

/// `v(y, s) = (u(x0 + r y, t0 + r^2 s) - L(x0 + r y)) / r^{1 + alpha}` on the
/// reference lattice `[-1, 1]^n x [-1, 0]` with steps `h / r`, `tau / r^2`,
/// where `(x0, t0)` is the fit's cylinder centre. Node values are transcribed
/// one to one.
pub fn rescale(u: &GridFunction, fit: &LinearFit, r: f64, alpha: f64) -> Result<GridFunction, RegularityError> {
    rescale_affine(u, &fit.cylinder.center, fit.a, &fit.b, r, alpha)
}

/// [`rescale`] with an explicit affine map `a + b.(x - x0)`.
pub fn rescale_affine(
    u: &GridFunction,
    center: &SpaceTimePoint,
    a: f64,
    b: &[f64],
    r: f64,
    alpha: f64,
) -> Result<GridFunction, RegularityError> {
    let grid = u.grid();
    if grid.stagger() {
        return Err(RegularityError::InvalidParameter("rescaling is not defined on staggered lattices".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) || !(r > 0.0 && r <= 1.0) {
        return Err(RegularityError::InvalidParameter(format!(
            "need r in (0, 1] and alpha in (0, 1], got {r}, {alpha}"
        )));
    }
    let origin = grid.node_of(center).ok_or_else(|| RegularityError::NotANode { x: center.x.clone(), t: center.t })?;
    if !aligned(grid, center, r) {
        return Err(RegularityError::Misaligned { radius: r, valid: valid_dyadic_radii(grid, center) });
    }
    let reference = Grid::new(GridSpec {
        n_dim: grid.n_dim(),
        h: grid.h() / r,
        tau: grid.tau() / (r * r),
        spatial_extent: 1.0,
        time_extent: 1.0,
        half_space: grid.half_space(),
        stagger: false,
    })?;
    let n = grid.n_dim();
    let steps = (r / grid.h()).round() as i64;
    let origin_multi = grid.multi_index(origin.space);
    let origin_level = origin.level as i64;
    let scale = r.powf(1.0 + alpha);
    let offsets: Vec<(usize, f64)> = (0..reference.space_count())
        .map(|s| {
            let m = reference.multi_index(s);
            let mut target = vec![0usize; n];
            let mut lin = a;
            for ax in 0..n {
                let signed = if reference.half_space() && ax == n - 1 { m[ax] as i64 } else { m[ax] as i64 - steps };
                target[ax] = (origin_multi[ax] as i64 + signed) as usize;
                lin += b[ax] * (grid.coord(ax, target[ax]) - center.x[ax]);
            }
            (grid.space_flat(&target), lin)
        })
        .collect();
    let mut data = Vec::with_capacity(reference.node_count());
    for level in 0..reference.level_count() {
        let src = (origin_level - reference.time_steps() as i64 + level as i64) as usize;
        let slice = u.level(src);
        data.extend(offsets.iter().map(|&(s, lin)| (slice[s] - lin) / scale));
    }
    Ok(GridFunction::from_data(reference, data)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C1aEstimate {
    /// Smallest `C` with `|u - L*| <= C (|x - x0| + sqrt|t - t0|)^{1 + alpha}`.
    pub seminorm: f64,
    pub alpha: f64,
    /// `L*(x) = u(x0, t0) + b.(x - x0)`, `b` from the finest admissible fit.
    pub value: f64,
    pub gradient: Vec<f64>,
    pub fit_radius: f64,
    pub nodes: usize,
}

/// Pointwise `C^{1, alpha}` seminorm at a lattice node, maximised over the
/// nodes of `Q_1(point)`.
pub fn pointwise_c1a_norm(
    u: &GridFunction,
    point: &SpaceTimePoint,
    alpha: f64,
) -> Result<C1aEstimate, RegularityError> {
    let grid = u.grid();
    let node = grid.node_of(point).ok_or_else(|| RegularityError::NotANode { x: point.x.clone(), t: point.t })?;
    let value = u.value(node);
    // finest dyadic cylinder that still supports an affine fit
    let mut fit = None;
    let mut r = 1.0;
    while r >= grid.h() {
        match cylinder_nodes(grid, point, r).map_err(RegularityError::from).and_then(|c| best_linear_fit(u, &c)) {
            Ok(f) => fit = Some(f),
            Err(_) => break,
        }
        r *= 0.5;
    }
    let (gradient, fit_radius) = match fit {
        Some(f) => (f.b, f.cylinder.radius),
        None => (vec![0.0; grid.n_dim()], 0.0),
    };
    let cyl = cylinder_nodes(grid, point, 1.0)?;
    let pts: Vec<Vec<f64>> = cyl.spatial.iter().map(|&s| grid.point(s)).collect();
    let seminorm = cyl
        .levels
        .par_iter()
        .map(|&l| {
            let slice = u.level(l);
            let dt = (grid.time(l) - point.t).abs().sqrt();
            cyl.spatial.iter().zip(&pts).fold(0.0f64, |m, (&s, x)| {
                let dx = x.iter().zip(&point.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let d = dx + dt;
                if d == 0.0 {
                    return m;
                }
                let lin = value + gradient.iter().zip(x).zip(&point.x).map(|((g, a), b)| g * (a - b)).sum::<f64>();
                m.max((slice[s] - lin).abs() / d.powf(1.0 + alpha))
            })
        })
        .reduce(|| 0.0, f64::max);
    Ok(C1aEstimate { seminorm, alpha, value, gradient, fit_radius, nodes: cyl.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalRow {
    pub index: usize,
    pub kind: DecayKind,
    pub point: SpaceTimePoint,
    pub alpha_est: Option<f64>,
    pub seminorm: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalReport {
    pub alpha: f64,
    pub rows: Vec<GlobalRow>,
    pub max_seminorm: f64,
    pub min_alpha_est: f64,
}

/// Seminorms and exponents at interior points (affine fits) and face points
/// (`a x_n` fits). Per-point failures are recorded in the row.
pub fn global_report(
    u: &GridFunction,
    alpha: f64,
    interior_points: &[SpaceTimePoint],
    boundary_points: &[SpaceTimePoint],
    eta: f64,
    depth: Option<usize>,
) -> Result<GlobalReport, RegularityError> {
    check_eta(eta)?;
    let depth = depth.unwrap_or_else(|| default_depth(u.grid(), eta));
    let jobs: Vec<(DecayKind, &SpaceTimePoint)> = interior_points
        .iter()
        .map(|p| (DecayKind::Interior, p))
        .chain(boundary_points.iter().map(|p| (DecayKind::Boundary, p)))
        .collect();
    let rows: Vec<GlobalRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(index, &(kind, point))| {
            let decay = match kind {
                DecayKind::Interior => decay_sequence(u, point, eta, depth),
                DecayKind::Boundary => boundary_decay_sequence_at(u, point, eta, depth, None),
            };
            let result = decay.and_then(|d| Ok((d.alpha_est, pointwise_c1a_norm(u, point, alpha)?.seminorm)));
            match result {
                Ok((a, s)) => {
                    GlobalRow { index, kind, point: point.clone(), alpha_est: Some(a), seminorm: Some(s), error: None }
                }
                Err(e) => GlobalRow {
                    index,
                    kind,
                    point: point.clone(),
                    alpha_est: None,
                    seminorm: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let max_seminorm = rows.iter().filter_map(|r| r.seminorm).fold(0.0, f64::max);
    let min_alpha_est = rows.iter().filter_map(|r| r.alpha_est).fold(1.0, f64::min);
    Ok(GlobalReport { alpha, rows, max_seminorm, min_alpha_est })
}
