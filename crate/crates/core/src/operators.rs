//! Pointwise differential operators and discrete solution-class checks.
//!
//! Operators act on a Hessian `M` (and, for the p-Laplacian, a gradient `q`):
//!
//! * `M+(M) = Lambda * sum(e_i > 0) + lambda * sum(e_i < 0)`,
//! * `M-(M) = lambda * sum(e_i > 0) + Lambda * sum(e_i < 0)`,
//! * `tr(a(q) M)` with `a(q) = I + (p - 2) q q^T / (|q|^2 + eps^2)`.
//!
//! The class checks evaluate backward time differences and centred Hessians
//! at every admissible node (spatially interior, above the bottom slice).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, GridFunction, NodeIndex, Stencil};
use crate::linalg::{eig_extremes, symmetric_eigenvalues, LinalgError, SymMatrix};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "singular gradient (Du = 0) at x = {x:?}, t = {t} with eps = 0; \
         use envelope_residuals or a positive eps"
    )]
    SingularGradient { x: Vec<f64>, t: f64 },
    #[error("dimension mismatch: matrix is {matrix}x{matrix}, vector has {vector} entries")]
    DimensionMismatch { matrix: usize, vector: usize },
    #[error("grid has no admissible node (needs an interior spatial node and two time levels)")]
    GridTooSmall,
    #[error("grids do not match")]
    GridMismatch,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Ellipticity constants `0 < lambda <= Lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair", into = "RawPair")]
pub struct EllipticityPair {
    lambda: f64,
    big_lambda: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    lambda: f64,
    #[serde(rename = "Lambda")]
    big_lambda: f64,
}

impl TryFrom<RawPair> for EllipticityPair {
    type Error = OperatorError;
    fn try_from(r: RawPair) -> Result<Self, Self::Error> {
        Self::new(r.lambda, r.big_lambda)
    }
}

impl From<EllipticityPair> for RawPair {
    fn from(e: EllipticityPair) -> Self {
        Self { lambda: e.lambda, big_lambda: e.big_lambda }
    }
}

impl EllipticityPair {
    pub fn new(lambda: f64, big_lambda: f64) -> Result<Self, OperatorError> {
        if !(lambda.is_finite() && big_lambda.is_finite() && lambda > 0.0 && lambda <= big_lambda) {
            return Err(OperatorError::InvalidParameter(format!(
                "ellipticity pair needs 0 < lambda <= Lambda, got ({lambda}, {big_lambda})"
            )));
        }
        Ok(Self { lambda, big_lambda })
    }

    /// `lambda = Lambda = 1`.
    pub fn unit() -> Self {
        Self { lambda: 1.0, big_lambda: 1.0 }
    }

    /// The pair `(min(p - 1, 1), max(p - 1, 1))` of the normalized p-Laplacian.
    pub fn for_p(p: f64) -> Result<Self, OperatorError> {
        PLaplaceParams::new(p, 0.0)?;
        Self::new((p - 1.0).min(1.0), (p - 1.0).max(1.0))
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn big_lambda(&self) -> f64 {
        self.big_lambda
    }
}

/// Exponent `p > 1` and regularization `eps >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct PLaplaceParams {
    p: f64,
    epsilon: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    p: f64,
    #[serde(default)]
    epsilon: f64,
}

impl TryFrom<RawParams> for PLaplaceParams {
    type Error = OperatorError;
    fn try_from(r: RawParams) -> Result<Self, Self::Error> {
        Self::new(r.p, r.epsilon)
    }
}

impl From<PLaplaceParams> for RawParams {
    fn from(p: PLaplaceParams) -> Self {
        Self { p: p.p, epsilon: p.epsilon }
    }
}

impl PLaplaceParams {
    pub fn new(p: f64, epsilon: f64) -> Result<Self, OperatorError> {
        if !(p.is_finite() && p > 1.0) {
            return Err(OperatorError::InvalidParameter(format!("p must lie in (1, inf), got {p}")));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(OperatorError::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")));
        }
        Ok(Self { p, epsilon })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// `M+` from precomputed eigenvalues.
pub fn pucci_plus_from_eigenvalues(values: &[f64], ell: &EllipticityPair) -> f64 {
    values.iter().map(|&e| if e > 0.0 { ell.big_lambda * e } else { ell.lambda * e }).sum()
}

/// `M-` from precomputed eigenvalues.
pub fn pucci_minus_from_eigenvalues(values: &[f64], ell: &EllipticityPair) -> f64 {
    values.iter().map(|&e| if e > 0.0 { ell.lambda * e } else { ell.big_lambda * e }).sum()
}

pub fn pucci_plus(m: &SymMatrix, ell: &EllipticityPair) -> Result<f64, OperatorError> {
    Ok(pucci_plus_from_eigenvalues(&symmetric_eigenvalues(m)?.values, ell))
}

pub fn pucci_minus(m: &SymMatrix, ell: &EllipticityPair) -> Result<f64, OperatorError> {
    Ok(pucci_minus_from_eigenvalues(&symmetric_eigenvalues(m)?.values, ell))
}

/// Both extremal operators from a single eigen-decomposition: `(M-, M+)`.
pub fn pucci_pair(m: &SymMatrix, ell: &EllipticityPair) -> Result<(f64, f64), OperatorError> {
    let values = symmetric_eigenvalues(m)?.values;
    Ok((pucci_minus_from_eigenvalues(&values, ell), pucci_plus_from_eigenvalues(&values, ell)))
}

fn norm_sq(q: &[f64]) -> f64 {
    q.iter().map(|v| v * v).sum()
}

/// Coefficient matrix `a^eps(q) = I + (p - 2) q q^T / (|q|^2 + eps^2)`.
pub fn p_laplace_coeff(q: &[f64], params: &PLaplaceParams) -> Result<SymMatrix, OperatorError> {
    let denom = norm_sq(q) + params.epsilon * params.epsilon;
    if denom == 0.0 {
        return Err(OperatorError::SingularGradient { x: Vec::new(), t: f64::NAN });
    }
    let c = (params.p - 2.0) / denom;
    Ok(SymMatrix::from_fn(q.len(), |i, j| if i == j { 1.0 + c * q[i] * q[j] } else { c * q[i] * q[j] }))
}

/// `tr(a^eps(q) M) = tr(M) + (p - 2) q.Mq / (|q|^2 + eps^2)`; errors when the
/// denominator vanishes.
pub fn regularized_p_laplacian(m: &SymMatrix, q: &[f64], params: &PLaplaceParams) -> Result<f64, OperatorError> {
    if q.len() != m.dim() {
        return Err(OperatorError::DimensionMismatch { matrix: m.dim(), vector: q.len() });
    }
    let denom = norm_sq(q) + params.epsilon * params.epsilon;
    if denom == 0.0 {
        return Err(OperatorError::SingularGradient { x: Vec::new(), t: f64::NAN });
    }
    Ok(m.trace() + (params.p - 2.0) * m.quadratic_form(q) / denom)
}

/// Exact normalized p-Laplacian `tr(M) + (p - 2) q.Mq / |q|^2` for `q != 0`.
pub fn normalized_p_laplacian(m: &SymMatrix, q: &[f64], p: f64) -> Result<f64, OperatorError> {
    regularized_p_laplacian(m, q, &PLaplaceParams::new(p, 0.0)?)
}

/// Operator values used by the viscosity tests of the normalized p-Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeValues {
    /// Value entering the subsolution test (`phi_t - value <= f`).
    pub sub_residual: f64,
    /// Value entering the supersolution test (`phi_t - value >= f`).
    pub super_residual: f64,
}

/// For `q != 0` both values equal the normalized p-Laplacian. At `q = 0`,
/// `tr(M) + (p - 2) e_max(M)` enters the subsolution test and
/// `tr(M) + (p - 2) e_min(M)` the supersolution test when `p >= 2`;
/// for `1 < p < 2` the extremes are swapped.
pub fn envelope_residuals(m: &SymMatrix, q: &[f64], p: f64) -> Result<EnvelopeValues, OperatorError> {
    PLaplaceParams::new(p, 0.0)?;
    if q.len() != m.dim() {
        return Err(OperatorError::DimensionMismatch { matrix: m.dim(), vector: q.len() });
    }
    if norm_sq(q) > 0.0 {
        let v = normalized_p_laplacian(m, q, p)?;
        return Ok(EnvelopeValues { sub_residual: v, super_residual: v });
    }
    let (e_min, e_max) = eig_extremes(m)?;
    let tr = m.trace();
    let (sub_e, super_e) = if p >= 2.0 { (e_max, e_min) } else { (e_min, e_max) };
    Ok(EnvelopeValues { sub_residual: tr + (p - 2.0) * sub_e, super_residual: tr + (p - 2.0) * super_e })
}

/// The operator families understood by the residual and the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Operator {
    /// `lambda * tr(M)`.
    Heat {
        lambda: f64,
    },
    PucciPlus(EllipticityPair),
    PucciMinus(EllipticityPair),
    /// Regularized normalized p-Laplacian.
    PLaplace(PLaplaceParams),
}

impl Operator {
    pub fn validate(&self) -> Result<(), OperatorError> {
        match self {
            Operator::Heat { lambda } if !(lambda.is_finite() && *lambda > 0.0) => {
                Err(OperatorError::InvalidParameter(format!("heat lambda must be positive, got {lambda}")))
            }
            _ => Ok(()),
        }
    }

    /// Largest ellipticity constant; sets the explicit time-step limit.
    pub fn effective_lambda(&self) -> f64 {
        match self {
            Operator::Heat { lambda } => *lambda,
            Operator::PucciPlus(e) | Operator::PucciMinus(e) => e.big_lambda,
            Operator::PLaplace(pp) => (pp.p - 1.0).max(1.0),
        }
    }

    /// The ellipticity pair of the class the operator belongs to.
    pub fn ellipticity(&self) -> Result<EllipticityPair, OperatorError> {
        match self {
            Operator::Heat { lambda } => EllipticityPair::new(*lambda, *lambda),
            Operator::PucciPlus(e) | Operator::PucciMinus(e) => Ok(*e),
            Operator::PLaplace(pp) => EllipticityPair::for_p(pp.p),
        }
    }

    /// Operator value at Hessian `m` and gradient `q`.
    #[inline]
    pub fn apply(&self, m: &SymMatrix, q: &[f64]) -> Result<f64, OperatorError> {
        match self {
            Operator::Heat { lambda } => Ok(lambda * m.trace()),
            Operator::PucciPlus(e) => Ok(pucci_plus_from_eigenvalues(&small_eigenvalues(m)?, e)),
            Operator::PucciMinus(e) => Ok(pucci_minus_from_eigenvalues(&small_eigenvalues(m)?, e)),
            Operator::PLaplace(pp) => regularized_p_laplacian(m, q, pp),
        }
    }

    pub fn needs_gradient(&self) -> bool {
        matches!(self, Operator::PLaplace(_))
    }
}

/// `M+` (`plus`) or `M-` without allocating for `n <= 2`; NaN if the
/// eigensolver fails.
pub(crate) fn pucci_value(m: &SymMatrix, ell: &EllipticityPair, plus: bool) -> f64 {
    let eval = |values: &[f64]| {
        if plus {
            pucci_plus_from_eigenvalues(values, ell)
        } else {
            pucci_minus_from_eigenvalues(values, ell)
        }
    };
    match m.dim() {
        1 => eval(&[m.get(0, 0)]),
        2 => eval(&closed_form_2x2(m)),
        _ => symmetric_eigenvalues(m).map(|r| eval(&r.values)).unwrap_or(f64::NAN),
    }
}

fn closed_form_2x2(m: &SymMatrix) -> [f64; 2] {
    let (a, b, c) = (m.get(0, 0), m.get(0, 1), m.get(1, 1));
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    [mean - rad, mean + rad]
}

/// Eigenvalues with a closed form for `n <= 2`.
fn small_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>, OperatorError> {
    match m.dim() {
        1 => Ok(vec![m.get(0, 0)]),
        2 => Ok(closed_form_2x2(m).to_vec()),
        _ => Ok(symmetric_eigenvalues(m)?.values),
    }
}

/// Outcome of a discrete class check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub passed: bool,
    /// Minimum over nodes of `(u_t - M-(D^2u)) + F` (class `S*`), or of
    /// `(u_t - M-(D^2u)) - f` (class `S`).
    pub worst_sub_slack: f64,
    pub worst_sub_node: NodeIndex,
    /// Minimum over nodes of `F - (u_t - M+(D^2u))` (class `S*`), or of
    /// `f - (u_t - M+(D^2u))` (class `S`).
    pub worst_super_slack: f64,
    pub worst_super_node: NodeIndex,
    pub tolerance: f64,
    /// `F`, or `max |f|` for the pointwise check.
    pub f_bound: f64,
    pub nodes_checked: usize,
}

impl ClassReport {
    /// The node of the smaller of the two slacks.
    pub fn worst_node(&self) -> NodeIndex {
        if self.worst_sub_slack <= self.worst_super_slack {
            self.worst_sub_node
        } else {
            self.worst_super_node
        }
    }
}

/// `10 (h + tau) (1 + max|u|)`.
pub fn default_tolerance(u: &GridFunction) -> f64 {
    10.0 * (u.grid().h() + u.grid().tau()) * (1.0 + u.max_abs())
}

#[derive(Clone, Copy)]
struct Worst {
    sub: f64,
    sub_at: usize,
    sup: f64,
    sup_at: usize,
    count: usize,
}

impl Worst {
    fn empty() -> Self {
        Self { sub: f64::INFINITY, sub_at: usize::MAX, sup: f64::INFINITY, sup_at: usize::MAX, count: 0 }
    }

    fn push(&mut self, flat: usize, sub: f64, sup: f64) {
        self.take_sub(flat, sub);
        self.take_sup(flat, sup);
        self.count += 1;
    }

    fn take_sub(&mut self, flat: usize, sub: f64) {
        if sub < self.sub || (sub == self.sub && flat < self.sub_at) {
            self.sub = sub;
            self.sub_at = flat;
        }
    }

    fn take_sup(&mut self, flat: usize, sup: f64) {
        if sup < self.sup || (sup == self.sup && flat < self.sup_at) {
            self.sup = sup;
            self.sup_at = flat;
        }
    }

    fn merge(mut self, other: Self) -> Self {
        if other.count > 0 {
            self.take_sub(other.sub_at, other.sub);
            self.take_sup(other.sup_at, other.sup);
            self.count += other.count;
        }
        self
    }
}

/// Runs `eval(level, space, hessian, u_t)` over all admissible nodes, returning
/// `(sub, super)` slack pairs reduced to their minima.
fn scan_slacks<F>(u: &GridFunction, eval: F) -> Result<Worst, OperatorError>
where
    F: Fn(usize, usize, &SymMatrix, f64) -> Result<(f64, f64), OperatorError> + Sync,
{
    let grid = u.grid();
    let interior = grid.interior_space_nodes();
    if interior.is_empty() || grid.level_count() < 2 {
        return Err(OperatorError::GridTooSmall);
    }
    let stencil = Stencil::new(grid);
    let inv_tau = 1.0 / grid.tau();
    let per_level: Vec<Result<Worst, OperatorError>> = (1..grid.level_count())
        .into_par_iter()
        .map(|level| {
            let cur = u.level(level);
            let prev = u.level(level - 1);
            let mut m = SymMatrix::zeros(grid.n_dim());
            let mut w = Worst::empty();
            for &s in &interior {
                stencil.hessian_at(cur, s, &mut m);
                let ut = (cur[s] - prev[s]) * inv_tau;
                let (sub, sup) = eval(level, s, &m, ut)?;
                w.push(grid.flat(NodeIndex { level, space: s }), sub, sup);
            }
            Ok(w)
        })
        .collect();
    let mut total = Worst::empty();
    for w in per_level {
        total = total.merge(w?);
    }
    Ok(total)
}

fn finish(u: &GridFunction, w: Worst, tolerance: f64, f_bound: f64) -> ClassReport {
    let grid = u.grid();
    ClassReport {
        passed: w.sub >= -tolerance && w.sup >= -tolerance,
        worst_sub_slack: w.sub,
        worst_sub_node: grid.node_at(w.sub_at),
        worst_super_slack: w.sup,
        worst_super_node: grid.node_at(w.sup_at),
        tolerance,
        f_bound,
        nodes_checked: w.count,
    }
}

/// Discrete membership in `S*(lambda, Lambda, f)` with `F = ||f||_inf`:
/// `u_t - M-(D^2u) >= -F - tol` and `u_t - M+(D^2u) <= F + tol` at every
/// admissible node. `tol` defaults to [`default_tolerance`].
pub fn class_membership(
    u: &GridFunction,
    ell: &EllipticityPair,
    f_bound: f64,
    tol: Option<f64>,
) -> Result<ClassReport, OperatorError> {
    if !(f_bound.is_finite() && f_bound >= 0.0) {
        return Err(OperatorError::InvalidParameter(format!("f_bound must be >= 0, got {f_bound}")));
    }
    let tolerance = resolve_tolerance(u, tol)?;
    let w = scan_slacks(u, |_, _, m, ut| {
        let values = small_eigenvalues(m)?;
        let minus = pucci_minus_from_eigenvalues(&values, ell);
        let plus = pucci_plus_from_eigenvalues(&values, ell);
        Ok(((ut - minus) + f_bound, f_bound - (ut - plus)))
    })?;
    Ok(finish(u, w, tolerance, f_bound))
}

/// Discrete membership in `S(lambda, Lambda, f)` for a pointwise right-hand side:
/// `u_t - M+(D^2u) <= f <= u_t - M-(D^2u)` at every admissible node.
pub fn solution_class_membership(
    u: &GridFunction,
    ell: &EllipticityPair,
    f: &GridFunction,
    tol: Option<f64>,
) -> Result<ClassReport, OperatorError> {
    if u.grid() != f.grid() {
        return Err(OperatorError::GridMismatch);
    }
    let tolerance = resolve_tolerance(u, tol)?;
    let w = scan_slacks(u, |level, s, m, ut| {
        let values = small_eigenvalues(m)?;
        let fv = f.level(level)[s];
        let minus = pucci_minus_from_eigenvalues(&values, ell);
        let plus = pucci_plus_from_eigenvalues(&values, ell);
        Ok(((ut - minus) - fv, fv - (ut - plus)))
    })?;
    Ok(finish(u, w, tolerance, f.max_abs()))
}

fn resolve_tolerance(u: &GridFunction, tol: Option<f64>) -> Result<f64, OperatorError> {
    match tol {
        None => Ok(default_tolerance(u)),
        Some(t) if t.is_finite() && t >= 0.0 => Ok(t),
        Some(t) => Err(OperatorError::InvalidParameter(format!("tolerance must be >= 0, got {t}"))),
    }
}

fn residual_field<F>(u: &GridFunction, f: &GridFunction, eval: F) -> Result<GridFunction, OperatorError>
where
    F: Fn(&SymMatrix, &[f64]) -> Result<f64, OperatorError>,
{
    if u.grid() != f.grid() {
        return Err(OperatorError::GridMismatch);
    }
    let grid = u.grid();
    let stencil = Stencil::new(grid);
    let interior = grid.interior_space_nodes();
    let mut out = vec![0.0; grid.node_count()];
    let mut m = SymMatrix::zeros(grid.n_dim());
    let mut q = vec![0.0; grid.n_dim()];
    for level in 1..grid.level_count() {
        let cur = u.level(level);
        let prev = u.level(level - 1);
        for &s in &interior {
            stencil.hessian_at(cur, s, &mut m);
            stencil.gradient_at(cur, s, &mut q);
            let node = NodeIndex { level, space: s };
            let value = eval(&m, &q).map_err(|e| match e {
                OperatorError::SingularGradient { .. } => {
                    let p = grid.node_point(node);
                    OperatorError::SingularGradient { x: p.x, t: p.t }
                }
                other => other,
            })?;
            out[grid.flat(node)] = (cur[s] - prev[s]) / grid.tau() - value - f.level(level)[s];
        }
    }
    Ok(GridFunction::from_data(grid.clone(), out)?)
}

/// `u_t - op(D^2u, Du) - f` at admissible nodes, zero elsewhere.
pub fn pde_residual(u: &GridFunction, op: &Operator, f: &GridFunction) -> Result<GridFunction, OperatorError> {
    op.validate()?;
    residual_field(u, f, |m, q| op.apply(m, q))
}

/// Residuals of the exact normalized p-Laplace equation, with the envelope
/// values at nodes where the discrete gradient vanishes: returns the
/// subsolution and supersolution residual fields.
pub fn envelope_pde_residuals(
    u: &GridFunction,
    p: f64,
    f: &GridFunction,
) -> Result<(GridFunction, GridFunction), OperatorError> {
    let sub = residual_field(u, f, |m, q| Ok(envelope_residuals(m, q, p)?.sub_residual))?;
    let sup = residual_field(u, f, |m, q| Ok(envelope_residuals(m, q, p)?.super_residual))?;
    Ok((sub, sup))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridSpec};
    use proptest::prelude::*;

    fn ell(l: f64, big: f64) -> EllipticityPair {
        EllipticityPair::new(l, big).unwrap()
    }

    fn sym(n: usize) -> impl Strategy<Value = SymMatrix> {
        proptest::collection::vec(-5.0f64..5.0, n * n).prop_map(move |v| SymMatrix::from_fn(n, |i, j| v[i * n + j]))
    }

    /// Brute-force sup/inf of tr(AM) over diagonal A in M's eigenbasis.
    fn box_search(values: &[f64], e: &EllipticityPair, step: f64) -> (f64, f64) {
        let k = ((e.big_lambda() - e.lambda()) / step).round() as usize;
        let grid: Vec<f64> = (0..=k).map(|i| e.lambda() + i as f64 * step).collect();
        let mut best = (f64::INFINITY, f64::NEG_INFINITY);
        fn walk(values: &[f64], grid: &[f64], i: usize, acc: f64, best: &mut (f64, f64)) {
            if i == values.len() {
                best.0 = best.0.min(acc);
                best.1 = best.1.max(acc);
                return;
            }
            for &a in grid {
                walk(values, grid, i + 1, acc + a * values[i], best);
            }
        }
        walk(values, &grid, 0, 0.0, &mut best);
        best
    }

    #[test]
    fn pucci_examples() {
        let z = SymMatrix::zeros(3);
        assert_eq!(pucci_plus(&z, &ell(1.0, 2.0)).unwrap(), 0.0);
        assert_eq!(pucci_minus(&z, &ell(1.0, 2.0)).unwrap(), 0.0);
        let m = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, -3.0]]).unwrap();
        assert!((pucci_plus(&m, &ell(1.0, 1.0)).unwrap() - m.trace()).abs() < 1e-12);
        assert!((pucci_minus(&m, &ell(1.0, 1.0)).unwrap() - m.trace()).abs() < 1e-12);
        let d = SymMatrix::from_diag(&[1.0, -1.0]);
        let e = ell(1.0, 2.0);
        let (lo, hi) = box_search(&[1.0, -1.0], &e, 1e-3);
        assert_eq!(pucci_plus(&d, &e).unwrap(), 1.0);
        assert_eq!(pucci_minus(&d, &e).unwrap(), -1.0);
        assert!((hi - 1.0).abs() < 1e-9 && (lo + 1.0).abs() < 1e-9);
    }

    #[test]
    fn pair_validation() {
        assert!(EllipticityPair::new(0.0, 1.0).is_err());
        assert!(EllipticityPair::new(2.0, 1.0).is_err());
        let e: EllipticityPair = serde_json::from_str(r#"{"lambda":1,"Lambda":1.2}"#).unwrap();
        assert_eq!(e.big_lambda(), 1.2);
        assert!(serde_json::from_str::<EllipticityPair>(r#"{"lambda":2,"Lambda":1}"#).is_err());
        assert!(PLaplaceParams::new(1.0, 0.1).is_err());
        assert!(PLaplaceParams::new(2.0, -0.1).is_err());
    }

    #[test]
    fn p_laplace_coeff_examples() {
        let pp = PLaplaceParams::new(3.0, 0.5).unwrap();
        assert_eq!(p_laplace_coeff(&[0.0, 0.0], &pp).unwrap(), SymMatrix::identity(2));
        let p2 = PLaplaceParams::new(2.0, 0.3).unwrap();
        assert_eq!(p_laplace_coeff(&[0.7, -1.1, 2.0], &p2).unwrap(), SymMatrix::identity(3));
        let one = PLaplaceParams::new(3.0, 1.0).unwrap();
        assert_eq!(p_laplace_coeff(&[1.0], &one).unwrap().get(0, 0), 1.5);
        let zero = PLaplaceParams::new(3.0, 0.0).unwrap();
        assert!(matches!(p_laplace_coeff(&[0.0], &zero), Err(OperatorError::SingularGradient { .. })));
    }

    #[test]
    fn normalized_examples() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, -0.5]]).unwrap();
        assert!((normalized_p_laplacian(&m, &[0.3, 0.4], 2.0).unwrap() - m.trace()).abs() < 1e-15);
        let two = SymMatrix::identity(3).scaled(2.0);
        let v = normalized_p_laplacian(&two, &[0.1, -2.0, 0.5], 3.5).unwrap();
        assert!((v - 2.0 * (3.0 + 3.5 - 2.0)).abs() < 1e-12);
        let d = SymMatrix::from_diag(&[4.0, -1.0, 2.0]);
        let v = normalized_p_laplacian(&d, &[1.0, 0.0, 0.0], 1.5).unwrap();
        assert!((v - (5.0 - 0.5 * 4.0)).abs() < 1e-12);
        assert!(normalized_p_laplacian(&d, &[0.0; 3], 1.5).is_err());
    }

    #[test]
    fn envelope_examples() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let e = envelope_residuals(&m, &[0.0, 0.0], 2.0).unwrap();
        assert_eq!((e.sub_residual, e.super_residual), (4.0, 4.0));
        let d = SymMatrix::from_diag(&[1.0, -1.0]);
        let e = envelope_residuals(&d, &[0.0, 0.0], 3.0).unwrap();
        assert_eq!((e.sub_residual, e.super_residual), (1.0, -1.0));
        let e = envelope_residuals(&d, &[0.0, 0.0], 1.5).unwrap();
        assert_eq!((e.sub_residual, e.super_residual), (0.5, -0.5));
        let e = envelope_residuals(&d, &[0.0, 1.0], 3.0).unwrap();
        assert_eq!(e.sub_residual, e.super_residual);
    }

    fn grid2(h: f64, tau: f64) -> Grid {
        Grid::new(GridSpec::unit(2, h, tau)).unwrap()
    }

    #[test]
    fn membership_examples() {
        let g = grid2(0.125, 0.125);
        let lin = GridFunction::sample(&g, |x, _| 0.375 - 1.5 * x[0] + 2.0 * x[1]).unwrap();
        let r = class_membership(&lin, &ell(1.0, 2.0), 0.0, None).unwrap();
        assert!(r.passed);
        assert_eq!((r.worst_sub_slack, r.worst_super_slack), (0.0, 0.0));
        assert_eq!(r.nodes_checked, 8 * 15 * 15);

        let sq = GridFunction::sample(&g, |x, _| x[1] * x[1]).unwrap();
        let r = class_membership(&sq, &EllipticityPair::unit(), 1.0, Some(1e-9)).unwrap();
        assert!(!r.passed);
        assert!((r.worst_sub_slack + 1.0).abs() < 1e-12);
        assert!((r.worst_super_slack - 3.0).abs() < 1e-12);
        // ties resolve to the lowest flat index
        assert_eq!(r.worst_sub_node, NodeIndex { level: 1, space: g.strides()[0] + 1 });
    }

    #[test]
    fn pointwise_class_implies_extended_class() {
        let g = grid2(0.125, 1.0 / 64.0);
        let u = GridFunction::sample(&g, |x, t| (x[0] + 0.3 * x[1]).sin() * (1.0 + t)).unwrap();
        let e = ell(1.0, 1.5);
        // f chosen between the two operator bounds: u_t - M+ <= f <= u_t - M-
        let stencil = Stencil::new(&g);
        let mut f = vec![0.0; g.node_count()];
        let mut m = SymMatrix::zeros(2);
        for level in 1..g.level_count() {
            for s in g.interior_space_nodes() {
                stencil.hessian_at(u.level(level), s, &mut m);
                let ut = (u.level(level)[s] - u.level(level - 1)[s]) / g.tau();
                let (minus, plus) = pucci_pair(&m, &e).unwrap();
                f[g.flat(NodeIndex { level, space: s })] = 0.5 * ((ut - plus) + (ut - minus));
            }
        }
        let f = GridFunction::from_data(g.clone(), f).unwrap();
        let s = solution_class_membership(&u, &e, &f, Some(1e-12)).unwrap();
        assert!(s.passed);
        let star = class_membership(&u, &e, f.max_abs(), Some(1e-12)).unwrap();
        assert!(star.passed);
    }

    #[test]
    fn residual_examples() {
        let g = grid2(0.125, 1.0 / 128.0);
        let lambda = 0.7;
        let u = GridFunction::sample(&g, |x, t| x[0] * x[0] + x[1] * x[1] + 4.0 * lambda * t).unwrap();
        let zero = GridFunction::sample(&g, |_, _| 0.0).unwrap();
        let r = pde_residual(&u, &Operator::Heat { lambda }, &zero).unwrap();
        assert!(r.max_abs() < 1e-10);

        let p = 2.6;
        let u = GridFunction::sample(&g, |x, t| x[0] * x[0] + x[1] * x[1] + 2.0 * (2.0 + p - 2.0) * t).unwrap();
        let exact = Operator::PLaplace(PLaplaceParams::new(p, 0.0).unwrap());
        assert!(matches!(pde_residual(&u, &exact, &zero), Err(OperatorError::SingularGradient { .. })));
        let (sub, sup) = envelope_pde_residuals(&u, p, &zero).unwrap();
        assert!(sub.max_abs() <= 1e-8 && sup.max_abs() <= 1e-8);

        let u = GridFunction::sample(&g, |_, t| t).unwrap();
        let one = GridFunction::sample(&g, |_, _| 1.0).unwrap();
        assert!(pde_residual(&u, &Operator::Heat { lambda }, &one).unwrap().max_abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn duality_homogeneity_subadditivity(m in sym(3), n in sym(3), c in 0.01f64..10.0) {
            let e = ell(0.7, 1.9);
            let plus = pucci_plus(&m, &e).unwrap();
            prop_assert!((pucci_minus(&m, &e).unwrap() + pucci_plus(&m.scaled(-1.0), &e).unwrap()).abs() <= 1e-12);
            prop_assert!((pucci_plus(&m.scaled(c), &e).unwrap() - c * plus).abs() <= 1e-10 * (1.0 + c * m.frobenius_norm()));
            prop_assert!(pucci_plus(&m.add(&n), &e).unwrap() <= plus + pucci_plus(&n, &e).unwrap() + 1e-10);
        }

        #[test]
        fn closed_form_small_eigenvalues_agree(m in sym(2)) {
            let fast = small_eigenvalues(&m).unwrap();
            let slow = symmetric_eigenvalues(&m).unwrap().values;
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + m.frobenius_norm()));
            }
        }

        #[test]
        fn coefficient_sandwich(q in proptest::collection::vec(-3.0f64..3.0, 1..5), p in 1.01f64..6.0) {
            prop_assume!(norm_sq(&q) > 1e-8);
            let a = p_laplace_coeff(&q, &PLaplaceParams::new(p, 0.0).unwrap()).unwrap();
            let (lo, hi) = eig_extremes(&a).unwrap();
            prop_assert!(lo >= (p - 1.0).min(1.0) - 1e-12);
            prop_assert!(hi <= (p - 1.0).max(1.0) + 1e-12);
        }

        #[test]
        fn eps_consistency(q in proptest::collection::vec(-3.0f64..3.0, 1..5), p in 1.01f64..6.0, eps in 0.0f64..1.0) {
            let q2 = norm_sq(&q);
            prop_assume!(q2 > 1e-4);
            let a0 = p_laplace_coeff(&q, &PLaplaceParams::new(p, 0.0).unwrap()).unwrap();
            let ae = p_laplace_coeff(&q, &PLaplaceParams::new(p, eps).unwrap()).unwrap();
            let diff = ae.add(&a0.scaled(-1.0)).frobenius_norm();
            prop_assert!(diff <= (p - 2.0).abs() * eps * eps / q2 + 1e-12);
        }

        #[test]
        fn affine_shift_is_invisible(a in -2.0f64..2.0, b0 in -2.0f64..2.0, b1 in -2.0f64..2.0) {
            let g = grid2(0.25, 1.0 / 16.0);
            let u = GridFunction::sample(&g, |x, t| (2.0 * x[0]).cos() * x[1] * x[1] + t * x[0]).unwrap();
            let shifted = u.minus_affine(a, &[b0, b1]);
            let e = ell(1.0, 1.3);
            let r1 = class_membership(&u, &e, 0.5, Some(1e-3)).unwrap();
            let r2 = class_membership(&shifted, &e, 0.5, Some(1e-3)).unwrap();
            prop_assert_eq!(r1.passed, r2.passed);
            // stencils of affine data cancel up to rounding in the sampled values
            prop_assert!((r1.worst_sub_slack - r2.worst_sub_slack).abs() <= 1e-9);
            prop_assert!((r1.worst_super_slack - r2.worst_super_slack).abs() <= 1e-9);
        }
    }
}
