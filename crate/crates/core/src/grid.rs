//! Uniform space-time lattices over parabolic cylinders.
//!
//! A [`Grid`] covers `[-R, R]^n x [-T, 0]` with spatial step `h` and time
//! step `tau`. Two variants change the last spatial axis:
//!
//! * `half_space`: the last axis covers `[0, R]`, so the flat face
//!   `x_n = 0` lies on nodes;
//! * `stagger`: the last axis is shifted by `h/2`, so `x_n = 0` falls
//!   exactly between two node rows.
//!
//! Data are stored time-major, then row-major over the spatial axes
//! (axis 0 slowest).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SymMatrix;

/// Magic first line of a grid-function file.
pub const FILE_MAGIC: &str = "PUCCILAB1";
pub const INDEX_ORDER: &str = "time-major row-major";

const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{what} = {ratio} is not an integer")]
    NotAligned { what: &'static str, ratio: f64 },
    #[error("non-finite value {value} at node x = {x:?}, t = {t}")]
    NonFiniteSample { x: Vec<f64>, t: f64, value: f64 },
    #[error("data length {got} does not match node count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("degenerate cylinder: radius {radius} ({reason})")]
    DegenerateCylinder { radius: f64, reason: &'static str },
    #[error("stencil at x = {x:?}, t = {t} leaves the lattice")]
    BoundaryProximity { x: Vec<f64>, t: f64 },
    #[error("grids do not match")]
    GridMismatch,
    #[error("file format error: {0}")]
    Format(String),
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("missing endianness tag in header")]
    EndiannessMissing,
    #[error("truncated payload: header announces {expected} bytes, found {got}")]
    Truncated { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// User-facing grid parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_dim: usize,
    pub h: f64,
    pub tau: f64,
    #[serde(default = "one")]
    pub spatial_extent: f64,
    #[serde(default = "one")]
    pub time_extent: f64,
    #[serde(default)]
    pub half_space: bool,
    #[serde(default)]
    pub stagger: bool,
}

fn one() -> f64 {
    1.0
}

impl GridSpec {
    /// Lattice over `Q_1` (`R = T = 1`).
    pub fn unit(n_dim: usize, h: f64, tau: f64) -> Self {
        Self { n_dim, h, tau, spatial_extent: 1.0, time_extent: 1.0, half_space: false, stagger: false }
    }
}

/// A validated lattice. Cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    space_steps: usize,
    time_steps: usize,
    axis_len: Vec<usize>,
    strides: Vec<usize>,
    space_count: usize,
}

/// Position of a node: time level (0 is the bottom slice) and flat spatial index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeIndex {
    pub level: usize,
    pub space: usize,
}

/// A point `(x, t)` in space-time; not necessarily a lattice node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x, t }
    }

    pub fn origin(n_dim: usize) -> Self {
        Self { x: vec![0.0; n_dim], t: 0.0 }
    }
}

fn integer_ratio(num: f64, den: f64, what: &'static str) -> Result<usize, GridError> {
    let ratio = num / den;
    let rounded = ratio.round();
    if !(ratio.is_finite() && rounded >= 1.0 && (ratio - rounded).abs() <= ALIGN_TOL * rounded) {
        return Err(GridError::NotAligned { what, ratio });
    }
    Ok(rounded as usize)
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self, GridError> {
        if spec.n_dim == 0 {
            return Err(GridError::InvalidGrid("n_dim must be >= 1".into()));
        }
        for (name, v) in [
            ("h", spec.h),
            ("tau", spec.tau),
            ("spatial_extent", spec.spatial_extent),
            ("time_extent", spec.time_extent),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(GridError::InvalidGrid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if spec.half_space && spec.stagger {
            return Err(GridError::InvalidGrid("half_space and stagger are mutually exclusive".into()));
        }
        let space_steps = integer_ratio(spec.spatial_extent, spec.h, "spatial_extent / h")?;
        let time_steps = integer_ratio(spec.time_extent, spec.tau, "time_extent / tau")?;
        let n = spec.n_dim;
        let mut axis_len = vec![2 * space_steps + 1; n];
        if spec.half_space {
            axis_len[n - 1] = space_steps + 1;
        } else if spec.stagger {
            axis_len[n - 1] = 2 * space_steps;
        }
        let mut strides = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * axis_len[a + 1];
        }
        let space_count = axis_len.iter().product();
        Ok(Self { spec, space_steps, time_steps, axis_len, strides, space_count })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn n_dim(&self) -> usize {
        self.spec.n_dim
    }
    pub fn h(&self) -> f64 {
        self.spec.h
    }
    pub fn tau(&self) -> f64 {
        self.spec.tau
    }
    pub fn half_space(&self) -> bool {
        self.spec.half_space
    }
    pub fn stagger(&self) -> bool {
        self.spec.stagger
    }
    /// `R / h`.
    pub fn space_steps(&self) -> usize {
        self.space_steps
    }
    /// `T / tau`; the lattice has `time_steps + 1` levels.
    pub fn time_steps(&self) -> usize {
        self.time_steps
    }
    pub fn level_count(&self) -> usize {
        self.time_steps + 1
    }
    pub fn axis_len(&self) -> &[usize] {
        &self.axis_len
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
    pub fn space_count(&self) -> usize {
        self.space_count
    }
    pub fn node_count(&self) -> usize {
        self.space_count * self.level_count()
    }

    #[inline]
    pub fn flat(&self, node: NodeIndex) -> usize {
        node.level * self.space_count + node.space
    }

    #[inline]
    pub fn node_at(&self, flat: usize) -> NodeIndex {
        NodeIndex { level: flat / self.space_count, space: flat % self.space_count }
    }

    /// Signed lattice index of array position `i` on `axis`.
    #[inline]
    fn signed_index(&self, axis: usize, i: usize) -> i64 {
        if self.spec.half_space && axis == self.spec.n_dim - 1 {
            i as i64
        } else {
            i as i64 - self.space_steps as i64
        }
    }

    /// Coordinate of array position `i` on `axis`.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let k = self.signed_index(axis, i) as f64;
        if self.spec.stagger && axis == self.spec.n_dim - 1 {
            (k + 0.5) * self.spec.h
        } else {
            k * self.spec.h
        }
    }

    /// Array position on `axis` of the node with coordinate `x`, if any.
    pub fn axis_position(&self, axis: usize, x: f64) -> Option<usize> {
        let shift = if self.spec.stagger && axis == self.spec.n_dim - 1 { 0.5 } else { 0.0 };
        let k = x / self.spec.h - shift;
        let kr = k.round();
        if (k - kr).abs() > ALIGN_TOL * (1.0 + kr.abs()) {
            return None;
        }
        let offset = if self.spec.half_space && axis == self.spec.n_dim - 1 { 0 } else { self.space_steps as i64 };
        let i = kr as i64 + offset;
        (i >= 0 && (i as usize) < self.axis_len[axis]).then_some(i as usize)
    }

    /// Time of level `level`; the top level is `t = 0`.
    #[inline]
    pub fn time(&self, level: usize) -> f64 {
        (level as i64 - self.time_steps as i64) as f64 * self.spec.tau
    }

    /// Level index of time `t`, if `t` is a lattice time.
    pub fn level_of(&self, t: f64) -> Option<usize> {
        let k = t / self.spec.tau;
        let kr = k.round();
        if (k - kr).abs() > ALIGN_TOL * (1.0 + kr.abs()) {
            return None;
        }
        let level = kr as i64 + self.time_steps as i64;
        (level >= 0 && level as usize <= self.time_steps).then_some(level as usize)
    }

    /// Per-axis array positions of a flat spatial index.
    pub fn multi_index(&self, space: usize) -> Vec<usize> {
        let mut rest = space;
        self.strides
            .iter()
            .map(|&s| {
                let i = rest / s;
                rest %= s;
                i
            })
            .collect()
    }

    pub fn space_flat(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Spatial coordinates of a flat spatial index.
    pub fn point(&self, space: usize) -> Vec<f64> {
        self.multi_index(space).iter().enumerate().map(|(a, &i)| self.coord(a, i)).collect()
    }

    pub fn node_point(&self, node: NodeIndex) -> SpaceTimePoint {
        SpaceTimePoint { x: self.point(node.space), t: self.time(node.level) }
    }

    /// The lattice node located at `p`, if `p` is one.
    pub fn node_of(&self, p: &SpaceTimePoint) -> Option<NodeIndex> {
        if p.x.len() != self.spec.n_dim {
            return None;
        }
        let mut multi = Vec::with_capacity(p.x.len());
        for (a, &x) in p.x.iter().enumerate() {
            multi.push(self.axis_position(a, x)?);
        }
        Some(NodeIndex { level: self.level_of(p.t)?, space: self.space_flat(&multi) })
    }

    /// True when the node sits at least one step from every lattice edge,
    /// the face `x_n = 0` of a half-space lattice counting as an edge.
    pub fn is_interior_space(&self, space: usize) -> bool {
        self.multi_index(space).iter().zip(&self.axis_len).all(|(&i, &len)| i >= 1 && i + 1 < len)
    }

    /// True for nodes on the face `x_n = 0` of a half-space lattice.
    pub fn is_face(&self, space: usize) -> bool {
        self.spec.half_space && self.multi_index(space)[self.spec.n_dim - 1] == 0
    }

    /// Nodes whose values are prescribed by Dirichlet data in a solve:
    /// the bottom slice and every non-interior spatial node at every level.
    pub fn is_dirichlet(&self, node: NodeIndex) -> bool {
        node.level == 0 || !self.is_interior_space(node.space)
    }

    /// Flat indices of the interior spatial nodes, ascending.
    pub fn interior_space_nodes(&self) -> Vec<usize> {
        (0..self.space_count).filter(|&s| self.is_interior_space(s)).collect()
    }

    /// A lattice with the same steps and extents but without the
    /// half-space restriction.
    pub fn full_space(&self) -> Result<Grid, GridError> {
        Grid::new(GridSpec { half_space: false, ..self.spec })
    }
}

/// A scalar field sampled on every node of a [`Grid`]. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    data: Vec<f64>,
}

impl GridFunction {
    /// Wraps raw data after checking length and finiteness.
    pub fn from_data(grid: Grid, data: Vec<f64>) -> Result<Self, GridError> {
        if data.len() != grid.node_count() {
            return Err(GridError::LengthMismatch { expected: grid.node_count(), got: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let node = grid.node_at(pos);
            return Err(GridError::NonFiniteSample {
                x: grid.point(node.space),
                t: grid.time(node.level),
                value: data[pos],
            });
        }
        Ok(Self { grid, data })
    }

    /// Evaluates `field(x, t)` at every node.
    pub fn sample(grid: &Grid, field: impl Fn(&[f64], f64) -> f64) -> Result<Self, GridError> {
        let points: Vec<Vec<f64>> = (0..grid.space_count()).map(|s| grid.point(s)).collect();
        let mut data = Vec::with_capacity(grid.node_count());
        for level in 0..grid.level_count() {
            let t = grid.time(level);
            for x in &points {
                let v = field(x, t);
                if !v.is_finite() {
                    return Err(GridError::NonFiniteSample { x: x.clone(), t, value: v });
                }
                data.push(v);
            }
        }
        Ok(Self { grid: grid.clone(), data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn value(&self, node: NodeIndex) -> f64 {
        self.data[self.grid.flat(node)]
    }

    pub fn level(&self, level: usize) -> &[f64] {
        let n = self.grid.space_count();
        &self.data[level * n..(level + 1) * n]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self - (a + b.x)` at every node.
    pub fn minus_affine(&self, a: f64, b: &[f64]) -> Self {
        let g = &self.grid;
        let affine: Vec<f64> =
            (0..g.space_count()).map(|s| a + g.point(s).iter().zip(b).map(|(x, c)| x * c).sum::<f64>()).collect();
        let data =
            self.data.chunks(g.space_count()).flat_map(|lvl| lvl.iter().zip(&affine).map(|(u, l)| u - l)).collect();
        Self { grid: self.grid.clone(), data }
    }

    /// Nodewise `self - other`.
    pub fn difference(&self, other: &Self) -> Result<Self, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid.clone(), data })
    }

    /// `max |self - other|`.
    pub fn sup_distance(&self, other: &Self) -> Result<f64, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        Ok(self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Nodes of a discrete parabolic cylinder: the product of a spatial node set
/// and a run of time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderIndex {
    pub center: SpaceTimePoint,
    pub radius: f64,
    /// Flat spatial indices, ascending.
    pub spatial: Vec<usize>,
    /// Time levels, ascending.
    pub levels: Vec<usize>,
}

impl CylinderIndex {
    /// All nodes, ascending by flat index.
    pub fn nodes(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        self.levels.iter().flat_map(move |&level| self.spatial.iter().map(move |&space| NodeIndex { level, space }))
    }

    pub fn len(&self) -> usize {
        self.spatial.len() * self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, node: NodeIndex) -> bool {
        self.levels.binary_search(&node.level).is_ok() && self.spatial.binary_search(&node.space).is_ok()
    }
}

/// Nodes of `Q_r(center) = B_r(x0) x (t0 - r^2, t0]`: open ball in space,
/// half-open interval in time. On a half-space lattice only `x_n > 0` is kept
/// (the discrete `Q_r^+`).
pub fn cylinder_nodes(grid: &Grid, center: &SpaceTimePoint, r: f64) -> Result<CylinderIndex, GridError> {
    if center.x.len() != grid.n_dim() {
        return Err(GridError::GridMismatch);
    }
    if r.is_nan() || r < grid.h() {
        return Err(GridError::DegenerateCylinder { radius: r, reason: "radius below the lattice spacing" });
    }
    let n = grid.n_dim();
    // candidate ranges per axis
    let mut ranges = Vec::with_capacity(n);
    for a in 0..n {
        let (lo, hi) = (center.x[a] - r, center.x[a] + r);
        let idx: Vec<usize> = (0..grid.axis_len[a])
            .filter(|&i| {
                let x = grid.coord(a, i);
                x > lo && x < hi && !(grid.half_space() && a == n - 1 && x <= 0.0)
            })
            .collect();
        if idx.is_empty() {
            return Err(GridError::DegenerateCylinder { radius: r, reason: "no lattice node inside" });
        }
        ranges.push(idx);
    }
    let r2 = r * r;
    let mut spatial = Vec::new();
    let mut multi = vec![0usize; n];
    let mut cursor = vec![0usize; n];
    loop {
        let mut d2 = 0.0;
        for a in 0..n {
            multi[a] = ranges[a][cursor[a]];
            let d = grid.coord(a, multi[a]) - center.x[a];
            d2 += d * d;
        }
        if d2 < r2 {
            spatial.push(grid.space_flat(&multi));
        }
        // odometer increment, last axis fastest
        let mut a = n;
        let done = loop {
            if a == 0 {
                break true;
            }
            a -= 1;
            cursor[a] += 1;
            if cursor[a] < ranges[a].len() {
                break false;
            }
            cursor[a] = 0;
        };
        if done {
            break;
        }
    }
    spatial.sort_unstable();
    let t_lo = center.t - r2;
    let levels: Vec<usize> = (0..grid.level_count())
        .filter(|&l| {
            let t = grid.time(l);
            t > t_lo && t <= center.t
        })
        .collect();
    if spatial.is_empty() || levels.is_empty() {
        return Err(GridError::DegenerateCylinder { radius: r, reason: "no lattice node inside" });
    }
    Ok(CylinderIndex { center: center.clone(), radius: r, spatial, levels })
}

/// Parabolic boundary of the box cylinder `[-r, r]^n x [-r^2, 0]` centred at
/// the origin: the bottom slice `t = -r^2`, plus the lateral shell (outermost
/// lattice rows inside `[-r, r]` on some axis) for `-r^2 <= t < 0`. On a
/// half-space lattice the face `x_n = 0` is part of the lateral boundary. The
/// top slice `t = 0` is never included.
pub fn parabolic_boundary_nodes(grid: &Grid, r: f64) -> Result<Vec<NodeIndex>, GridError> {
    integer_ratio(r, grid.h(), "r / h")?;
    let bottom_steps = integer_ratio(r * r, grid.tau(), "r^2 / tau")?;
    if r > grid.spec.spatial_extent * (1.0 + ALIGN_TOL) || bottom_steps > grid.time_steps {
        return Err(GridError::GridMismatch);
    }
    let n = grid.n_dim();
    let inside = |a: usize, i: usize| grid.coord(a, i).abs() <= r * (1.0 + ALIGN_TOL);
    // outermost positions inside [-r, r] per axis
    let extremes: Vec<(usize, usize)> = (0..n)
        .map(|a| {
            let idx: Vec<usize> = (0..grid.axis_len[a]).filter(|&i| inside(a, i)).collect();
            (idx[0], idx[idx.len() - 1])
        })
        .collect();
    let mut box_nodes = Vec::new();
    let mut shell = Vec::new();
    for s in 0..grid.space_count {
        let m = grid.multi_index(s);
        if !m.iter().enumerate().all(|(a, &i)| inside(a, i)) {
            continue;
        }
        box_nodes.push(s);
        let on_shell = m.iter().enumerate().any(|(a, &i)| {
            let (lo, hi) = extremes[a];
            // on a half-space lattice the lowest row of x_n is the face
            i == lo || i == hi
        });
        if on_shell {
            shell.push(s);
        }
    }
    let bottom = grid.time_steps - bottom_steps;
    let mut out: Vec<NodeIndex> = box_nodes.iter().map(|&space| NodeIndex { level: bottom, space }).collect();
    for level in (bottom + 1)..grid.time_steps {
        out.extend(shell.iter().map(|&space| NodeIndex { level, space }));
    }
    out.sort_unstable();
    Ok(out)
}

/// Second-order centred difference stencils on one lattice.
///
/// The `*_at` methods take a single time slice and a flat spatial index and
/// assume the caller checked [`Grid::is_interior_space`].
#[derive(Debug, Clone)]
pub struct Stencil {
    strides: Vec<usize>,
    inv_h2: f64,
    inv_4h2: f64,
    inv_2h: f64,
}

impl Stencil {
    pub fn new(grid: &Grid) -> Self {
        let h = grid.h();
        Self { strides: grid.strides().to_vec(), inv_h2: 1.0 / (h * h), inv_4h2: 0.25 / (h * h), inv_2h: 0.5 / h }
    }

    pub fn dim(&self) -> usize {
        self.strides.len()
    }

    /// Writes the centred Hessian at `s` into `out`.
    #[inline]
    pub fn hessian_at(&self, slice: &[f64], s: usize, out: &mut SymMatrix) {
        let n = self.strides.len();
        let c = slice[s];
        for i in 0..n {
            let si = self.strides[i];
            out.set(i, i, (slice[s + si] - 2.0 * c + slice[s - si]) * self.inv_h2);
            for j in (i + 1)..n {
                let sj = self.strides[j];
                let cross = slice[s + si + sj] - slice[s + si - sj] - slice[s - si + sj] + slice[s - si - sj];
                out.set(i, j, cross * self.inv_4h2);
            }
        }
    }

    /// Writes the centred gradient at `s` into `out`.
    #[inline]
    pub fn gradient_at(&self, slice: &[f64], s: usize, out: &mut [f64]) {
        for (i, &si) in self.strides.iter().enumerate() {
            out[i] = (slice[s + si] - slice[s - si]) * self.inv_2h;
        }
    }

    /// Centred discrete Laplacian at `s`.
    #[inline]
    pub fn laplacian_at(&self, slice: &[f64], s: usize) -> f64 {
        let c = slice[s];
        self.strides.iter().map(|&si| slice[s + si] - 2.0 * c + slice[s - si]).sum::<f64>() * self.inv_h2
    }
}

fn check_stencil_node(u: &GridFunction, node: NodeIndex, need_previous_level: bool) -> Result<(), GridError> {
    let g = u.grid();
    let ok = node.level < g.level_count()
        && node.space < g.space_count()
        && g.is_interior_space(node.space)
        && (!need_previous_level || node.level >= 1);
    if ok {
        Ok(())
    } else {
        let p = g.node_point(NodeIndex {
            level: node.level.min(g.time_steps()),
            space: node.space.min(g.space_count() - 1),
        });
        Err(GridError::BoundaryProximity { x: p.x, t: p.t })
    }
}

/// Centred Hessian `D^2 u` at an interior node.
pub fn centered_hessian(u: &GridFunction, node: NodeIndex) -> Result<SymMatrix, GridError> {
    check_stencil_node(u, node, false)?;
    let mut m = SymMatrix::zeros(u.grid().n_dim());
    Stencil::new(u.grid()).hessian_at(u.level(node.level), node.space, &mut m);
    Ok(m)
}

/// Centred gradient `Du` at an interior node.
pub fn centered_gradient(u: &GridFunction, node: NodeIndex) -> Result<Vec<f64>, GridError> {
    check_stencil_node(u, node, false)?;
    let mut q = vec![0.0; u.grid().n_dim()];
    Stencil::new(u.grid()).gradient_at(u.level(node.level), node.space, &mut q);
    Ok(q)
}

/// First-order backward difference `(u(t) - u(t - tau)) / tau`.
pub fn backward_time_diff(u: &GridFunction, node: NodeIndex) -> Result<f64, GridError> {
    let g = u.grid();
    if node.level == 0 || node.level >= g.level_count() || node.space >= g.space_count() {
        let p = g.node_point(NodeIndex {
            level: node.level.min(g.time_steps()),
            space: node.space.min(g.space_count() - 1),
        });
        return Err(GridError::BoundaryProximity { x: p.x, t: p.t });
    }
    let prev = NodeIndex { level: node.level - 1, space: node.space };
    Ok((u.value(node) - u.value(prev)) / g.tau())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileHeader {
    n_dim: usize,
    h: f64,
    tau: f64,
    spatial_extent: f64,
    time_extent: f64,
    half_space: bool,
    stagger: bool,
    index_order: String,
    endianness: Option<String>,
    values: usize,
}

/// Writes `u` as `PUCCILAB1\n{json}\n<little-endian f64 payload>`.
pub fn write_gridfn(u: &GridFunction, path: impl AsRef<Path>) -> Result<(), GridError> {
    let spec = u.grid().spec();
    let header = FileHeader {
        n_dim: spec.n_dim,
        h: spec.h,
        tau: spec.tau,
        spatial_extent: spec.spatial_extent,
        time_extent: spec.time_extent,
        half_space: spec.half_space,
        stagger: spec.stagger,
        index_order: INDEX_ORDER.to_string(),
        endianness: Some("little".to_string()),
        values: u.data().len(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FILE_MAGIC.as_bytes())?;
    w.write_all(b"\n")?;
    serde_json::to_writer(&mut w, &header).map_err(|e| GridError::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    for v in u.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_gridfn(path: impl AsRef<Path>) -> Result<GridFunction, GridError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let first_nl =
        bytes.iter().position(|&b| b == b'\n').ok_or_else(|| GridError::Format("missing magic line".into()))?;
    if &bytes[..first_nl] != FILE_MAGIC.as_bytes() {
        return Err(GridError::Format(format!(
            "bad magic string {:?}",
            String::from_utf8_lossy(&bytes[..first_nl.min(32)])
        )));
    }
    let rest = &bytes[first_nl + 1..];
    let second_nl =
        rest.iter().position(|&b| b == b'\n').ok_or_else(|| GridError::Format("missing metadata line".into()))?;
    let header: FileHeader =
        serde_json::from_slice(&rest[..second_nl]).map_err(|e| GridError::HeaderMismatch(e.to_string()))?;
    match header.endianness.as_deref() {
        None => return Err(GridError::EndiannessMissing),
        Some("little") => {}
        Some(other) => return Err(GridError::HeaderMismatch(format!("unsupported endianness {other:?}"))),
    }
    if header.index_order != INDEX_ORDER {
        return Err(GridError::HeaderMismatch(format!("unsupported index order {:?}", header.index_order)));
    }
    let grid = Grid::new(GridSpec {
        n_dim: header.n_dim,
        h: header.h,
        tau: header.tau,
        spatial_extent: header.spatial_extent,
        time_extent: header.time_extent,
        half_space: header.half_space,
        stagger: header.stagger,
    })
    .map_err(|e| GridError::HeaderMismatch(e.to_string()))?;
    if header.values != grid.node_count() {
        return Err(GridError::HeaderMismatch(format!(
            "header announces {} values but the grid has {} nodes",
            header.values,
            grid.node_count()
        )));
    }
    let payload = &rest[second_nl + 1..];
    let expected = header.values * 8;
    if payload.len() < expected {
        return Err(GridError::Truncated { expected, got: payload.len() });
    }
    if payload.len() > expected {
        return Err(GridError::HeaderMismatch(format!("{} trailing bytes after payload", payload.len() - expected)));
    }
    let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    GridFunction::from_data(grid, data)
}
