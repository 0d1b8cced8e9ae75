//! Deterministic analysis points: Halton sequences snapped to lattice nodes.

use pucci_core::grid::{Grid, SpaceTimePoint};

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    value
}

fn halton(index: u64, dims: usize) -> Vec<f64> {
    assert!(dims <= PRIMES.len(), "at most {} Halton dimensions", PRIMES.len());
    PRIMES[..dims].iter().map(|&b| radical_inverse(index, b)).collect()
}

/// Nearest lattice node to `p` among nodes at least one step away from the
/// lateral edges (the face of a half-space lattice is allowed when
/// `allow_face`).
pub fn snap(grid: &Grid, p: &SpaceTimePoint, allow_face: bool) -> SpaceTimePoint {
    let n = grid.n_dim();
    let h = grid.h();
    let steps = grid.space_steps() as f64;
    let x =
        p.x.iter()
            .enumerate()
            .map(|(axis, &v)| {
                let last = axis == n - 1;
                let shift = if grid.stagger() && last { 0.5 } else { 0.0 };
                let len = grid.axis_len()[axis];
                let offset = if grid.half_space() && last { 0.0 } else { steps };
                let lo = if grid.half_space() && last && allow_face { 0 } else { 1 };
                let i = ((v / h - shift).round() + offset).clamp(lo as f64, (len - 2) as f64) as usize;
                grid.coord(axis, i)
            })
            .collect();
    let level = ((p.t / grid.tau()).round() + grid.time_steps() as f64).clamp(1.0, grid.time_steps() as f64) as usize;
    SpaceTimePoint::new(x, grid.time(level))
}

/// `count` interior points of `Q_region(0)`'s bounding box
/// `[-region, region]^n x [-region^2, 0]`, Halton indices `seed + 1 ..`.
pub fn sample_interior(grid: &Grid, count: usize, seed: u64, region: f64) -> Vec<SpaceTimePoint> {
    let n = grid.n_dim();
    (0..count as u64)
        .map(|i| {
            let u = halton(seed + i + 1, n + 1);
            let x = u[..n]
                .iter()
                .enumerate()
                .map(
                    |(axis, &v)| {
                        if grid.half_space() && axis == n - 1 {
                            v * region
                        } else {
                            (2.0 * v - 1.0) * region
                        }
                    },
                )
                .collect();
            snap(grid, &SpaceTimePoint::new(x, -u[n] * region * region), false)
        })
        .collect()
}

/// `count` face points `x_n = 0` of a half-space lattice.
pub fn sample_face(grid: &Grid, count: usize, seed: u64, region: f64) -> Vec<SpaceTimePoint> {
    let n = grid.n_dim();
    (0..count as u64)
        .map(|i| {
            let u = halton(seed + i + 1, n);
            let mut x: Vec<f64> = u[..n - 1].iter().map(|&v| (2.0 * v - 1.0) * region).collect();
            x.push(0.0);
            snap(grid, &SpaceTimePoint::new(x, -u[n - 1] * region * region), true)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use pucci_core::grid::GridSpec;

    #[test]
    fn radical_inverse_examples() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(6, 2), 0.375);
        assert!((radical_inverse(5, 3) - 7.0 / 9.0).abs() < 1e-15);
        assert_eq!(radical_inverse(0, 5), 0.0);
    }

    #[test]
    fn samples_are_nodes_inside_the_region() {
        let grid = Grid::new(GridSpec::unit(2, 1.0 / 16.0, 1.0 / 64.0)).unwrap();
        let pts = sample_interior(&grid, 25, 3, 0.5);
        assert_eq!(pts.len(), 25);
        for p in &pts {
            let node = grid.node_of(p).expect("snapped point is a node");
            assert!(grid.is_interior_space(node.space));
            assert!(p.x.iter().all(|v| v.abs() <= 0.5 + 1.0 / 32.0));
            assert!(p.t <= 0.0 && p.t >= -0.25 - 1.0 / 128.0);
        }
        assert_eq!(pts, sample_interior(&grid, 25, 3, 0.5));
        assert_ne!(pts, sample_interior(&grid, 25, 4, 0.5));
    }

    #[test]
    fn face_samples_sit_on_the_face() {
        let spec = GridSpec { half_space: true, ..GridSpec::unit(2, 1.0 / 16.0, 1.0 / 64.0) };
        let grid = Grid::new(spec).unwrap();
        for p in sample_face(&grid, 8, 0, 0.5) {
            assert_eq!(p.x[1], 0.0);
            assert!(grid.is_face(grid.node_of(&p).unwrap().space));
        }
    }

    #[test]
    fn snapping_respects_the_stagger() {
        let spec = GridSpec { stagger: true, ..GridSpec::unit(2, 0.125, 0.125) };
        let grid = Grid::new(spec).unwrap();
        let p = snap(&grid, &SpaceTimePoint::new(vec![0.01, 0.01], 0.0), false);
        assert_eq!(p.x, vec![0.0, 0.0625]);
        assert!(grid.node_of(&p).is_some());
    }

    proptest::proptest! {
        #[test]
        fn snapped_points_are_admissible_nodes(
            x in proptest::collection::vec(-2.0f64..2.0, 2),
            t in -2.0f64..1.0,
            half in proptest::bool::ANY,
        ) {
            let spec = GridSpec { half_space: half, ..GridSpec::unit(2, 0.125, 1.0 / 32.0) };
            let grid = Grid::new(spec).unwrap();
            let p = snap(&grid, &SpaceTimePoint::new(x, t), false);
            let node = grid.node_of(&p).unwrap();
            proptest::prop_assert!(grid.is_interior_space(node.space));
            proptest::prop_assert!(node.level >= 1);
        }
    }
}
