//! Deterministic fixture generators used by the CLI, the tests and the
//! verification suite.

use crate::space::{MetricMeasureSpace, DEFAULT_MAX_POINTS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` unit-mass points at integer positions `0..n` on a line.
pub fn uniform_line(n: usize) -> MetricMeasureSpace {
    let coords = (0..n).map(|i| vec![i as f64]).collect();
    MetricMeasureSpace::new(
        (0..n as u64).collect(),
        Some(coords),
        None,
        vec![1.0; n],
        DEFAULT_MAX_POINTS,
    )
    .expect("uniform line is always valid")
}

/// Points `0..n` on a line with masses `2^{-i}`: a strongly non-uniform
/// measure that exercises the non-doubling cell machinery.
pub fn geometric_mass_line(n: usize) -> MetricMeasureSpace {
    let coords = (0..n).map(|i| vec![i as f64]).collect();
    let masses = (0..n).map(|i| 2f64.powi(-(i as i32))).collect();
    MetricMeasureSpace::new(
        (0..n as u64).collect(),
        Some(coords),
        None,
        masses,
        DEFAULT_MAX_POINTS,
    )
    .expect("geometric mass line is always valid")
}

/// `rows x cols` unit-spacing planar grid with unit masses.
pub fn planar_grid(rows: usize, cols: usize) -> MetricMeasureSpace {
    let mut coords = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            coords.push(vec![r as f64, c as f64]);
        }
    }
    MetricMeasureSpace::new(
        (0..(rows * cols) as u64).collect(),
        Some(coords),
        None,
        vec![1.0; rows * cols],
        DEFAULT_MAX_POINTS,
    )
    .expect("planar grid is always valid")
}

/// `n` points drawn uniformly from the unit square with masses in
/// `[0.5, 1.5]`. Coincident points are rejected by resampling so the result
/// is a genuine metric space; fully deterministic in `(n, seed)`.
pub fn random_cloud(n: usize, seed: u64) -> MetricMeasureSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords: Vec<Vec<f64>> = Vec::with_capacity(n);
    while coords.len() < n {
        let p = vec![rng.gen::<f64>(), rng.gen::<f64>()];
        if coords.iter().all(|q| q != &p) {
            coords.push(p);
        }
    }
    let masses = (0..n).map(|_| 0.5 + rng.gen::<f64>()).collect();
    MetricMeasureSpace::new(
        (0..n as u64).collect(),
        Some(coords),
        None,
        masses,
        DEFAULT_MAX_POINTS,
    )
    .expect("random cloud is always valid")
}

/// `2^depth` atoms at the left endpoints of the Cantor middle-thirds
/// construction at the given depth, each carrying mass `2^{-depth}`
/// (the natural self-similar measure restricted to the generation).
pub fn cantor_like_mass(depth: u32) -> MetricMeasureSpace {
    let count = 1usize << depth;
    let mut coords = Vec::with_capacity(count);
    for idx in 0..count {
        let mut x = 0.0f64;
        let mut scale = 1.0f64;
        for bit in (0..depth).rev() {
            scale /= 3.0;
            if idx >> bit & 1 == 1 {
                x += 2.0 * scale;
            }
        }
        coords.push(vec![x]);
    }
    let mass = 2f64.powi(-(depth as i32));
    MetricMeasureSpace::new(
        (0..count as u64).collect(),
        Some(coords),
        None,
        vec![mass; count],
        DEFAULT_MAX_POINTS,
    )
    .expect("cantor fixture is always valid")
}

/// The five named fixtures used throughout the verification suite.
pub fn named_fixtures() -> Vec<(&'static str, MetricMeasureSpace)> {
    vec![
        ("uniform-line-10", uniform_line(10)),
        ("geometric-mass-line-8", geometric_mass_line(8)),
        ("planar-grid-3x3", planar_grid(3, 3)),
        ("random-cloud-32", random_cloud(32, 7)),
        ("cantor-like-8", cantor_like_mass(3)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let a = random_cloud(32, 7);
        let b = random_cloud(32, 7);
        assert_eq!(a.masses(), b.masses());
        for i in 0..a.len() {
            for j in 0..a.len() {
                assert_eq!(a.dist(i, j), b.dist(i, j));
            }
        }
    }

    #[test]
    fn geometric_masses_match() {
        let s = geometric_mass_line(8);
        assert_eq!(s.mass(0), 1.0);
        assert_eq!(s.mass(7), 2f64.powi(-7));
    }

    #[test]
    fn cantor_positions_are_gapped() {
        let s = cantor_like_mass(3);
        assert_eq!(s.len(), 8);
        // adjacent left endpoints at generation 3 sit 2/27 apart
        assert!((s.dist(0, 1) - 2.0 / 27.0).abs() < 1e-15);
        assert!((s.total_mass() - 1.0).abs() < 1e-15);
    }
}
