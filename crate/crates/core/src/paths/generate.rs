//! Seeded random cycles and monotone paths for property sweeps.

use rand::Rng;

use super::{CyclePath, PathNode, ProcessPath};
use crate::scalar::Scalar;

pub const M_RANGE: (f64, f64) = (0.5, 1e3);
pub const SIGMA2_RANGE: (f64, f64) = (0.0, 100.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleShape {
    Rectangle,
    ConvexPolygon,
    Ellipse,
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random box `[m_lo, m_hi] × [s_lo, s_hi]` inside the sampling window.
fn random_box<R: Rng>(rng: &mut R) -> (f64, f64, f64, f64) {
    let (m0, m1) = M_RANGE;
    let a = log_uniform(rng, m0, m1);
    let b = log_uniform(rng, m0, m1);
    let (m_lo, m_hi) = if a < b { (a, b) } else { (b, a) };
    let (s0, s1) = SIGMA2_RANGE;
    let c = rng.random_range(s0..s1);
    let d = rng.random_range(s0..s1);
    let (s_lo, s_hi) = if c < d { (c, d) } else { (d, c) };
    // Occasionally pin the lower edge to the σ² = 0 axis.
    let s_lo = if rng.random_bool(0.15) { 0.0 } else { s_lo };
    (m_lo, m_hi.max(m_lo * 1.01), s_lo, s_hi.max(s_lo + 1e-3))
}

fn ring_in_box<R: Rng>(rng: &mut R, shape: CycleShape) -> Vec<(f64, f64)> {
    let (m_lo, m_hi, s_lo, s_hi) = random_box(rng);
    match shape {
        CycleShape::Rectangle => vec![(m_lo, s_lo), (m_hi, s_lo), (m_hi, s_hi), (m_lo, s_hi)],
        CycleShape::ConvexPolygon | CycleShape::Ellipse => {
            let n = if shape == CycleShape::Ellipse {
                rng.random_range(16..=64)
            } else {
                rng.random_range(3..=12)
            };
            let mut angles: Vec<f64> = if shape == CycleShape::Ellipse {
                (0..n).map(|i| std::f64::consts::TAU * i as f64 / n as f64).collect()
            } else {
                (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect()
            };
            angles.sort_by(f64::total_cmp);
            angles.dedup();
            let (cm, cs) = ((m_lo + m_hi) / 2.0, (s_lo + s_hi) / 2.0);
            let (rm, rs) = ((m_hi - m_lo) / 2.0, (s_hi - s_lo) / 2.0);
            angles
                .iter()
                .map(|t| (cm + rm * t.cos(), (cs + rs * t.sin()).max(0.0)))
                .collect()
        }
    }
}

/// A random simple cycle inside `m ∈ [0.5, 1e3]`, `σ² ∈ [0, 100]`, with
/// random orientation.
pub fn random_cycle<T: Scalar, R: Rng>(rng: &mut R, shape: CycleShape) -> CyclePath<T> {
    loop {
        let mut ring = ring_in_box(rng, shape);
        if ring.len() < 3 {
            continue;
        }
        if rng.random_bool(0.5) {
            ring.reverse();
        }
        let ring: Vec<(T, T)> = ring.into_iter().map(|(m, s)| (T::of(m), T::of(s))).collect();
        if let Ok(c) = CyclePath::from_ring(&ring) {
            return c;
        }
    }
}

/// Cycles through the three shapes in turn.
pub fn random_cycles<T: Scalar, R: Rng>(rng: &mut R, count: usize) -> Vec<CyclePath<T>> {
    const SHAPES: [CycleShape; 3] = [
        CycleShape::Rectangle,
        CycleShape::ConvexPolygon,
        CycleShape::Ellipse,
    ];
    (0..count)
        .map(|i| random_cycle(rng, SHAPES[i % 3]))
        .collect()
}

/// A cycle whose sampling-work measure `(σ²/m) dm` is non-negative
/// everywhere: it advances in `m` at positive variance and returns along the
/// `σ² = 0` axis.
pub fn random_sign_definite_cycle<T: Scalar, R: Rng>(rng: &mut R) -> CyclePath<T> {
    let (m_lo, m_hi, _, s_hi) = random_box(rng);
    let n = rng.random_range(2..=10);
    let mut ring = vec![(m_lo, 0.0)];
    for i in 0..=n {
        let m = m_lo + (m_hi - m_lo) * i as f64 / n as f64;
        ring.push((m, rng.random_range(0.05..=1.0) * s_hi));
    }
    ring.push((m_hi, 0.0));
    ring.dedup();
    let ring: Vec<(T, T)> = ring.into_iter().map(|(m, s)| (T::of(m), T::of(s))).collect();
    CyclePath::from_ring(&ring).expect("constructed closed and valid")
}

/// Random piecewise-linear path with strictly increasing `m` from `m_a` to
/// `m_b` and arbitrary non-negative variance profile bounded by `sigma2_max`.
pub fn random_monotone_path<T: Scalar, R: Rng>(
    rng: &mut R,
    m_a: f64,
    m_b: f64,
    n_nodes: usize,
    sigma2_max: f64,
) -> ProcessPath<T> {
    let n = n_nodes.max(2);
    let mut cuts: Vec<f64> = (0..n - 2).map(|_| rng.random_range(m_a..m_b)).collect();
    cuts.sort_by(f64::total_cmp);
    let mut ms = vec![m_a];
    ms.extend(cuts);
    ms.push(m_b);
    ms.dedup();
    let nodes = ms
        .into_iter()
        .map(|m| {
            let s = if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(0.0..=sigma2_max)
            };
            PathNode { m: T::of(m), sigma2: T::of(s) }
        })
        .collect();
    ProcessPath::new(nodes).expect("strictly increasing m")
}

/// Rescales every variance so that the path's sampling work equals `budget`.
/// Returns `None` for paths that do no work.
pub fn rescale_to_budget<T: Scalar>(path: &ProcessPath<T>, budget: T) -> Option<ProcessPath<T>> {
    let w = super::sampling_work(path);
    if !(w > T::zero()) {
        return None;
    }
    let k = budget / w;
    let nodes = path
        .nodes()
        .iter()
        .map(|n| PathNode { m: n.m, sigma2: n.sigma2 * k })
        .collect();
    ProcessPath::new(nodes).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::is_simple;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_cycles_are_valid_and_simple() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for c in random_cycles::<f64, _>(&mut rng, 60) {
            let ring: Vec<_> = c.path().nodes().iter().map(|n| (n.m, n.sigma2)).collect();
            assert!(is_simple(&ring));
            assert!(c.path().nodes().iter().all(|n| n.m >= 0.5 && n.sigma2 >= 0.0 && n.sigma2 <= 100.0));
        }
    }

    #[test]
    fn generator_is_reproducible() {
        let a: Vec<CyclePath<f64>> = random_cycles(&mut ChaCha8Rng::seed_from_u64(3), 10);
        let b: Vec<CyclePath<f64>> = random_cycles(&mut ChaCha8Rng::seed_from_u64(3), 10);
        assert_eq!(a, b);
    }
}
