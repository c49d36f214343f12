//! Test-only reference implementations shared by the integration suites.

#![allow(dead_code)]

use lupi::qp::QpProblem;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random convex QP with finite bounds and at most one equality row.
/// Roughly a third of the Hessians are rank deficient.
pub fn random_qp(seed: u64) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=20);
    let rank = if rng.random_bool(0.35) { rng.random_range(1..=n) } else { n };
    let b = DMatrix::from_fn(rank, n, |_, _| rng.random_range(-1.0..1.0));
    let mut h = b.transpose() * &b;
    h = (&h + h.transpose()) * 0.5;
    let f = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let lb = DVector::from_fn(n, |_, _| rng.random_range(-2.0..0.0));
    let ub = DVector::from_fn(n, |i, _| lb[i] + rng.random_range(0.2..3.0));
    let (aeq, beq) = if rng.random_bool(0.5) {
        let a = DMatrix::from_fn(1, n, |_, _| rng.random_range(-1.0..1.0));
        let inside = DVector::from_fn(n, |i, _| lb[i] + rng.random::<f64>() * (ub[i] - lb[i]));
        let b = &a * inside;
        (a, b)
    } else {
        (DMatrix::zeros(0, n), DVector::zeros(0))
    };
    QpProblem::new(h, f, aeq, beq, lb, ub).expect("well-formed problem")
}

/// Euclidean projection onto `{lb ≤ z ≤ ub, aᵀz = b}` (or the box alone).
pub fn project(v: &DVector<f64>, lb: &DVector<f64>, ub: &DVector<f64>, eq: Option<(&[f64], f64)>) -> DVector<f64> {
    let clamp = |theta: f64, a: &[f64]| DVector::from_fn(v.len(), |i, _| (v[i] - theta * a[i]).clamp(lb[i], ub[i]));
    let Some((a, b)) = eq else {
        return DVector::from_fn(v.len(), |i, _| v[i].clamp(lb[i], ub[i]));
    };
    // aᵀ·clamp(v − θa) is piecewise linear and non-increasing in θ; locate b
    // between two breakpoints and interpolate.
    let g = |theta: f64| -> f64 { clamp(theta, a).iter().zip(a).map(|(z, ai)| z * ai).sum() };
    let mut breaks: Vec<f64> = Vec::with_capacity(2 * v.len());
    for i in 0..v.len() {
        if a[i] != 0.0 {
            breaks.push((v[i] - lb[i]) / a[i]);
            breaks.push((v[i] - ub[i]) / a[i]);
        }
    }
    if breaks.is_empty() {
        return clamp(0.0, a);
    }
    breaks.sort_by(f64::total_cmp);
    let (mut lo, mut hi) = (0usize, breaks.len() - 1);
    if g(breaks[lo]) <= b {
        return clamp(breaks[lo], a);
    }
    if g(breaks[hi]) >= b {
        return clamp(breaks[hi], a);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if g(breaks[mid]) >= b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (t0, t1) = (breaks[lo], breaks[hi]);
    let (g0, g1) = (g(t0), g(t1));
    let theta = if g0 == g1 { t0 } else { t0 + (g0 - b) / (g0 - g1) * (t1 - t0) };
    clamp(theta, a)
}

/// Projected gradient with step `1/L`. Stops early only once the iterate no
/// longer changes at all in floating point.
pub fn projected_gradient(p: &QpProblem, max_iter: usize) -> (DVector<f64>, f64, usize) {
    assert!(p.aeq.nrows() <= 1, "oracle handles at most one equality row");
    let lmax = SymmetricEigen::new(p.h.clone()).eigenvalues.max().max(1e-12);
    let step = 1.0 / lmax;
    let row: Option<Vec<f64>> = (p.aeq.nrows() == 1).then(|| p.aeq.row(0).iter().copied().collect());
    let eq = row.as_deref().map(|a| (a, p.beq[0]));
    let mut z = project(&DVector::zeros(p.dim()), &p.lb, &p.ub, eq);
    let mut prev = z.clone();
    let mut iterations = max_iter;
    for k in 0..max_iter {
        let grad = &p.h * &z + &p.f;
        let next = project(&(&z - grad * step), &p.lb, &p.ub, eq);
        // A fixed point, or a two-cycle at the last bit.
        if next == z || next == prev {
            z = next;
            iterations = k + 1;
            break;
        }
        prev = std::mem::replace(&mut z, next);
    }
    let obj = p.objective(&z);
    (z, obj, iterations)
}
