//! Convex quadratic programs with box bounds and linear equalities:
//!
//! ```text
//! minimize    ½ zᵀHz + fᵀz
//! subject to  Aeq·z = beq,   lb ≤ z ≤ ub
//! ```
//!
//! [`solve`] runs a Mehrotra predictor-corrector interior point method, then a
//! primal active-set polish that moves bound-active variables exactly onto their
//! bounds. A point is only returned once [`verify_kkt`] accepts it.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub aeq: DMatrix<f64>,
    pub beq: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

impl QpProblem {
    /// Validated problem. Bounds may be infinite; `aeq` may have zero rows.
    pub fn new(
        h: DMatrix<f64>,
        f: DVector<f64>,
        aeq: DMatrix<f64>,
        beq: DVector<f64>,
        lb: DVector<f64>,
        ub: DVector<f64>,
    ) -> Result<Self> {
        let n = f.len();
        if n == 0 {
            return Err(Error::invalid("QP needs at least one variable"));
        }
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: h.nrows().max(h.ncols()) });
        }
        if aeq.ncols() != n || aeq.nrows() != beq.len() {
            return Err(Error::invalid("Aeq must be (beq.len() × n)"));
        }
        if lb.len() != n || ub.len() != n {
            return Err(Error::invalid("bounds must have one entry per variable"));
        }
        if h.iter().chain(f.iter()).chain(aeq.iter()).chain(beq.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("QP data must be finite"));
        }
        let scale = h.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (h[(i, j)] - h[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::invalid(format!("H is not symmetric at ({i}, {j})")));
                }
            }
            if lb[i].is_nan() || ub[i].is_nan() || lb[i] > ub[i] || lb[i] == f64::INFINITY || ub[i] == f64::NEG_INFINITY {
                return Err(Error::invalid(format!("invalid bounds at index {i}")));
            }
        }
        Ok(QpProblem { h, f, aeq, beq, lb, ub })
    }

    /// Problem without equality constraints.
    pub fn boxed(h: DMatrix<f64>, f: DVector<f64>, lb: DVector<f64>, ub: DVector<f64>) -> Result<Self> {
        let n = f.len();
        Self::new(h, f, DMatrix::zeros(0, n), DVector::zeros(0), lb, ub)
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn n_eq(&self) -> usize {
        self.aeq.nrows()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.f.dot(z)
    }
}

/// First-order optimality residuals of a candidate point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// Largest violation of `Hz + f − Aeqᵀμ` against the sign each bound state allows.
    pub stationarity_residual: f64,
    /// Largest bound violation or `|Aeq·z − beq|` entry.
    pub primal_feasibility: f64,
    /// Largest `multiplier × distance to bound` over bound-active variables.
    pub complementarity: f64,
    pub tolerance_used: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity_residual.max(self.primal_feasibility).max(self.complementarity)
    }

    pub fn passes(&self) -> bool {
        self.max_residual() <= self.tolerance_used
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub kkt: KktReport,
    /// Multipliers of the equality constraints (sign convention `Hz + f = Aeqᵀμ` on free variables).
    pub eq_multipliers: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BoundState {
    Free,
    Lower,
    Upper,
    Fixed,
}

fn classify(p: &QpProblem, z: &DVector<f64>, tol: f64) -> Vec<BoundState> {
    (0..p.dim())
        .map(|i| {
            let at_lo = z[i] - p.lb[i] <= tol;
            let at_up = p.ub[i] - z[i] <= tol;
            match (at_lo, at_up) {
                (true, true) => BoundState::Fixed,
                (true, false) => BoundState::Lower,
                (false, true) => BoundState::Upper,
                (false, false) => BoundState::Free,
            }
        })
        .collect()
}

fn stationarity_violation(state: BoundState, r: f64) -> f64 {
    match state {
        BoundState::Free => r.abs(),
        BoundState::Lower => (-r).max(0.0),
        BoundState::Upper => r.max(0.0),
        BoundState::Fixed => 0.0,
    }
}

fn reduced_gradient(p: &QpProblem, g: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    if p.n_eq() == 0 {
        g.clone()
    } else {
        g - p.aeq.tr_mul(y)
    }
}

fn max_stationarity(p: &QpProblem, g: &DVector<f64>, y: &DVector<f64>, states: &[BoundState]) -> f64 {
    let r = reduced_gradient(p, g, y);
    states.iter().zip(r.iter()).fold(0.0, |m, (&s, &ri)| m.max(stationarity_violation(s, ri)))
}

fn primal_feasibility(p: &QpProblem, z: &DVector<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..p.dim() {
        worst = worst.max(p.lb[i] - z[i]).max(z[i] - p.ub[i]);
    }
    if p.n_eq() > 0 {
        worst = worst.max((&p.aeq * z - &p.beq).amax());
    }
    worst
}

/// KKT residuals of `z` using the given equality multipliers.
fn report_with(p: &QpProblem, z: &DVector<f64>, y: &DVector<f64>, tol: f64) -> KktReport {
    let states = classify(p, z, tol);
    let g = &p.h * z + &p.f;
    let r = reduced_gradient(p, &g, y);
    let mut stationarity = 0.0f64;
    let mut complementarity = 0.0f64;
    for i in 0..p.dim() {
        stationarity = stationarity.max(stationarity_violation(states[i], r[i]));
        let gap = match states[i] {
            BoundState::Lower => (z[i] - p.lb[i]).abs(),
            BoundState::Upper => (p.ub[i] - z[i]).abs(),
            BoundState::Fixed => (z[i] - p.lb[i]).abs().min((p.ub[i] - z[i]).abs()),
            BoundState::Free => 0.0,
        };
        complementarity = complementarity.max(r[i].abs() * gap);
    }
    KktReport {
        stationarity_residual: stationarity,
        primal_feasibility: primal_feasibility(p, z).max(0.0),
        complementarity,
        tolerance_used: tol,
    }
}

/// Golden-section minimum of a convex function on `[lo, hi]`.
fn golden_min(mut lo: f64, mut hi: f64, iters: usize, f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Equality multipliers minimizing the stationarity violation at `z`.
///
/// Free variables pin the multipliers by least squares. Directions they leave
/// undetermined (at most two are searched) are resolved by minimizing the convex
/// piecewise-linear violation of the bound-active sign conditions.
fn recover_multipliers(p: &QpProblem, z: &DVector<f64>, tol: f64) -> DVector<f64> {
    let m = p.n_eq();
    if m == 0 {
        return DVector::zeros(0);
    }
    let states = classify(p, z, tol);
    let g = &p.h * z + &p.f;
    let free: Vec<usize> = (0..p.dim()).filter(|&i| states[i] == BoundState::Free).collect();

    let mut y0 = DVector::zeros(m);
    let mut null_dirs: Vec<DVector<f64>> = Vec::new();
    if free.is_empty() {
        null_dirs = (0..m).map(|k| DVector::from_fn(m, |i, _| if i == k { 1.0 } else { 0.0 })).collect();
    } else {
        // Rows of Aeqᵀ restricted to free variables.
        let at = DMatrix::from_fn(free.len(), m, |r, c| p.aeq[(c, free[r])]);
        let gf = DVector::from_fn(free.len(), |r, _| g[free[r]]);
        let svd = at.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let eps = smax * 1e-12 * (free.len().max(m) as f64);
        if let Ok(sol) = svd.solve(&gf, eps) {
            y0 = sol;
        }
        let v_t = svd.v_t.as_ref().expect("requested V");
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s <= eps {
                null_dirs.push(v_t.row(k).transpose());
            }
        }
        // Thin SVD returns min(rows, m) singular values; remaining directions are null too.
        if free.len() < m {
            let mut basis: Vec<DVector<f64>> = (0..v_t.nrows()).map(|k| v_t.row(k).transpose()).collect();
            for e in 0..m {
                let mut v = DVector::from_fn(m, |i, _| if i == e { 1.0 } else { 0.0 });
                for b in &basis {
                    let c = b.dot(&v);
                    v -= b * c;
                }
                if v.norm() > 1e-8 {
                    v /= v.norm();
                    basis.push(v.clone());
                    null_dirs.push(v);
                }
                if basis.len() == m {
                    break;
                }
            }
        }
    }
    if null_dirs.is_empty() || null_dirs.len() > 2 {
        return y0;
    }

    let phi = |y: &DVector<f64>| max_stationarity(p, &g, y, &states);
    // Bracket: every breakpoint of the piecewise-linear pieces lies within this radius.
    let r0 = reduced_gradient(p, &g, &y0);
    let mut radius = 1.0f64;
    for dir in &null_dirs {
        let slopes = p.aeq.tr_mul(dir);
        for i in 0..p.dim() {
            if slopes[i].abs() > 1e-300 {
                radius = radius.max((r0[i] / slopes[i]).abs());
            }
        }
    }
    let radius = 4.0 * radius * null_dirs.len() as f64 + 1.0;
    match null_dirs.as_slice() {
        [d] => {
            let (c, _) = golden_min(-radius, radius, 200, &|c| phi(&(&y0 + d * c)));
            &y0 + d * c
        }
        [d1, d2] => {
            let inner = |c1: f64| golden_min(-radius, radius, 120, &|c2| phi(&(&y0 + d1 * c1 + d2 * c2)));
            let (c1, _) = golden_min(-radius, radius, 120, &|c1| inner(c1).1);
            let (c2, _) = inner(c1);
            &y0 + d1 * c1 + d2 * c2
        }
        _ => unreachable!(),
    }
}

/// KKT residuals of an arbitrary point, with multipliers recovered from the active set.
pub fn verify_kkt(problem: &QpProblem, z: &DVector<f64>, tol: f64) -> KktReport {
    assert_eq!(z.len(), problem.dim(), "point dimension must match the problem");
    let y = recover_multipliers(problem, z, tol);
    report_with(problem, z, &y, tol)
}

/// Solve with the default tolerance and iteration budget (`100 × dimension`).
pub fn solve_default(problem: &QpProblem) -> Result<QpSolution> {
    solve(problem, DEFAULT_TOL, 100 * problem.dim())
}

/// Primal `z`, equality multipliers `y`, lower and upper bound multipliers.
type Iterate = (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>);

pub fn solve(problem: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let max_iter = max_iter.max(1);
    let h_work = convexified_hessian(&problem.h)?;
    check_feasible(problem, tol)?;

    let ipm = interior_point(problem, &h_work, tol, max_iter)?;
    let mut best: Option<(DVector<f64>, DVector<f64>, KktReport)> = None;
    let mut consider = |z: DVector<f64>, y: DVector<f64>| {
        let with_y = report_with(problem, &z, &y, tol);
        let recovered_y = recover_multipliers(problem, &z, tol);
        let recovered = report_with(problem, &z, &recovered_y, tol);
        let (y, report) = if recovered.max_residual() < with_y.max_residual() { (recovered_y, recovered) } else { (y, with_y) };
        let better = match &best {
            None => true,
            Some((_, _, b)) => match (report.passes(), b.passes()) {
                (true, false) => true,
                (false, true) => false,
                _ => report.max_residual() < b.max_residual(),
            },
        };
        if better {
            best = Some((z, y, report));
        }
    };

    let mut iterations = ipm.iterations;
    if let Some(polished) = polish(problem, &h_work, &ipm, tol, max_iter) {
        iterations += polished.iterations;
        consider(polished.z, polished.y);
    }
    // The polished point wins ties because it was offered first.
    consider(ipm.z.clone(), ipm.y.clone());

    let (z, y, kkt) = best.expect("at least one candidate");
    if !kkt.passes() {
        return Err(Error::NotConverged { iterations, residual: kkt.max_residual() });
    }
    Ok(QpSolution { objective: problem.objective(&z), z, iterations, kkt, eq_multipliers: y })
}

/// `H`, or `H + ridge·I` when rounding has made it slightly indefinite.
fn convexified_hessian(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    let sym = (h + h.transpose()) * 0.5;
    let scale = sym.amax().max(1.0);
    let probe = &sym + DMatrix::identity(n, n) * (1e-12 * scale);
    if Cholesky::new(probe).is_some() {
        return Ok(sym);
    }
    let min_eig = SymmetricEigen::new(sym.clone()).eigenvalues.min();
    if min_eig < -1e-8 * scale {
        return Err(Error::NotConvex { min_eigenvalue: min_eig });
    }
    let ridge = 1e-10 + (-min_eig).max(0.0);
    log::debug!("adding {ridge:e} ridge to a numerically indefinite Hessian");
    Ok(sym + DMatrix::identity(n, n) * ridge)
}

/// Fails fast when no point in the box satisfies the equalities.
fn check_feasible(p: &QpProblem, tol: f64) -> Result<()> {
    if p.n_eq() == 0 {
        return Ok(());
    }
    let clamp = |z: &DVector<f64>| DVector::from_fn(p.dim(), |i, _| z[i].clamp(p.lb[i], p.ub[i]));
    let residual = |z: &DVector<f64>| (&p.aeq * z - &p.beq).amax();
    let z0 = clamp(&DVector::zeros(p.dim()));
    if residual(&z0) <= tol {
        return Ok(());
    }
    let svd = p.aeq.clone().svd(true, true);
    if let Ok(ls) = svd.solve(&p.beq, 1e-12 * svd.singular_values.max().max(1.0)) {
        if residual(&clamp(&ls)) <= tol {
            return Ok(());
        }
    }
    // Phase one: minimize ½|Aeq z − beq|² over the box.
    let h = p.aeq.tr_mul(&p.aeq);
    let f = -p.aeq.tr_mul(&p.beq);
    let phase1 = QpProblem::boxed(h.clone(), f, p.lb.clone(), p.ub.clone())?;
    let sol = interior_point(&phase1, &h, tol * 1e-3, 200)?;
    let z = clamp(&sol.z);
    let res = residual(&z);
    if res > tol {
        return Err(Error::Infeasible { residual: res });
    }
    Ok(())
}

fn is_fixed(p: &QpProblem, i: usize) -> bool {
    p.lb[i].is_finite() && p.ub[i] - p.lb[i] <= 1e-14 * (1.0 + p.lb[i].abs())
}

struct IpmResult {
    z: DVector<f64>,
    y: DVector<f64>,
    lam: DVector<f64>,
    nu: DVector<f64>,
    iterations: usize,
}

fn cholesky_with_ridge(m: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let scale = m.amax().max(1.0);
    let mut ridge = 0.0;
    for _ in 0..12 {
        let trial = if ridge > 0.0 { &m + DMatrix::identity(n, n) * ridge } else { m.clone() };
        if let Some(c) = Cholesky::new(trial) {
            return Ok(c);
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 100.0 };
    }
    Err(Error::NotConvex { min_eigenvalue: f64::NAN })
}

/// Mehrotra predictor-corrector on the box/equality form. Variables with
/// `lb == ub` are held fixed and eliminated.
fn interior_point(p: &QpProblem, h: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<IpmResult> {
    let n = p.dim();
    let m = p.n_eq();
    let fixed: Vec<bool> = (0..n).map(|i| is_fixed(p, i)).collect();
    let vars: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let mut z_full = DVector::from_fn(n, |i, _| if fixed[i] { p.lb[i] } else { 0.0 });
    if vars.is_empty() {
        return Ok(IpmResult {
            z: z_full,
            y: DVector::zeros(m),
            lam: DVector::zeros(n),
            nu: DVector::zeros(n),
            iterations: 0,
        });
    }

    // Reduced problem over the non-fixed variables.
    let nv = vars.len();
    let hr = DMatrix::from_fn(nv, nv, |a, b| h[(vars[a], vars[b])]);
    let fixed_contrib = h * &z_full;
    let fr = DVector::from_fn(nv, |a, _| p.f[vars[a]] + fixed_contrib[vars[a]]);
    let ar = DMatrix::from_fn(m, nv, |r, a| p.aeq[(r, vars[a])]);
    let br = if m > 0 { &p.beq - &p.aeq * &z_full } else { DVector::zeros(0) };
    let lo = DVector::from_fn(nv, |a, _| p.lb[vars[a]]);
    let up = DVector::from_fn(nv, |a, _| p.ub[vars[a]]);
    let has_lo: Vec<bool> = lo.iter().map(|v| v.is_finite()).collect();
    let has_up: Vec<bool> = up.iter().map(|v| v.is_finite()).collect();
    let n_comp = has_lo.iter().chain(has_up.iter()).filter(|&&b| b).count();

    let mut z = DVector::from_fn(nv, |a, _| match (has_lo[a], has_up[a]) {
        (true, true) => 0.5 * (lo[a] + up[a]),
        (true, false) => lo[a] + 1.0,
        (false, true) => up[a] - 1.0,
        (false, false) => 0.0,
    });
    let g0 = &hr * &z + &fr;
    let init = g0.amax().max(1.0);
    let mut lam = DVector::from_fn(nv, |a, _| if has_lo[a] { init } else { 0.0 });
    let mut nu = DVector::from_fn(nv, |a, _| if has_up[a] { init } else { 0.0 });
    let mut y = DVector::zeros(m);

    let data_scale = hr.amax().max(fr.amax()).max(1.0);
    let eps_feas = (1e-3 * tol).min(1e-9) * data_scale;
    // Rounding floors each product near ulp(bound)·multiplier, so the target
    // grows with the box.
    let box_scale = lo.iter().chain(up.iter()).filter(|v| v.is_finite()).fold(1.0f64, |acc, v| acc.max(v.abs()));
    let eps_comp = (1e-3 * tol * tol).max(1e-15 * data_scale * box_scale);
    let unbounded_reg = 1e-10 * data_scale;

    let mut iterations = 0;
    let mut best_merit = f64::INFINITY;
    let mut stall = 0;
    // Late iterations can lose accuracy; keep the best iterate seen.
    let mut best_point: Option<(f64, Iterate)> = None;
    loop {
        let s = DVector::from_fn(nv, |a, _| if has_lo[a] { z[a] - lo[a] } else { 1.0 });
        let t = DVector::from_fn(nv, |a, _| if has_up[a] { up[a] - z[a] } else { 1.0 });
        let g = &hr * &z + &fr;
        let mut r_d = &g - &lam + &nu;
        if m > 0 {
            r_d -= ar.tr_mul(&y);
        }
        let r_p = if m > 0 { &ar * &z - &br } else { DVector::zeros(0) };
        let mut comp_max = 0.0f64;
        let mut comp_sum = 0.0;
        for a in 0..nv {
            if has_lo[a] {
                comp_max = comp_max.max(s[a] * lam[a]);
                comp_sum += s[a] * lam[a];
            }
            if has_up[a] {
                comp_max = comp_max.max(t[a] * nu[a]);
                comp_sum += t[a] * nu[a];
            }
        }
        let mu = if n_comp > 0 { comp_sum / n_comp as f64 } else { 0.0 };
        let rd = r_d.amax();
        let rp = if m > 0 { r_p.amax() } else { 0.0 };
        let score = (rd / eps_feas).max(rp / eps_feas).max(comp_max / eps_comp);
        if best_point.as_ref().is_none_or(|b| score < b.0) {
            best_point = Some((score, (z.clone(), y.clone(), lam.clone(), nu.clone())));
        }
        if score <= 1.0 || iterations >= max_iter {
            break;
        }
        // Average complementarity tracks progress; the worst pair can lag
        // behind for many iterations on wide boxes.
        let merit = rd.max(rp).max(mu);
        if merit < 0.9 * best_merit {
            best_merit = merit;
            stall = 0;
        } else {
            stall += 1;
            if stall >= 20 {
                break;
            }
        }
        iterations += 1;

        let mut mat = hr.clone();
        for a in 0..nv {
            let mut d = 0.0;
            if has_lo[a] {
                d += lam[a] / s[a];
            }
            if has_up[a] {
                d += nu[a] / t[a];
            }
            if !has_lo[a] && !has_up[a] {
                d += unbounded_reg;
            }
            mat[(a, a)] += d;
        }
        let chol = cholesky_with_ridge(mat)?;
        let minv_at = if m > 0 { chol.solve(&ar.transpose()) } else { DMatrix::zeros(nv, 0) };
        let schur = if m > 0 { &ar * &minv_at } else { DMatrix::zeros(0, 0) };
        let schur_lu = schur.clone().lu();

        // Direction for complementarity targets (rc_lo, rc_up).
        let newton = |rc_lo: &DVector<f64>, rc_up: &DVector<f64>| -> (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
            let mut q = -&r_d;
            for a in 0..nv {
                if has_lo[a] {
                    q[a] += rc_lo[a] / s[a];
                }
                if has_up[a] {
                    q[a] -= rc_up[a] / t[a];
                }
            }
            let minv_q = chol.solve(&q);
            let dy = if m > 0 {
                let rhs = -&r_p - &ar * &minv_q;
                schur_lu.solve(&rhs).unwrap_or_else(|| {
                    let svd = schur.clone().svd(true, true);
                    let eps = 1e-13 * svd.singular_values.max().max(1e-300);
                    svd.solve(&rhs, eps).unwrap_or_else(|_| DVector::zeros(m))
                })
            } else {
                DVector::zeros(0)
            };
            let dz = if m > 0 { &minv_q + &minv_at * &dy } else { minv_q };
            let dlam = DVector::from_fn(nv, |a, _| if has_lo[a] { (rc_lo[a] - lam[a] * dz[a]) / s[a] } else { 0.0 });
            let dnu = DVector::from_fn(nv, |a, _| if has_up[a] { (rc_up[a] + nu[a] * dz[a]) / t[a] } else { 0.0 });
            (dz, dy, dlam, dnu)
        };
        let max_step = |dz: &DVector<f64>, dlam: &DVector<f64>, dnu: &DVector<f64>| -> f64 {
            let mut alpha = 1.0f64;
            for a in 0..nv {
                if has_lo[a] {
                    if dz[a] < 0.0 {
                        alpha = alpha.min(-s[a] / dz[a]);
                    }
                    if dlam[a] < 0.0 {
                        alpha = alpha.min(-lam[a] / dlam[a]);
                    }
                }
                if has_up[a] {
                    if dz[a] > 0.0 {
                        alpha = alpha.min(t[a] / dz[a]);
                    }
                    if dnu[a] < 0.0 {
                        alpha = alpha.min(-nu[a] / dnu[a]);
                    }
                }
            }
            alpha
        };

        let rc_lo_aff = DVector::from_fn(nv, |a, _| if has_lo[a] { -s[a] * lam[a] } else { 0.0 });
        let rc_up_aff = DVector::from_fn(nv, |a, _| if has_up[a] { -t[a] * nu[a] } else { 0.0 });
        let (dz_a, _, dlam_a, dnu_a) = newton(&rc_lo_aff, &rc_up_aff);
        let alpha_aff = max_step(&dz_a, &dlam_a, &dnu_a);
        let sigma = if n_comp > 0 && mu > 0.0 {
            let mut sum = 0.0;
            for a in 0..nv {
                if has_lo[a] {
                    sum += (s[a] + alpha_aff * dz_a[a]) * (lam[a] + alpha_aff * dlam_a[a]);
                }
                if has_up[a] {
                    sum += (t[a] - alpha_aff * dz_a[a]) * (nu[a] + alpha_aff * dnu_a[a]);
                }
            }
            let mu_aff = sum / n_comp as f64;
            (mu_aff / mu).powi(3).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let rc_lo = DVector::from_fn(nv, |a, _| {
            if has_lo[a] {
                sigma * mu - s[a] * lam[a] - dz_a[a] * dlam_a[a]
            } else {
                0.0
            }
        });
        let rc_up = DVector::from_fn(nv, |a, _| {
            if has_up[a] {
                sigma * mu - t[a] * nu[a] + dz_a[a] * dnu_a[a]
            } else {
                0.0
            }
        });
        let (dz, dy, dlam, dnu) = newton(&rc_lo, &rc_up);
        let tau = (1.0 - mu.min(0.005)).max(0.99);
        let alpha = (tau * max_step(&dz, &dlam, &dnu)).min(1.0);
        z += &dz * alpha;
        if m > 0 {
            y += &dy * alpha;
        }
        lam += &dlam * alpha;
        nu += &dnu * alpha;
        // Keep strictly interior despite rounding.
        for a in 0..nv {
            if has_lo[a] && z[a] <= lo[a] {
                z[a] = lo[a] + f64::EPSILON * (1.0 + lo[a].abs());
            }
            if has_up[a] && z[a] >= up[a] {
                z[a] = up[a] - f64::EPSILON * (1.0 + up[a].abs());
            }
            if has_lo[a] {
                lam[a] = lam[a].max(1e-300);
            }
            if has_up[a] {
                nu[a] = nu[a].max(1e-300);
            }
        }
    }

    if let Some((_, (bz, by, blam, bnu))) = best_point {
        (z, y, lam, nu) = (bz, by, blam, bnu);
    }
    let mut lam_full = DVector::zeros(n);
    let mut nu_full = DVector::zeros(n);
    for (a, &i) in vars.iter().enumerate() {
        z_full[i] = z[a];
        lam_full[i] = lam[a];
        nu_full[i] = nu[a];
    }
    Ok(IpmResult { z: z_full, y, lam: lam_full, nu: nu_full, iterations })
}

struct Polished {
    z: DVector<f64>,
    y: DVector<f64>,
    iterations: usize,
}

/// Solve the equality-constrained subproblem on the free variables for a step
/// `p` and multipliers `y`: `H_FF p − A_Fᵀ y = −g_F`, `A_F p = −r_p`.
fn eqp_step(
    p: &QpProblem,
    h: &DMatrix<f64>,
    free: &[usize],
    g: &DVector<f64>,
    r_p: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let nf = free.len();
    let m = p.n_eq();
    let size = nf + m;
    let mut kkt = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            kkt[(a, b)] = h[(i, j)];
        }
        for r in 0..m {
            kkt[(a, nf + r)] = -p.aeq[(r, i)];
            kkt[(nf + r, a)] = p.aeq[(r, i)];
        }
        rhs[a] = -g[i];
    }
    for r in 0..m {
        rhs[nf + r] = -r_p[r];
    }
    let scale = kkt.amax().max(1.0);
    let solved = kkt.clone().lu().solve(&rhs).filter(|x| {
        x.iter().all(|v| v.is_finite()) && (&kkt * x - &rhs).amax() <= 1e-9 * scale * (1.0 + rhs.amax())
    });
    let x = match solved {
        Some(x) => x,
        None => {
            let svd = kkt.svd(true, true);
            let eps = 1e-12 * svd.singular_values.max().max(1e-300);
            svd.solve(&rhs, eps).ok()?
        }
    };
    let step = x.rows(0, nf).into_owned();
    let y = x.rows(nf, m).into_owned();
    Some((step, y))
}

/// Primal active-set iterations started from the interior point, with the
/// initial working set guessed from the complementarity pairs.
fn polish(p: &QpProblem, h: &DMatrix<f64>, ipm: &IpmResult, tol: f64, max_iter: usize) -> Option<Polished> {
    let n = p.dim();
    let m = p.n_eq();
    let mut state: Vec<BoundState> = (0..n)
        .map(|i| {
            let s = ipm.z[i] - p.lb[i];
            let t = p.ub[i] - ipm.z[i];
            if is_fixed(p, i) {
                BoundState::Fixed
            } else if p.lb[i].is_finite() && s < ipm.lam[i] {
                BoundState::Lower
            } else if p.ub[i].is_finite() && t < ipm.nu[i] {
                BoundState::Upper
            } else {
                BoundState::Free
            }
        })
        .collect();
    let mut z = ipm.z.clone();
    let snap = |z: &mut DVector<f64>, state: &[BoundState]| {
        for i in 0..n {
            match state[i] {
                BoundState::Lower | BoundState::Fixed => z[i] = p.lb[i],
                BoundState::Upper => z[i] = p.ub[i],
                BoundState::Free => {}
            }
        }
    };
    snap(&mut z, &state);

    let scale = h.amax().max(p.f.amax()).max(1.0);
    let step_eps = 1e-13 * (1.0 + z.amax());
    let limit = max_iter.min(3 * n + 20);
    for iter in 0..limit {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == BoundState::Free).collect();
        let g = h * &z + &p.f;
        let r_p = if m > 0 { &p.aeq * &z - &p.beq } else { DVector::zeros(0) };
        let (step, y_new) = if free.is_empty() {
            (DVector::zeros(0), recover_multipliers(p, &z, 0.0))
        } else {
            eqp_step(p, h, &free, &g, &r_p)?
        };
        let y = y_new;

        if step.is_empty() || step.amax() <= step_eps {
            // Stationary on the working set: check multiplier signs.
            let r = reduced_gradient(p, &g, &y);
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..n {
                let viol = match state[i] {
                    BoundState::Lower => -r[i],
                    BoundState::Upper => r[i],
                    _ => 0.0,
                };
                if viol > 1e-3 * tol.min(1e-6) * scale && worst.is_none_or(|(_, w)| viol > w) {
                    worst = Some((i, viol));
                }
            }
            match worst {
                None => return Some(Polished { z, y, iterations: iter + 1 }),
                Some((i, _)) => state[i] = BoundState::Free,
            }
            continue;
        }

        // Ratio test along the step.
        let mut alpha = 1.0f64;
        let mut blocking: Option<(usize, BoundState)> = None;
        for (a, &i) in free.iter().enumerate() {
            let d = step[a];
            if d < 0.0 && p.lb[i].is_finite() {
                let lim = (p.lb[i] - z[i]) / d;
                if lim < alpha {
                    alpha = lim.max(0.0);
                    blocking = Some((i, BoundState::Lower));
                }
            } else if d > 0.0 && p.ub[i].is_finite() {
                let lim = (p.ub[i] - z[i]) / d;
                if lim < alpha {
                    alpha = lim.max(0.0);
                    blocking = Some((i, BoundState::Upper));
                }
            }
        }
        for (a, &i) in free.iter().enumerate() {
            z[i] += alpha * step[a];
            z[i] = z[i].clamp(p.lb[i], p.ub[i]);
        }
        if let Some((i, bound)) = blocking {
            state[i] = bound;
            snap(&mut z, &state);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn interior_unconstrained_minimum() {
        let p = QpProblem::boxed(DMatrix::identity(2, 2), dv(&[-1.0, -1.0]), dv(&[0.0, 0.0]), dv(&[10.0, 10.0])).unwrap();
        let sol = solve_default(&p).unwrap();
        assert_abs_diff_eq!(sol.z[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.z[1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.objective, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn origin_is_optimal() {
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            dv(&[0.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            dv(&[0.0]),
            dv(&[0.0, 0.0]),
            dv(&[1.0, 1.0]),
        )
        .unwrap();
        let sol = solve_default(&p).unwrap();
        assert_abs_diff_eq!(sol.z.amax(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn equality_coupled_minimum() {
        // With z1 = z2 = t the objective is 2t² − 2t, minimized at t = 1/2.
        let p = QpProblem::new(
            DMatrix::identity(2, 2) * 2.0,
            dv(&[-1.0, -1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            dv(&[0.0]),
            dv(&[0.0, 0.0]),
            dv(&[1.0, 1.0]),
        )
        .unwrap();
        let sol = solve(&p, 1e-8, 200).unwrap();
        assert_abs_diff_eq!(sol.z[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.z[1], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.objective, -0.5, epsilon = 1e-9);
        let report = verify_kkt(&p, &sol.z, 1e-8);
        assert!(report.passes(), "{report:?}");
    }

    #[test]
    fn verify_flags_bound_violation_and_nonstationarity() {
        let p = QpProblem::boxed(DMatrix::identity(2, 2), dv(&[-1.0, -1.0]), dv(&[0.0, 0.0]), dv(&[10.0, 10.0])).unwrap();
        let outside = verify_kkt(&p, &dv(&[-0.1, 1.0]), 1e-8);
        assert!(outside.primal_feasibility >= 0.1 - 1e-15);

        // Interior point (3, 2): gradient Hz + f = (2, 1).
        let r = verify_kkt(&p, &dv(&[3.0, 2.0]), 1e-8);
        assert_abs_diff_eq!(r.stationarity_residual, 2.0, epsilon = 1e-12);
        assert!(!r.passes());
    }

    #[test]
    fn detects_infeasible_equalities() {
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            dv(&[0.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            dv(&[5.0]),
            dv(&[0.0, 0.0]),
            dv(&[1.0, 1.0]),
        )
        .unwrap();
        assert!(matches!(solve_default(&p), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn rejects_bad_problems() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(QpProblem::boxed(asym, dv(&[0.0, 0.0]), dv(&[0.0, 0.0]), dv(&[1.0, 1.0])).is_err());
        assert!(QpProblem::boxed(DMatrix::identity(2, 2), dv(&[0.0, 0.0]), dv(&[1.0, 0.0]), dv(&[0.0, 1.0])).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let p = QpProblem::boxed(indefinite, dv(&[0.0, 0.0]), dv(&[-1.0, -1.0]), dv(&[1.0, 1.0])).unwrap();
        assert!(matches!(solve_default(&p), Err(Error::NotConvex { .. })));
    }

    #[test]
    fn fixed_and_unbounded_variables() {
        // z0 fixed at 2, z1 free on the real line: minimum of ½(z0² + z1²) − z1 with z0 = 2.
        let p = QpProblem::boxed(
            DMatrix::identity(2, 2),
            dv(&[0.0, -1.0]),
            dv(&[2.0, f64::NEG_INFINITY]),
            dv(&[2.0, f64::INFINITY]),
        )
        .unwrap();
        let sol = solve(&p, 1e-8, 100).unwrap();
        assert_abs_diff_eq!(sol.z[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.z[1], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn all_variables_at_bounds() {
        // Strong pull past the upper bounds with a balanced equality.
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            dv(&[-10.0, -10.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            dv(&[0.0]),
            dv(&[0.0, 0.0]),
            dv(&[1.0, 1.0]),
        )
        .unwrap();
        let sol = solve(&p, 1e-8, 100).unwrap();
        assert_eq!(sol.z, dv(&[1.0, 1.0]));
        assert!(verify_kkt(&p, &sol.z, 1e-8).passes());
    }
}
