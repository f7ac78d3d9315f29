//! Characteristic times and optimal allocations.
//!
//! Writing `d_a(l) = ln(1 + (l - mu_a)^2 / s2_a)` (unknown variances) or
//! `(l - mu_a)^2 / s2_a` (known variances), the maximin allocation solves
//!
//! `2 T*^{-1} = max_w w_1 min_{a != 1} g_a(w_a / w_1)`,
//! `g_a(x) = min_l [ d_1(l) + x d_a(l) ]`,
//!
//! with arm 1 the best arm. At the optimum all suboptimal costs are equal:
//! the solver runs an outer bisection for the level `y*` with
//! `F(y) = sum_a d_1(l_a) / d_a(l_a) = 1`, an inner bracketed Newton
//! inversion of each `g_a`, and a cubic solve (or closed form, known
//! variances) for the minimizing mean. All searches use relative tolerance
//! 1e-12 on the search variable with a hard cap of 200 iterations.

use crate::model::{cost_known, cost_unknown, Instance};
use crate::{Error, Result};

/// Which transportation-cost family the allocation optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    /// Unknown variances: `d_a(l) = ln(1 + (l - mu_a)^2 / s2_a)`.
    Unknown,
    /// Known variances: `d_a(l) = (l - mu_a)^2 / s2_a`.
    Known,
}

/// A maximin (or beta-constrained maximin) allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Simplex point; the best arm always has positive weight.
    pub weights: Vec<f64>,
    /// Characteristic time in samples: `1 / min_a C(a*, a; weights)`.
    pub char_time: f64,
    /// The equalized cost level `y*/2`, i.e. the common transportation cost
    /// when weights are rescaled so the best arm has unit weight.
    pub equalized_value: f64,
}

const REL_TOL: f64 = 1e-12;
const MAX_ITER: usize = 200;

fn d_of(kind: CostKind, mean: f64, var: f64, l: f64) -> f64 {
    let z = (l - mean) * (l - mean) / var;
    match kind {
        CostKind::Unknown => (1.0 + z).ln(),
        CostKind::Known => z,
    }
}

/// Minimizer of `d_best(l) + x * d_a(l)` over `l` in `[mu_a, mu_best]`.
fn lambda_min(kind: CostKind, inst: &Instance, best: usize, a: usize, x: f64) -> f64 {
    let (m1, v1) = (inst.mean(best), inst.variance(best));
    let (ma, va) = (inst.mean(a), inst.variance(a));
    if x == 0.0 {
        return m1;
    }
    match kind {
        CostKind::Known => {
            let p1 = 1.0 / v1;
            let pa = x / va;
            (p1 * m1 + pa * ma) / (p1 + pa)
        }
        CostKind::Unknown => {
            // weights (1, x) on (best, a); stationary points of the weighted
            // log costs are roots of a cubic, and the endpoints can win in
            // degenerate limits.
            let c = crate::model::cost_unknown_params(m1, v1, ma, va, 1.0, x);
            c.minimizer_mean.unwrap_or(m1)
        }
    }
}

/// Argmin of the paired objective for the unknown-variance family
/// (`mu_best` at `x = 0`, tends to `mu_a` as `x` grows).
pub fn lambda_of_x(inst: &Instance, a: usize, x: f64) -> Result<f64> {
    let best = inst.best_arm()?;
    if a == best {
        return Err(Error::Domain("lambda_of_x needs a suboptimal arm".into()));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("lambda_of_x needs x >= 0, got {x}")));
    }
    Ok(lambda_min(CostKind::Unknown, inst, best, a, x))
}

fn g_eval_kind(kind: CostKind, inst: &Instance, best: usize, a: usize, x: f64) -> f64 {
    let l = lambda_min(kind, inst, best, a, x);
    d_of(kind, inst.mean(best), inst.variance(best), l)
        + x * d_of(kind, inst.mean(a), inst.variance(a), l)
}

/// `g_a(x) = min_l [ d_1(l) + x d_a(l) ]` for the unknown-variance family;
/// strictly increasing with range `[0, d_1(mu_a))`.
pub fn g_eval(inst: &Instance, a: usize, x: f64) -> Result<f64> {
    let best = inst.best_arm()?;
    if a == best {
        return Err(Error::Domain("g_eval needs a suboptimal arm".into()));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("g_eval needs x >= 0, got {x}")));
    }
    Ok(g_eval_kind(CostKind::Unknown, inst, best, a, x))
}

fn x_of_y_kind(kind: CostKind, inst: &Instance, best: usize, a: usize, y: f64) -> Result<f64> {
    x_of_y_warm(kind, inst, best, a, y, 1.0)
}

/// Inverts `g_a(x) = y` by Newton with a maintained bracket (bisection
/// fallback), to relative tolerance 1e-12 on `x`. `g` is increasing and
/// concave with envelope derivative `g'(x) = d_a(lambda_a(x))`, so Newton
/// steps land below the root and converge monotonically; `seed` warm-starts
/// the iteration inside the nested allocation searches.
fn x_of_y_warm(
    kind: CostKind,
    inst: &Instance,
    best: usize,
    a: usize,
    y: f64,
    seed: f64,
) -> Result<f64> {
    let d1_at_a = d_of(
        kind,
        inst.mean(best),
        inst.variance(best),
        inst.mean(a),
    );
    if !(y >= 0.0) || y >= d1_at_a {
        return Err(Error::Range(format!(
            "x_of_y needs y in [0, {d1_at_a}), got {y}"
        )));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if kind == CostKind::Known {
        // closed form: y = D2 * x * pa * p1 / (p1 + x * pa)
        let p1 = 1.0 / inst.variance(best);
        let pa = 1.0 / inst.variance(a);
        let gap = inst.mean(best) - inst.mean(a);
        let d2 = gap * gap;
        return Ok(y * p1 / (pa * (d2 * p1 - y)));
    }
    let mut x = if seed.is_finite() && seed > 0.0 { seed } else { 1.0 };
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let l = lambda_min(kind, inst, best, a, x);
        let d1 = d_of(kind, inst.mean(best), inst.variance(best), l);
        let da = d_of(kind, inst.mean(a), inst.variance(a), l);
        let g = d1 + x * da;
        if g < y {
            lo = x;
        } else {
            hi = hi.min(x);
        }
        if (g - y).abs() <= 1e-13 * y {
            return Ok(x);
        }
        let mut next = if da > 0.0 { x + (y - g) / da } else { f64::NAN };
        if !next.is_finite() || next <= lo || next >= hi {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                (2.0 * x).max(1.0)
            };
        }
        if hi.is_finite() && hi - lo <= REL_TOL * hi {
            return Ok(0.5 * (lo + hi));
        }
        if (next - x).abs() <= REL_TOL * next.abs() {
            return Ok(next);
        }
        x = next;
    }
    if !hi.is_finite() {
        return Err(Error::BracketFailure("x_of_y upper bracket".into()));
    }
    Ok(x)
}

/// Inverse of `g_a` by bracketed bisection (unknown-variance family).
pub fn x_of_y(inst: &Instance, a: usize, y: f64) -> Result<f64> {
    let best = inst.best_arm()?;
    if a == best {
        return Err(Error::Domain("x_of_y needs a suboptimal arm".into()));
    }
    x_of_y_kind(CostKind::Unknown, inst, best, a, y)
}

/// `F(y) = sum_{a != best} d_1(l_a) / d_a(l_a)` at `x_a = g_a^{-1}(y)`,
/// warm-starting each inversion from the previous outer iteration.
fn equalization_sum_warm(
    kind: CostKind,
    inst: &Instance,
    best: usize,
    y: f64,
    warm: &mut [f64],
) -> Result<f64> {
    let mut f = 0.0;
    for a in 0..inst.k() {
        if a == best {
            continue;
        }
        let x = x_of_y_warm(kind, inst, best, a, y, warm[a])?;
        warm[a] = x;
        let l = lambda_min(kind, inst, best, a, x);
        let d1 = d_of(kind, inst.mean(best), inst.variance(best), l);
        let da = d_of(kind, inst.mean(a), inst.variance(a), l);
        if da <= 0.0 {
            return Ok(f64::INFINITY);
        }
        f += d1 / da;
    }
    Ok(f)
}

#[cfg(test)]
fn equalization_sum(kind: CostKind, inst: &Instance, best: usize, y: f64) -> Result<f64> {
    let mut warm = vec![1.0; inst.k()];
    equalization_sum_warm(kind, inst, best, y, &mut warm)
}

fn min_d1_at_suboptimal(kind: CostKind, inst: &Instance, best: usize) -> f64 {
    let mut m = f64::INFINITY;
    for a in 0..inst.k() {
        if a != best {
            m = m.min(d_of(
                kind,
                inst.mean(best),
                inst.variance(best),
                inst.mean(a),
            ));
        }
    }
    m
}

fn allocation_from_level(
    kind: CostKind,
    inst: &Instance,
    best: usize,
    y: f64,
    warm: &mut [f64],
) -> Result<Allocation> {
    let mut xs = vec![0.0; inst.k()];
    let mut sum_x = 0.0;
    for a in 0..inst.k() {
        if a == best {
            continue;
        }
        let x = x_of_y_warm(kind, inst, best, a, y, warm[a])?;
        xs[a] = x;
        sum_x += x;
    }
    let w_best = 1.0 / (1.0 + sum_x);
    let mut weights = vec![0.0; inst.k()];
    for a in 0..inst.k() {
        weights[a] = if a == best { w_best } else { xs[a] * w_best };
    }
    let min_cost = min_pair_cost(kind, inst, best, &weights);
    Ok(Allocation {
        weights,
        char_time: 1.0 / min_cost,
        equalized_value: 0.5 * y,
    })
}

fn min_pair_cost(kind: CostKind, inst: &Instance, best: usize, w: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    for a in 0..inst.k() {
        if a == best {
            continue;
        }
        let c = match kind {
            CostKind::Unknown => cost_unknown(inst, best, a, w).value,
            CostKind::Known => cost_known(inst, best, a, w).value,
        };
        m = m.min(c);
    }
    m
}

fn optimal_allocation(kind: CostKind, inst: &Instance) -> Result<Allocation> {
    let best = inst.best_arm()?;
    let y_max = (1.0 - 1e-9) * min_d1_at_suboptimal(kind, inst, best);
    let mut warm = vec![1.0; inst.k()];
    let mut hi = y_max;
    if equalization_sum_warm(kind, inst, best, hi, &mut warm)? < 1.0 {
        return Err(Error::BracketFailure(
            "equalization level never crosses 1".into(),
        ));
    }
    let mut lo = 0.0f64;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if equalization_sum_warm(kind, inst, best, mid, &mut warm)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= REL_TOL * hi {
            break;
        }
    }
    allocation_from_level(kind, inst, best, 0.5 * (lo + hi), &mut warm)
}

/// Maximin allocation and characteristic time for unknown variances.
pub fn optimal_allocation_unknown(inst: &Instance) -> Result<Allocation> {
    optimal_allocation(CostKind::Unknown, inst)
}

/// Maximin allocation and characteristic time for known variances.
pub fn optimal_allocation_known(inst: &Instance) -> Result<Allocation> {
    optimal_allocation(CostKind::Known, inst)
}

/// Maximin allocation constrained to give the best arm weight exactly `beta`.
///
/// The equal-cost structure of the unconstrained optimum carries over: with
/// `w_best = beta` fixed, the per-arm costs `(beta/2) g_a(w_a/beta)` are
/// equalized, so the free mass solves `sum_a x_a(y) = (1 - beta)/beta` by a
/// monotone bisection in the level `y`.
pub fn beta_allocation(inst: &Instance, beta: f64, variance_known: bool) -> Result<Allocation> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must be in (0,1), got {beta}")));
    }
    let kind = if variance_known {
        CostKind::Known
    } else {
        CostKind::Unknown
    };
    let best = inst.best_arm()?;
    let target = (1.0 - beta) / beta;
    let mut warm = vec![1.0; inst.k()];
    let sum_x = |y: f64, warm: &mut [f64]| -> Result<f64> {
        let mut s = 0.0;
        for a in 0..inst.k() {
            if a != best {
                let x = x_of_y_warm(kind, inst, best, a, y, warm[a])?;
                warm[a] = x;
                s += x;
            }
        }
        Ok(s)
    };
    let mut hi = (1.0 - 1e-9) * min_d1_at_suboptimal(kind, inst, best);
    if sum_x(hi, &mut warm)? < target {
        return Err(Error::BracketFailure("beta level out of reach".into()));
    }
    let mut lo = 0.0f64;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if sum_x(mid, &mut warm)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= REL_TOL * hi {
            break;
        }
    }
    let y = 0.5 * (lo + hi);
    let mut weights = vec![0.0; inst.k()];
    let mut mass = 0.0;
    for a in 0..inst.k() {
        if a != best {
            weights[a] = beta * x_of_y_warm(kind, inst, best, a, y, warm[a])?;
            mass += weights[a];
        }
    }
    // pin the best arm to beta exactly and renormalize the residual mass
    if mass > 0.0 {
        let scale = (1.0 - beta) / mass;
        for (a, w) in weights.iter_mut().enumerate() {
            if a != best {
                *w *= scale;
            }
        }
    }
    weights[best] = beta;
    let min_cost = min_pair_cost(kind, inst, best, &weights);
    Ok(Allocation {
        weights,
        char_time: 1.0 / min_cost,
        equalized_value: 0.5 * y,
    })
}

/// Sample-complexity lower bound `T*(mu, s2) ln(1/(2.4 delta))`.
pub fn lower_bound_samples(inst: &Instance, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must be in (0,1), got {delta}")));
    }
    let alloc = optimal_allocation_unknown(inst)?;
    Ok(alloc.char_time * (1.0 / (2.4 * delta)).ln())
}
