//! Bandit instances and transportation costs.
//!
//! A `K`-armed instance is a vector of Gaussian arms `(mu_a, sigma^2_a)`.
//! The cost of confusing the order of two arms under an allocation `w` comes
//! in two flavors:
//!
//! - known variances (closed form):
//!   `C(a,b;w) = 1{mu_a > mu_b} * (mu_a - mu_b)^2 / (2 (s2_a/w_a + s2_b/w_b))`,
//! - unknown variances:
//!   `C(a,b;w) = 1{mu_a > mu_b} * inf_l sum_c (w_c/2) ln(1 + (mu_c - l)^2/s2_c)`,
//!   where the infimum over the mean parameter is attained either at a real
//!   root of a stationarity cubic or at an endpoint of `[mu_b, mu_a]`.

use serde::{Deserialize, Serialize};

use crate::specfn::cubic_real_roots;
use crate::{Error, Result};

/// Relative slack under which two means count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Ground-truth bandit instance: Gaussian arms with means and variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct Instance {
    means: Vec<f64>,
    variances: Vec<f64>,
}

#[derive(Deserialize)]
struct RawInstance {
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl TryFrom<RawInstance> for Instance {
    type Error = Error;
    fn try_from(raw: RawInstance) -> Result<Self> {
        Instance::new(raw.means, raw.variances)
    }
}

impl Instance {
    pub fn new(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(Error::InvalidConfig(
                "means and variances must have equal length".into(),
            ));
        }
        if means.len() < 2 {
            return Err(Error::InvalidConfig("instance needs K >= 2 arms".into()));
        }
        if !means.iter().all(|m| m.is_finite()) {
            return Err(Error::InvalidConfig("means must be finite".into()));
        }
        if !variances.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidConfig("variances must be positive".into()));
        }
        Ok(Instance { means, variances })
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self, a: usize) -> f64 {
        self.means[a]
    }

    pub fn variance(&self, a: usize) -> f64 {
        self.variances[a]
    }

    /// Index of the unique best arm; `Err(TiedMeans)` when the maximal mean
    /// is attained more than once (up to `TIE_TOL` relative).
    pub fn best_arm(&self) -> Result<usize> {
        let mut best = 0usize;
        for a in 1..self.means.len() {
            if self.means[a] > self.means[best] {
                best = a;
            }
        }
        let top = self.means[best];
        let scale = 1.0f64.max(top.abs());
        for (a, &m) in self.means.iter().enumerate() {
            if a != best && (top - m).abs() <= TIE_TOL * scale {
                return Err(Error::TiedMeans);
            }
        }
        Ok(best)
    }
}

/// Gaussian KL divergence
/// `KL((m1, v1), (m2, v2)) = ((m1-m2)^2/v2 + v1/v2 - 1 - ln(v1/v2)) / 2`.
pub fn kl_gaussian(m1: f64, v1: f64, m2: f64, v2: f64) -> Result<f64> {
    if !(v1 > 0.0) || !(v2 > 0.0) {
        return Err(Error::Domain("kl_gaussian needs positive variances".into()));
    }
    let d = m1 - m2;
    Ok(0.5 * (d * d / v2 + v1 / v2 - 1.0 - (v1 / v2).ln()))
}

/// Infimum of `kl_gaussian(m1, v1, m2, k2)` over the second variance:
/// `ln(1 + (m1-m2)^2/v1) / 2`, attained at `k2 = v1 + (m1-m2)^2`.
pub fn kl_profile_variance(m1: f64, v1: f64, m2: f64) -> Result<f64> {
    if !(v1 > 0.0) {
        return Err(Error::Domain("kl_profile_variance needs v1 > 0".into()));
    }
    let d = m1 - m2;
    Ok(0.5 * (1.0 + d * d / v1).ln())
}

/// A pairwise transportation cost with the mean value attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCost {
    /// Cost in nats; zero when the indicator `1{mu_a > mu_b}` is off.
    pub value: f64,
    /// Argmin of the inner infimum, in `[mu_b, mu_a]`; `None` when value is 0.
    pub minimizer_mean: Option<f64>,
}

impl PairCost {
    fn zero() -> Self {
        PairCost {
            value: 0.0,
            minimizer_mean: None,
        }
    }
}

fn tied(ma: f64, mb: f64) -> bool {
    (ma - mb).abs() <= TIE_TOL * 1.0f64.max(ma.abs().max(mb.abs()))
}

/// Known-variance transportation cost from `a` to `b` (closed form).
pub fn cost_known(inst: &Instance, a: usize, b: usize, w: &[f64]) -> PairCost {
    let (ma, mb) = (inst.mean(a), inst.mean(b));
    if tied(ma, mb) || ma < mb {
        return PairCost::zero();
    }
    let (wa, wb) = (w[a], w[b]);
    if wa <= 0.0 && wb <= 0.0 {
        return PairCost::zero();
    }
    if wa <= 0.0 || wb <= 0.0 {
        // one arm unsampled: the infimum moves the free arm for free
        return PairCost::zero();
    }
    let (va, vb) = (inst.variance(a), inst.variance(b));
    let gap = ma - mb;
    let value = 0.5 * gap * gap / (va / wa + vb / wb);
    let pa = wa / va;
    let pb = wb / vb;
    PairCost {
        value,
        minimizer_mean: Some((pa * ma + pb * mb) / (pa + pb)),
    }
}

/// Candidate means for the inner infimum of the unknown-variance cost:
/// real roots of the stationarity cubic
/// `wa (l - ma)(vb + (l - mb)^2) + wb (l - mb)(va + (l - ma)^2) = 0`
/// clamped to `[mb, ma]`, plus both endpoints.
fn stationarity_candidates(
    ma: f64,
    va: f64,
    mb: f64,
    vb: f64,
    wa: f64,
    wb: f64,
    out: &mut [f64; 5],
) -> usize {
    let s = wa + wb;
    let c2 = -(wa * (ma + 2.0 * mb) + wb * (mb + 2.0 * ma)) / s;
    let c1 = (wa * (mb * mb + 2.0 * ma * mb + vb) + wb * (ma * ma + 2.0 * ma * mb + va)) / s;
    let c0 = -(wa * (ma * mb * mb + ma * vb) + wb * (mb * ma * ma + mb * va)) / s;
    let roots = cubic_real_roots(c2, c1, c0);
    let (lo, hi) = if ma < mb { (ma, mb) } else { (mb, ma) };
    let mut n = 0;
    for &r in roots.roots() {
        if r >= lo && r <= hi {
            out[n] = r;
            n += 1;
        }
    }
    out[n] = lo;
    out[n + 1] = hi;
    n + 2
}

/// Unknown-variance transportation cost from `a` to `b`.
///
/// The inner infimum over the mean is solved exactly through the
/// stationarity cubic; endpoints are always in the candidate set.
pub fn cost_unknown(inst: &Instance, a: usize, b: usize, w: &[f64]) -> PairCost {
    cost_unknown_params(
        inst.mean(a),
        inst.variance(a),
        inst.mean(b),
        inst.variance(b),
        w[a],
        w[b],
    )
}

/// `cost_unknown` on explicit per-arm parameters (used with empirical stats).
pub fn cost_unknown_params(ma: f64, va: f64, mb: f64, vb: f64, wa: f64, wb: f64) -> PairCost {
    if tied(ma, mb) || ma < mb {
        return PairCost::zero();
    }
    if wa <= 0.0 && wb <= 0.0 {
        return PairCost::zero();
    }
    if wb <= 0.0 {
        return PairCost::zero();
    }
    if wa <= 0.0 {
        return PairCost::zero();
    }
    let objective = |l: f64| {
        let da = l - ma;
        let db = l - mb;
        0.5 * (wa * (1.0 + da * da / va).ln() + wb * (1.0 + db * db / vb).ln())
    };
    let mut cand = [0.0f64; 5];
    let n = stationarity_candidates(ma, va, mb, vb, wa, wb, &mut cand);
    let mut best_l = cand[0];
    let mut best_v = objective(cand[0]);
    for &l in cand.iter().take(n).skip(1) {
        let v = objective(l);
        if v < best_v {
            best_v = v;
            best_l = l;
        }
    }
    PairCost {
        value: best_v,
        minimizer_mean: Some(best_l),
    }
}

/// Largest squared gap over the smaller of the two variances:
/// `max_{a != a*} (mu_* - mu_a)^2 / min(s2_a, s2_*)`.
pub fn dmax(inst: &Instance) -> Result<f64> {
    let star = inst.best_arm()?;
    let mut d = 0.0f64;
    for a in 0..inst.k() {
        if a == star {
            continue;
        }
        let gap = inst.mean(star) - inst.mean(a);
        let v = inst.variance(a).min(inst.variance(star));
        d = d.max(gap * gap / v);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn inst(means: &[f64], vars: &[f64]) -> Instance {
        Instance::new(means.to_vec(), vars.to_vec()).unwrap()
    }

    #[test]
    fn instance_validation() {
        assert!(Instance::new(vec![0.0], vec![1.0]).is_err());
        assert!(Instance::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(Instance::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let i = inst(&[0.0, -0.2], &[1.0, 0.5]);
        assert_eq!(i.best_arm().unwrap(), 0);
        let tied = inst(&[0.3, 0.3, 0.1], &[1.0, 1.0, 1.0]);
        assert!(matches!(tied.best_arm(), Err(Error::TiedMeans)));
    }

    #[test]
    fn instance_json_round_trip() {
        let i = inst(&[0.0, -0.2], &[1.0, 0.5]);
        let s = serde_json::to_string(&i).unwrap();
        assert_eq!(s, r#"{"means":[0.0,-0.2],"variances":[1.0,0.5]}"#);
        let back: Instance = serde_json::from_str(&s).unwrap();
        assert_eq!(back, i);
        let bad: std::result::Result<Instance, _> =
            serde_json::from_str(r#"{"means":[0.0,1.0],"variances":[1.0,-2.0]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn kl_gaussian_reference_values() {
        assert_eq!(kl_gaussian(0.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
        assert!((kl_gaussian(1.0, 1.0, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let e = std::f64::consts::E;
        assert!((kl_gaussian(0.0, 1.0, 0.0, e).unwrap() - 1.0 / (2.0 * e)).abs() < 1e-15);
        assert!(kl_gaussian(0.0, -1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn kl_profile_variance_values() {
        assert!((kl_profile_variance(0.0, 1.0, 1.0).unwrap() - 0.5 * 2.0f64.ln()).abs() < 1e-15);
        assert_eq!(kl_profile_variance(3.0, 2.0, 3.0).unwrap(), 0.0);
        // grid minimization over the second variance
        let m1 = 0.0;
        let v1 = 0.5;
        let m2 = -0.2;
        let mut best = f64::INFINITY;
        let mut k2 = 1e-3;
        while k2 < 10.0 {
            best = best.min(kl_gaussian(m1, v1, m2, k2).unwrap());
            k2 += 1e-4;
        }
        let v = kl_profile_variance(m1, v1, m2).unwrap();
        assert!((v - 0.5 * (1.08f64).ln()).abs() < 1e-12);
        assert!((v - best).abs() < 1e-7);
    }

    #[test]
    fn cost_known_reference_values() {
        let i = inst(&[0.0, -0.2], &[1.0, 0.5]);
        // grid infimum of sum w_c (mu_c - l)^2 / (2 s2_c)
        let w = [0.5, 0.5];
        let c = cost_known(&i, 0, 1, &w);
        assert!((c.value - 0.02 / 3.0).abs() < 1e-12, "value {}", c.value);
        let mut grid_best = f64::INFINITY;
        let mut l = -0.2;
        while l <= 0.0 {
            let v = 0.5 * l * l / (2.0 * 1.0) + 0.5 * (l + 0.2) * (l + 0.2) / (2.0 * 0.5);
            grid_best = grid_best.min(v);
            l += 1e-6;
        }
        assert!((c.value - grid_best).abs() < 1e-9);
        let lam = c.minimizer_mean.unwrap();
        assert!((-0.2..=0.0).contains(&lam));

        // zero gap and zero weight cases
        let ii = inst(&[0.3, 0.3 + 1e-14], &[1.0, 1.0]);
        assert_eq!(cost_known(&ii, 1, 0, &[0.5, 0.5]).value, 0.0);
        assert_eq!(cost_known(&i, 0, 1, &[0.5, 0.0]).value, 0.0);
    }

    #[test]
    fn cost_unknown_matches_dense_grid() {
        let i = inst(&[0.0, -0.2], &[1.0, 0.5]);
        let w = [0.5, 0.5];
        let c = cost_unknown(&i, 0, 1, &w);
        let mut grid_best = f64::INFINITY;
        let steps = 1_000_000;
        for k in 0..=steps {
            let l = -0.2 + 0.2 * (k as f64) / (steps as f64);
            let v = 0.25 * (1.0 + l * l / 1.0).ln() + 0.25 * (1.0 + (l + 0.2) * (l + 0.2) / 0.5).ln();
            grid_best = grid_best.min(v);
        }
        assert!((c.value - grid_best).abs() < 1e-8, "{} vs {grid_best}", c.value);
        assert!(c.value <= cost_known(&i, 0, 1, &w).value + 1e-15);
    }

    #[test]
    fn cost_unknown_stationarity_of_minimizer() {
        let mut rng = Rng::new(11);
        for _ in 0..300 {
            let ma = rng.next_range(-1.0, 1.0);
            let mb = ma - rng.next_range(0.05, 2.0);
            let va = rng.next_range(0.1, 4.0);
            let vb = rng.next_range(0.1, 4.0);
            let wa = rng.next_range(0.05, 2.0);
            let wb = rng.next_range(0.05, 2.0);
            let c = cost_unknown_params(ma, va, mb, vb, wa, wb);
            let l = c.minimizer_mean.unwrap();
            assert!(l >= mb - 1e-12 && l <= ma + 1e-12);
            let interior = l > mb + 1e-9 && l < ma - 1e-9;
            if interior {
                let da = 2.0 * (l - ma) / (va + (l - ma) * (l - ma));
                let db = 2.0 * (l - mb) / (vb + (l - mb) * (l - mb));
                let grad = wa * da + wb * db;
                let scale = wa * da.abs() + wb * db.abs() + 1e-12;
                assert!(grad.abs() <= 1e-8 * scale.max(1.0), "grad {grad}");
            }
        }
    }

    #[test]
    fn cost_ratio_pinsker_sandwich() {
        let mut rng = Rng::new(23);
        for _ in 0..300 {
            let ma = rng.next_range(-1.0, 1.0);
            let mb = ma - rng.next_range(0.05, 2.0);
            let va = rng.next_range(0.1, 4.0);
            let vb = rng.next_range(0.1, 4.0);
            let w = [rng.next_range(0.05, 1.0), rng.next_range(0.05, 1.0)];
            let i = inst(&[ma, mb], &[va, vb]);
            let cu = cost_unknown(&i, 0, 1, &w).value;
            let ck = cost_known(&i, 0, 1, &w).value;
            let d = (ma - mb) * (ma - mb) / va.min(vb);
            let lo = (1.0 + d).ln() / d;
            let ratio = cu / ck;
            assert!(ratio <= 1.0 + 1e-12, "ratio {ratio}");
            assert!(ratio >= lo - 1e-12, "ratio {ratio} < {lo}");
        }
    }

    #[test]
    fn cost_unknown_monotone_in_weights() {
        let i = inst(&[0.0, -0.4], &[1.0, 0.7]);
        let mut prev = 0.0;
        for k in 1..=40 {
            let wa = 0.05 * k as f64;
            let v = cost_unknown(&i, 0, 1, &[wa, 0.3]).value;
            assert!(v >= prev - 1e-12, "not nondecreasing in wa at {wa}");
            prev = v;
        }
        prev = 0.0;
        for k in 1..=40 {
            let wb = 0.05 * k as f64;
            let v = cost_unknown(&i, 0, 1, &[0.3, wb]).value;
            assert!(v >= prev - 1e-12, "not nondecreasing in wb at {wb}");
            prev = v;
        }
    }

    #[test]
    fn dmax_values() {
        let i = inst(&[0.0, -0.2], &[1.0, 0.5]);
        assert!((dmax(&i).unwrap() - 0.08).abs() < 1e-15);
        let j = inst(&[0.0, -1.0], &[1.0, 1.0]);
        assert!((dmax(&j).unwrap() - 1.0).abs() < 1e-15);
        // direct pairwise enumeration on a 5-arm instance
        let k = inst(&[1.0, 0.85, 0.8, 0.7, 0.65], &[1.0, 0.6, 0.5, 0.4, 0.35]);
        let mut expect = 0.0f64;
        for a in 1..5 {
            let gap = k.mean(0) - k.mean(a);
            expect = expect.max(gap * gap / k.variance(a).min(k.variance(0)));
        }
        assert_eq!(dmax(&k).unwrap(), expect);
    }
}
