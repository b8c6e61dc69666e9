//! Improved Chernoff bounds on the expected value behind an observed count.
//!
//! For an observation `O` and failure probability `xi`,
//!
//! ```text
//! F-(O) = O / (1 + d1),   (e^{d1} / (1+d1)^{1+d1})^{O/(1+d1)} = xi
//! F+(O) = O / (1 - d2),   (e^{-d2} / (1-d2)^{1-d2})^{O/(1-d2)} = xi
//! ```
//!
//! Taking logs, `O * phi1(d1) = ln(1/xi)` with `phi1(d) = ln(1+d) - d/(1+d)`
//! and `O * phi2(d2) = ln(1/xi)` with `phi2(d) = d/(1-d) + ln(1-d)`. Both are
//! strictly increasing, so each root is found by bisection on a bracket.
//! At `O = 0`: `F-(0) = 0`, `F+(0) = ln(1/xi)`.

use crate::math;
use crate::{Error, Result};

/// Relative tolerance on `d1`, `d2`.
pub const ROOT_REL_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 4000;

/// `ln(1+d) - d/(1+d)`, accurate for small `d`.
fn phi_lower(d: f64) -> f64 {
    let u = d / (1.0 + d);
    if u < 0.05 {
        // -ln(1-u) - u = sum_{k>=2} u^k / k
        let mut power = u * u;
        let mut sum = 0.0f64;
        let mut k = 2.0;
        loop {
            let term = power / k;
            sum += term;
            if term <= 1e-18 * sum || k > 60.0 {
                break;
            }
            power *= u;
            k += 1.0;
        }
        sum
    } else {
        math::ln_1p(d) - u
    }
}

/// `d/(1-d) + ln(1-d)`, accurate for small `d`.
fn phi_upper(d: f64) -> f64 {
    if d < 0.05 {
        // sum_{k>=2} (k-1)/k d^k
        let mut power = d * d;
        let mut sum = 0.0f64;
        let mut k = 2.0;
        loop {
            let term = (k - 1.0) / k * power;
            sum += term;
            if term <= 1e-18 * sum || k > 60.0 {
                break;
            }
            power *= d;
            k += 1.0;
        }
        sum
    } else {
        d / (1.0 - d) + math::ln_1p(-d)
    }
}

fn bisect(
    what: &'static str,
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    upper_limit: Option<f64>,
) -> Result<f64> {
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo <= 0.0 && f_hi >= 0.0) {
        return Err(Error::RootBracket {
            what,
            lo,
            hi,
            f_lo,
            f_hi,
        });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        let mut scale = mid.min(1.0);
        if let Some(limit) = upper_limit {
            scale = scale.min(limit - mid);
        }
        if hi - lo <= ROOT_REL_TOL * scale {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves `O * phi1(d1) = ln(1/xi)` for `y = ln(1 + d1)`.
///
/// In `y`, `phi1 = y - 1 + e^{-y}`, which stays finite when `d1` itself
/// would overflow (tiny `O`), and `[0, T + 1]` always brackets the root.
pub fn log1p_delta_lower(observed: f64, xi: f64) -> Result<f64> {
    check(observed, xi)?;
    let target = math::ln(1.0 / xi) / observed;
    let phi = |y: f64| {
        if y < 0.05 {
            phi_lower(math::exp_m1(y))
        } else {
            y - 1.0 + math::exp(-y)
        }
    };
    bisect("delta1", |y| phi(y) - target, 0.0, target + 1.0, None)
}

/// `d1`; may be infinite for tiny `O`, where `F-(O)` is still well defined.
pub fn delta_lower(observed: f64, xi: f64) -> Result<f64> {
    Ok(math::exp_m1(log1p_delta_lower(observed, xi)?))
}

/// Solves `O * phi2(d2) = ln(1/xi)` on `(0, 1)`.
pub fn delta_upper(observed: f64, xi: f64) -> Result<f64> {
    check(observed, xi)?;
    let target = math::ln(1.0 / xi) / observed;
    // phi2(d) -> inf as d -> 1; the largest double below 1 always brackets
    // any finite target reachable for O >= 1e-300.
    let hi = 1.0 - f64::EPSILON / 2.0;
    bisect("delta2", |d| phi_upper(d) - target, 0.0, hi, Some(1.0))
}

fn check(observed: f64, xi: f64) -> Result<()> {
    if !(observed > 0.0 && observed.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!("observed count {observed} must be positive")));
    }
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!("failure probability {xi} outside (0, 1)")));
    }
    Ok(())
}

/// `F-(O)`.
pub fn chernoff_lower(observed: f64, xi: f64) -> Result<f64> {
    if observed == 0.0 {
        check(1.0, xi)?;
        return Ok(0.0);
    }
    Ok(observed * math::exp(-log1p_delta_lower(observed, xi)?))
}

/// `F+(O)`.
pub fn chernoff_upper(observed: f64, xi: f64) -> Result<f64> {
    if observed == 0.0 {
        check(1.0, xi)?;
        return Ok(math::ln(1.0 / xi));
    }
    Ok(observed / (1.0 - delta_upper(observed, xi)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffInterval {
    pub lower: f64,
    pub upper: f64,
}

/// Both-sided interval `[F-(O), F+(O)]`.
pub fn chernoff_interval(observed: f64, xi: f64) -> Result<ChernoffInterval> {
    if observed < 0.0 {
        return Err(Error::InvalidParameter(alloc::format!("observed count {observed} is negative")));
    }
    Ok(ChernoffInterval {
        lower: chernoff_lower(observed, xi)?,
        upper: chernoff_upper(observed, xi)?,
    })
}

/// Failure-probability budget under union-bound composition:
/// `epsilon_total = composition_count * xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceConfig {
    pub xi: f64,
    pub epsilon_total: f64,
    pub composition_count: usize,
}

impl ConfidenceConfig {
    pub fn from_budget(epsilon_total: f64, composition_count: usize) -> Result<Self> {
        if composition_count == 0 {
            return Err(Error::InvalidParameter("composition count must be positive".into()));
        }
        let xi = epsilon_total / composition_count as f64;
        if !(xi > 0.0 && xi < 1.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "per-application failure probability {xi} outside (0, 1)"
            )));
        }
        Ok(Self {
            xi,
            epsilon_total,
            composition_count,
        })
    }
}

/// How observed counts are turned into intervals on expected counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fluctuation {
    /// Chernoff intervals with per-application failure probability `xi`.
    Chernoff { xi: f64 },
    /// Infinite data: observed counts are the expectations.
    Exact,
}

/// Counts one-sided bound applications, so that the union-bound budget can be
/// checked against what the estimation actually used.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub applications: usize,
}

impl Fluctuation {
    pub fn lower(&self, observed: f64, tally: &mut Tally) -> Result<f64> {
        tally.applications += 1;
        match *self {
            Self::Chernoff { xi } => chernoff_lower(observed, xi),
            Self::Exact => Ok(observed),
        }
    }

    pub fn upper(&self, observed: f64, tally: &mut Tally) -> Result<f64> {
        tally.applications += 1;
        match *self {
            Self::Chernoff { xi } => chernoff_upper(observed, xi),
            Self::Exact => Ok(observed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn roots_satisfy_equations() {
        for &o in &[1.0, 7.5, 1e3, 1e6, 1e9, 1e11] {
            for &xi in &[1e-3, 1e-10] {
                let d1 = delta_lower(o, xi).unwrap();
                let d2 = delta_upper(o, xi).unwrap();
                // log form of the defining equations, direct (non-series) evaluation
                let lhs1 = o / (1.0 + d1) * (d1 - (1.0 + d1) * (1.0 + d1).ln());
                let lhs2 = o / (1.0 - d2) * (-d2 - (1.0 - d2) * (1.0 - d2).ln());
                let tol = if o > 1e6 { 1e-4 } else { 1e-9 };
                assert!((lhs1 - xi.ln()).abs() < tol * xi.ln().abs(), "o={o} lhs1={lhs1}");
                assert!((lhs2 - xi.ln()).abs() < tol * xi.ln().abs(), "o={o} lhs2={lhs2}");
            }
        }
    }

    #[test]
    fn series_matches_direct_form() {
        for d in [1e-3, 0.01, 0.049, 0.051] {
            let direct1 = (1.0f64 + d).ln() - d / (1.0 + d);
            let direct2 = d / (1.0 - d) + (1.0f64 - d).ln();
            // the direct forms cancel to about eps / d^2 relative
            let tol = 1e-12 + 1e-15 / (d * d);
            assert!((phi_lower(d) - direct1).abs() < tol * direct1);
            assert!((phi_upper(d) - direct2).abs() < tol * direct2);
        }
    }

    #[test]
    fn tiny_observation() {
        let iv = chernoff_interval(1e-6, 1e-10).unwrap();
        assert!(iv.lower >= 0.0 && iv.lower < 1e-6);
        assert!(iv.upper > 1e-10f64.ln().abs() * 0.9);
    }

    #[test]
    fn zero_observation() {
        let iv = chernoff_interval(0.0, 1e-3).unwrap();
        assert_eq!(iv.lower, 0.0);
        assert!((iv.upper - 1e3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        assert!(chernoff_interval(-1.0, 1e-3).is_err());
        assert!(chernoff_interval(10.0, 0.0).is_err());
        assert!(chernoff_interval(10.0, 1.0).is_err());
        assert!(ConfidenceConfig::from_budget(5.73e-7, 0).is_err());
    }

    #[test]
    fn budget_split() {
        let c = ConfidenceConfig::from_budget(5.73e-7, 352).unwrap();
        assert!((c.xi * 352.0 - 5.73e-7).abs() < 1e-20);
    }

    #[test]
    fn tally_counts_each_side() {
        let mut t = Tally::default();
        let f = Fluctuation::Chernoff { xi: 1e-6 };
        f.lower(10.0, &mut t).unwrap();
        f.upper(10.0, &mut t).unwrap();
        Fluctuation::Exact.upper(3.0, &mut t).unwrap();
        assert_eq!(t.applications, 3);
    }

    proptest! {
        #[test]
        fn interval_brackets_observation(o in 1.0..1e12f64, log_xi in -25.0..-1.0f64) {
            let xi = 10f64.powf(log_xi);
            let iv = chernoff_interval(o, xi).unwrap();
            prop_assert!(iv.lower < o && o < iv.upper);
            prop_assert!(iv.lower > 0.0);
        }

        #[test]
        fn wider_for_smaller_xi(o in 1.0..1e9f64) {
            let a = chernoff_interval(o, 1e-3).unwrap();
            let b = chernoff_interval(o, 1e-9).unwrap();
            prop_assert!(b.lower <= a.lower && b.upper >= a.upper);
        }
    }
}
