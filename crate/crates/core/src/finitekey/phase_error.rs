//! Worst-case phase error over all yields compatible with the category bounds.
//!
//! With `s = c0^2` and `s' = c0'^2`, the normalization constraints make the
//! test/code yields affine in the code yields:
//!
//! ```text
//! q_T0 = s q00 + (1-s) q10     q_0T = s' q00 + (1-s') q01
//! q_T1 = s q01 + (1-s) q11     q_1T = s' q10 + (1-s') q11
//! ```
//!
//! and the phase error becomes
//! `e_p = 1/2 - (q_Td - q_Ts) / (16 q_C sqrt(s (1-s) s' (1-s')))`.
//! The maximum takes `q_Td` at its lower and `q_Ts` at its upper bound, `q_C`
//! at the bound matching the sign of the numerator, and searches `(s, s')`
//! over the set where some code yields inside their intervals reproduce all
//! four mixed categories inside theirs.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::cmp::Ordering;

use super::lp::{Constraint, LinearProgram, Relation, Sense};
use crate::decoy::{Category, CategoryBounds};
use crate::math;
use crate::{Error, Result};

/// Scaled constraint violation below which a point counts as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;
const EDGE: f64 = 1e-9;
const GOLDEN_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 60;
const POLISH_TOL: f64 = 1e-10;
/// Distinct descent results that get polished.
const POLISHED: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Starts per axis; the grid has `grid * grid` starts.
    pub grid: usize,
    /// Stop sweeping when the objective improves by less than this.
    pub tolerance: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            grid: 16,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseErrorBound {
    /// Clamped to `[0, 1/2]`.
    pub value: f64,
    pub raw: f64,
    /// Maximizer `(c0^2, c0'^2)`.
    pub c0_sq: f64,
    pub c0p_sq: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    feasible: bool,
    /// Phase error if feasible, minus the violation otherwise.
    value: f64,
}

impl Key {
    fn better_than(&self, other: &Key) -> bool {
        match (self.feasible, other.feasible) {
            (true, false) => true,
            (false, true) => false,
            _ => self.value > other.value,
        }
    }

    fn cmp(&self, other: &Key) -> Ordering {
        if self.better_than(other) {
            Ordering::Greater
        } else if other.better_than(self) {
            Ordering::Less
        } else {
            Ordering::Equal
        }
    }
}

/// The maximization problem in `(s, s')`.
pub struct PhaseErrorProblem {
    lo: [f64; 4],
    width: [f64; 4],
    // mixed categories in the order T0, T1, 0T, 1T
    mixed: [(f64, f64); 4],
    numerator: f64,
    q_c: f64,
    cache: RefCell<BTreeMap<(u64, u64), Key>>,
}

impl PhaseErrorProblem {
    pub fn new(b: &CategoryBounds) -> Result<Self> {
        for c in Category::ALL {
            let iv = b.get(c);
            if !(iv.lower <= iv.upper) || !iv.lower.is_finite() || !iv.upper.is_finite() {
                return Err(Error::InconsistentStatistics {
                    what: "yield interval with lower bound above upper bound",
                    value: iv.lower - iv.upper,
                });
            }
        }
        let code = [Category::C00, Category::C01, Category::C10, Category::C11].map(|c| b.get(c));
        let mixed = [
            Category::TestZero,
            Category::TestOne,
            Category::ZeroTest,
            Category::OneTest,
        ]
        .map(|c| b.get(c));
        let scale = code
            .iter()
            .chain(mixed.iter())
            .fold(0.0f64, |m, iv| m.max(iv.upper.abs()))
            .max(f64::MIN_POSITIVE);
        let numerator = b.get(Category::TestDiff).lower - b.get(Category::TestSame).upper;
        let qc = b.get(Category::Code);
        let q_c = if numerator > 0.0 { qc.upper } else { qc.lower };
        Ok(Self {
            lo: code.map(|iv| iv.lower / scale),
            width: code.map(|iv| (iv.upper - iv.lower) / scale),
            mixed: mixed.map(|iv| (iv.lower / scale, iv.upper / scale)),
            numerator,
            q_c,
            cache: RefCell::new(BTreeMap::new()),
        })
    }

    /// Phase error at `(s, s')`, ignoring feasibility.
    pub fn objective(&self, s: f64, sp: f64) -> f64 {
        let g = s * (1.0 - s) * sp * (1.0 - sp);
        0.5 - self.numerator / (16.0 * self.q_c * math::sqrt(g))
    }

    /// Smallest total (scaled) violation of the mixed-category intervals over
    /// code yields inside their own intervals.
    pub fn violation(&self, s: f64, sp: f64) -> Result<f64> {
        // variables: y00 y01 y10 y11 (offsets from lower bounds), then
        // one violation slack per side of each mixed interval
        const N: usize = 12;
        let mut objective = vec![0.0; N];
        for v in objective.iter_mut().skip(4) {
            *v = 1.0;
        }
        let mut lp = LinearProgram::new(Sense::Minimize, objective);
        for k in 0..4 {
            let mut e = vec![0.0; N];
            e[k] = 1.0;
            lp.push(Constraint::new(e, Relation::Le, self.width[k], ""));
        }
        // (index a, index b, weight on a)
        let rows = [(0, 2, s), (1, 3, s), (0, 1, sp), (2, 3, sp)];
        for (j, &(a, b, w)) in rows.iter().enumerate() {
            let base = w * self.lo[a] + (1.0 - w) * self.lo[b];
            let (lo, hi) = self.mixed[j];
            let mut up = vec![0.0; N];
            up[a] = w;
            up[b] = 1.0 - w;
            let mut down = up.clone();
            up[4 + 2 * j] = 1.0;
            down[5 + 2 * j] = -1.0;
            lp.push(Constraint::new(up, Relation::Ge, lo - base, ""));
            lp.push(Constraint::new(down, Relation::Le, hi - base, ""));
        }
        Ok(lp.solve()?.objective)
    }

    fn key(&self, s: f64, sp: f64) -> Result<Key> {
        let id = (s.to_bits(), sp.to_bits());
        if let Some(k) = self.cache.borrow().get(&id) {
            return Ok(*k);
        }
        let v = self.violation(s, sp)?;
        let k = if v <= FEASIBILITY_TOL {
            Key {
                feasible: true,
                value: self.objective(s, sp),
            }
        } else {
            Key {
                feasible: false,
                value: -v,
            }
        };
        self.cache.borrow_mut().insert(id, k);
        Ok(k)
    }

    pub fn is_feasible(&self, s: f64, sp: f64) -> Result<bool> {
        Ok(self.key(s, sp)?.feasible)
    }

    pub fn evaluations(&self) -> usize {
        self.cache.borrow().len()
    }

    /// Golden-section maximization of `f` over `[a, b]`.
    fn golden(
        mut a: f64,
        mut b: f64,
        tol: f64,
        mut f: impl FnMut(f64) -> Result<Key>,
    ) -> Result<(f64, Key)> {
        let ratio = (math::sqrt(5.0) - 1.0) / 2.0;
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let mut kc = f(c)?;
        let mut kd = f(d)?;
        while b - a > tol {
            if kc.cmp(&kd) != Ordering::Less {
                b = d;
                d = c;
                kd = kc;
                c = b - ratio * (b - a);
                kc = f(c)?;
            } else {
                a = c;
                c = d;
                kc = kd;
                d = a + ratio * (b - a);
                kd = f(d)?;
            }
        }
        Ok(if kc.cmp(&kd) != Ordering::Less { (c, kc) } else { (d, kd) })
    }

    /// Best point along one coordinate with the other held at `fixed`.
    fn line_search(&self, fixed: f64, along_first: bool) -> Result<(f64, Key)> {
        Self::golden(EDGE, 1.0 - EDGE, GOLDEN_TOL, |x| {
            if along_first {
                self.key(x, fixed)
            } else {
                self.key(fixed, x)
            }
        })
    }

    /// Maximizes over `s` near `s0` of the best `s'` for that `s`. Follows
    /// slanted stretches of the feasible boundary where coordinate moves
    /// stall.
    fn polish(&self, s0: f64, radius: f64) -> Result<(f64, f64, Key)> {
        let a = (s0 - radius).max(EDGE);
        let b = (s0 + radius).min(1.0 - EDGE);
        let (s, _) = Self::golden(a, b, POLISH_TOL, |x| Ok(self.line_search(x, false)?.1))?;
        let (sp, k) = self.line_search(s, false)?;
        Ok((s, sp, k))
    }

    fn descend(&self, s0: f64, sp0: f64, tol: f64) -> Result<(f64, f64, Key)> {
        let (mut s, mut sp) = (s0, sp0);
        let mut best = self.key(s, sp)?;
        for _ in 0..MAX_SWEEPS {
            let before = best;
            let (x, k) = self.line_search(sp, true)?;
            if k.better_than(&best) {
                s = x;
                best = k;
            }
            let (y, k) = self.line_search(s, false)?;
            if k.better_than(&best) {
                sp = y;
                best = k;
            }
            let settled = before.feasible == best.feasible && best.value - before.value <= tol;
            if settled {
                break;
            }
        }
        Ok((s, sp, best))
    }

    /// A non-positive numerator puts every feasible point at or above 1/2.
    fn trivial_bound(&self) -> Result<Option<PhaseErrorBound>> {
        if self.numerator <= 0.0 {
            return Ok(Some(PhaseErrorBound {
                value: 0.5,
                raw: 0.5,
                c0_sq: 0.5,
                c0p_sq: 0.5,
                evaluations: 0,
            }));
        }
        if !(self.q_c > 0.0) {
            return Err(Error::ZeroDenominator("phase-error bound (code-basis yield bound is zero)"));
        }
        Ok(None)
    }

    /// Multi-start coordinate search. Ties keep the earliest start.
    pub fn maximize(&self, opts: &SearchOptions) -> Result<PhaseErrorBound> {
        if let Some(b) = self.trivial_bound()? {
            return Ok(b);
        }
        let finish = |s: f64, sp: f64, raw: f64| PhaseErrorBound {
            value: raw.clamp(0.0, 0.5),
            raw,
            c0_sq: s,
            c0p_sq: sp,
            evaluations: self.evaluations(),
        };
        // g = s(1-s)s'(1-s') peaks at (1/2, 1/2); with a positive numerator
        // that point is the global maximum whenever it is feasible
        if self.numerator > 0.0 && self.is_feasible(0.5, 0.5)? {
            return Ok(finish(0.5, 0.5, self.objective(0.5, 0.5)));
        }
        let n = opts.grid.max(1);
        let mut results: Vec<(f64, f64, Key)> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let s0 = (i as f64 + 0.5) / n as f64;
                let sp0 = (j as f64 + 0.5) / n as f64;
                results.push(self.descend(s0, sp0, opts.tolerance)?);
            }
        }
        // stable sort keeps start order among ties
        results.sort_by(|x, y| y.2.cmp(&x.2));
        results.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);
        let mut best: Option<(f64, f64, Key)> = None;
        for &cand in results.iter().take(POLISHED) {
            let polished = self.polish(cand.0, 1.0 / n as f64)?;
            for c in [cand, polished] {
                if best.is_none_or(|b| c.2.better_than(&b.2)) {
                    best = Some(c);
                }
            }
        }
        match best {
            Some((s, sp, k)) if k.feasible => Ok(finish(s, sp, k.value)),
            _ => Err(Error::NlpInfeasible),
        }
    }

    /// Exhaustive grid with successive local refinement down to `resolution`.
    /// Slow; meant for cross-checking [`Self::maximize`].
    pub fn maximize_by_grid(&self, resolution: f64) -> Result<PhaseErrorBound> {
        if let Some(b) = self.trivial_bound()? {
            return Ok(b);
        }
        let coarse = 200usize;
        let mut best: Option<(f64, f64, Key)> = None;
        let consider = |s: f64, sp: f64, best: &mut Option<(f64, f64, Key)>| -> Result<()> {
            let s = s.clamp(EDGE, 1.0 - EDGE);
            let sp = sp.clamp(EDGE, 1.0 - EDGE);
            let k = self.key(s, sp)?;
            if k.feasible && best.is_none_or(|b| k.better_than(&b.2)) {
                *best = Some((s, sp, k));
            }
            Ok(())
        };
        for i in 0..=coarse {
            for j in 0..=coarse {
                consider(i as f64 / coarse as f64, j as f64 / coarse as f64, &mut best)?;
            }
        }
        let mut h = 1.0 / coarse as f64;
        while h > resolution * 0.1 {
            let Some((s, sp, _)) = best else { break };
            let step = h / 5.0;
            for i in -10i32..=10 {
                for j in -10i32..=10 {
                    consider(s + i as f64 * step, sp + j as f64 * step, &mut best)?;
                }
            }
            h = step;
        }
        match best {
            Some((s, sp, k)) => Ok(PhaseErrorBound {
                value: k.value.clamp(0.0, 0.5),
                raw: k.value,
                c0_sq: s,
                c0p_sq: sp,
                evaluations: self.evaluations(),
            }),
            None => Err(Error::NlpInfeasible),
        }
    }
}

/// Upper bound on the phase error compatible with the category intervals.
pub fn phase_error_upper(bounds: &CategoryBounds, opts: &SearchOptions) -> Result<PhaseErrorBound> {
    PhaseErrorProblem::new(bounds)?.maximize(opts)
}

/// Feasible cell centres of an `n x n` grid over `(s, s')`.
pub fn feasible_grid(bounds: &CategoryBounds, n: usize) -> Result<Vec<(f64, f64)>> {
    let p = PhaseErrorProblem::new(bounds)?;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let s = (i as f64 + 0.5) / n as f64;
            let sp = (j as f64 + 0.5) / n as f64;
            if p.is_feasible(s, sp)? {
                out.push((s, sp));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{analytic_single_photon_yields, ChannelParams};
    use crate::decoy::YieldInterval;
    use crate::qstate::encoding_from_misalignment;
    use crate::security::{phase_error_rate, recover_coefficients};
    use core::f64::consts::FRAC_PI_4;

    fn honest(theta: f64, bg: f64) -> (CategoryBounds, f64) {
        let enc = encoding_from_misalignment(theta, theta).unwrap();
        let ch = ChannelParams {
            background_error: bg,
            ..ChannelParams::default()
        };
        let y = analytic_single_photon_yields(&enc, &ch);
        let c = recover_coefficients(&y, true).unwrap();
        let ep = phase_error_rate(&y, &c).unwrap().raw;
        (CategoryBounds::exact(&y.q), ep)
    }

    fn widen(b: &CategoryBounds, rel: f64) -> CategoryBounds {
        CategoryBounds(b.0.map(|iv| YieldInterval {
            lower: iv.lower * (1.0 - rel),
            upper: iv.upper * (1.0 + rel),
        }))
    }

    #[test]
    fn collapsed_intervals_match_direct_formula() {
        for (theta, bg) in [(FRAC_PI_4, 0.0), (FRAC_PI_4 + 0.3, 0.01), (0.5, 0.02)] {
            let (b, ep) = honest(theta, bg);
            let r = phase_error_upper(&b, &SearchOptions::default()).unwrap();
            assert!((r.raw - ep).abs() < 1e-6, "theta={theta}: {} vs {ep}", r.raw);
        }
    }

    #[test]
    fn widening_never_decreases() {
        let (b, _) = honest(FRAC_PI_4 + 0.2, 0.01);
        let mut prev = f64::NEG_INFINITY;
        for rel in [0.0, 1e-3, 1e-2, 5e-2] {
            let r = phase_error_upper(&widen(&b, rel), &SearchOptions::default()).unwrap();
            assert!(r.raw >= prev - 1e-9, "rel={rel}: {} < {prev}", r.raw);
            prev = r.raw;
        }
    }

    #[test]
    fn nonpositive_numerator_gives_half() {
        let (mut b, _) = honest(FRAC_PI_4, 0.0);
        b.0[Category::TestSame.index()] = b.get(Category::TestDiff);
        b.0[Category::Code.index()].lower = 0.0;
        let r = phase_error_upper(&b, &SearchOptions::default()).unwrap();
        assert_eq!(r.value, 0.5);
    }

    #[test]
    fn infeasible_boxes_are_reported() {
        let (mut b, _) = honest(FRAC_PI_4, 0.0);
        // T0 far above anything reachable from the code yields
        b.0[Category::TestZero.index()] = YieldInterval { lower: 10.0, upper: 11.0 };
        assert!(matches!(
            phase_error_upper(&b, &SearchOptions::default()),
            Err(Error::NlpInfeasible)
        ));
    }
}
