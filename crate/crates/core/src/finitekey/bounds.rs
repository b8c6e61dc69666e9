//! Per-category yield bounds from observed counts via linear programs.
//!
//! Decision variables are the expected detection counts of the seven pairs in
//! [`BOUND_PAIRS`]; observed counts only enter through Chernoff intervals on
//! single pairs and on the joint sums listed in [`lower_joint_rows`] and
//! [`upper_joint_rows`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::chernoff::{Fluctuation, Tally};
use super::lp::{Constraint, LinearProgram, LpSolution, Relation, Sense};
use crate::decoy::{
    BoundCoefficients, Category, CategoryBounds, JointGains, ProtocolParams, YieldInterval,
    BOUND_PAIRS, OO, OV, OW, VO, VV, WO, WW,
};
use crate::{Error, Result};

/// Pairs whose joint sums are bounded from below in the lower program.
const LOWER_SET: [usize; 4] = [WW, OV, VO, OO];
/// Pairs whose joint sums are bounded from above in the lower program.
const UPPER_SET: [usize; 3] = [VV, OW, WO];

/// One-sided bound applications per category: 14 individual, 16 joint rows
/// in the lower program, 2 in the upper program.
pub const APPLICATIONS_PER_CATEGORY: usize = 32;
/// One-sided bound applications over all categories.
pub const TOTAL_APPLICATIONS: usize = APPLICATIONS_PER_CATEGORY * 11;

/// Certification tolerance on LP optima.
pub const CERTIFICATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Lower,
    Upper,
}

fn subsets(set: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let n = set.len();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == size {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).map(|i| set[i]).collect());
        }
    }
    out
}

fn lower_joint_rows() -> Vec<(Side, Vec<usize>)> {
    let mut rows = Vec::new();
    for size in 2..=4 {
        for s in subsets(&LOWER_SET, size) {
            rows.push((Side::Lower, s));
        }
    }
    for size in 2..=3 {
        for s in subsets(&UPPER_SET, size) {
            rows.push((Side::Upper, s));
        }
    }
    rows.push((Side::Upper, vec![VV, OW, WO, OO]));
    rows
}

fn upper_joint_rows() -> Vec<(Side, Vec<usize>)> {
    vec![(Side::Lower, vec![OW, WO]), (Side::Upper, vec![WW, OO])]
}

fn pair_name(i: usize) -> String {
    let (l, r) = BOUND_PAIRS[i];
    format!("{}-{}", l.symbol(), r.symbol())
}

fn row_label(side: Side, members: &[usize]) -> String {
    let names: Vec<String> = members.iter().map(|&i| pair_name(i)).collect();
    let tag = match side {
        Side::Lower => "F-",
        Side::Upper => "F+",
    };
    format!("{tag}({})", names.join(" + "))
}

/// Solution details of one of the two programs.
#[derive(Debug, Clone, PartialEq)]
pub struct LpReport {
    /// Yield bound before clamping to `[0, 1]`.
    pub value: f64,
    /// Optimal expected counts, in [`BOUND_PAIRS`] order.
    pub expected_counts: [f64; 7],
    /// Labels of the constraints tight at the optimum.
    pub active: Vec<String>,
    pub objective_gap: f64,
    pub max_violation: f64,
}

/// Finite-size interval on one category's single-photon yield.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedYield {
    pub category: Category,
    /// Clamped to `[0, 1]`.
    pub lower: f64,
    pub upper: f64,
    pub lower_lp: LpReport,
    pub upper_lp: LpReport,
    /// One-sided bound applications spent on this category.
    pub applications: usize,
}

impl BoundedYield {
    pub fn interval(&self) -> YieldInterval {
        YieldInterval {
            lower: self.lower,
            upper: self.upper,
        }
    }

    pub fn raw_interval(&self) -> YieldInterval {
        YieldInterval {
            lower: self.lower_lp.value,
            upper: self.upper_lp.value,
        }
    }
}

struct Program {
    observed: [f64; 7],
    sent: [f64; 7],
    scale: [f64; 7],
    base: Vec<Constraint>,
}

impl Program {
    fn build(
        counts: &JointGains,
        category: Category,
        fluct: Fluctuation,
        tally: &mut Tally,
    ) -> Result<Self> {
        let mut observed = [0.0; 7];
        let mut sent = [0.0; 7];
        for (i, &(l, r)) in BOUND_PAIRS.iter().enumerate() {
            let p = counts.require(category, l, r)?;
            if !(p.sent > 0.0) {
                return Err(Error::IncompleteData(format!(
                    "no pulses sent for category {} at intensity pair ({}, {})",
                    category.label(),
                    l.symbol(),
                    r.symbol()
                )));
            }
            observed[i] = p.detected;
            sent[i] = p.sent;
        }
        let mut scale = [1.0; 7];
        let mut base = Vec::new();
        for i in 0..7 {
            let lo = fluct.lower(observed[i], tally)?;
            let hi = fluct.upper(observed[i], tally)?;
            if hi > 0.0 {
                scale[i] = hi;
            }
            let mut e = vec![0.0; 7];
            e[i] = 1.0;
            base.push(Constraint::new(e.clone(), Relation::Ge, lo / scale[i], format!("F-({})", pair_name(i))));
            base.push(Constraint::new(e, Relation::Le, hi / scale[i], format!("F+({})", pair_name(i))));
        }
        Ok(Self {
            observed,
            sent,
            scale,
            base,
        })
    }

    fn joint_row(&self, side: Side, members: &[usize], fluct: Fluctuation, tally: &mut Tally) -> Result<Constraint> {
        let total: f64 = members.iter().map(|&i| self.observed[i]).sum();
        let (rhs, rel) = match side {
            Side::Lower => (fluct.lower(total, tally)?, Relation::Ge),
            Side::Upper => (fluct.upper(total, tally)?, Relation::Le),
        };
        let mut coeffs = vec![0.0; 7];
        for &i in members {
            coeffs[i] = self.scale[i];
        }
        Ok(Constraint::new(coeffs, rel, rhs, row_label(side, members)))
    }

    fn solve(&self, sense: Sense, weights: &[f64; 7], rows: Vec<Constraint>) -> Result<LpReport> {
        // objective in gain units: sum w_i * n_i / N_i, with n_i = scale_i * x_i
        let objective: Vec<f64> = (0..7).map(|i| weights[i] * self.scale[i] / self.sent[i]).collect();
        let mut lp = LinearProgram::new(sense, objective);
        for c in self.base.iter().cloned().chain(rows) {
            lp.push(c);
        }
        let sol: LpSolution = lp.solve()?;
        let violation = lp.max_violation(&sol.x);
        let gap = sol.objective_gap();
        if gap > CERTIFICATION_TOL || violation > CERTIFICATION_TOL {
            return Err(Error::LpUncertified {
                objective_gap: gap,
                violation,
            });
        }
        let active = lp
            .active_set(&sol.x, CERTIFICATION_TOL)
            .into_iter()
            .map(|i| lp.constraints[i].label.clone())
            .collect();
        Ok(LpReport {
            value: sol.objective,
            expected_counts: core::array::from_fn(|i| sol.x[i] * self.scale[i]),
            active,
            objective_gap: gap,
            max_violation: violation,
        })
    }
}

/// Lower and upper yield bounds of one category.
pub fn yield_bounds_lp(
    counts: &JointGains,
    params: &ProtocolParams,
    fluct: Fluctuation,
    category: Category,
) -> Result<BoundedYield> {
    params.validate()?;
    let coef = BoundCoefficients::new(params)?;
    let mut tally = Tally::default();
    let prog = Program::build(counts, category, fluct, &mut tally)?;

    let mut lower_rows = lower_joint_rows()
        .into_iter()
        .map(|(s, m)| prog.joint_row(s, &m, fluct, &mut tally))
        .collect::<Result<Vec<_>>>()?;
    let mut upper_rows = upper_joint_rows()
        .into_iter()
        .map(|(s, m)| prog.joint_row(s, &m, fluct, &mut tally))
        .collect::<Result<Vec<_>>>()?;
    if fluct == Fluctuation::Exact {
        // implied by the pinned individual counts, and all tight at the
        // single feasible point, which only adds degeneracy
        lower_rows.clear();
        upper_rows.clear();
    }

    let lower_lp = prog.solve(Sense::Minimize, &coef.lower, lower_rows)?;
    let upper_lp = prog.solve(Sense::Maximize, &coef.upper, upper_rows)?;
    Ok(BoundedYield {
        category,
        lower: lower_lp.value.clamp(0.0, 1.0),
        upper: upper_lp.value.clamp(0.0, 1.0),
        lower_lp,
        upper_lp,
        applications: tally.applications,
    })
}

/// Bounds for all eleven categories.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteBounds {
    pub categories: Vec<BoundedYield>,
    pub applications: usize,
}

impl FiniteBounds {
    pub fn get(&self, c: Category) -> &BoundedYield {
        &self.categories[c.index()]
    }

    /// Intervals clamped to `[0, 1]`.
    pub fn clamped(&self) -> CategoryBounds {
        CategoryBounds(core::array::from_fn(|i| self.categories[i].interval()))
    }

    pub fn raw(&self) -> CategoryBounds {
        CategoryBounds(core::array::from_fn(|i| self.categories[i].raw_interval()))
    }
}

pub fn all_yield_bounds(
    counts: &JointGains,
    params: &ProtocolParams,
    fluct: Fluctuation,
) -> Result<FiniteBounds> {
    let categories = Category::ALL
        .iter()
        .map(|&c| yield_bounds_lp(counts, params, fluct, c))
        .collect::<Result<Vec<_>>>()?;
    let applications = categories.iter().map(|b| b.applications).sum();
    Ok(FiniteBounds {
        categories,
        applications,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{wcp_expected_gains, ChannelParams};
    use crate::decoy::{asymptotic_yield_bounds, pool_joint_gains, IntensitySet};
    use crate::qstate::EncodingPair;

    fn params() -> ProtocolParams {
        ProtocolParams::symmetric(IntensitySet {
            mu: 0.349,
            nu: 0.239,
            omega: 0.0515,
            p_mu: 0.463,
            p_nu: 0.1,
            p_omega: 0.357,
            p_code_given_nu: 0.412,
            p_code_given_omega: 0.391,
        })
    }

    fn expected(total: f64) -> JointGains {
        let enc = EncodingPair::bb84();
        let ch = ChannelParams::default();
        let g = wcp_expected_gains(&enc, &params(), &ch).unwrap();
        pool_joint_gains(&g.expected_counts(total)).unwrap()
    }

    #[test]
    fn row_counts() {
        assert_eq!(lower_joint_rows().len(), 16);
        assert_eq!(upper_joint_rows().len(), 2);
    }

    #[test]
    fn exact_counts_reproduce_asymptotic_bounds() {
        let g = expected(1e12);
        let asym = asymptotic_yield_bounds(&g, &params()).unwrap();
        let fin = all_yield_bounds(&g, &params(), Fluctuation::Exact).unwrap();
        for c in Category::ALL {
            let a = asym.get(c);
            let f = fin.get(c).raw_interval();
            let scale = a.upper.abs().max(1e-12);
            assert!((a.lower - f.lower).abs() <= 1e-9 * scale, "{:?} {a:?} {f:?}", c);
            assert!((a.upper - f.upper).abs() <= 1e-9 * scale, "{:?} {a:?} {f:?}", c);
        }
        assert_eq!(fin.applications, TOTAL_APPLICATIONS);
    }

    #[test]
    fn finite_intervals_contain_asymptotic_and_shrink() {
        let p = params();
        let asym = asymptotic_yield_bounds(&expected(1.0), &p).unwrap();
        let mut prev: Option<(f64, f64)> = None;
        for total in [1e10, 1e12, 1e14] {
            let g = expected(total);
            let b = yield_bounds_lp(&g, &p, Fluctuation::Chernoff { xi: 1e-10 }, Category::Code).unwrap();
            let a = asym.get(Category::Code);
            assert!(b.lower_lp.value <= a.lower * (1.0 + 1e-9));
            assert!(b.upper_lp.value >= a.upper * (1.0 - 1e-9));
            assert!(b.lower <= b.upper);
            if let Some((lo, hi)) = prev {
                assert!(b.lower_lp.value >= lo && b.upper_lp.value <= hi);
            }
            prev = Some((b.lower_lp.value, b.upper_lp.value));
            assert!(!b.lower_lp.active.is_empty());
        }
    }

    #[test]
    fn missing_pair_is_reported() {
        let enc = EncodingPair::bb84();
        let g = wcp_expected_gains(&enc, &params(), &ChannelParams::default()).unwrap();
        let mut raw = g.expected_counts(1e10);
        raw.remove(crate::decoy::Intensity::Omega, crate::decoy::Intensity::Vacuum, 0, 1);
        assert!(matches!(pool_joint_gains(&raw), Err(Error::IncompleteData(_))));
    }
}
