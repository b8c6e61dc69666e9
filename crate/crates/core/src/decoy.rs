//! Four-intensity decoy-state layer.
//!
//! Each user picks an intensity from `{mu, nu, omega, o = 0}`. The signal
//! intensity `mu` is only used with code-basis states; decoys use both bases.
//! Observed gains are pooled into joint categories, and single-photon yields
//! are bounded from the decoy/vacuum gains with the combinations
//!
//! ```text
//! q^L = (S+ - S-) / [a1(w) a1(v) (b1(w) b2(v) - b1(v) b2(w))]
//! q^U = (S'+ - S'-) / (a1(w) b1(w))
//! ```
//!
//! where `a_k(l)`, `b_k(r)` are Poisson photon-number weights of Alice and Bob.

use alloc::format;
use alloc::vec::Vec;

use crate::channel::GainTensor;
use crate::math;
use crate::security::binary_entropy;
use crate::{Error, Result};

/// Probability of a code-basis label on vacuum pulses. The vacuum carries no
/// photon, so the label only matters for bookkeeping of the pooled categories.
pub const VACUUM_CODE_PROBABILITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Intensity {
    Mu,
    Nu,
    Omega,
    Vacuum,
}

impl Intensity {
    pub const ALL: [Intensity; 4] = [Self::Mu, Self::Nu, Self::Omega, Self::Vacuum];
    pub const DECOYS: [Intensity; 3] = [Self::Nu, Self::Omega, Self::Vacuum];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::Mu => "mu",
            Self::Nu => "nu",
            Self::Omega => "omega",
            Self::Vacuum => "o",
        }
    }
}

/// One user's intensities and selection probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensitySet {
    pub mu: f64,
    pub nu: f64,
    pub omega: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub p_omega: f64,
    pub p_code_given_nu: f64,
    pub p_code_given_omega: f64,
}

impl IntensitySet {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.mu,
            self.nu,
            self.omega,
            self.p_mu,
            self.p_nu,
            self.p_omega,
            self.p_code_given_nu,
            self.p_code_given_omega,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidIntensities(format!("non-finite entry in {self:?}")));
        }
        if !(self.mu > self.nu && self.nu > self.omega && self.omega > 0.0) {
            return Err(Error::InvalidIntensities(format!(
                "require mu > nu > omega > 0, got mu={}, nu={}, omega={}",
                self.mu, self.nu, self.omega
            )));
        }
        let probs = [self.p_mu, self.p_nu, self.p_omega];
        if probs.iter().any(|p| *p < 0.0) || probs.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(Error::InvalidIntensities(format!(
                "selection probabilities must be non-negative with sum <= 1, got {probs:?}"
            )));
        }
        for p in [self.p_code_given_nu, self.p_code_given_omega] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidIntensities(format!(
                    "conditional code-basis probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn p_vacuum(&self) -> f64 {
        (1.0 - self.p_mu - self.p_nu - self.p_omega).max(0.0)
    }

    pub fn value(&self, i: Intensity) -> f64 {
        match i {
            Intensity::Mu => self.mu,
            Intensity::Nu => self.nu,
            Intensity::Omega => self.omega,
            Intensity::Vacuum => 0.0,
        }
    }

    pub fn selection_probability(&self, i: Intensity) -> f64 {
        match i {
            Intensity::Mu => self.p_mu,
            Intensity::Nu => self.p_nu,
            Intensity::Omega => self.p_omega,
            Intensity::Vacuum => self.p_vacuum(),
        }
    }

    /// Probability of preparing state `n` given intensity `i`.
    pub fn state_probability(&self, i: Intensity, n: usize) -> f64 {
        let p_code = match i {
            Intensity::Mu => 1.0,
            Intensity::Nu => self.p_code_given_nu,
            Intensity::Omega => self.p_code_given_omega,
            Intensity::Vacuum => VACUUM_CODE_PROBABILITY,
        };
        match n {
            0 | 1 => 0.5 * p_code,
            2 | 3 => 0.5 * (1.0 - p_code),
            _ => 0.0,
        }
    }

    /// Joint probability of intensity `i` and state `n` for one pulse.
    pub fn cell_probability(&self, i: Intensity, n: usize) -> f64 {
        self.selection_probability(i) * self.state_probability(i, n)
    }

    /// Poisson weight `a_k` at intensity `i`.
    pub fn weight(&self, k: u32, i: Intensity) -> f64 {
        poisson_weight(k, self.value(i))
    }
}

/// Source settings of both users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    pub alice: IntensitySet,
    pub bob: IntensitySet,
}

impl ProtocolParams {
    pub fn symmetric(set: IntensitySet) -> Self {
        Self {
            alice: set,
            bob: set,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.alice.validate()?;
        self.bob.validate()
    }
}

/// `l^k e^{-l} / k!`, with `a_0(0) = 1`.
pub fn poisson_weight(k: u32, intensity: f64) -> f64 {
    if intensity == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let mut w = math::exp(-intensity);
    for i in 1..=k {
        w *= intensity / i as f64;
    }
    w
}

/// Joint detection categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    C00,
    C01,
    C10,
    C11,
    /// Same test state: `{22, 33}`.
    TestSame,
    /// Different test states: `{23, 32}`.
    TestDiff,
    /// Alice test, Bob `|phi'_0>`: `{20, 30}`.
    TestZero,
    /// Alice test, Bob `|phi'_1>`: `{21, 31}`.
    TestOne,
    /// Alice `|phi_0>`, Bob test: `{02, 03}`.
    ZeroTest,
    /// Alice `|phi_1>`, Bob test: `{12, 13}`.
    OneTest,
    /// Both in the code basis: `{00, 01, 10, 11}`.
    Code,
}

impl Category {
    pub const ALL: [Category; 11] = [
        Self::C00,
        Self::C01,
        Self::C10,
        Self::C11,
        Self::TestSame,
        Self::TestDiff,
        Self::TestZero,
        Self::TestOne,
        Self::ZeroTest,
        Self::OneTest,
        Self::Code,
    ];

    pub fn cells(self) -> &'static [(usize, usize)] {
        match self {
            Self::C00 => &[(0, 0)],
            Self::C01 => &[(0, 1)],
            Self::C10 => &[(1, 0)],
            Self::C11 => &[(1, 1)],
            Self::TestSame => &[(2, 2), (3, 3)],
            Self::TestDiff => &[(2, 3), (3, 2)],
            Self::TestZero => &[(2, 0), (3, 0)],
            Self::TestOne => &[(2, 1), (3, 1)],
            Self::ZeroTest => &[(0, 2), (0, 3)],
            Self::OneTest => &[(1, 2), (1, 3)],
            Self::Code => &[(0, 0), (0, 1), (1, 0), (1, 1)],
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::C00 => "00",
            Self::C01 => "01",
            Self::C10 => "10",
            Self::C11 => "11",
            Self::TestSame => "Ts",
            Self::TestDiff => "Td",
            Self::TestZero => "T0",
            Self::TestOne => "T1",
            Self::ZeroTest => "0T",
            Self::OneTest => "1T",
            Self::Code => "C",
        }
    }

    /// Single-photon yield of this category from a full yield matrix.
    pub fn yield_of(self, q: &[[f64; 4]; 4]) -> f64 {
        let cells = self.cells();
        cells.iter().map(|&(n, m)| q[n][m]).sum::<f64>() / cells.len() as f64
    }

    /// Whether the category exists at the signal pair `mu mu`.
    pub fn has_signal(self) -> bool {
        matches!(self, Self::C00 | Self::C01 | Self::C10 | Self::C11 | Self::Code)
    }
}

/// Pooled pulse and detection counts of one category at one intensity pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PooledCounts {
    pub sent: f64,
    pub detected: f64,
}

impl PooledCounts {
    pub fn gain(&self) -> f64 {
        if self.sent > 0.0 {
            self.detected / self.sent
        } else {
            0.0
        }
    }
}

/// Pooled counts for every category and intensity pair present in the data.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGains {
    // [category][l][r]
    pooled: [[[Option<PooledCounts>; 4]; 4]; 11],
    signal_error_rate: Option<f64>,
}

impl JointGains {
    pub fn get(&self, category: Category, l: Intensity, r: Intensity) -> Option<PooledCounts> {
        self.pooled[category.index()][l.index()][r.index()]
    }

    /// Pooled counts, failing with an incomplete-data error naming the pair.
    pub fn require(&self, category: Category, l: Intensity, r: Intensity) -> Result<PooledCounts> {
        self.get(category, l, r).ok_or_else(|| {
            Error::IncompleteData(format!(
                "category {} at intensity pair ({}, {})",
                category.label(),
                l.symbol(),
                r.symbol()
            ))
        })
    }

    pub fn gain(&self, category: Category, l: Intensity, r: Intensity) -> Result<f64> {
        Ok(self.require(category, l, r)?.gain())
    }

    /// Code-basis gain of the signal pair, `Q_C^{mu mu}`.
    pub fn signal_gain(&self) -> Result<f64> {
        self.gain(Category::Code, Intensity::Mu, Intensity::Mu)
    }

    /// Code-basis error rate of the signal pair, `E_C^{mu mu}`.
    pub fn signal_error_rate(&self) -> Result<f64> {
        self.signal_error_rate.ok_or_else(|| {
            Error::IncompleteData("code-basis detections at intensity pair (mu, mu)".into())
        })
    }
}

/// Pools raw counts into joint categories.
///
/// Every category is required at all decoy pairs `{nu, omega, o}^2`; the code
/// categories are additionally required at the signal pair.
pub fn pool_joint_gains(raw: &GainTensor) -> Result<JointGains> {
    let mut pooled = [[[None; 4]; 4]; 11];
    for category in Category::ALL {
        for l in Intensity::ALL {
            for r in Intensity::ALL {
                let signal = l == Intensity::Mu || r == Intensity::Mu;
                if signal && !(l == r && category.has_signal()) {
                    continue;
                }
                let mut acc = PooledCounts::default();
                for &(n, m) in category.cells() {
                    let cell = raw.get(l, r, n, m).ok_or_else(|| {
                        Error::IncompleteData(format!(
                            "cell (l={}, r={}, n={n}, m={m}) for category {} at intensity pair ({}, {})",
                            l.index(),
                            r.index(),
                            category.label(),
                            l.symbol(),
                            r.symbol()
                        ))
                    })?;
                    acc.sent += cell.sent;
                    acc.detected += cell.detected;
                }
                pooled[category.index()][l.index()][r.index()] = Some(acc);
            }
        }
    }
    let code = pooled[Category::Code.index()][0][0].expect("signal code pair pooled above");
    let signal_error_rate = if code.detected > 0.0 {
        let err = pooled[Category::C00.index()][0][0].unwrap().detected
            + pooled[Category::C11.index()][0][0].unwrap().detected;
        Some(err / code.detected)
    } else {
        None
    };
    Ok(JointGains {
        pooled,
        signal_error_rate,
    })
}

/// The seven decoy/vacuum intensity pairs that enter the bounds, in the order
/// `[ww, ov, vo, oo, vv, ow, wo]`.
pub const BOUND_PAIRS: [(Intensity, Intensity); 7] = [
    (Intensity::Omega, Intensity::Omega),
    (Intensity::Vacuum, Intensity::Nu),
    (Intensity::Nu, Intensity::Vacuum),
    (Intensity::Vacuum, Intensity::Vacuum),
    (Intensity::Nu, Intensity::Nu),
    (Intensity::Vacuum, Intensity::Omega),
    (Intensity::Omega, Intensity::Vacuum),
];

pub(crate) const WW: usize = 0;
pub(crate) const OV: usize = 1;
pub(crate) const VO: usize = 2;
pub(crate) const OO: usize = 3;
pub(crate) const VV: usize = 4;
pub(crate) const OW: usize = 5;
pub(crate) const WO: usize = 6;

/// Linear maps from the seven pair gains to the lower and upper yield bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCoefficients {
    /// `q^L = sum lower[i] * Q[BOUND_PAIRS[i]]`.
    pub lower: [f64; 7],
    /// `q^U = sum upper[i] * Q[BOUND_PAIRS[i]]`.
    pub upper: [f64; 7],
    pub splus: [bool; 7],
}

impl BoundCoefficients {
    pub fn new(params: &ProtocolParams) -> Result<Self> {
        let (a, b) = (&params.alice, &params.bob);
        let (nu, om) = (Intensity::Nu, Intensity::Omega);
        let a0 = |i| a.weight(0, i);
        let a1 = |i| a.weight(1, i);
        let b0 = |i| b.weight(0, i);
        let b1 = |i| b.weight(1, i);
        let b2 = |i| b.weight(2, i);

        let den_l = a1(om) * a1(nu) * (b1(om) * b2(nu) - b1(nu) * b2(om));
        if !(den_l > 0.0) {
            return Err(Error::InvalidIntensities(format!(
                "lower-bound denominator a1(w) a1(v) (b1(w) b2(v) - b1(v) b2(w)) = {den_l:e} must be positive"
            )));
        }
        let den_u = a1(om) * b1(om);
        if !(den_u > 0.0) {
            return Err(Error::InvalidIntensities(format!(
                "upper-bound denominator a1(w) b1(w) = {den_u:e} must be positive"
            )));
        }

        let vv_weight = a1(nu) * b2(nu);
        let ww_weight = a1(om) * b2(om);
        let mut lower = [0.0; 7];
        // S+
        lower[WW] += vv_weight;
        lower[OV] += ww_weight * a0(nu);
        lower[VO] += ww_weight * b0(nu);
        lower[OO] += vv_weight * a0(om) * b0(om);
        // S-
        lower[VV] -= ww_weight;
        lower[OW] -= vv_weight * a0(om);
        lower[WO] -= vv_weight * b0(om);
        lower[OO] -= ww_weight * a0(nu) * b0(nu);
        for c in lower.iter_mut() {
            *c /= den_l;
        }

        let mut upper = [0.0; 7];
        upper[WW] = 1.0 / den_u;
        upper[OO] = a0(om) * b0(om) / den_u;
        upper[OW] = -a0(om) / den_u;
        upper[WO] = -b0(om) / den_u;

        Ok(Self {
            lower,
            upper,
            splus: [true, true, true, true, false, false, false],
        })
    }

    pub fn lower_bound(&self, gains: &[f64; 7]) -> f64 {
        dot(&self.lower, gains)
    }

    pub fn upper_bound(&self, gains: &[f64; 7]) -> f64 {
        dot(&self.upper, gains)
    }
}

fn dot(a: &[f64; 7], b: &[f64; 7]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Interval `[lower, upper]` on one category's single-photon yield.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldInterval {
    pub lower: f64,
    pub upper: f64,
}

/// Yield bounds for all eleven categories, indexed by [`Category::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryBounds(pub [YieldInterval; 11]);

impl CategoryBounds {
    pub fn get(&self, c: Category) -> YieldInterval {
        self.0[c.index()]
    }

    /// Degenerate intervals at the given yields.
    pub fn exact(q: &[[f64; 4]; 4]) -> Self {
        Self(core::array::from_fn(|i| {
            let y = Category::ALL[i].yield_of(q);
            YieldInterval { lower: y, upper: y }
        }))
    }
}

/// The seven pair gains of one category.
pub fn pair_gains(g: &JointGains, category: Category) -> Result<[f64; 7]> {
    let mut out = [0.0; 7];
    for (slot, &(l, r)) in out.iter_mut().zip(BOUND_PAIRS.iter()) {
        *slot = g.gain(category, l, r)?;
    }
    Ok(out)
}

/// Asymptotic bounds for every category; raw (unclamped) values.
pub fn asymptotic_yield_bounds(g: &JointGains, params: &ProtocolParams) -> Result<CategoryBounds> {
    params.validate()?;
    let coef = BoundCoefficients::new(params)?;
    let mut out = [YieldInterval {
        lower: 0.0,
        upper: 0.0,
    }; 11];
    for c in Category::ALL {
        let gains = pair_gains(g, c)?;
        out[c.index()] = YieldInterval {
            lower: coef.lower_bound(&gains),
            upper: coef.upper_bound(&gains),
        };
    }
    Ok(CategoryBounds(out))
}

/// Asymptotic bounds of a single category from the seven pair gains.
pub fn bounds_from_pair_gains(gains: &[f64; 7], params: &ProtocolParams) -> Result<YieldInterval> {
    let coef = BoundCoefficients::new(params)?;
    Ok(YieldInterval {
        lower: coef.lower_bound(gains),
        upper: coef.upper_bound(gains),
    })
}

/// Weak-coherent-pulse key rate per pulse pair:
///
/// `R = p_mu p_mu' [a1 b1 q_C^L (1 - H(e_p^U)) - Q_C f H(E_C)]`.
#[allow(clippy::too_many_arguments)]
pub fn wcp_key_rate(
    p_mu_a: f64,
    p_mu_b: f64,
    mu_a: f64,
    mu_b: f64,
    q_c_lower: f64,
    e_p_upper: f64,
    gain_c_signal: f64,
    error_c_signal: f64,
    f_ec: f64,
) -> f64 {
    let a1 = poisson_weight(1, mu_a);
    let b1 = poisson_weight(1, mu_b);
    p_mu_a
        * p_mu_b
        * (a1 * b1 * q_c_lower * (1.0 - binary_entropy(e_p_upper))
            - gain_c_signal * f_ec * binary_entropy(error_c_signal))
}

/// Photon-number cutoff `k` such that the Poisson tail beyond `k` is below `tail`.
pub fn truncation_for(intensity: f64, tail: f64) -> u32 {
    let mut k = 0u32;
    let mut cumulative = 0.0;
    loop {
        cumulative += poisson_weight(k, intensity);
        if 1.0 - cumulative < tail || k > 400 {
            return k;
        }
        k += 1;
    }
}

/// Yield bounds of the categories, packaged for reporting.
pub fn bounds_table(bounds: &CategoryBounds) -> Vec<(Category, YieldInterval)> {
    Category::ALL.iter().map(|&c| (c, bounds.get(c))).collect()
}
