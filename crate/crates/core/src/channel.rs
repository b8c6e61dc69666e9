//! Synthetic detection statistics for an honest relay.
//!
//! # Detector model
//!
//! The relay interferes the two pulses on a 50:50 splitter with output ports
//! `c` and `d`. Each port has a threshold detector gated in both time bins
//! (late = `|0>`, early = `|1>`), giving four gates `cE, cL, dE, dL`. Every
//! gate fires independently with probability `1 - (1 - P_d) exp(-m)` where `m`
//! is the mean photon number reaching it; efficiency is folded into the
//! channel transmittance `eta = P_eta * 10^(-loss/10)` of each user, and the
//! link loss is split equally between the users.
//!
//! A `|psi^->` announcement requires exactly one click at `c` and exactly one
//! at `d`, in different time bins: either `{cE, dL}` or `{cL, dE}` with the two
//! remaining gates silent. Double clicks in one time bin (or one detector
//! firing in both bins) are failures.
//!
//! # Background error
//!
//! Optical misalignment is modelled per user: with probability `p` the
//! prepared mode is replaced by `|0>` or `|1>` (each `p/2`). For single
//! photons this is the depolarizing map `rho -> (1-p) rho + p I/2`. The
//! parameter is set from the background error rate `e_bg` by
//! `p = 1 - sqrt(1 - 2 e_bg)`, so that two independent flips give a
//! code-basis error of exactly `e_bg` in the noiseless limit.
//!
//! # Single-photon yield
//!
//! For one photon from each user in modes `a`, `b`:
//!
//! ```text
//! q(a, b) = eta_A eta_B (1-P_d)^2 [P_psi(a,b) + P_d P_same(a,b)]
//!         + [eta_A (1-eta_B) + eta_B (1-eta_A)] P_d (1-P_d)^2
//!         + (1-eta_A)(1-eta_B) 2 P_d^2 (1-P_d)^2
//! ```
//!
//! with `P_psi = |<psi^-|a b>|^2` (photons leave by different ports in different
//! bins) and `P_same = |a_0 b_0|^2 + |a_1 b_1|^2` (both photons in one bin, which
//! bunch into one port). The background mixture is applied on top by
//! linearity. This is exactly the `(1,1)` photon-number component of the
//! coherent-pulse model below.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::decoy::{Intensity, ProtocolParams};
use crate::math;
use crate::qstate::{psi_minus_overlap, EncodingPair, PureQubit};
use crate::{Error, Result};

/// Phase-difference quadrature nodes.
pub const PHASE_NODES: usize = 256;
const QUADRATURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Dark-count probability per detector per gate.
    pub dark_count: f64,
    pub det_efficiency: f64,
    /// Link loss in dB, split equally between Alice's and Bob's side.
    pub total_loss_db: f64,
    pub fiber_loss_db_per_km: f64,
    /// Optical misalignment error floor.
    pub background_error: f64,
}

impl Default for ChannelParams {
    /// Detector and fiber constants used throughout the reference scenarios.
    fn default() -> Self {
        Self {
            dark_count: 3e-6,
            det_efficiency: 0.2,
            total_loss_db: 20.0,
            fiber_loss_db_per_km: 0.2,
            background_error: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.dark_count)
            && self.det_efficiency > 0.0
            && self.det_efficiency <= 1.0
            && self.total_loss_db >= 0.0
            && self.fiber_loss_db_per_km >= 0.0
            && (0.0..=0.5).contains(&self.background_error);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid channel parameters {self:?}")))
        }
    }

    /// Same channel with the link loss set to `km` of fiber.
    pub fn at_distance(&self, km: f64) -> Self {
        Self {
            total_loss_db: km * self.fiber_loss_db_per_km,
            ..*self
        }
    }

    /// Per-side transmittance including detector efficiency.
    pub fn side_transmittance(&self) -> f64 {
        self.det_efficiency * math::exp(-(self.total_loss_db / 2.0) / 10.0 * core::f64::consts::LN_10)
    }

    /// Per-user mode replacement probability.
    pub fn flip_probability(&self) -> f64 {
        1.0 - math::sqrt(1.0 - 2.0 * self.background_error)
    }
}

/// Single-photon-pair yields `q[n][m]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldMatrix {
    pub q: [[f64; 4]; 4],
}

impl YieldMatrix {
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            q: self.q.map(|row| row.map(|v| v * k)),
        }
    }

    /// Largest deviation from `q_{2m} + q_{3m} = 2(c0^2 q_{0m} + c1^2 q_{1m})`
    /// and Bob's mirror relation, over `m, n` in all four states.
    pub fn consistency_residual(&self, enc: &EncodingPair) -> f64 {
        let q = &self.q;
        let (a0, a1) = (enc.c0 * enc.c0, enc.c1 * enc.c1);
        let (b0, b1) = (enc.c0p * enc.c0p, enc.c1p * enc.c1p);
        let mut worst = 0.0_f64;
        for k in 0..4 {
            worst = worst.max((q[2][k] + q[3][k] - 2.0 * (a0 * q[0][k] + a1 * q[1][k])).abs());
            worst = worst.max((q[k][2] + q[k][3] - 2.0 * (b0 * q[k][0] + b1 * q[k][1])).abs());
        }
        worst
    }
}

fn same_bin_probability(a: &PureQubit, b: &PureQubit) -> f64 {
    a.p0() * b.p0() + a.p1() * b.p1()
}

/// Weighted mode mixture of one user's pulse under background flips.
fn mode_mixture(state: PureQubit, flip: f64) -> [(f64, PureQubit); 3] {
    [
        (1.0 - flip, state),
        (0.5 * flip, PureQubit::zero()),
        (0.5 * flip, PureQubit::one()),
    ]
}

fn pure_pair_yield(a: &PureQubit, b: &PureQubit, eta_a: f64, eta_b: f64, pd: f64) -> f64 {
    let quiet2 = (1.0 - pd) * (1.0 - pd);
    eta_a * eta_b * quiet2 * (psi_minus_overlap(a, b) + pd * same_bin_probability(a, b))
        + (eta_a * (1.0 - eta_b) + eta_b * (1.0 - eta_a)) * pd * quiet2
        + (1.0 - eta_a) * (1.0 - eta_b) * 2.0 * pd * pd * quiet2
}

/// Honest-relay single-photon yields for every state pair.
pub fn analytic_single_photon_yields(enc: &EncodingPair, ch: &ChannelParams) -> YieldMatrix {
    let eta = ch.side_transmittance();
    let flip = ch.flip_probability();
    let mut q = [[0.0; 4]; 4];
    for (n, row) in q.iter_mut().enumerate() {
        for (m, slot) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (wa, a) in mode_mixture(enc.alice[n], flip) {
                for (wb, b) in mode_mixture(enc.bob[m], flip) {
                    if wa * wb > 0.0 {
                        acc += wa * wb * pure_pair_yield(&a, &b, eta, eta, ch.dark_count);
                    }
                }
            }
            *slot = acc;
        }
    }
    YieldMatrix { q }
}

#[inline]
fn click(pd: f64, mean: f64) -> f64 {
    // 1 - (1 - pd) e^{-mean} without cancellation for tiny probabilities
    -libm::expm1(libm::log1p(-pd) - mean)
}

fn pattern_probability(pd: f64, c: [f64; 2], d: [f64; 2]) -> f64 {
    // index 0 = late bin, 1 = early bin
    let (cl, ce) = (click(pd, c[0]), click(pd, c[1]));
    let (dl, de) = (click(pd, d[0]), click(pd, d[1]));
    ce * (1.0 - cl) * (1.0 - de) * dl + (1.0 - ce) * cl * de * (1.0 - dl)
}

/// Phase-averaged coincidence probability of two coherent pulses with mean
/// photon numbers `mean_a`, `mean_b` (after transmission) in modes `a`, `b`.
/// Returns the `PHASE_NODES`-point average and the half-resolution average on
/// the even nodes, whose difference is the quadrature error estimate.
fn coherent_pair_gain(a: &PureQubit, b: &PureQubit, mean_a: f64, mean_b: f64, pd: f64) -> (f64, f64) {
    let sa = math::sqrt(mean_a);
    let sb = math::sqrt(mean_b);
    let alpha = [a.amplitude0() * sa, a.amplitude1() * sa];
    let beta = [b.amplitude0() * sb, b.amplitude1() * sb];
    if mean_a == 0.0 || mean_b == 0.0 {
        let c = [0, 1].map(|t| 0.5 * (alpha[t] + beta[t]).norm_sqr());
        let p = pattern_probability(pd, c, c);
        return (p, p);
    }
    let mut all = 0.0;
    let mut even = 0.0;
    for k in 0..PHASE_NODES {
        let phi = 2.0 * PI * k as f64 / PHASE_NODES as f64;
        let rot = num_complex::Complex64::new(math::cos(phi), math::sin(phi));
        let c = [0, 1].map(|t| 0.5 * (alpha[t] + beta[t] * rot).norm_sqr());
        let d = [0, 1].map(|t| 0.5 * (alpha[t] - beta[t] * rot).norm_sqr());
        let p = pattern_probability(pd, c, d);
        all += p;
        if k % 2 == 0 {
            even += p;
        }
    }
    (all / PHASE_NODES as f64, even / (PHASE_NODES / 2) as f64)
}

/// Expected gain for Alice in state `a` at mean photon number `mu_a` (before
/// the channel) and Bob likewise, including background flips.
pub fn wcp_cell_gain(a: &PureQubit, b: &PureQubit, mu_a: f64, mu_b: f64, ch: &ChannelParams) -> Result<f64> {
    cell_gain_cached(a, b, mu_a, mu_b, ch, &mut PairCache::new())
}

/// Phase-averaged gains keyed by the exact bits of both modes and means.
/// Background replacements turn many cells into the same pure pairs.
type PairCache = BTreeMap<[u64; 10], (f64, f64)>;

fn pair_key(a: &PureQubit, b: &PureQubit, ma: f64, mb: f64) -> [u64; 10] {
    let (a0, a1, b0, b1) = (a.amplitude0(), a.amplitude1(), b.amplitude0(), b.amplitude1());
    [
        a0.re.to_bits(),
        a0.im.to_bits(),
        a1.re.to_bits(),
        a1.im.to_bits(),
        b0.re.to_bits(),
        b0.im.to_bits(),
        b1.re.to_bits(),
        b1.im.to_bits(),
        ma.to_bits(),
        mb.to_bits(),
    ]
}

fn cell_gain_cached(
    a: &PureQubit,
    b: &PureQubit,
    mu_a: f64,
    mu_b: f64,
    ch: &ChannelParams,
    cache: &mut PairCache,
) -> Result<f64> {
    let eta = ch.side_transmittance();
    let flip = ch.flip_probability();
    let (ma, mb) = (mu_a * eta, mu_b * eta);
    let mut fine = 0.0;
    let mut coarse = 0.0;
    for (wa, ma_state) in mode_mixture(*a, flip) {
        for (wb, mb_state) in mode_mixture(*b, flip) {
            let w = wa * wb;
            if w == 0.0 {
                continue;
            }
            let key = pair_key(&ma_state, &mb_state, ma, mb);
            let (f, c) = *cache
                .entry(key)
                .or_insert_with(|| coherent_pair_gain(&ma_state, &mb_state, ma, mb, ch.dark_count));
            fine += w * f;
            coarse += w * c;
        }
    }
    let achieved = (fine - coarse).abs();
    if achieved > QUADRATURE_TOL * fine.max(1e-300) && achieved > 1e-300 {
        return Err(Error::Quadrature { achieved });
    }
    Ok(fine)
}

/// Index of one cell: intensity pair and state pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex {
    pub l: Intensity,
    pub r: Intensity,
    pub n: usize,
    pub m: usize,
}

/// Whether `(intensity, state)` can occur: the signal intensity only carries code states.
pub fn state_allowed(i: Intensity, n: usize) -> bool {
    n < 4 && !(i == Intensity::Mu && n > 1)
}

/// Expected gain and selection probability of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedCell {
    pub index: CellIndex,
    /// Probability that a pulse pair lands in this cell.
    pub weight: f64,
    pub gain: f64,
}

/// Expected statistics for infinitely many pulse pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedGains {
    pub cells: Vec<ExpectedCell>,
}

impl ExpectedGains {
    pub fn get(&self, l: Intensity, r: Intensity, n: usize, m: usize) -> Option<&ExpectedCell> {
        self.cells
            .iter()
            .find(|c| c.index == CellIndex { l, r, n, m })
    }

    /// Deterministic counts at data size `total_pairs`: `N = w N_total`, `n = Q N`.
    pub fn expected_counts(&self, total_pairs: f64) -> GainTensor {
        let mut t = GainTensor::new();
        for c in &self.cells {
            let sent = c.weight * total_pairs;
            t.cells.insert(
                c.index,
                CellCounts {
                    sent,
                    detected: sent * c.gain,
                },
            );
        }
        t
    }
}

/// Expected gains of every allowed cell for the given encoding and sources.
pub fn wcp_expected_gains(enc: &EncodingPair, params: &ProtocolParams, ch: &ChannelParams) -> Result<ExpectedGains> {
    params.validate()?;
    ch.validate()?;
    let mut cells = Vec::new();
    // Cache by (l, r, n, m) modulo vacuum: a vacuum pulse has no mode.
    let mut cache: BTreeMap<(Intensity, Intensity, usize, usize), f64> = BTreeMap::new();
    let mut pairs = PairCache::new();
    for l in Intensity::ALL {
        for r in Intensity::ALL {
            for n in 0..4 {
                for m in 0..4 {
                    if !state_allowed(l, n) || !state_allowed(r, m) {
                        continue;
                    }
                    let weight = params.alice.cell_probability(l, n) * params.bob.cell_probability(r, m);
                    if weight <= 0.0 {
                        continue;
                    }
                    let key = (
                        l,
                        r,
                        if l == Intensity::Vacuum { 0 } else { n },
                        if r == Intensity::Vacuum { 0 } else { m },
                    );
                    let gain = match cache.get(&key) {
                        Some(g) => *g,
                        None => {
                            let g = cell_gain_cached(
                                &enc.alice[key.2],
                                &enc.bob[key.3],
                                params.alice.value(l),
                                params.bob.value(r),
                                ch,
                                &mut pairs,
                            )?;
                            cache.insert(key, g);
                            g
                        }
                    };
                    cells.push(ExpectedCell {
                        index: CellIndex { l, r, n, m },
                        weight,
                        gain,
                    });
                }
            }
        }
    }
    Ok(ExpectedGains { cells })
}

/// Pulse and detection counts of one cell. Counts are held as `f64` so that
/// deterministic expected counts and sampled integer counts share one type;
/// integer counts are exact up to `2^53`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellCounts {
    pub sent: f64,
    pub detected: f64,
}

/// Largest count representable exactly.
pub const MAX_EXACT_COUNT: u64 = 1 << 53;

impl CellCounts {
    pub fn new(sent: f64, detected: f64) -> Result<Self> {
        if !(sent >= 0.0 && detected >= 0.0 && detected <= sent && sent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cell counts must satisfy 0 <= n_success <= N_sent, got N_sent={sent}, n_success={detected}"
            )));
        }
        Ok(Self { sent, detected })
    }

    pub fn from_integers(sent: u64, detected: u64) -> Result<Self> {
        if sent > MAX_EXACT_COUNT {
            return Err(Error::CountOverflow(format!(
                "N_sent = {sent} exceeds exactly representable range 2^53"
            )));
        }
        Self::new(sent as f64, detected as f64)
    }

    pub fn gain(&self) -> f64 {
        if self.sent > 0.0 {
            self.detected / self.sent
        } else {
            0.0
        }
    }
}

/// Observed or expected counts per cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GainTensor {
    cells: BTreeMap<CellIndex, CellCounts>,
}

impl GainTensor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, l: Intensity, r: Intensity, n: usize, m: usize, counts: CellCounts) -> Result<()> {
        if !state_allowed(l, n) || !state_allowed(r, m) {
            return Err(Error::InvalidParameter(format!(
                "cell (l={}, r={}, n={n}, m={m}) is not part of the protocol",
                l.index(),
                r.index()
            )));
        }
        self.cells.insert(CellIndex { l, r, n, m }, counts);
        Ok(())
    }

    pub fn remove(&mut self, l: Intensity, r: Intensity, n: usize, m: usize) -> Option<CellCounts> {
        self.cells.remove(&CellIndex { l, r, n, m })
    }

    pub fn get(&self, l: Intensity, r: Intensity, n: usize, m: usize) -> Option<CellCounts> {
        self.cells.get(&CellIndex { l, r, n, m }).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellIndex, &CellCounts)> {
        self.cells.iter()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_sent(&self) -> f64 {
        self.cells.values().map(|c| c.sent).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoy::{poisson_weight, IntensitySet};
    use crate::qstate::encoding_from_misalignment;
    use core::f64::consts::FRAC_PI_4;
    use proptest::prelude::*;

    fn fig1_channel() -> ChannelParams {
        ChannelParams::default()
    }

    #[test]
    fn ideal_bb84_yields() {
        let ch = ChannelParams {
            dark_count: 0.0,
            ..fig1_channel()
        };
        let eta = ch.side_transmittance();
        let y = analytic_single_photon_yields(&EncodingPair::bb84(), &ch).q;
        let half = 0.5 * eta * eta;
        assert_eq!(y[0][0], 0.0);
        assert_eq!(y[1][1], 0.0);
        for v in [y[0][1], y[1][0], y[2][3], y[3][2]] {
            assert!((v - half).abs() < 1e-18);
        }
        assert!(y[2][2].abs() < 1e-20 && y[3][3].abs() < 1e-20);
    }

    #[test]
    fn transmittance_splits_loss() {
        let ch = fig1_channel();
        assert!((ch.side_transmittance() - 0.2 * 0.1).abs() < 1e-15);
        assert!((ch.at_distance(50.0).total_loss_db - 10.0).abs() < 1e-12);
    }

    #[test]
    fn efficiency_scaling_without_dark_counts() {
        let base = ChannelParams {
            dark_count: 0.0,
            background_error: 0.02,
            ..fig1_channel()
        };
        let k = 0.7;
        let scaled = ChannelParams {
            det_efficiency: base.det_efficiency * k,
            ..base
        };
        let enc = encoding_from_misalignment(0.4, 1.1).unwrap();
        let y0 = analytic_single_photon_yields(&enc, &base).q;
        let y1 = analytic_single_photon_yields(&enc, &scaled).q;
        for n in 0..4 {
            for m in 0..4 {
                assert!((y1[n][m] - k * k * y0[n][m]).abs() <= 1e-15 * y0[n][m].max(1e-300));
            }
        }
    }

    #[test]
    fn background_error_sets_code_error_rate() {
        let ch = ChannelParams {
            dark_count: 0.0,
            background_error: 0.009,
            ..fig1_channel()
        };
        let y = analytic_single_photon_yields(&EncodingPair::bb84(), &ch).q;
        let eb = (y[0][0] + y[1][1]) / (y[0][0] + y[0][1] + y[1][0] + y[1][1]);
        assert!((eb - 0.009).abs() < 1e-12);
    }

    #[test]
    fn vacuum_pair_is_dark_count_coincidence() {
        let ch = fig1_channel();
        let pd = ch.dark_count;
        let g = wcp_cell_gain(&PureQubit::zero(), &PureQubit::one(), 0.0, 0.0, &ch).unwrap();
        let expected = 2.0 * pd * pd * (1.0 - pd) * (1.0 - pd);
        assert!((g - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn zero_intensity_limit() {
        let ch = fig1_channel();
        let vac = wcp_cell_gain(&PureQubit::zero(), &PureQubit::zero(), 0.0, 0.0, &ch).unwrap();
        let enc = encoding_from_misalignment(1.0, 0.6).unwrap();
        let tiny = wcp_cell_gain(&enc.alice[2], &enc.bob[3], 1e-9, 1e-9, &ch).unwrap();
        assert!((tiny - vac).abs() < 1e-10);
    }

    /// Single-photon component of the coherent model by a mixed finite
    /// difference of `G = e^{mu_a + mu_b} Q(mu_a, mu_b)`, Richardson-extrapolated.
    fn extracted_single_photon(a: &PureQubit, b: &PureQubit, ch: &ChannelParams) -> f64 {
        let g = |x: f64, y: f64| math::exp(x + y) * wcp_cell_gain(a, b, x, y, ch).unwrap();
        let d = |h: f64| (g(h, h) - g(h, 0.0) - g(0.0, h) + g(0.0, 0.0)) / (h * h);
        let h = 2e-3;
        2.0 * d(h / 2.0) - d(h)
    }

    #[test]
    fn cross_model_single_photon_component() {
        let ch = ChannelParams {
            background_error: 0.009,
            total_loss_db: 6.0,
            ..fig1_channel()
        };
        for (ta, tb) in [(FRAC_PI_4, FRAC_PI_4), (libm::atan(2f64.sqrt()), FRAC_PI_4), (1.2, 0.3)] {
            let enc = encoding_from_misalignment(ta, tb).unwrap();
            let y = analytic_single_photon_yields(&enc, &ch).q;
            for n in 0..4 {
                for m in 0..4 {
                    let ex = extracted_single_photon(&enc.alice[n], &enc.bob[m], &ch);
                    let rel = (ex - y[n][m]).abs() / y[n][m];
                    assert!(rel < 0.02, "n={n} m={m}: extracted {ex:e} vs analytic {:e}", y[n][m]);
                }
            }
        }
    }

    #[test]
    fn expected_gains_cover_protocol_cells() {
        let set = IntensitySet {
            mu: 0.349,
            nu: 0.239,
            omega: 0.0515,
            p_mu: 0.463,
            p_nu: 0.1,
            p_omega: 0.357,
            p_code_given_nu: 0.412,
            p_code_given_omega: 0.391,
        };
        let g = wcp_expected_gains(&EncodingPair::bb84(), &ProtocolParams::symmetric(set), &fig1_channel()).unwrap();
        // 14 (intensity, state) options per user
        assert_eq!(g.cells.len(), 14 * 14);
        let total: f64 = g.cells.iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(g.get(Intensity::Mu, Intensity::Mu, 2, 0).is_none());
        let counts = g.expected_counts(1e10);
        assert!((counts.total_sent() - 1e10).abs() < 1e-2);
        let _ = poisson_weight(0, 0.1);
    }

    #[test]
    fn count_overflow_reported() {
        assert!(matches!(
            CellCounts::from_integers(u64::MAX, 0),
            Err(Error::CountOverflow(_))
        ));
        assert!(CellCounts::new(10.0, 11.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn user_exchange_symmetry(
            ta in 0.1..1.4f64, tb in 0.1..1.4f64,
            mu_a in 0.0..0.8f64, mu_b in 0.0..0.8f64,
            n in 0usize..4, m in 0usize..4,
        ) {
            let ch = ChannelParams { background_error: 0.01, total_loss_db: 4.0, ..fig1_channel() };
            let enc = encoding_from_misalignment(ta, tb).unwrap();
            let ab = wcp_cell_gain(&enc.alice[n], &enc.bob[m], mu_a, mu_b, &ch).unwrap();
            let ba = wcp_cell_gain(&enc.bob[m], &enc.alice[n], mu_b, mu_a, &ch).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1e-30));
        }

        #[test]
        fn gains_monotone_in_detector_quality(
            ta in 0.1..1.4f64, mu_a in 0.0..0.8f64, mu_b in 0.0..0.8f64,
            n in 0usize..4, m in 0usize..4,
            pd in 0.0..1e-4f64, dpd in 0.0..1e-4f64,
            eff in 0.05..0.9f64, deff in 0.0..0.1f64,
        ) {
            // realistic regime: transmitted mean photon number <= 1 per pulse
            let base = ChannelParams { dark_count: pd, det_efficiency: eff, total_loss_db: 3.0, ..fig1_channel() };
            let enc = encoding_from_misalignment(ta, FRAC_PI_4).unwrap();
            let g = |ch: &ChannelParams| wcp_cell_gain(&enc.alice[n], &enc.bob[m], mu_a, mu_b, ch).unwrap();
            let q0 = g(&base);
            let more_dark = ChannelParams { dark_count: pd + dpd, ..base };
            let more_eff = ChannelParams { det_efficiency: eff + deff, ..base };
            prop_assert!(g(&more_dark) >= q0 - 1e-15 * q0);
            prop_assert!(g(&more_eff) >= q0 - 1e-15 * q0);
        }
    }

    #[test]
    fn honest_consistency_on_grid() {
        for i in 0..10 {
            for j in 0..10 {
                for k in 0..5 {
                    let ta = 0.05 + 1.47 * i as f64 / 9.0;
                    let tb = 0.05 + 1.47 * j as f64 / 9.0;
                    let ch = ChannelParams {
                        dark_count: [0.0, 3e-6, 1e-5, 1e-4, 1e-3][k],
                        total_loss_db: 5.0 * k as f64,
                        background_error: 0.005 * k as f64,
                        ..fig1_channel()
                    };
                    let enc = encoding_from_misalignment(ta, tb).unwrap();
                    let y = analytic_single_photon_yields(&enc, &ch);
                    assert!(y.consistency_residual(&enc) < 1e-9);
                    assert!(y.q.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
                }
            }
        }
    }
}
