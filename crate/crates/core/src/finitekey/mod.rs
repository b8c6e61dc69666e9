//! Finite-size estimation: Chernoff intervals, yield-bound linear programs,
//! the phase-error maximization, and the resulting key rate.

pub mod bounds;
pub mod chernoff;
pub mod lp;
pub mod phase_error;

use crate::channel::{analytic_single_photon_yields, wcp_expected_gains, ChannelParams};
use crate::decoy::{
    asymptotic_yield_bounds, pool_joint_gains, wcp_key_rate, Category, CategoryBounds, JointGains,
    ProtocolParams, YieldInterval,
};
use crate::qstate::EncodingPair;
use crate::security::{analyze, test_basis_error_rate};
use crate::{Error, Result};

use bounds::{all_yield_bounds, FiniteBounds, TOTAL_APPLICATIONS};
use chernoff::{ConfidenceConfig, Fluctuation};
use phase_error::{phase_error_upper, PhaseErrorBound, SearchOptions};

/// Default error-correction inefficiency.
pub const DEFAULT_F_EC: f64 = 1.16;

/// How yield intervals are derived from the counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistics {
    /// Chernoff intervals with the budget split evenly over every one-sided
    /// bound the estimation uses.
    Finite { epsilon_total: f64 },
    /// Counts taken as expectations, run through the same programs with
    /// degenerate intervals.
    Exact,
    /// Counts taken as expectations; closed-form decoy bounds.
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub f_ec: f64,
    pub statistics: Statistics,
    pub search: SearchOptions,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            f_ec: DEFAULT_F_EC,
            statistics: Statistics::Asymptotic,
            search: SearchOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateEstimate {
    /// Intervals fed to the phase-error search, clamped to `[0, 1]`.
    pub bounds: CategoryBounds,
    /// Per-category programs, for finite statistics.
    pub programs: Option<FiniteBounds>,
    pub confidence: Option<ConfidenceConfig>,
    pub phase_error: PhaseErrorBound,
    pub q_c_lower: f64,
    pub signal_gain: f64,
    pub signal_error_rate: f64,
    /// Secret bits per pulse pair; negative means no key.
    pub key_rate: f64,
}

impl KeyRateEstimate {
    pub fn has_key(&self) -> bool {
        self.key_rate > 0.0
    }
}

/// Key rate from finite-size quantities; same form as the asymptotic rate.
pub fn finite_key_rate(
    params: &ProtocolParams,
    q_c_lower: f64,
    e_p_upper: f64,
    signal_gain: f64,
    signal_error_rate: f64,
    f_ec: f64,
) -> f64 {
    wcp_key_rate(
        params.alice.p_mu,
        params.bob.p_mu,
        params.alice.mu,
        params.bob.mu,
        q_c_lower,
        e_p_upper,
        signal_gain,
        signal_error_rate,
        f_ec,
    )
}

fn clamp(b: &CategoryBounds) -> CategoryBounds {
    CategoryBounds(b.0.map(|iv| YieldInterval {
        lower: iv.lower.clamp(0.0, 1.0),
        upper: iv.upper.clamp(0.0, 1.0),
    }))
}

/// Full estimation from pooled counts.
pub fn estimate_key_rate(
    counts: &JointGains,
    params: &ProtocolParams,
    opts: &EstimateOptions,
) -> Result<KeyRateEstimate> {
    params.validate()?;
    if !(opts.f_ec >= 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "error-correction inefficiency {} must be at least 1",
            opts.f_ec
        )));
    }
    let (bounds, programs, confidence) = match opts.statistics {
        Statistics::Asymptotic => (clamp(&asymptotic_yield_bounds(counts, params)?), None, None),
        Statistics::Finite { epsilon_total } => {
            let conf = ConfidenceConfig::from_budget(epsilon_total, TOTAL_APPLICATIONS)?;
            let fin = all_yield_bounds(counts, params, Fluctuation::Chernoff { xi: conf.xi })?;
            if fin.applications != conf.composition_count {
                return Err(Error::InconsistentStatistics {
                    what: "Chernoff applications differ from the charged composition count",
                    value: fin.applications as f64,
                });
            }
            (fin.clamped(), Some(fin), Some(conf))
        }
        Statistics::Exact => {
            let fin = all_yield_bounds(counts, params, Fluctuation::Exact)?;
            (fin.clamped(), Some(fin), None)
        }
    };
    let phase_error = phase_error_upper(&bounds, &opts.search)?;
    let q_c_lower = bounds.get(Category::Code).lower;
    let signal_gain = counts.signal_gain()?;
    let signal_error_rate = counts.signal_error_rate()?;
    let key_rate = finite_key_rate(
        params,
        q_c_lower,
        phase_error.value,
        signal_gain,
        signal_error_rate,
        opts.f_ec,
    );
    Ok(KeyRateEstimate {
        bounds,
        programs,
        confidence,
        phase_error,
        q_c_lower,
        signal_gain,
        signal_error_rate,
        key_rate,
    })
}

/// Pooled expected counts at `total_pairs`, without sampling noise.
pub fn expected_joint_gains(
    enc: &EncodingPair,
    params: &ProtocolParams,
    ch: &ChannelParams,
    total_pairs: f64,
) -> Result<JointGains> {
    let g = wcp_expected_gains(enc, params, ch)?;
    pool_joint_gains(&g.expected_counts(total_pairs))
}

/// Key rate from expected statistics: finite when `total_pairs` is given,
/// asymptotic otherwise.
pub fn expected_key_rate(
    enc: &EncodingPair,
    params: &ProtocolParams,
    ch: &ChannelParams,
    total_pairs: Option<f64>,
    opts: &EstimateOptions,
) -> Result<KeyRateEstimate> {
    let counts = expected_joint_gains(enc, params, ch, total_pairs.unwrap_or(1.0))?;
    estimate_key_rate(&counts, params, opts)
}

/// Asymptotic rate with single-photon quantities known exactly, the limit of
/// infinitely many decoy intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealDecoyRate {
    pub key_rate: f64,
    pub e_p: f64,
    pub q_c: f64,
    pub signal_gain: f64,
    pub signal_error_rate: f64,
    /// Test-basis error rate, the phase-error estimate of a receiver that
    /// trusts the prepared test states.
    pub e_x: f64,
    /// Rate obtained with `e_x` in place of `e_p`.
    pub baseline_key_rate: f64,
}

pub fn ideal_decoy_key_rate(
    enc: &EncodingPair,
    params: &ProtocolParams,
    ch: &ChannelParams,
    f_ec: f64,
) -> Result<IdealDecoyRate> {
    let y = analytic_single_photon_yields(enc, ch);
    let single = analyze(&y, f_ec)?;
    let e_x = test_basis_error_rate(&y)?;
    let counts = expected_joint_gains(enc, params, ch, 1.0)?;
    let signal_gain = counts.signal_gain()?;
    let signal_error_rate = counts.signal_error_rate()?;
    let rate = |e: f64| finite_key_rate(params, single.q_c, e, signal_gain, signal_error_rate, f_ec);
    Ok(IdealDecoyRate {
        key_rate: rate(single.e_p),
        e_p: single.e_p,
        q_c: single.q_c,
        signal_gain,
        signal_error_rate,
        e_x,
        baseline_key_rate: rate(e_x.min(0.5)),
    })
}
