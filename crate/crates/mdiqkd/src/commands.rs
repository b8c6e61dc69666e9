//! What each subcommand computes, separate from file output and rendering.

use mdiqkd_core::channel::{analytic_single_photon_yields, wcp_expected_gains, ChannelParams, GainTensor};
use mdiqkd_core::decoy::{pool_joint_gains, wcp_key_rate, IntensitySet, ProtocolParams};
use mdiqkd_core::finitekey::{
    estimate_key_rate, expected_key_rate, ideal_decoy_key_rate, EstimateOptions, KeyRateEstimate, Statistics,
};
use mdiqkd_core::optimizer::{OptimizationProblem, OptimizationResult};
use mdiqkd_core::qstate::{angle_for_c0_sq, encoding_from_misalignment, EncodingPair};
use mdiqkd_core::security::{analyze, test_basis_error_rate};
use rayon::prelude::*;

use crate::config::{splitting_angle, ScenarioConfig};
use crate::error::{AppError, Result};
use crate::parallel::optimize_parallel;
use crate::sampling::sample_counts;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Figure1Row {
    /// Alice's `c0^2`.
    pub c0_sq: f64,
    pub e_p: f64,
    /// Test-basis error rate, the estimate of a protocol that assumes BB84 states.
    pub e_p_baseline: f64,
}

/// Phase error against Alice's test-basis misalignment, single photons and an honest relay.
pub fn figure1(cfg: &ScenarioConfig) -> Result<Vec<Figure1Row>> {
    let ch = cfg.channel.params()?;
    let theta_b = splitting_angle(cfg.encoding.bob_misalignment_deg);
    cfg.figure1
        .grid()?
        .into_iter()
        .map(|c0_sq| {
            let enc = encoding_from_misalignment(angle_for_c0_sq(c0_sq), theta_b)?;
            let y = analytic_single_photon_yields(&enc, &ch);
            Ok(Figure1Row {
                c0_sq,
                e_p: analyze(&y, cfg.f_ec)?.e_p,
                e_p_baseline: test_basis_error_rate(&y)?,
            })
        })
        .collect()
}

/// Misalignment scenarios of the distance sweep.
pub const SCENARIOS: [&str; 4] = ["aligned", "one_user", "both_users", "opposite"];

/// `(Alice, Bob)` rotations in degrees for each scenario.
pub fn scenario_rotations(deg: f64) -> [(f64, f64); 4] {
    [(0.0, 0.0), (0.0, deg), (deg, deg), (deg, -deg)]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Figure2Row {
    pub km: f64,
    /// Rate with exactly known single-photon quantities, per scenario.
    pub key_rate: [f64; 4],
    /// Same, with the test-basis error rate used as the phase error.
    pub baseline: [f64; 4],
    /// Rate through the four-intensity decoy bounds; `NaN` where the
    /// estimate fails.
    pub four_intensity: [f64; 4],
}

/// Asymptotic key rate against fiber length. Rates are clamped at zero.
pub fn figure2(cfg: &ScenarioConfig) -> Result<Vec<Figure2Row>> {
    let base = cfg.channel.params()?;
    let params = cfg.params()?;
    let encodings = scenario_rotations(cfg.figure2.misalignment_deg)
        .iter()
        .map(|&(a, b)| Ok(encoding_from_misalignment(splitting_angle(a), splitting_angle(b))?))
        .collect::<Result<Vec<EncodingPair>>>()?;
    let opts = EstimateOptions {
        f_ec: cfg.f_ec,
        ..EstimateOptions::default()
    };
    cfg.figure2
        .distances()?
        .into_par_iter()
        .map(|km| {
            let ch = base.at_distance(km);
            let mut row = Figure2Row {
                km,
                key_rate: [0.0; 4],
                baseline: [0.0; 4],
                four_intensity: [0.0; 4],
            };
            for (s, enc) in encodings.iter().enumerate() {
                let ideal = ideal_decoy_key_rate(enc, &params, &ch, cfg.f_ec)?;
                row.key_rate[s] = ideal.key_rate.max(0.0);
                row.baseline[s] = ideal.baseline_key_rate.max(0.0);
                row.four_intensity[s] = expected_key_rate(enc, &params, &ch, None, &opts)
                    .map_or(f64::NAN, |e| e.key_rate.max(0.0));
            }
            Ok(row)
        })
        .collect()
}

/// Intermediate results of one experimental run, as recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableCase {
    pub mu: f64,
    pub p_mu: f64,
    pub q_c_lower: f64,
    pub e_p_upper: f64,
    pub signal_gain: f64,
    pub signal_error_rate: f64,
    pub reported_rate: f64,
}

pub const TABLE_CASES: [TableCase; 3] = [
    TableCase {
        mu: 0.349,
        p_mu: 0.463,
        q_c_lower: 4.71e-4,
        e_p_upper: 0.166,
        signal_gain: 5.98e-5,
        signal_error_rate: 0.0086,
        reported_rate: 1.10e-6,
    },
    TableCase {
        mu: 0.312,
        p_mu: 0.437,
        q_c_lower: 5.09e-4,
        e_p_upper: 0.189,
        signal_gain: 4.77e-5,
        signal_error_rate: 0.0091,
        reported_rate: 7.37e-7,
    },
    TableCase {
        mu: 0.295,
        p_mu: 0.411,
        q_c_lower: 5.08e-4,
        e_p_upper: 0.189,
        signal_gain: 4.29e-5,
        signal_error_rate: 0.0097,
        reported_rate: 5.87e-7,
    },
];

#[derive(Debug, Clone, PartialEq)]
pub struct TableReproduction {
    /// `(case, computed rate)` from the recorded inputs.
    pub cases: Vec<(TableCase, f64)>,
    /// The configured scenario run through the simulated channel at its data size.
    pub model: KeyRateEstimate,
    pub model_pairs: u64,
}

pub fn reproduce_tables(cfg: &ScenarioConfig) -> Result<TableReproduction> {
    let cases = TABLE_CASES
        .iter()
        .map(|c| {
            let r = wcp_key_rate(
                c.p_mu,
                c.p_mu,
                c.mu,
                c.mu,
                c.q_c_lower,
                c.e_p_upper,
                c.signal_gain,
                c.signal_error_rate,
                cfg.f_ec,
            );
            (*c, r)
        })
        .collect();
    let pairs = cfg.require_pairs()?;
    let model = expected_finite(cfg, pairs)?;
    Ok(TableReproduction {
        cases,
        model,
        model_pairs: pairs,
    })
}

fn finite_options(cfg: &ScenarioConfig) -> EstimateOptions {
    EstimateOptions {
        f_ec: cfg.f_ec,
        statistics: Statistics::Finite {
            epsilon_total: cfg.finite.epsilon_total,
        },
        ..EstimateOptions::default()
    }
}

/// Finite-key estimate from expected counts, without sampling noise.
pub fn expected_finite(cfg: &ScenarioConfig, pairs: u64) -> Result<KeyRateEstimate> {
    cfg.validate()?;
    let enc = cfg.encoding.encoding()?;
    Ok(expected_key_rate(
        &enc,
        &cfg.params()?,
        &cfg.channel.params()?,
        Some(pairs as f64),
        &finite_options(cfg),
    )?)
}

/// Finite-key estimate from recorded counts.
pub fn estimate(counts: &GainTensor, cfg: &ScenarioConfig) -> Result<KeyRateEstimate> {
    cfg.validate()?;
    let pooled = pool_joint_gains(counts)?;
    Ok(estimate_key_rate(&pooled, &cfg.params()?, &finite_options(cfg))?)
}

/// Sampled counts for the configured scenario, seeded by `cfg.seed`.
pub fn simulate(cfg: &ScenarioConfig) -> Result<GainTensor> {
    cfg.validate()?;
    let pairs = cfg.require_pairs()?;
    let expected = wcp_expected_gains(&cfg.encoding.encoding()?, &cfg.params()?, &cfg.channel.params()?)?;
    Ok(sample_counts(&expected, pairs, cfg.seed)?)
}

pub fn optimization_problem(cfg: &ScenarioConfig) -> Result<OptimizationProblem> {
    cfg.validate()?;
    if cfg.source_bob.is_some() {
        return Err(AppError::Config(
            "optimize ties both users; remove [source_bob]".into(),
        ));
    }
    let mut p = OptimizationProblem::new(
        cfg.channel.params()?,
        cfg.encoding.encoding()?,
        (cfg.finite.total_pairs > 0).then_some(cfg.finite.total_pairs as f64),
        cfg.finite.epsilon_total,
    );
    p.f_ec = cfg.f_ec;
    p.restarts = cfg.optimizer.restarts;
    p.max_evaluations = cfg.optimizer.max_evaluations;
    p.seed = cfg.seed;
    Ok(p)
}

pub fn optimize(cfg: &ScenarioConfig) -> Result<OptimizationResult> {
    Ok(optimize_parallel(&optimization_problem(cfg)?)?)
}

/// Channel and source of the finite-size reference scenario.
pub fn reference_scenario() -> (ChannelParams, IntensitySet) {
    let cfg = ScenarioConfig::default();
    (
        cfg.channel.params().expect("default channel is valid"),
        cfg.source.intensities().expect("default source is valid"),
    )
}

/// Both users on the reference source.
pub fn reference_params() -> ProtocolParams {
    ProtocolParams::symmetric(reference_scenario().1)
}
