//! Parameter search for the finite-key rate.
//!
//! The eight source parameters are mapped from an unconstrained vector so
//! every evaluated point is a valid [`IntensitySet`]: each coordinate passes
//! through a sigmoid into a box whose edges depend on earlier coordinates
//! (`nu` above `omega`, `mu` above `nu`, selection probabilities leaving room
//! for the vacuum). Nelder-Mead runs from Latin-hypercube starts.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::ChannelParams;
use crate::decoy::{IntensitySet, ProtocolParams};
use crate::finitekey::{expected_key_rate, EstimateOptions, Statistics, DEFAULT_F_EC};
use crate::math;
use crate::qstate::EncodingPair;
use crate::rng;
use crate::{Error, Result};

pub const DIMENSIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn lerp(lo: f64, hi: f64, u: f64) -> f64 {
        lo + (hi - lo) * u
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterBounds {
    pub mu: Interval,
    pub nu: Interval,
    pub omega: Interval,
    pub p_mu: Interval,
    pub p_nu: Interval,
    pub p_omega: Interval,
    pub p_code_given_nu: Interval,
    pub p_code_given_omega: Interval,
    /// Smallest allowed vacuum selection probability.
    pub p_vacuum_min: f64,
    /// Minimum relative gap between consecutive intensities.
    pub intensity_gap: f64,
}

impl Default for ParameterBounds {
    fn default() -> Self {
        Self {
            mu: Interval::new(0.05, 1.0),
            nu: Interval::new(0.02, 0.8),
            omega: Interval::new(0.002, 0.2),
            p_mu: Interval::new(0.05, 0.9),
            p_nu: Interval::new(0.02, 0.6),
            p_omega: Interval::new(0.02, 0.7),
            p_code_given_nu: Interval::new(0.05, 0.95),
            p_code_given_omega: Interval::new(0.05, 0.95),
            p_vacuum_min: 0.02,
            intensity_gap: 1e-3,
        }
    }
}

impl ParameterBounds {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("mu", self.mu),
            ("nu", self.nu),
            ("omega", self.omega),
            ("p_mu", self.p_mu),
            ("p_nu", self.p_nu),
            ("p_omega", self.p_omega),
            ("p_code_given_nu", self.p_code_given_nu),
            ("p_code_given_omega", self.p_code_given_omega),
        ];
        for (name, iv) in named {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo < iv.hi) {
                return Err(Error::InvalidParameter(format!("bound for {name} is empty: [{}, {}]", iv.lo, iv.hi)));
            }
        }
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        let g = 1.0 + self.intensity_gap;
        if !(self.omega.lo > 0.0) {
            return bad("omega lower bound must be positive");
        }
        if !(self.intensity_gap >= 0.0) {
            return bad("intensity gap must be non-negative");
        }
        if !(self.omega.hi * g < self.nu.hi && self.nu.hi * g < self.mu.hi) {
            return bad("intensity upper bounds must leave room for mu > nu > omega");
        }
        for iv in [self.p_mu, self.p_nu, self.p_omega, self.p_code_given_nu, self.p_code_given_omega] {
            if iv.lo < 0.0 || iv.hi > 1.0 {
                return bad("probability bounds must lie in [0, 1]");
            }
        }
        if !(0.0..1.0).contains(&self.p_vacuum_min)
            || self.p_mu.lo + self.p_nu.lo + self.p_omega.lo > 1.0 - self.p_vacuum_min
        {
            return bad("probability lower bounds leave no room for the vacuum");
        }
        Ok(())
    }

    /// Maps a point of the open unit cube to a valid parameter set.
    pub fn from_unit(&self, u: &[f64; DIMENSIONS]) -> IntensitySet {
        let g = 1.0 + self.intensity_gap;
        let omega = Interval::lerp(self.omega.lo, self.omega.hi, u[0]);
        let nu = Interval::lerp(self.nu.lo.max(omega * g), self.nu.hi, u[1]);
        let mu = Interval::lerp(self.mu.lo.max(nu * g), self.mu.hi, u[2]);
        let room = 1.0 - self.p_vacuum_min;
        let p_mu = Interval::lerp(
            self.p_mu.lo,
            self.p_mu.hi.min(room - self.p_nu.lo - self.p_omega.lo),
            u[3],
        );
        let p_nu = Interval::lerp(self.p_nu.lo, self.p_nu.hi.min(room - p_mu - self.p_omega.lo), u[4]);
        let p_omega = Interval::lerp(self.p_omega.lo, self.p_omega.hi.min(room - p_mu - p_nu), u[5]);
        IntensitySet {
            mu,
            nu,
            omega,
            p_mu,
            p_nu,
            p_omega,
            p_code_given_nu: Interval::lerp(self.p_code_given_nu.lo, self.p_code_given_nu.hi, u[6]),
            p_code_given_omega: Interval::lerp(self.p_code_given_omega.lo, self.p_code_given_omega.hi, u[7]),
        }
    }

    pub fn from_free(&self, z: &[f64; DIMENSIONS]) -> IntensitySet {
        self.from_unit(&z.map(sigmoid))
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + math::exp(-z))
}

fn logit(u: f64) -> f64 {
    math::ln(u / (1.0 - u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    pub channel: ChannelParams,
    pub encoding: EncodingPair,
    /// Pulse pairs; `None` optimizes the asymptotic rate.
    pub total_pairs: Option<f64>,
    pub epsilon_total: f64,
    pub f_ec: f64,
    pub bounds: ParameterBounds,
    pub tie_both_users: bool,
    pub restarts: usize,
    /// Objective evaluations per restart.
    pub max_evaluations: usize,
    pub seed: u64,
}

impl OptimizationProblem {
    pub fn new(channel: ChannelParams, encoding: EncodingPair, total_pairs: Option<f64>, epsilon_total: f64) -> Self {
        Self {
            channel,
            encoding,
            total_pairs,
            epsilon_total,
            f_ec: DEFAULT_F_EC,
            bounds: ParameterBounds::default(),
            tie_both_users: true,
            restarts: 12,
            max_evaluations: 400,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tie_both_users {
            return Err(Error::InvalidParameter(
                "only tied parameters are supported: the decoy bounds assume equal intensities on both sides".into(),
            ));
        }
        if self.restarts == 0 || self.max_evaluations < DIMENSIONS + 1 {
            return Err(Error::InvalidParameter(format!(
                "need at least one restart and {} evaluations per restart",
                DIMENSIONS + 1
            )));
        }
        self.channel.validate()?;
        self.bounds.validate()
    }

    /// Key rate at one parameter set, and the search objective.
    ///
    /// The objective equals the rate where it is positive. Elsewhere it is
    /// the rate bracket per signal detection, `R / (p_mu^2 Q_C)`, which is
    /// negative, does not reward shrinking the signal, and still improves as
    /// the estimates tighten. Failures score `-inf` with the reason.
    pub fn evaluate(&self, set: &IntensitySet) -> Evaluation {
        let statistics = match self.total_pairs {
            Some(_) => Statistics::Finite {
                epsilon_total: self.epsilon_total,
            },
            None => Statistics::Asymptotic,
        };
        let opts = EstimateOptions {
            f_ec: self.f_ec,
            statistics,
            ..EstimateOptions::default()
        };
        let params = ProtocolParams::symmetric(*set);
        match expected_key_rate(&self.encoding, &params, &self.channel, self.total_pairs, &opts) {
            Ok(r) => {
                let objective = if r.key_rate > 0.0 {
                    r.key_rate
                } else if r.signal_gain > 0.0 {
                    r.key_rate / (set.p_mu * set.p_mu * r.signal_gain)
                } else {
                    f64::NEG_INFINITY
                };
                Evaluation {
                    key_rate: r.key_rate,
                    objective,
                    failure: None,
                }
            }
            Err(e) => Evaluation {
                key_rate: f64::NEG_INFINITY,
                objective: f64::NEG_INFINITY,
                failure: Some(format!("{e}")),
            },
        }
    }

    /// Starting points in the unit cube, one per restart.
    pub fn latin_hypercube(&self) -> Vec<[f64; DIMENSIONS]> {
        let n = self.restarts;
        let mut r = rng::stream(self.seed, 0);
        let mut points = vec![[0.0; DIMENSIONS]; n];
        for d in 0..DIMENSIONS {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = (rng::uniform(&mut r) * (i + 1) as f64) as usize;
                perm.swap(i, j.min(i));
            }
            for (i, p) in points.iter_mut().enumerate() {
                p[d] = (perm[i] as f64 + rng::uniform_open(&mut r)) / n as f64;
            }
        }
        points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub key_rate: f64,
    pub objective: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub restart: usize,
    pub evaluation: usize,
    pub params: IntensitySet,
    pub key_rate: f64,
    pub objective: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartResult {
    pub restart: usize,
    pub best: IntensitySet,
    pub key_rate: f64,
    pub objective: f64,
    pub trace: Vec<TracePoint>,
}

/// Nelder-Mead minimization of `f` from `start`, stopping after `budget`
/// evaluations or when the simplex values agree to a relative `1e-7`.
/// Evaluation order is fixed, so runs are reproducible.
fn nelder_mead(
    start: [f64; DIMENSIONS],
    budget: usize,
    mut f: impl FnMut(&[f64; DIMENSIONS]) -> f64,
) -> ([f64; DIMENSIONS], f64) {
    const STEP: f64 = 0.6;
    let mut eval = |z: &[f64; DIMENSIONS]| f(z);
    let mut simplex: Vec<([f64; DIMENSIONS], f64)> = Vec::with_capacity(DIMENSIONS + 1);
    simplex.push((start, eval(&start)));
    for d in 0..DIMENSIONS {
        let mut z = start;
        z[d] += STEP;
        let v = eval(&z);
        simplex.push((z, v));
    }
    let mut evaluations = DIMENSIONS + 1;
    while evaluations < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (fb, fw) = (simplex[0].1, simplex[DIMENSIONS].1);
        if fb.is_finite() && fw - fb <= 1e-7 * fb.abs() + 1e-18 {
            break;
        }
        let mut centroid = [0.0; DIMENSIONS];
        for (z, _) in &simplex[..DIMENSIONS] {
            for d in 0..DIMENSIONS {
                centroid[d] += z[d] / DIMENSIONS as f64;
            }
        }
        let worst = simplex[DIMENSIONS].0;
        let along = |t: f64| -> [f64; DIMENSIONS] { core::array::from_fn(|d| centroid[d] + t * (worst[d] - centroid[d])) };
        let xr = along(-1.0);
        let fr = eval(&xr);
        evaluations += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            evaluations += 1;
            simplex[DIMENSIONS] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[DIMENSIONS - 1].1 {
            simplex[DIMENSIONS] = (xr, fr);
        } else {
            let xc = if fr < fw { along(-0.5) } else { along(0.5) };
            let fc = eval(&xc);
            evaluations += 1;
            if fc < fw.min(fr) {
                simplex[DIMENSIONS] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let z: [f64; DIMENSIONS] = core::array::from_fn(|d| best[d] + 0.5 * (v.0[d] - best[d]));
                    *v = (z, eval(&z));
                    evaluations += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

/// One restart from its Latin-hypercube start.
pub fn run_restart(problem: &OptimizationProblem, restart: usize) -> Result<RestartResult> {
    problem.validate()?;
    let starts = problem.latin_hypercube();
    let start = starts
        .get(restart)
        .ok_or_else(|| Error::InvalidParameter(format!("restart {restart} out of range")))?
        .map(|u| logit(u.clamp(1e-6, 1.0 - 1e-6)));

    let mut trace: Vec<TracePoint> = Vec::new();
    nelder_mead(start, problem.max_evaluations, |z| {
        let params = problem.bounds.from_free(z);
        let e = problem.evaluate(&params);
        let value = if e.objective.is_finite() { -e.objective } else { f64::INFINITY };
        trace.push(TracePoint {
            restart,
            evaluation: trace.len(),
            params,
            key_rate: e.key_rate,
            objective: e.objective,
            failure: e.failure,
        });
        value
    });

    // first occurrence wins ties
    let mut best = &trace[0];
    for t in &trace {
        if t.objective > best.objective {
            best = t;
        }
    }
    Ok(RestartResult {
        restart,
        best: best.params,
        key_rate: best.key_rate,
        objective: best.objective,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best: ProtocolParams,
    pub key_rate: f64,
    /// No evaluated point produced a positive rate.
    pub no_key: bool,
    pub best_restart: usize,
    /// Every evaluated point, restart by restart.
    pub trace: Vec<TracePoint>,
}

/// Merges restart results; the highest rate wins, the lowest restart index on ties.
pub fn combine(mut restarts: Vec<RestartResult>) -> Result<OptimizationResult> {
    restarts.sort_by_key(|r| r.restart);
    let first = restarts
        .first()
        .ok_or_else(|| Error::InvalidParameter("no restarts to combine".into()))?;
    let mut best = first;
    for r in &restarts {
        if r.objective > best.objective {
            best = r;
        }
    }
    let (params, key_rate, best_restart) = (best.best, best.key_rate, best.restart);
    Ok(OptimizationResult {
        best: ProtocolParams::symmetric(params),
        key_rate,
        no_key: !(key_rate > 0.0),
        best_restart,
        trace: restarts.into_iter().flat_map(|r| r.trace).collect(),
    })
}

/// Sequential restarts. See the std crate for a parallel driver.
pub fn optimize_parameters(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    let results = (0..problem.restarts)
        .map(|i| run_restart(problem, i))
        .collect::<Result<Vec<_>>>()?;
    combine(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn latin_hypercube_strata() {
        let mut p = OptimizationProblem::new(ChannelParams::default(), EncodingPair::bb84(), None, 1e-7);
        p.restarts = 8;
        let pts = p.latin_hypercube();
        for d in 0..DIMENSIONS {
            let mut strata: Vec<usize> = pts.iter().map(|x| (x[d] * 8.0) as usize).collect();
            strata.sort();
            assert_eq!(strata, (0..8).collect::<Vec<_>>());
        }
        assert_eq!(pts, p.latin_hypercube());
    }

    #[test]
    fn untied_rejected() {
        let mut p = OptimizationProblem::new(ChannelParams::default(), EncodingPair::bb84(), None, 1e-7);
        p.tie_both_users = false;
        assert!(p.validate().is_err());
    }

    fn small_problem(loss_db: f64) -> OptimizationProblem {
        let ch = ChannelParams {
            total_loss_db: loss_db,
            ..ChannelParams::default()
        };
        let mut p = OptimizationProblem::new(ch, EncodingPair::bb84(), None, 1e-7);
        p.restarts = 2;
        p.max_evaluations = 60;
        p.seed = 7;
        p
    }

    #[test]
    fn same_seed_same_trace() {
        let p = small_problem(10.0);
        let a = optimize_parameters(&p).unwrap();
        let b = optimize_parameters(&p).unwrap();
        assert_eq!(a, b);
        let again = p.evaluate(&a.best.alice);
        assert!((again.key_rate - a.key_rate).abs() <= 1e-12 * a.key_rate.abs());
    }

    #[test]
    fn restarts_combine_in_any_order() {
        let p = small_problem(10.0);
        let mut parts: Vec<_> = (0..p.restarts).map(|i| run_restart(&p, i).unwrap()).collect();
        let forward = combine(parts.clone()).unwrap();
        parts.reverse();
        assert_eq!(forward, combine(parts).unwrap());
    }

    #[test]
    fn less_loss_more_key() {
        let near = optimize_parameters(&small_problem(0.0)).unwrap();
        let far = optimize_parameters(&small_problem(20.0)).unwrap();
        assert!(near.key_rate > far.key_rate && far.key_rate > 0.0);
    }

    proptest! {
        #[test]
        fn every_free_point_is_valid(z in proptest::array::uniform8(-60.0..60.0f64)) {
            let b = ParameterBounds::default();
            let s = b.from_free(&z);
            prop_assert!(s.validate().is_ok(), "{s:?}");
            prop_assert!(s.p_vacuum() >= b.p_vacuum_min - 1e-12);
            prop_assert!(s.mu <= b.mu.hi && s.omega >= b.omega.lo);
        }
    }
}
