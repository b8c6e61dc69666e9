//! Restarts on the rayon pool. Each restart is a pure function of the
//! problem and its index, so the result matches the sequential driver.

use mdiqkd_core::optimizer::{combine, run_restart, OptimizationProblem, OptimizationResult};
use mdiqkd_core::Result;
use rayon::prelude::*;

pub fn optimize_parallel(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    problem.validate()?;
    let results = (0..problem.restarts)
        .into_par_iter()
        .map(|i| run_restart(problem, i))
        .collect::<Result<Vec<_>>>()?;
    combine(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mdiqkd_core::channel::ChannelParams;
    use mdiqkd_core::optimizer::optimize_parameters;
    use mdiqkd_core::qstate::EncodingPair;

    #[test]
    fn matches_sequential() {
        let mut p = OptimizationProblem::new(ChannelParams::default(), EncodingPair::bb84(), None, 1e-7);
        p.restarts = 3;
        p.max_evaluations = 40;
        p.seed = 2;
        assert_eq!(optimize_parallel(&p).unwrap(), optimize_parameters(&p).unwrap());
    }
}
