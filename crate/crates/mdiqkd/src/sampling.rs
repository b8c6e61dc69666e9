//! Finite-size count records drawn from expected gains.
//!
//! Pulse pairs are split over the cells by sequential binomials, which is an
//! exact multinomial draw. Detections in each cell are then binomial in the
//! cell gain. The allocation and every cell use their own ChaCha stream
//! derived from the seed, so a cell's detections do not depend on the order
//! in which other cells are visited.

use mdiqkd_core::channel::{CellCounts, CellIndex, ExpectedGains, GainTensor, MAX_EXACT_COUNT};
use mdiqkd_core::rng;
use mdiqkd_core::{Error, Result};
use rand_distr::{Binomial, Distribution};

const ALLOCATION_STREAM: u64 = 0;

fn cell_stream(index: &CellIndex) -> u64 {
    1 + (((index.l.index() * 4 + index.r.index()) * 4 + index.n) * 4 + index.m) as u64
}

fn binomial(n: u64, p: f64, rng: &mut rng::Stream) -> Result<u64> {
    let d = Binomial::new(n, p.clamp(0.0, 1.0))
        .map_err(|e| Error::InvalidParameter(format!("binomial({n}, {p}): {e}")))?;
    Ok(d.sample(rng))
}

/// Observed counts for `total_pairs` pulse pairs.
pub fn sample_counts(expected: &ExpectedGains, total_pairs: u64, seed: u64) -> Result<GainTensor> {
    if total_pairs == 0 {
        return Err(Error::InvalidParameter("total_pairs must be positive".into()));
    }
    if total_pairs > MAX_EXACT_COUNT {
        return Err(Error::CountOverflow(format!(
            "{total_pairs} pulse pairs exceed the exactly representable range 2^53"
        )));
    }
    let mut alloc_rng = rng::stream(seed, ALLOCATION_STREAM);
    let mut remaining = total_pairs;
    let mut mass: f64 = expected.cells.iter().map(|c| c.weight).sum();
    let mut out = GainTensor::new();
    let last = expected.cells.len().saturating_sub(1);
    for (i, cell) in expected.cells.iter().enumerate() {
        let sent = if i == last {
            remaining
        } else if mass > 0.0 {
            binomial(remaining, cell.weight / mass, &mut alloc_rng)?
        } else {
            0
        };
        remaining -= sent;
        mass -= cell.weight;
        let mut cell_rng = rng::stream(seed, cell_stream(&cell.index));
        let detected = binomial(sent, cell.gain, &mut cell_rng)?;
        let ix = cell.index;
        out.insert(ix.l, ix.r, ix.n, ix.m, CellCounts::from_integers(sent, detected)?)?;
    }
    Ok(out)
}
