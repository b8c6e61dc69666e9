//! Single-photon security core.
//!
//! From the 4x4 single-photon yields the encoding coefficients are recovered
//! as ratios of 2x2 determinants, and the phase error rate follows as
//!
//! ```text
//! e_p = 1/2 - [(q23 + q32) - (q22 + q33)] / [8 (q00 + q01 + q10 + q11) c0 c0' c1 c1']
//! ```
//!
//! which is independent of how far the test basis is from unbiased.

use crate::channel::YieldMatrix;
use crate::math;
use crate::{Error, Result};

/// Relative conditioning threshold on `|q01 q10 - q00 q11|`.
pub const DETERMINANT_THRESHOLD: f64 = 1e-15;
/// Tolerance on `c0^2 + c1^2 = 1` for an orthogonal code basis.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Out-of-range margin beyond which a raw phase error is flagged.
pub const PHASE_ERROR_FLAG_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub c0: f64,
    pub c1: f64,
    pub c0p: f64,
    pub c1p: f64,
    /// `max(|c0^2 + c1^2 - 1|, |c0'^2 + c1'^2 - 1|)`, present when the code
    /// basis was declared orthogonal.
    pub normalization_residual: Option<f64>,
}

impl Coefficients {
    pub fn c0_sq(&self) -> f64 {
        self.c0 * self.c0
    }

    pub fn c0p_sq(&self) -> f64 {
        self.c0p * self.c0p
    }

    pub fn product(&self) -> f64 {
        self.c0 * self.c1 * self.c0p * self.c1p
    }
}

/// `q_{Tm} = (q_{2m} + q_{3m}) / 2`.
pub fn test_row(q: &[[f64; 4]; 4], m: usize) -> f64 {
    0.5 * (q[2][m] + q[3][m])
}

/// `q_{nT} = (q_{n2} + q_{n3}) / 2`.
pub fn test_col(q: &[[f64; 4]; 4], n: usize) -> f64 {
    0.5 * (q[n][2] + q[n][3])
}

fn checked_sqrt(radicand: f64, what: &'static str) -> Result<f64> {
    if radicand > 0.0 && radicand.is_finite() {
        Ok(math::sqrt(radicand))
    } else {
        Err(Error::InconsistentStatistics { what, value: radicand })
    }
}

/// Recovers `c0, c1, c0', c1'` from the yields.
pub fn recover_coefficients(y: &YieldMatrix, orthogonal: bool) -> Result<Coefficients> {
    let q = &y.q;
    let det = q[0][1] * q[1][0] - q[0][0] * q[1][1];
    let scale = q.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
    let threshold = DETERMINANT_THRESHOLD * scale * scale;
    if !(det.abs() > threshold) {
        return Err(Error::IllConditionedYields {
            determinant: det.abs(),
            threshold,
        });
    }
    let (t0, t1) = (test_row(q, 0), test_row(q, 1));
    let (t0c, t1c) = (test_col(q, 0), test_col(q, 1));
    let c0 = checked_sqrt((q[1][0] * t1 - q[1][1] * t0) / det, "c0^2")?;
    let c1 = checked_sqrt((q[0][1] * t0 - q[0][0] * t1) / det, "c1^2")?;
    let c0p = checked_sqrt((q[0][1] * t1c - q[1][1] * t0c) / det, "c0'^2")?;
    let c1p = checked_sqrt((q[1][0] * t0c - q[0][0] * t1c) / det, "c1'^2")?;
    let normalization_residual = if orthogonal {
        let r = (c0 * c0 + c1 * c1 - 1.0).abs().max((c0p * c0p + c1p * c1p - 1.0).abs());
        if r > NORMALIZATION_TOL {
            return Err(Error::InconsistentStatistics {
                what: "c0^2 + c1^2 - 1 (orthogonal code basis)",
                value: r,
            });
        }
        Some(r)
    } else {
        None
    };
    Ok(Coefficients {
        c0,
        c1,
        c0p,
        c1p,
        normalization_residual,
    })
}

/// Phase error rate clamped to `[0, 1/2]`, with the raw estimator kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseError {
    pub value: f64,
    pub raw: f64,
    /// Raw value outside `[0, 1/2]` by more than [`PHASE_ERROR_FLAG_MARGIN`].
    pub out_of_range: bool,
}

impl PhaseError {
    pub fn from_raw(raw: f64) -> Self {
        Self {
            value: raw.clamp(0.0, 0.5),
            raw,
            out_of_range: !(-PHASE_ERROR_FLAG_MARGIN..=0.5 + PHASE_ERROR_FLAG_MARGIN).contains(&raw),
        }
    }
}

pub fn phase_error_rate(y: &YieldMatrix, c: &Coefficients) -> Result<PhaseError> {
    let q = &y.q;
    if !(c.c0 > 0.0 && c.c1 > 0.0 && c.c0p > 0.0 && c.c1p > 0.0) {
        return Err(Error::InvalidParameter("coefficients must be strictly positive".into()));
    }
    let code = q[0][0] + q[0][1] + q[1][0] + q[1][1];
    let den = 8.0 * code * c.product();
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator("phase error rate"));
    }
    let num = (q[2][3] + q[3][2]) - (q[2][2] + q[3][3]);
    Ok(PhaseError::from_raw(0.5 - num / den))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitError {
    pub e_b: f64,
    /// `q_C = (q00 + q01 + q10 + q11) / 4`.
    pub q_c: f64,
}

pub fn bit_error_rate(y: &YieldMatrix) -> Result<BitError> {
    let q = &y.q;
    let code = q[0][0] + q[0][1] + q[1][0] + q[1][1];
    if !(code > 0.0) {
        return Err(Error::ZeroDenominator("bit error rate (all code-basis yields zero)"));
    }
    Ok(BitError {
        e_b: (q[0][0] + q[1][1]) / code,
        q_c: code / 4.0,
    })
}

/// Error rate the test basis shows when read as if it were the unbiased
/// BB84 X basis, `(q22 + q33) / (q22 + q23 + q32 + q33)`. This is the phase
/// error a protocol assuming perfect BB84 states would use.
pub fn test_basis_error_rate(y: &YieldMatrix) -> Result<f64> {
    let q = &y.q;
    let total = q[2][2] + q[2][3] + q[3][2] + q[3][3];
    if !(total > 0.0) {
        return Err(Error::ZeroDenominator("test-basis error rate"));
    }
    Ok((q[2][2] + q[3][3]) / total)
}

/// Binary Shannon entropy with `H(0) = H(1) = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * math::log2(x) - (1.0 - x) * math::log2(1.0 - x)
}

/// `R = q_C (1 - H(e_p) - f H(e_b))`; negative values are returned as-is.
pub fn single_photon_key_rate(e_b: f64, e_p: f64, q_c: f64, f_ec: f64) -> f64 {
    q_c * (1.0 - binary_entropy(e_p) - f_ec * binary_entropy(e_b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityReport {
    pub e_b: f64,
    pub e_p: f64,
    pub e_p_raw: f64,
    pub q_c: f64,
    /// Clamped at zero.
    pub key_rate: f64,
    pub key_rate_raw: f64,
    pub f_ec: f64,
    pub coefficients: Coefficients,
}

/// Full single-photon analysis assuming an orthogonal code basis.
pub fn analyze(y: &YieldMatrix, f_ec: f64) -> Result<SecurityReport> {
    let coefficients = recover_coefficients(y, true)?;
    let ep = phase_error_rate(y, &coefficients)?;
    let be = bit_error_rate(y)?;
    let raw = single_photon_key_rate(be.e_b, ep.value, be.q_c, f_ec);
    Ok(SecurityReport {
        e_b: be.e_b,
        e_p: ep.value,
        e_p_raw: ep.raw,
        q_c: be.q_c,
        key_rate: raw.max(0.0),
        key_rate_raw: raw,
        f_ec,
        coefficients,
    })
}
