//! Four-state-per-user encoding.
//!
//! Each user prepares two code states `|phi_0>, |phi_1>` and two test states
//!
//! ```text
//! |phi_2> = c0 |phi_0> + c1 |phi_1>,   |phi_3> = c0 |phi_0> - c1 |phi_1>
//! ```
//!
//! with positive real `c0, c1`. The code basis is fixed to the computational
//! basis, so `c0^2 + c1^2 = 1` and the test basis is described by a single
//! splitting angle per user.

use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use num_complex::Complex64;

use crate::math;
use crate::{Error, Result};

const NORM_TOL: f64 = 1e-12;

/// A normalized qubit state `amplitude0 |0> + amplitude1 |1>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureQubit {
    amplitude0: Complex64,
    amplitude1: Complex64,
}

impl PureQubit {
    pub fn new(amplitude0: Complex64, amplitude1: Complex64) -> Result<Self> {
        let norm_sqr = amplitude0.norm_sqr() + amplitude1.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self {
            amplitude0,
            amplitude1,
        })
    }

    /// Real-amplitude state; normalization is still checked.
    pub fn real(a0: f64, a1: f64) -> Result<Self> {
        Self::new(Complex64::new(a0, 0.0), Complex64::new(a1, 0.0))
    }

    pub fn zero() -> Self {
        Self {
            amplitude0: Complex64::new(1.0, 0.0),
            amplitude1: Complex64::new(0.0, 0.0),
        }
    }

    pub fn one() -> Self {
        Self {
            amplitude0: Complex64::new(0.0, 0.0),
            amplitude1: Complex64::new(1.0, 0.0),
        }
    }

    pub fn plus() -> Self {
        Self {
            amplitude0: Complex64::new(FRAC_1_SQRT_2, 0.0),
            amplitude1: Complex64::new(FRAC_1_SQRT_2, 0.0),
        }
    }

    pub fn minus() -> Self {
        Self {
            amplitude0: Complex64::new(FRAC_1_SQRT_2, 0.0),
            amplitude1: Complex64::new(-FRAC_1_SQRT_2, 0.0),
        }
    }

    pub fn amplitude0(&self) -> Complex64 {
        self.amplitude0
    }

    pub fn amplitude1(&self) -> Complex64 {
        self.amplitude1
    }

    /// Occupation probability of `|0>`.
    pub fn p0(&self) -> f64 {
        self.amplitude0.norm_sqr()
    }

    /// Occupation probability of `|1>`.
    pub fn p1(&self) -> f64 {
        self.amplitude1.norm_sqr()
    }
}

/// Alice's and Bob's four states together with the coefficients that tie the
/// test states to the code states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingPair {
    pub alice: [PureQubit; 4],
    pub bob: [PureQubit; 4],
    pub c0: f64,
    pub c1: f64,
    pub c0p: f64,
    pub c1p: f64,
}

impl EncodingPair {
    /// Ideal BB84 states for both users.
    pub fn bb84() -> Self {
        encoding_from_misalignment(core::f64::consts::FRAC_PI_4, core::f64::consts::FRAC_PI_4)
            .expect("pi/4 is a valid splitting angle")
    }

    pub fn c0_sq(&self) -> f64 {
        self.c0 * self.c0
    }

    pub fn c0p_sq(&self) -> f64 {
        self.c0p * self.c0p
    }

    /// Largest component-wise deviation from the state relations
    /// `|phi_2> = c0|phi_0> + c1|phi_1>`, `|phi_3> = c0|phi_0> - c1|phi_1>`
    /// over both users.
    pub fn relation_residual(&self) -> f64 {
        fn side(states: &[PureQubit; 4], c0: f64, c1: f64) -> f64 {
            let mut worst = 0.0_f64;
            for (target, sign) in [(2usize, 1.0), (3usize, -1.0)] {
                let r0 = states[target].amplitude0
                    - (states[0].amplitude0 * c0 + states[1].amplitude0 * (sign * c1));
                let r1 = states[target].amplitude1
                    - (states[0].amplitude1 * c0 + states[1].amplitude1 * (sign * c1));
                worst = worst.max(r0.norm()).max(r1.norm());
            }
            worst
        }
        side(&self.alice, self.c0, self.c1).max(side(&self.bob, self.c0p, self.c1p))
    }
}

fn user_states(theta: f64) -> Result<([PureQubit; 4], f64, f64)> {
    if !(theta > 0.0 && theta < FRAC_PI_2) {
        return Err(Error::DegenerateEncoding { angle: theta });
    }
    let (c, s) = (math::cos(theta), math::sin(theta));
    let states = [
        PureQubit::zero(),
        PureQubit::one(),
        PureQubit {
            amplitude0: Complex64::new(c, 0.0),
            amplitude1: Complex64::new(s, 0.0),
        },
        PureQubit {
            amplitude0: Complex64::new(c, 0.0),
            amplitude1: Complex64::new(-s, 0.0),
        },
    ];
    Ok((states, c, s))
}

/// Builds both users' states from their test-basis splitting angles.
///
/// `theta = pi/4` is the unbiased (BB84) test basis; `c0 = cos(theta)`,
/// `c1 = sin(theta)`.
pub fn encoding_from_misalignment(theta_a: f64, theta_b: f64) -> Result<EncodingPair> {
    let (alice, c0, c1) = user_states(theta_a)?;
    let (bob, c0p, c1p) = user_states(theta_b)?;
    Ok(EncodingPair {
        alice,
        bob,
        c0,
        c1,
        c0p,
        c1p,
    })
}

/// Splitting angle giving `c0^2 = c0_sq` (inverse of the encoding map).
pub fn angle_for_c0_sq(c0_sq: f64) -> f64 {
    libm::acos(math::sqrt(c0_sq))
}

/// `|<psi^-| a (x) b>|^2` with `|psi^-> = (|01> - |10>)/sqrt(2)`.
pub fn psi_minus_overlap(a: &PureQubit, b: &PureQubit) -> f64 {
    let amp = a.amplitude0 * b.amplitude1 - a.amplitude1 * b.amplitude0;
    0.5 * amp.norm_sqr()
}
