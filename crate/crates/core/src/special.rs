//! Kelvin functions of order one.
//!
//! `ber₁(z) + i·bei₁(z) = J₁(z·e^{3πi/4})`, evaluated from the ascending
//! series
//!
//! ```text
//! J₁(w) = Σ_k (-1)^k (w/2)^{2k+1} / (k! (k+1)!)
//! ```
//!
//! With `w = z·e^{3πi/4}` the combined phase of term `k` is `(2k+3)π/4`,
//! so every term contributes `±t_k/√2` to both parts with a sign pattern
//! of period four.

use crate::error::{domain, Result};
use crate::scalar::{lit, Real};

/// Largest argument accepted by [`kelvin1`].
pub const KELVIN_MAX_ARG: f64 = 20.0;

/// Hard cap on the number of series terms.
pub const DEFAULT_TERM_CAP: usize = 200;

// Sign of term k in ber₁ / bei₁, indexed by k mod 4.
const BER_SIGN: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];
const BEI_SIGN: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KelvinPair<T> {
    pub ber1: T,
    pub bei1: T,
}

/// `(ber₁(z), bei₁(z))` for `0 ≤ z ≤ 20`.
pub fn kelvin1<T: Real>(z: T) -> Result<KelvinPair<T>> {
    kelvin1_capped(z, DEFAULT_TERM_CAP)
}

/// Same as [`kelvin1`] with an explicit cap on the number of series terms.
pub fn kelvin1_capped<T: Real>(z: T, max_terms: usize) -> Result<KelvinPair<T>> {
    if !z.is_finite() || z < T::zero() {
        return Err(domain(format!("kelvin1 argument must be finite and >= 0, got {z}")));
    }
    if z > lit(KELVIN_MAX_ARG) {
        return Err(domain(format!("kelvin1 argument {z} exceeds {KELVIN_MAX_ARG}")));
    }
    if z == T::zero() {
        return Ok(KelvinPair { ber1: T::zero(), bei1: T::zero() });
    }

    let half = z * lit(0.5);
    let q = half * half;
    let mut term = half;
    // Running sums and the running magnitude scale for the stopping test.
    let (mut ber, mut bei) = (T::zero(), T::zero());
    for k in 0..max_terms.max(1) {
        let idx = k % 4;
        ber += term * lit(BER_SIGN[idx]);
        bei += term * lit(BEI_SIGN[idx]);

        let kk: T = lit((k + 1) as f64);
        let next = term * q / (kk * (kk + T::one()));
        let scale = ber.abs().max(bei.abs());
        // Terms decrease monotonically once k+1 exceeds z/2.
        if next <= term && next <= T::EPS * lit(1e-1) * scale {
            break;
        }
        term = next;
    }

    let s = T::FRAC_1_SQRT_2();
    Ok(KelvinPair { ber1: ber * s, bei1: bei * s })
}
