//! Probing and demodulation signals.
//!
//! The probing trajectory is the periodic beam motion whose sliding end
//! moves as `a·sin(ωt)`:
//! `R(t, x) = ½[cosh(√ω x) + cos(√ω x)]·a·sin(ωt)`.
//! Its values at the actuated end give the additive inputs `S₁ = R(t, 1)`
//! and `S₂ = R_xx(t, 1)`.

use crate::error::{domain, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DitherParams<T> {
    pub a: T,
    pub omega: T,
    /// Amplitude of `S₁`.
    pub amp1: T,
    /// Amplitude of `S₂`.
    pub amp2: T,
}

/// `R` and its time derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample<T> {
    pub r: T,
    pub r_t: T,
    pub r_tt: T,
}

impl<T: Real> DitherParams<T> {
    pub fn new(a: T, omega: T) -> Result<Self> {
        if !a.is_finite() || a == T::zero() {
            return Err(domain(format!("dither amplitude must be finite and nonzero, got {a}")));
        }
        if !omega.is_finite() || omega <= T::zero() {
            return Err(domain(format!("dither frequency must be finite and > 0, got {omega}")));
        }
        let s = omega.sqrt();
        let half_a: T = a * lit(0.5);
        Ok(Self {
            a,
            omega,
            amp1: half_a * (s.cosh() + s.cos()),
            amp2: half_a * omega * (s.cosh() - s.cos()),
        })
    }

    pub fn period(&self) -> T {
        T::TAU() / self.omega
    }

    /// Spatial profile `½[cosh(√ω x) + cos(√ω x)]`.
    pub fn shape(&self, x: T) -> T {
        let s = self.omega.sqrt() * x;
        (s.cosh() + s.cos()) * lit(0.5)
    }

    /// `d/dx` of [`Self::shape`].
    pub fn shape_x(&self, x: T) -> T {
        let r = self.omega.sqrt();
        let s = r * x;
        r * (s.sinh() - s.sin()) * lit(0.5)
    }

    /// `R`, `R_t`, `R_tt` at `(t, x)`, derivatives taken analytically.
    pub fn eval_r(&self, t: T, x: T) -> TrajectorySample<T> {
        let phase = self.omega * t;
        let amp = self.shape(x) * self.a;
        TrajectorySample {
            r: amp * phase.sin(),
            r_t: amp * self.omega * phase.cos(),
            r_tt: -amp * self.omega * self.omega * phase.sin(),
        }
    }

    /// `(S₁, S₂)` at time `t`.
    pub fn eval_s(&self, t: T) -> (T, T) {
        let sn = (self.omega * t).sin();
        (self.amp1 * sn, self.amp2 * sn)
    }

    /// Second time derivative of `S₁`.
    pub fn s1_tt(&self, t: T) -> T {
        -self.omega * self.omega * self.amp1 * (self.omega * t).sin()
    }

    /// Demodulation signals `M = (2/a) sin(ωt)` and `N = -(8/a²) cos(2ωt)`.
    pub fn eval_demod(&self, t: T) -> (T, T) {
        let phase = self.omega * t;
        let m = phase.sin() * lit::<T>(2.0) / self.a;
        let n = -(phase * lit(2.0)).cos() * lit::<T>(8.0) / (self.a * self.a);
        (m, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn default_probe() -> DitherParams<f64> {
        DitherParams::new(0.2, 5.0).unwrap()
    }

    #[test]
    fn rejects_zero_amplitude_and_bad_frequency() {
        assert!(DitherParams::new(0.0_f64, 5.0).is_err());
        assert!(DitherParams::new(0.2_f64, 0.0).is_err());
        assert!(DitherParams::new(0.2_f64, -1.0).is_err());
        assert!(DitherParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn trajectory_boundary_values() {
        let p = default_probe();
        for k in 0..20 {
            let t = 0.137 * k as f64;
            let r0 = p.eval_r(t, 0.0);
            assert!((r0.r - 0.2 * (5.0 * t).sin()).abs() < 1e-15);
            let (s1, _) = p.eval_s(t);
            assert!((p.eval_r(t, 1.0).r - s1).abs() < 1e-14);
            assert_eq!(p.shape_x(0.0), 0.0);
        }
        for i in 0..=10 {
            assert_eq!(p.eval_r(0.0, i as f64 / 10.0).r, 0.0);
        }
    }

    #[test]
    fn s_amplitudes_at_default_parameters() {
        let p = default_probe();
        assert!((p.amp1 - 0.4115).abs() < 1e-3);
        assert!((p.amp2 - 2.6745).abs() < 1e-3);
        assert_eq!(p.eval_s(0.0), (0.0, 0.0));
    }

    #[test]
    fn low_frequency_limit() {
        let p = DitherParams::new(0.2_f64, 1e-10).unwrap();
        assert!((p.amp1 - 0.2).abs() < 1e-9);
        assert!(p.amp2.abs() < 1e-9);
    }

    #[test]
    fn demodulation_values_and_periodicity() {
        let p = default_probe();
        let (m, n) = p.eval_demod(0.0);
        assert_eq!(m, 0.0);
        assert!((n + 200.0).abs() < 1e-12);
        let (m, n) = p.eval_demod(PI / 10.0);
        assert!((m - 10.0).abs() < 1e-12);
        assert!((n - 200.0).abs() < 1e-12);
        let tp = 2.0 * PI / 5.0;
        for k in 0..50 {
            let t = 0.0731 * k as f64;
            assert!((p.eval_demod(t).0 - p.eval_demod(t + tp).0).abs() < 1e-12);
            assert!((p.eval_demod(t).1 - p.eval_demod(t + tp / 2.0).1).abs() < 1e-10);
        }
    }

    #[test]
    fn probing_signals_have_zero_mean() {
        let p = default_probe();
        let n = 4000;
        let tp = p.period();
        let (mut m1, mut m2) = (0.0, 0.0);
        for k in 0..n {
            let (s1, s2) = p.eval_s(tp * k as f64 / n as f64);
            m1 += s1;
            m2 += s2;
        }
        assert!((m1 / n as f64).abs() < 1e-12);
        assert!((m2 / n as f64).abs() < 1e-12);
    }
}
