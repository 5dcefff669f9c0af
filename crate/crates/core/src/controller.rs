//! Extremum seeking boundary controller.
//!
//! Each sample the controller
//! 1. demodulates the map output into gradient and Hessian estimates,
//! 2. evaluates the backstepping boundary laws `U₁`, `U₂` as quadrature
//!    dot products of the measured `β`, `β_t` against the kernel table,
//! 3. passes them through the low-pass `c̄/(s + c̄)`,
//! 4. integrates them into the actuator offsets `θ̂₁`, `θ̂₂` and adds the
//!    probing signals `S₁`, `S₂`.

use std::collections::VecDeque;

use crate::beam::{BoundaryInputs, Measurement};
use crate::dither::DitherParams;
use crate::error::{domain, Result};
use crate::kernel::{GainProfile, KernelTable};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsGains<T> {
    /// Gradient gain `K`.
    pub k: T,
    /// Target-system decay rate `c`.
    pub c: T,
    /// Low-pass cut frequency `c̄`.
    pub cbar: T,
}

impl<T: Real> EsGains<T> {
    pub fn new(k: T, c: T, cbar: T) -> Result<Self> {
        for (name, v) in [("K", k), ("c", c), ("cbar", cbar)] {
            if !v.is_finite() || v <= T::zero() {
                return Err(domain(format!("gain {name} must be finite and > 0, got {v}")));
            }
        }
        Ok(Self { k, c, cbar })
    }
}

/// How the unmeasurable `ϑ` feedback is replaced by the gradient estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientFeedback {
    /// `K̄ = K·|Ĥ|` and `ϑ ≈ G/Ĥ`; the boundary-law integrands are used
    /// unscaled.
    #[default]
    Estimate,
    /// `K̄ = K·Ĥ`, the `ϑ` multiplier acts on `G` directly and the
    /// integrands carrying a Hessian factor in the filtered laws are scaled
    /// by `Ĥ`.
    Literal,
}

impl std::str::FromStr for GradientFeedback {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "estimate" => Ok(Self::Estimate),
            "literal" => Ok(Self::Literal),
            other => Err(format!("expected `estimate` or `literal`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlOptions<T> {
    pub feedback: GradientFeedback,
    /// Use `-` instead of `+` in front of the `𝓡₁𝓕₂/φ_r` term of `U₁`.
    pub u1_sign_variant: bool,
    /// Replace the Hessian estimate by this value (debugging only).
    pub true_hessian: Option<T>,
}

/// `G = M(t)·y`, `Ĥ = N(t)·y`.
pub fn estimate<T: Real>(y: T, t: T, p: &DitherParams<T>) -> (T, T) {
    let (m, n) = p.eval_demod(t);
    (m * y, n * y)
}

/// Exact zero-order-hold step of `ẋ = c̄(u - x)`.
pub fn lowpass_step<T: Real>(state: T, u_in: T, cbar: T, dt: T) -> T {
    let decay = (-cbar * dt).exp();
    decay * state + (T::one() - decay) * u_in
}

/// `K̄` implied by a Hessian value under the chosen feedback reading.
pub fn kbar_for<T: Real>(k: T, hessian: T, feedback: GradientFeedback) -> T {
    match feedback {
        GradientFeedback::Estimate => k * hessian.abs(),
        GradientFeedback::Literal => k * hessian,
    }
}

fn dot<T: Real>(w: &[T], a: &[T], b: &[T]) -> T {
    w.iter()
        .zip(a.iter().zip(b))
        .fold(T::zero(), |acc, (&w, (&x, &y))| acc + w * x * y)
}

/// Unfiltered boundary laws `(U₁, U₂)` for a gain profile built at the
/// `K̄` matching `hessian`.
#[allow(clippy::too_many_arguments)]
pub fn compute_u<T: Real>(
    table: &KernelTable<T>,
    profile: &GainProfile<T>,
    beta: &[T],
    beta_t: &[T],
    beta_at_1: T,
    g: T,
    hessian: T,
    gains: &EsGains<T>,
    opts: &ControlOptions<T>,
) -> (T, T) {
    let grid = &table.grid;
    let one = T::one();
    let ratio = profile.phi_1 / profile.phi_r;
    let sign = if opts.u1_sign_variant { -one } else { one };

    let w_beta: Vec<T> = profile
        .f1
        .iter()
        .zip(profile.r1.iter().zip(&profile.f2))
        .map(|(&f1, (&r1, &f2))| f1 + sign * r1 / profile.phi_r * f2)
        .collect();
    let w_beta_t: Vec<T> = profile
        .s
        .iter()
        .zip(profile.q.iter().zip(&grid.nodes))
        .map(|(&s, (&q, &y))| s + ratio * (one - y - q))
        .collect();
    let i1 = dot(&grid.weights, &w_beta, beta) - dot(&grid.weights, &w_beta_t, beta_t);
    let i_f1 = dot(&grid.weights, &profile.f1, beta);
    let i_f2 = dot(&grid.weights, &profile.f2, beta_t);

    let theta_gain = profile.p1 + profile.p2 * ratio * profile.r2_integral;
    let c2_8 = gains.c * gains.c / lit(8.0);
    match opts.feedback {
        GradientFeedback::Estimate => {
            let vartheta = g / hessian;
            let u1 = i1 - theta_gain * vartheta;
            let u2 = c2_8 * beta_at_1 + i_f1 - i_f2 - profile.p2 * vartheta;
            (u1, u2)
        }
        GradientFeedback::Literal => {
            let u1 = hessian * i1 - theta_gain * g;
            let u2 = hessian * c2_8 * beta_at_1 + i_f1 - hessian * i_f2 - profile.p2 * g;
            (u1, u2)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState<T> {
    pub theta1_hat: T,
    pub theta2_hat: T,
    /// Low-pass states, i.e. the applied rates `U₁`, `U₂`.
    pub lp1: T,
    pub lp2: T,
    /// Slow-filtered Hessian estimate.
    pub hhat_filt: T,
    /// Hessian value currently used to form `K̄`.
    pub hessian_in_use: T,
    pub kbar: T,
    pub g: T,
    pub hhat: T,
    pub u1_raw: T,
    pub u2_raw: T,
    lp1_prev: T,
    window: VecDeque<T>,
    window_sum: T,
}

impl<T: Real> ControllerState<T> {
    pub fn new(theta1_hat: T, theta2_hat: T, hhat0: T) -> Self {
        Self {
            theta1_hat,
            theta2_hat,
            lp1: T::zero(),
            lp2: T::zero(),
            hhat_filt: hhat0,
            hessian_in_use: hhat0,
            kbar: T::zero(),
            g: T::zero(),
            hhat: T::zero(),
            u1_raw: T::zero(),
            u2_raw: T::zero(),
            lp1_prev: T::zero(),
            window: VecDeque::new(),
            window_sum: T::zero(),
        }
    }

    /// Advances the actuator offsets by the filtered rates and returns the
    /// inputs applied at time `t`.
    pub fn integrate_controls(
        &mut self,
        u1: T,
        u2: T,
        dt: T,
        p: &DitherParams<T>,
        t: T,
    ) -> BoundaryInputs<T> {
        self.theta1_hat += u1 * dt;
        self.theta2_hat += u2 * dt;
        let u1_dot = (u1 - self.lp1_prev) / dt;
        self.lp1_prev = u1;
        let (s1, s2) = p.eval_s(t);
        BoundaryInputs {
            theta1: self.theta1_hat + s1,
            theta1_tt: u1_dot + p.s1_tt(t),
            theta2: self.theta2_hat + s2,
        }
    }

    /// Inputs implied by the current offsets, without advancing them.
    pub fn applied_inputs(&self, p: &DitherParams<T>, t: T) -> BoundaryInputs<T> {
        let (s1, s2) = p.eval_s(t);
        BoundaryInputs {
            theta1: self.theta1_hat + s1,
            theta1_tt: p.s1_tt(t),
            theta2: self.theta2_hat + s2,
        }
    }
}

/// The full compensator: kernel table, gains, probing signals and options.
#[derive(Debug, Clone)]
pub struct EsController<T: Real> {
    pub table: KernelTable<T>,
    pub gains: EsGains<T>,
    pub dither: DitherParams<T>,
    pub opts: ControlOptions<T>,
    /// `|Ĥ|` below which the previous `K̄` is held.
    pub hessian_floor: T,
    /// Time constant of the slow Hessian filter.
    pub hessian_tau: T,
    dt: T,
    window_len: usize,
    cached: Option<GainProfile<T>>,
}

impl<T: Real> EsController<T> {
    pub fn new(
        table: KernelTable<T>,
        gains: EsGains<T>,
        dither: DitherParams<T>,
        opts: ControlOptions<T>,
        hhat0: T,
        dt: T,
    ) -> Result<Self> {
        if !dt.is_finite() || dt <= T::zero() {
            return Err(domain(format!("controller step must be finite and > 0, got {dt}")));
        }
        if !hhat0.is_finite() || hhat0 >= T::zero() {
            return Err(domain(format!("initial Hessian guess must be negative, got {hhat0}")));
        }
        let period = dither.period();
        let window_len = (period / dt).round().to_usize().unwrap_or(1).max(1);
        Ok(Self {
            table,
            gains,
            dither,
            opts,
            hessian_floor: hhat0.abs() * lit(0.05),
            hessian_tau: period * lit(10.0),
            dt,
            window_len,
            cached: None,
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Updates the Hessian pipeline: one-period moving average of `N·y`
    /// followed by the slow first-order filter.
    fn update_hessian(&self, st: &mut ControllerState<T>) {
        st.window.push_back(st.hhat);
        st.window_sum += st.hhat;
        if st.window.len() > self.window_len {
            let old = st.window.pop_front().unwrap_or_else(T::zero);
            st.window_sum -= old;
        }
        if st.window.len() == self.window_len {
            let mean = st.window_sum / lit(self.window_len as f64);
            st.hhat_filt = lowpass_step(st.hhat_filt, mean, T::one() / self.hessian_tau, self.dt);
        }
        st.hessian_in_use = match self.opts.true_hessian {
            Some(h) => h,
            None if st.hhat_filt < -self.hessian_floor => st.hhat_filt,
            None => st.hessian_in_use,
        };
    }

    fn profile(&mut self, kbar: T) -> Result<GainProfile<T>> {
        match &self.cached {
            Some(p) if p.kbar == kbar => Ok(p.clone()),
            _ => {
                let p = self.table.profile(kbar)?;
                self.cached = Some(p.clone());
                Ok(p)
            }
        }
    }

    /// Processes the measurement taken at `t` and returns the inputs to
    /// apply at `t + dt`.
    pub fn update(
        &mut self,
        st: &mut ControllerState<T>,
        t: T,
        meas: &Measurement<T>,
    ) -> Result<BoundaryInputs<T>> {
        let (g, hhat) = estimate(meas.y, t, &self.dither);
        st.g = g;
        st.hhat = hhat;
        self.update_hessian(st);

        let hessian = st.hessian_in_use;
        st.kbar = kbar_for(self.gains.k, hessian, self.opts.feedback);
        let profile = self.profile(st.kbar)?;
        let (u1, u2) = compute_u(
            &self.table,
            &profile,
            &meas.beta,
            &meas.beta_t,
            meas.beta_at_1,
            g,
            hessian,
            &self.gains,
            &self.opts,
        );
        st.u1_raw = u1;
        st.u2_raw = u2;
        st.lp1 = lowpass_step(st.lp1, u1, self.gains.cbar, self.dt);
        st.lp2 = lowpass_step(st.lp2, u2, self.gains.cbar, self.dt);
        let (lp1, lp2) = (st.lp1, st.lp2);
        Ok(st.integrate_controls(lp1, lp2, self.dt, &self.dither, t + self.dt))
    }
}
