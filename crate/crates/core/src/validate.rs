//! Self-check suites behind `beamseek validate <kind>`.
//!
//! Each suite returns a list of named checks with the measured value and
//! the limit it is held to.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::beam::{BeamMesh, BeamPlant, BeamState, BoundaryInputs, sliding_pinned_frequencies};
use crate::controller::estimate;
use crate::dither::DitherParams;
use crate::error::Result;
use crate::kernel::{eval_kappa, kappa_pde_residual, KernelTable, DEFAULT_QUAD_ORDER};
use crate::spectrum::target_spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kernels,
    Spectrum,
    Fem,
    Averaging,
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "kernels" => Ok(Self::Kernels),
            "spectrum" => Ok(Self::Spectrum),
            "fem" => Ok(Self::Fem),
            "averaging" => Ok(Self::Averaging),
            other => Err(format!("unknown suite `{other}` (kernels|spectrum|fem|averaging)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: String,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit: format!("<= {limit:e}"), pass: value <= limit }
    }

    fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!("in [{lo}, {hi}]"),
            pass: (lo..=hi).contains(&value),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:<44} {:>12.4e}  ({})", self.name, self.value, self.limit)
    }
}

pub fn run_suite(suite: Suite) -> Result<Vec<Check>> {
    match suite {
        Suite::Kernels => kernels(),
        Suite::Spectrum => spectrum(),
        Suite::Fem => fem(),
        Suite::Averaging => averaging(),
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

fn kernels() -> Result<Vec<Check>> {
    let c = 0.1;
    let mut out = Vec::new();

    let res: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| kappa_pde_residual(c, n))
        .collect::<Result<_>>()?;
    out.push(Check::within("kappa PDE residual order (1/32 -> 1/64)", (res[0] / res[1]).log2(), 1.8, 2.2));
    out.push(Check::within("kappa PDE residual order (1/64 -> 1/128)", (res[1] / res[2]).log2(), 1.8, 2.2));

    let mut diag = 0.0_f64;
    for i in 1..=10 {
        let x = i as f64 / 10.0;
        let k = eval_kappa(c, x, x)?;
        diag = diag.max(k.re.hypot(k.im + c * x / 2.0));
    }
    out.push(Check::at_most("kappa(x,x) + i c x / 2 at 10 points", diag, 1e-9));

    let table = KernelTable::<f64>::build(c, DEFAULT_QUAD_ORDER)?;
    let kr = |s: f64| eval_kappa(c, 1.0, s).map(|k| k.re).unwrap_or(f64::NAN);
    let ki = |s: f64| eval_kappa(c, 1.0, s).map(|k| k.im).unwrap_or(f64::NAN);
    let tol = 1e-14;
    let g2 = |xi: f64| adaptive_simpson(&|s| ki(s) * (s - xi), xi, 1.0, tol);
    let profile = table.profile(1.0)?;
    let mut worst = 0.0_f64;
    for (j, &y) in table.grid.nodes.iter().enumerate() {
        let f1 = adaptive_simpson(&|s| ki(s) * (s - y), y, 1.0, tol);
        let f2 = adaptive_simpson(&|s| kr(s) * (s - y), y, 1.0, tol);
        let q = adaptive_simpson(&|xi| (kr(xi) - g2(xi)) * (xi - y), y, 1.0, 1e-13);
        for (a, b) in [
            (table.f1_unit[j], f1),
            (table.f2_unit[j], f2),
            (table.g1_unit[j], f2),
            (table.g2_unit[j], f1),
            (profile.q[j], q),
            (profile.s[j], q),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    out.push(Check::at_most("table vs adaptive Simpson (K̄ = 1)", worst, 1e-10));
    Ok(out)
}

fn spectrum() -> Result<Vec<Check>> {
    let (c, kbar) = (0.1, 0.1);
    let rep = target_spectrum(c, kbar, 200, 4)?;
    let mut out = Vec::new();
    let scalar = rep
        .computed
        .iter()
        .map(|z| (z.re + kbar).hypot(z.im))
        .fold(f64::INFINITY, f64::min);
    out.push(Check::at_most("eigenvalue -K̄ reproduced", scalar, 1e-6));
    let (mut im_err, mut re_err) = (0.0_f64, 0.0_f64);
    let mut matched = 0;
    for row in rep.rows.iter().filter(|r| r.n >= 0) {
        match row.computed {
            Some(z) => {
                matched += 1;
                im_err = im_err.max(((z.im - row.predicted.im) / row.predicted.im).abs());
                re_err = re_err.max((z.re - row.predicted.re).abs());
            }
            None => {
                im_err = f64::INFINITY;
                re_err = f64::INFINITY;
            }
        }
    }
    out.push(Check::within("conjugate pairs matched", matched as f64, 8.0, 8.0));
    out.push(Check::at_most("pairs: max relative error in Im", im_err, 1e-2));
    out.push(Check::at_most("pairs: max absolute error in Re", re_err, 2e-2));
    Ok(out)
}

fn fem() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mesh = BeamMesh::<f64>::new(100)?;
    let w = sliding_pinned_frequencies(&mesh, 1)?;
    let target = PI * PI / 4.0;
    out.push(Check::at_most("first frequency vs pi^2/4 (100 elements)", (w[0] - target).abs() / target, 1e-3));

    let mesh = BeamMesh::<f64>::new(20)?;
    let dt = 1e-3;
    let plant = BeamPlant::new(mesh, dt)?;
    let mut state = BeamState::zeros(&mesh);
    for (i, x) in mesh.nodes().into_iter().enumerate() {
        state.d[2 * i] = (PI * x / 2.0).cos() + 0.3 * (1.5 * PI * x).cos();
        state.d[2 * i + 1] = -(PI / 2.0) * (PI * x / 2.0).sin() - 0.45 * PI * (1.5 * PI * x).sin();
    }
    state.d[mesh.base_rotation_dof()] = 0.0;
    state.d[mesh.tip_displacement_dof()] = 0.0;
    plant.equilibrate(&mut state, 0.0, 0.0);
    let e0 = plant.energy(&state);
    let steps = (10.0 * 2.0 * PI / target / dt).ceil() as usize;
    let zero = BoundaryInputs { theta1: 0.0, theta1_tt: 0.0, theta2: 0.0 };
    let mut drift = 0.0_f64;
    for _ in 0..steps {
        state = plant.step(&state, zero)?;
        drift = drift.max((plant.energy(&state) - e0).abs() / e0);
    }
    out.push(Check::at_most("Newmark energy drift over 10 periods", drift, 1e-9));

    let mut rest = BeamState::zeros(&mesh);
    for _ in 0..1000 {
        rest = plant.step(&rest, zero)?;
    }
    let amax = rest.d.iter().chain(rest.v.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
    out.push(Check::at_most("zero state with zero input stays zero", amax, 1e-14));
    Ok(out)
}

fn averaging() -> Result<Vec<Check>> {
    let p = DitherParams::new(0.2_f64, 5.0)?;
    let (h, theta_star, y_star) = (-1.0, 1.5, 2.4);
    let n = 10_000;
    let period = p.period();
    let mut out = Vec::new();
    for theta_hat in [1.0, 1.5, 2.0] {
        let (mut g_sum, mut h_sum) = (0.0, 0.0);
        for k in 0..=n {
            let t = period * k as f64 / n as f64;
            let theta = theta_hat + p.a * (p.omega * t).sin();
            let y = y_star + 0.5 * h * (theta - theta_star) * (theta - theta_star);
            let (g, hh) = estimate(y, t, &p);
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            g_sum += w * g;
            h_sum += w * hh;
        }
        let g_mean = g_sum / n as f64;
        let h_mean = h_sum / n as f64;
        let g_ref = h * (theta_hat - theta_star);
        let g_err = (g_mean - g_ref).abs() / g_ref.abs().max(1.0);
        out.push(Check::at_most(&format!("mean G at Theta_hat = {theta_hat}"), g_err, 1e-8));
        out.push(Check::at_most(&format!("mean Hhat at Theta_hat = {theta_hat}"), (h_mean - h).abs() / h.abs(), 1e-8));
    }
    out.push(Check::at_most("S1 amplitude vs 0.4115", (p.amp1 - 0.4115).abs(), 1e-3));
    out.push(Check::at_most("S2 amplitude vs 2.6745", (p.amp2 - 2.6745).abs(), 1e-3));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-14);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-13);
        assert_eq!(adaptive_simpson(&|x: f64| x, 0.5, 0.5, 1e-12), 0.0);
    }

    #[test]
    fn suite_names_parse() {
        assert_eq!("fem".parse::<Suite>(), Ok(Suite::Fem));
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn averaging_suite_passes() {
        assert!(averaging().unwrap().iter().all(|c| c.pass));
    }
}
