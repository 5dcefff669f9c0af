//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

// Sign of term k in ber₁ and bei₁, from the phase (2k+3)π/4.
const BER: [i64; 4] = [-1, -1, 1, 1];
const BEI: [i64; 4] = [1, -1, -1, 1];

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `(Σ BER_k t_k, Σ BEI_k t_k)` with `t_k = h^{2k+1}/(k!(k+1)!)`, `h = z/2`,
/// summed exactly. The Kelvin functions are these sums divided by √2.
pub fn kelvin_sums_exact(half_z: &BigRational, terms: usize) -> (BigRational, BigRational) {
    let q = half_z * half_z;
    let mut t = half_z.clone();
    let (mut br, mut bi) = (BigRational::zero(), BigRational::zero());
    for k in 0..terms {
        br += &t * BigRational::from_integer(BER[k % 4].into());
        bi += &t * BigRational::from_integer(BEI[k % 4].into());
        let d = BigInt::from(((k + 1) * (k + 2)) as i64);
        t = &t * &q / BigRational::from_integer(d);
    }
    (br, bi)
}

/// κ(x, y) from its series in `u = c(x² - y²)/4`, exact for rational input:
/// `κ_r = -(xc/4) Σ (BER_k + BEI_k) u^k / (k!(k+1)!)`,
/// `κ_i =  (xc/4) Σ (BER_k - BEI_k) u^k / (k!(k+1)!)`.
pub fn kappa_exact(c: &BigRational, x: &BigRational, y: &BigRational, terms: usize) -> (f64, f64) {
    let u = c * (x * x - y * y) / rat(4, 1);
    let mut p = BigRational::one();
    let (mut sr, mut si) = (BigRational::zero(), BigRational::zero());
    for k in 0..terms {
        let (a, b) = (BER[k % 4], BEI[k % 4]);
        sr += &p * BigRational::from_integer((a + b).into());
        si += &p * BigRational::from_integer((a - b).into());
        let d = BigInt::from(((k + 1) * (k + 2)) as i64);
        p = &p * &u / BigRational::from_integer(d);
    }
    let pre = x * c / rat(4, 1);
    let kr = -(&pre * sr);
    let ki = &pre * si;
    (kr.to_f64().unwrap(), ki.to_f64().unwrap())
}

/// Same series in f64.
pub fn kappa_series(c: f64, x: f64, y: f64) -> (f64, f64) {
    let u = c * (x * x - y * y) / 4.0;
    let mut p = 1.0;
    let (mut sr, mut si) = (0.0, 0.0);
    for k in 0..60 {
        let (a, b) = (BER[k % 4] as f64, BEI[k % 4] as f64);
        sr += p * (a + b);
        si += p * (a - b);
        p *= u / ((k + 1) * (k + 2)) as f64;
        if p.abs() < 1e-300 {
            break;
        }
    }
    (-(x * c / 4.0) * sr, (x * c / 4.0) * si)
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature by recursive bisection.
pub fn gk_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, e) = gk15(f, a, b);
        if e <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    rec(f, a, b, tol, 30)
}

/// Reference kernel table entries at `x = 1`, `K̄ = 1`, evaluated by nested
/// adaptive quadrature without any reduction of the double integrals.
pub struct KernelOracle {
    pub c: f64,
}

impl KernelOracle {
    pub fn kr(&self, s: f64) -> f64 {
        kappa_series(self.c, 1.0, s).0
    }
    pub fn ki(&self, s: f64) -> f64 {
        kappa_series(self.c, 1.0, s).1
    }
    /// `∫_y^1 κ_i(1, ξ)(ξ - y) dξ`, which is `f₁/K̄` and `g₂/K̄`.
    pub fn f1(&self, y: f64) -> f64 {
        gk_adaptive(&|s| self.ki(s) * (s - y), y, 1.0, 1e-15)
    }
    /// `∫_y^1 κ_r(1, ξ)(ξ - y) dξ`, which is `f₂/K̄` and `g₁/K̄`.
    pub fn f2(&self, y: f64) -> f64 {
        gk_adaptive(&|s| self.kr(s) * (s - y), y, 1.0, 1e-15)
    }
    pub fn r2(&self, kbar: f64, y: f64) -> f64 {
        self.kr(y) - kbar * self.f1(y)
    }
    /// `𝓠(1, y) = ∫_y^1 𝓡₂(1, ξ)(ξ - y) dξ`, nested.
    pub fn q(&self, kbar: f64, y: f64) -> f64 {
        gk_adaptive(&|xi| self.r2(kbar, xi) * (xi - y), y, 1.0, 1e-14)
    }
    pub fn r2_integral(&self, kbar: f64) -> f64 {
        gk_adaptive(&|y| self.r2(kbar, y), 0.0, 1.0, 1e-14)
    }
    pub fn p1_unit(&self) -> f64 {
        1.0 - gk_adaptive(&|y| self.kr(y) - self.ki(y), 0.0, 1.0, 1e-15)
    }
    pub fn p2_unit(&self) -> f64 {
        gk_adaptive(&|y| self.kr(y) + self.ki(y), 0.0, 1.0, 1e-15)
    }
}

/// Natural cubic spline through `(xs, ys)`, `xs` increasing, extrapolated
/// by the end cubics.
pub struct Spline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    pub fn new(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len();
        let mut m = vec![0.0; n];
        let (mut diag, mut rhs) = (vec![0.0; n], vec![0.0; n]);
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        for i in 1..n - 1 {
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
        }
        // Thomas algorithm on the interior rows.
        for i in 2..n - 1 {
            let w = h[i - 1] / diag[i - 1];
            diag[i] -= w * h[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (1..n - 1).rev() {
            let upper = if i + 1 < n - 1 { h[i] * m[i + 1] } else { 0.0 };
            m[i] = (rhs[i] - upper) / diag[i];
        }
        Self { xs: xs.to_vec(), ys: ys.to_vec(), m }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let (a, b) = ((self.xs[i + 1] - x) / h, (x - self.xs[i]) / h);
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }
}
