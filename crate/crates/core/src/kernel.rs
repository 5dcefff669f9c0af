//! Backstepping kernels and the integral gain profiles of the boundary laws.
//!
//! The first transform has the closed-form kernels `γ = -K̄` and
//! `q(x, y) = -iK̄(x - y)`. The second transform kernel `κ` solves
//! `κ_xx - κ_yy = icκ` with `κ_y(x, 0) = 0`, `κ(x, x) = -icx/2` and is
//! written through Kelvin functions of `z = √(c(x² - y²))`.
//!
//! Every gain profile entering the boundary laws is affine in `K̄`, so the
//! table stores a `K̄`-independent part and the coefficient of `K̄` and the
//! controller rescales them when the Hessian estimate moves.

use std::io::Write;
use std::path::Path;

use num_complex::Complex;

use crate::error::{domain, file_error, Error, Result};
use crate::quadrature::{LegendreRule, UnitGrid};
use crate::scalar::{lit, to_f64, Real};
use crate::special::kelvin1;

/// Below this `z` the closed form (a 0/0 ratio on the diagonal) is replaced
/// by its series expansion.
pub const DIAGONAL_SERIES_THRESHOLD: f64 = 1e-6;

/// Smallest admissible `|φ_r|`.
pub const PHI_R_FLOOR: f64 = 1e-8;

pub const DEFAULT_QUAD_ORDER: usize = 64;

/// First-transform ODE kernel `γ(x) = -K̄` (constant in `x`).
pub fn eval_gamma<T: Real>(kbar: T) -> T {
    -kbar
}

/// First-transform PDE kernel `q(x, y) = -iK̄(x - y)`.
pub fn eval_q<T: Real>(kbar: T, x: T, y: T) -> Result<Complex<T>> {
    check_triangle(x, y)?;
    Ok(Complex::new(T::zero(), -kbar * (x - y)))
}

/// Second-transform kernel `κ(x, y) = κ_r + iκ_i`.
pub fn eval_kappa<T: Real>(c: T, x: T, y: T) -> Result<Complex<T>> {
    if !c.is_finite() || c < T::zero() {
        return Err(domain(format!("decay rate c must be finite and >= 0, got {c}")));
    }
    check_triangle(x, y)?;
    if c == T::zero() {
        return Ok(Complex::new(T::zero(), T::zero()));
    }

    let d = (x - y) * (x + y);
    let z2 = c * d;
    let z = z2.sqrt();
    if z < lit(DIAGONAL_SERIES_THRESHOLD) {
        // κ_r = x c z²/16 + O(z⁶), κ_i = -(x c/2)(1 - z⁴/192) + O(z⁸)
        let re = x * c * z2 / lit(16.0);
        let im = -(x * c * lit(0.5)) * (T::one() - z2 * z2 / lit(192.0));
        return Ok(Complex::new(re, im));
    }

    let k = kelvin1(z)?;
    let pre = x * (c / (d * lit(2.0))).sqrt();
    Ok(Complex::new(pre * (-k.ber1 - k.bei1), pre * (k.ber1 - k.bei1)))
}

fn check_triangle<T: Real>(x: T, y: T) -> Result<()> {
    if !(x.is_finite() && y.is_finite()) {
        return Err(domain("kernel evaluated at a non-finite point"));
    }
    if y < T::zero() || y > x || x > T::one() {
        return Err(domain(format!("kernel needs 0 <= y <= x <= 1, got x = {x}, y = {y}")));
    }
    Ok(())
}

/// A gain profile sampled on the quadrature grid, affine in `K̄`:
/// `profile(K̄) = base + K̄·slope`.
#[derive(Debug, Clone)]
pub struct KbarAffine<T> {
    pub base: Vec<T>,
    pub slope: Vec<T>,
}

impl<T: Real> KbarAffine<T> {
    pub fn at(&self, kbar: T) -> Vec<T> {
        self.base
            .iter()
            .zip(&self.slope)
            .map(|(&b, &s)| b + kbar * s)
            .collect()
    }
}

/// Kernels at `x = 1` sampled on a Gauss–Legendre grid in `y`.
#[derive(Debug, Clone)]
pub struct KernelTable<T> {
    pub grid: UnitGrid<T>,
    pub c: T,
    pub kappa_r: Vec<T>,
    pub kappa_i: Vec<T>,
    /// `f₁(1, y)/K̄ = ∫_y^1 κ_i(1, ξ)(ξ - y) dξ`
    pub f1_unit: Vec<T>,
    /// `f₂(1, y)/K̄ = ∫_y^1 κ_r(1, ξ)(ξ - y) dξ`
    pub f2_unit: Vec<T>,
    pub g1_unit: Vec<T>,
    pub g2_unit: Vec<T>,
    pub p1_unit: T,
    pub p2_unit: T,
    pub f1_op: KbarAffine<T>,
    pub f2_op: KbarAffine<T>,
    pub r1_op: KbarAffine<T>,
    pub r2_op: KbarAffine<T>,
    pub q_op: KbarAffine<T>,
    pub s_op: KbarAffine<T>,
    /// `∫₀¹ 𝓡₂(1, y) dy = r2_integral.0 + K̄·r2_integral.1`
    pub r2_integral: (T, T),
    /// `φ(1)` at `K̄ = 1`.
    pub phi_1: T,
    /// `φ_r` at `K̄ = 1`.
    pub phi_r: T,
}

/// All gains of the boundary laws at one value of `K̄`.
#[derive(Debug, Clone)]
pub struct GainProfile<T> {
    pub kbar: T,
    pub f1: Vec<T>,
    pub f2: Vec<T>,
    pub r1: Vec<T>,
    pub r2: Vec<T>,
    pub q: Vec<T>,
    pub s: Vec<T>,
    pub p1: T,
    pub p2: T,
    pub r2_integral: T,
    pub phi_1: T,
    pub phi_r: T,
}

impl<T: Real> KernelTable<T> {
    /// Evaluates every kernel at `x = 1` on a `quad_order`-point grid.
    ///
    /// The nested definitions of `𝓠` and `𝓢` are reduced with Cauchy's
    /// repeated-integration formula,
    /// `∫_y^1 (ξ-y) ∫_ξ^1 k(s)(s-ξ) ds dξ = ∫_y^1 k(s)(s-y)³/6 ds`.
    pub fn build(c: T, quad_order: usize) -> Result<Self> {
        if !c.is_finite() || c < T::zero() {
            return Err(domain(format!("decay rate c must be finite and >= 0, got {c}")));
        }
        if quad_order < 8 {
            return Err(domain(format!("quadrature order must be >= 8, got {quad_order}")));
        }
        let grid = UnitGrid::new(quad_order)?;
        let rule = LegendreRule::new(quad_order)?;
        let one = T::one();

        let kappa_at = |y: T| eval_kappa(c, one, y);
        let mut kappa_r = Vec::with_capacity(quad_order);
        let mut kappa_i = Vec::with_capacity(quad_order);
        for &y in &grid.nodes {
            let k = kappa_at(y)?;
            kappa_r.push(k.re);
            kappa_i.push(k.im);
        }

        let n = grid.len();
        let mut f1_unit = Vec::with_capacity(n);
        let mut f2_unit = Vec::with_capacity(n);
        let mut q_slope = Vec::with_capacity(n);
        let sixth: T = lit(1.0 / 6.0);
        for &y in &grid.nodes {
            let (mut m1_r, mut m1_i, mut m3_i) = (T::zero(), T::zero(), T::zero());
            for (xi, w) in rule.mapped(y, one) {
                let k = kappa_at(xi)?;
                let d = xi - y;
                m1_r += w * k.re * d;
                m1_i += w * k.im * d;
                m3_i += w * k.im * d * d * d;
            }
            f1_unit.push(m1_i);
            f2_unit.push(m1_r);
            // 𝓠 slope: -∫_y^1 g₂(1, ξ)(ξ - y) dξ with g₂/K̄ = f₁/K̄
            q_slope.push(-m3_i * sixth);
        }
        let g1_unit = f2_unit.clone();
        let g2_unit = f1_unit.clone();

        let one_minus_y: Vec<T> = grid.nodes.iter().map(|&y| one - y).collect();
        let p1_unit = one
            - grid.dot(
                &kappa_r
                    .iter()
                    .zip(&kappa_i)
                    .map(|(&r, &i)| r - i)
                    .collect::<Vec<_>>(),
            );
        let p2_unit = grid.dot(
            &kappa_r
                .iter()
                .zip(&kappa_i)
                .map(|(&r, &i)| r + i)
                .collect::<Vec<_>>(),
        );

        let neg = |v: &[T]| v.iter().map(|&a| -a).collect::<Vec<_>>();
        let f1_op = KbarAffine { base: kappa_r.clone(), slope: neg(&f1_unit) };
        let f2_op = KbarAffine {
            base: kappa_i.clone(),
            slope: one_minus_y.iter().zip(&f2_unit).map(|(&l, &f)| f - l).collect(),
        };
        let r1_op = KbarAffine {
            base: neg(&kappa_i),
            slope: one_minus_y.iter().zip(&g1_unit).map(|(&l, &g)| l - g).collect(),
        };
        let r2_op = KbarAffine { base: kappa_r.clone(), slope: neg(&g2_unit) };
        // ∫_y^1 κ_r(1, ξ)(ξ - y) dξ is exactly f₂/K̄.
        let q_op = KbarAffine { base: f2_unit.clone(), slope: q_slope };
        let s_op = q_op.clone();

        let r2_integral = (grid.dot(&kappa_r), -grid.dot(&g2_unit));
        let int_unit = r2_integral.0 + r2_integral.1;
        let phi_1 = -int_unit;
        let phi_r = one - int_unit;
        if phi_r.abs() < lit(PHI_R_FLOOR) || !phi_r.is_finite() {
            return Err(Error::Singular(format!("phi_r = {phi_r} at c = {c}")));
        }

        Ok(Self {
            grid,
            c,
            kappa_r,
            kappa_i,
            f1_unit,
            f2_unit,
            g1_unit,
            g2_unit,
            p1_unit,
            p2_unit,
            f1_op,
            f2_op,
            r1_op,
            r2_op,
            q_op,
            s_op,
            r2_integral,
            phi_1,
            phi_r,
        })
    }

    /// Gains at a particular `K̄`. Fails if `φ_r` vanishes there.
    pub fn profile(&self, kbar: T) -> Result<GainProfile<T>> {
        let r2_integral = self.r2_integral.0 + kbar * self.r2_integral.1;
        let phi_r = T::one() - r2_integral;
        if phi_r.abs() < lit(PHI_R_FLOOR) || !phi_r.is_finite() {
            return Err(Error::Singular(format!("phi_r = {phi_r} at K̄ = {kbar}")));
        }
        Ok(GainProfile {
            kbar,
            f1: self.f1_op.at(kbar),
            f2: self.f2_op.at(kbar),
            r1: self.r1_op.at(kbar),
            r2: self.r2_op.at(kbar),
            q: self.q_op.at(kbar),
            s: self.s_op.at(kbar),
            p1: kbar * self.p1_unit,
            p2: kbar * self.p2_unit,
            r2_integral,
            phi_1: -r2_integral,
            phi_r,
        })
    }

    /// Dumps the table at `K̄ = 1`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let p = self.profile(T::one())?;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(file_error(path))?);
        writeln!(
            out,
            "y,kappa_r,kappa_i,f1_unit,f2_unit,g1_unit,g2_unit,F1,F2_unit,R1_unit,R2,Q,S"
        )?;
        for j in 0..self.grid.len() {
            let row = [
                self.grid.nodes[j],
                self.kappa_r[j],
                self.kappa_i[j],
                self.f1_unit[j],
                self.f2_unit[j],
                self.g1_unit[j],
                self.g2_unit[j],
                p.f1[j],
                p.f2[j],
                p.r1[j],
                p.r2[j],
                p.q[j],
                p.s[j],
            ];
            let line: Vec<String> = row.iter().map(|&v| format!("{:.16e}", to_f64(v))).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn cabs<T: Real>(z: Complex<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

/// Maximum of `|κ_xx - κ_yy - icκ|` over the interior of the triangle
/// `0 ≤ y ≤ x ≤ 1`, second derivatives by central differences with step
/// `1/n_grid`.
pub fn kappa_pde_residual<T: Real>(c: T, n_grid: usize) -> Result<T> {
    if n_grid < 16 {
        return Err(domain(format!("residual grid needs n_grid >= 16, got {n_grid}")));
    }
    let h = T::one() / lit(n_grid as f64);
    let at = |i: usize, j: usize| eval_kappa(c, h * lit(i as f64), h * lit(j as f64));
    let ic = Complex::new(T::zero(), c);
    let mut worst = T::zero();
    for i in 2..n_grid {
        for j in 1..i {
            let lap = (at(i + 1, j)? + at(i - 1, j)? - at(i, j + 1)? - at(i, j - 1)?) / (h * h);
            let r = cabs(lap - ic * at(i, j)?);
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Maximum of `|κ_y(x, 0)|` over grid values of `x`, by forward
/// differences with step `1/n_grid`.
pub fn kappa_boundary_slope<T: Real>(c: T, n_grid: usize) -> Result<T> {
    let h = T::one() / lit(n_grid.max(1) as f64);
    let mut worst = T::zero();
    for i in 1..=n_grid {
        let x = h * lit(i as f64);
        let d = (eval_kappa(c, x, h)? - eval_kappa(c, x, T::zero())?) / h;
        worst = worst.max(cabs(d));
    }
    Ok(worst)
}
