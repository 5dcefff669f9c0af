//! Discrete spectrum of the damped target beam
//! `ζ_tt + 2cζ_t + c²ζ + ζ_xxxx = 0` coupled to the scalar ODE
//! `Ẋ = -K̄X + ζ_t(0) + cζ(0) - iζ_xx(0)`, compared with the closed forms
//! `-K̄` and `-c ± i((2n+1)π/2)²`.
//!
//! The complex scalar `X` is carried as two real rows. The generalized
//! problem `A v = λ B v` is solved in shift-invert form (eigenvalues of
//! `A⁻¹B`, then `λ = 1/μ`). The beam rows do not see `X`, so every beam
//! eigenvalue is also a root of the quadratic pencil
//! `P(λ) = λ²M + 2cλM + K + c²M`; the Schur values are polished by a few
//! Newton steps on `P`, which removes the `O(ε·cond)` error the non-normal
//! `A⁻¹B` leaves on the lowest modes.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::beam::{assemble_fem, hermite_xx, submatrix, BeamMesh};
use crate::error::{domain, file_error, Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// One predicted eigenvalue and its matched partner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    /// Mode index of a beam pair, or `-1` for the scalar-ODE eigenvalue.
    pub n: i64,
    pub predicted: Complex<f64>,
    pub computed: Option<Complex<f64>>,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Every computed eigenvalue, sorted by `|Im|` then `Re`.
    pub computed: Vec<Complex<f64>>,
    pub predicted: Vec<Complex<f64>>,
    pub rows: Vec<SpectrumRow>,
    pub max_rel_err: f64,
    pub n_matched: usize,
}

/// `((2n+1)π/2)²`, the `n`-th sliding–pinned beam frequency.
pub fn beam_frequency(n: usize) -> f64 {
    let k = (2 * n + 1) as f64 * std::f64::consts::FRAC_PI_2;
    k * k
}

/// Closed-form prediction at the ODE level: `-K̄` then `-c ± iω_n`.
pub fn predicted_spectrum(c: f64, kbar: Option<f64>, n_modes: usize) -> Vec<(i64, Complex<f64>)> {
    let mut out = Vec::with_capacity(2 * n_modes + 1);
    if let Some(k) = kbar {
        out.push((-1, Complex::new(-k, 0.0)));
    }
    for n in 0..n_modes {
        let w = beam_frequency(n);
        out.push((n as i64, Complex::new(-c, w)));
        out.push((n as i64, Complex::new(-c, -w)));
    }
    out
}

/// Schrödinger-level prediction `-c + i(m + ½)²π²`.
pub fn schrodinger_prediction(c: f64, m: usize) -> Complex<f64> {
    let k = (m as f64 + 0.5) * std::f64::consts::PI;
    Complex::new(-c, k * k)
}

/// Spectrum of the coupled target system.
pub fn target_spectrum<T: Real>(c: T, kbar: T, n_elems: usize, n_modes: usize) -> Result<SpectrumReport> {
    if !kbar.is_finite() || kbar <= T::zero() {
        return Err(domain(format!("K̄ must be > 0 for the coupled spectrum, got {kbar}")));
    }
    solve(c, Some(kbar), n_elems, n_modes)
}

/// Spectrum of the damped beam alone (no ODE rows).
pub fn beam_spectrum<T: Real>(c: T, n_elems: usize, n_modes: usize) -> Result<SpectrumReport> {
    solve(c, None, n_elems, n_modes)
}

fn solve<T: Real>(c: T, kbar: Option<T>, n_elems: usize, n_modes: usize) -> Result<SpectrumReport> {
    if n_modes == 0 || n_elems < 8 * n_modes {
        return Err(domain(format!(
            "need n_modes >= 1 and n_elems >= 8·n_modes, got n_elems = {n_elems}, n_modes = {n_modes}"
        )));
    }
    if !c.is_finite() || c < T::zero() {
        return Err(domain(format!("decay rate c must be finite and >= 0, got {c}")));
    }
    let mesh = BeamMesh::<T>::new(n_elems)?;
    let (m_full, k_full) = assemble_fem(&mesh);
    let free = mesh.free_dofs();
    let nf = free.len();
    let m = submatrix(&m_full, &free, &free);
    let k = submatrix(&k_full, &free, &free);
    let extra = if kbar.is_some() { 2 } else { 0 };
    let n = 2 * nf + extra;

    let mut a = DMatrix::<T>::zeros(n, n);
    let mut b = DMatrix::<T>::zeros(n, n);
    let two_c = c * lit(2.0);
    let c2 = c * c;
    for i in 0..nf {
        a[(i, nf + i)] = T::one();
        b[(i, i)] = T::one();
        for j in 0..nf {
            a[(nf + i, j)] = -(c2 * m[(i, j)] + k[(i, j)]);
            a[(nf + i, nf + j)] = -two_c * m[(i, j)];
            b[(nf + i, nf + j)] = m[(i, j)];
        }
    }
    if let Some(kb) = kbar {
        // Global DOF 0 (u at x = 0) is free and stays first; the rotation
        // at x = 0 is constrained, so ζ_xx(0) uses DOFs 2 and 3 of element 0.
        let (xr, xi) = (2 * nf, 2 * nf + 1);
        let pos = |g: usize| free.iter().position(|&d| d == g);
        let u0 = pos(0).ok_or_else(|| Error::Solve("DOF 0 is not free".into()))?;
        a[(xr, xr)] = -kb;
        a[(xr, nf + u0)] = T::one();
        a[(xr, u0)] = c;
        a[(xi, xi)] = -kb;
        let sxx = hermite_xx(T::zero(), mesh.h);
        for (local, w) in sxx.iter().enumerate() {
            if let Some(p) = pos(local) {
                a[(xi, p)] = -*w;
            }
        }
        b[(xr, xr)] = T::one();
        b[(xi, xi)] = T::one();
    }

    let shifted = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Solve("system matrix is singular".into()))?;
    let mus = shifted
        .complex_eigenvalues();
    let mut raw: Vec<Complex<T>> = mus
        .iter()
        .filter(|mu| to_f64(mu.re).hypot(to_f64(mu.im)) > 0.0)
        .map(|mu| Complex::new(T::one(), T::zero()) / *mu)
        .collect();
    raw.sort_by(|p, q| p.im.abs().partial_cmp(&q.im.abs()).unwrap_or(std::cmp::Ordering::Equal));
    let polish_count = (2 * n_modes + extra + 4).min(raw.len());
    let k_chol = k
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solve("stiffness matrix is not positive definite".into()))?;
    // The pencil is real, so each lower-half value is the conjugate of its
    // polished upper-half partner.
    let upper: Vec<(Complex<T>, Complex<T>)> = raw[..polish_count]
        .iter()
        .filter(|l| l.im >= T::zero())
        .map(|&l| (l, polish(&m, &k, &k_chol, c, l)))
        .collect();
    for lam in raw.iter_mut().take(polish_count) {
        if lam.im < T::zero() {
            let target = lam.conj();
            let partner = upper.iter().min_by(|p, q| {
                let (dp, dq) = ((p.0 - target).norm_sqr(), (q.0 - target).norm_sqr());
                dp.partial_cmp(&dq).unwrap_or(std::cmp::Ordering::Equal)
            });
            *lam = match partner {
                Some(&(orig, pol)) if (orig - target).norm_sqr() == T::zero() => pol.conj(),
                _ => polish(&m, &k, &k_chol, c, *lam),
            };
        } else if let Some(&(_, pol)) = upper.iter().find(|(orig, _)| orig == lam) {
            *lam = pol;
        }
    }
    let mut computed: Vec<Complex<f64>> =
        raw.iter().map(|l| Complex::new(to_f64(l.re), to_f64(l.im))).collect();
    if computed.len() != n || computed.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Solve("eigenvalue computation failed".into()));
    }
    computed.sort_by(|p, q| {
        p.im.abs()
            .partial_cmp(&q.im.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(p.re.partial_cmp(&q.re).unwrap_or(std::cmp::Ordering::Equal))
            .then(p.im.partial_cmp(&q.im).unwrap_or(std::cmp::Ordering::Equal))
    });

    let predicted = predicted_spectrum(to_f64(c), kbar.map(to_f64), n_modes);
    let rows = pair(&predicted, &computed);
    let n_matched = rows.iter().filter(|r| r.computed.is_some()).count();
    let max_rel_err = rows
        .iter()
        .map(|r| if r.computed.is_some() { r.rel_err } else { f64::INFINITY })
        .fold(0.0, f64::max);
    Ok(SpectrumReport {
        computed,
        predicted: predicted.iter().map(|p| p.1).collect(),
        rows,
        max_rel_err,
        n_matched,
    })
}

/// Polishes a root of `P(λ) = (λ + c)²M + K` starting from `lam0`.
///
/// Newton steps `λ ← λ - xᵀx / xᵀP(λ)⁻¹P'(λ)x` (valid because `P` is
/// complex symmetric) give the eigenvector. Forming `P` cancels entries of
/// size `‖K‖`, so the final value comes from the quotient
/// `ν = xᵀMx / xᵀMK⁻¹Mx` with `(λ + c)² = -ν`, which only solves with `K`.
/// Values that are not beam eigenvalues (real, or drifting away) are
/// returned unchanged.
fn polish<T: Real>(
    m: &DMatrix<T>,
    k: &DMatrix<T>,
    k_chol: &nalgebra::Cholesky<T, nalgebra::Dyn>,
    c: T,
    lam0: Complex<T>,
) -> Complex<T> {
    let tiny = T::EPS.sqrt() * (T::one() + lam0.re.abs() + lam0.im.abs());
    if lam0.im.abs() <= tiny {
        return lam0;
    }
    let to_c = |v: T| Complex::new(v, T::zero());
    let mc = m.map(to_c);
    let kc = k.map(to_c);
    let two = Complex::new(lit::<T>(2.0), T::zero());
    let mut lam = lam0;
    let mut x = nalgebra::DVector::from_element(m.nrows(), to_c(T::one()));
    for _ in 0..2 {
        let shift = lam + to_c(c);
        let p = &mc * (shift * shift) + &kc;
        let lu = p.lu();
        let rhs = &mc * (x.clone() * (two * shift));
        let Some(y) = lu.solve(&rhs) else { break };
        let den = x.transpose() * &y;
        let num = x.transpose() * &x;
        let step = num[(0, 0)] / den[(0, 0)];
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        lam -= step;
        let scale = y.iter().fold(T::zero(), |a, v| a.max(v.re.abs().max(v.im.abs())));
        x = y / to_c(scale);
        let (ds, ls) = (step.re.abs() + step.im.abs(), lam.re.abs() + lam.im.abs());
        if ds <= T::EPS * lit(4.0) * ls {
            break;
        }
    }
    let mx = &mc * &x;
    let solve_part = |f: fn(&Complex<T>) -> T| k_chol.solve(&mx.map(|v| f(&v)));
    let (zr, zi) = (solve_part(|v| v.re), solve_part(|v| v.im));
    let z = zr.zip_map(&zi, Complex::new);
    let nu = (x.transpose() * &mx)[(0, 0)] / (mx.transpose() * &z)[(0, 0)];
    let root = nalgebra::ComplexField::sqrt(-nu);
    let (up, down) = (root - to_c(c), -root - to_c(c));
    lam = if (up - lam).norm_sqr() <= (down - lam).norm_sqr() { up } else { down };
    let moved = (lam - lam0).re.abs() + (lam - lam0).im.abs();
    let size = lam0.re.abs() + lam0.im.abs();
    if lam.re.is_finite() && lam.im.is_finite() && moved <= lit::<T>(1e-3) * size {
        lam
    } else {
        lam0
    }
}

/// Nearest-neighbour pairing. A computed value is accepted only if it lies
/// within 10% of the distance from its prediction to the nearest other
/// prediction, and each computed value is used at most once.
fn pair(predicted: &[(i64, Complex<f64>)], computed: &[Complex<f64>]) -> Vec<SpectrumRow> {
    let mut used = vec![false; computed.len()];
    predicted
        .iter()
        .enumerate()
        .map(|(i, &(n, p))| {
            let spacing = predicted
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| (q.1 - p).norm())
                .fold(f64::INFINITY, f64::min);
            let radius = 0.1 * spacing;
            let best = computed
                .iter()
                .enumerate()
                .filter(|&(j, _)| !used[j])
                .map(|(j, z)| (j, (z - p).norm()))
                .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(std::cmp::Ordering::Equal));
            match best {
                Some((j, d)) if d <= radius => {
                    used[j] = true;
                    SpectrumRow { n, predicted: p, computed: Some(computed[j]), rel_err: d / p.norm() }
                }
                _ => SpectrumRow { n, predicted: p, computed: None, rel_err: f64::INFINITY },
            }
        })
        .collect()
}

impl SpectrumReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>4}  {:>12} {:>14}  {:>12} {:>14}  {:>10}",
            "n", "re_pred", "im_pred", "re_comp", "im_comp", "rel_err"
        );
        for r in &self.rows {
            match r.computed {
                Some(z) => {
                    let _ = writeln!(
                        s,
                        "{:>4}  {:>12.6} {:>14.6}  {:>12.6} {:>14.6}  {:>10.3e}",
                        r.n, r.predicted.re, r.predicted.im, z.re, z.im, r.rel_err
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        "{:>4}  {:>12.6} {:>14.6}  {:>12} {:>14}  {:>10}",
                        r.n, r.predicted.re, r.predicted.im, "-", "-", "unmatched"
                    );
                }
            }
        }
        let _ = writeln!(s, "matched {} of {}, max rel err {:.3e}", self.n_matched, self.rows.len(), self.max_rel_err);
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(file_error(path))?);
        writeln!(f, "n,re_pred,im_pred,re_comp,im_comp,rel_err")?;
        for r in &self.rows {
            let (re, im) = r.computed.map_or((f64::NAN, f64::NAN), |z| (z.re, z.im));
            writeln!(
                f,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.n, r.predicted.re, r.predicted.im, re, im, r.rel_err
            )?;
        }
        f.flush()?;
        Ok(())
    }
}
