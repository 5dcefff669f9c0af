//! Euler–Bernoulli beam `u_tt + u_xxxx = 0` on `[0, 1]` discretised with
//! cubic Hermite elements and advanced with the average-acceleration
//! Newmark scheme.
//!
//! Degrees of freedom are ordered per node as `(u, u_x)`. The sliding end
//! `x = 0` carries the essential condition `u_x = 0` (zero shear is
//! natural); the actuated end `x = 1` carries the essential position
//! `u = θ₁(t)` and the natural moment `u_xx = θ₂(t)`, which enters the
//! load vector on the rotation DOF.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::dither::DitherParams;
use crate::error::{domain, Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamMesh<T> {
    pub n_elems: usize,
    pub h: T,
}

impl<T: Real> BeamMesh<T> {
    pub fn new(n_elems: usize) -> Result<Self> {
        if n_elems < 4 {
            return Err(domain(format!("beam mesh needs at least 4 elements, got {n_elems}")));
        }
        Ok(Self { n_elems, h: T::one() / lit(n_elems as f64) })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_elems + 1
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn node(&self, i: usize) -> T {
        if i == self.n_elems {
            T::one()
        } else {
            self.h * lit(i as f64)
        }
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }

    /// Rotation DOF at the sliding end.
    pub fn base_rotation_dof(&self) -> usize {
        1
    }

    /// Displacement DOF at the actuated end.
    pub fn tip_displacement_dof(&self) -> usize {
        2 * self.n_elems
    }

    /// Rotation DOF at the actuated end (where the moment acts).
    pub fn tip_rotation_dof(&self) -> usize {
        2 * self.n_elems + 1
    }

    /// DOFs left after removing the two essential constraints.
    pub fn free_dofs(&self) -> Vec<usize> {
        let fixed = [self.base_rotation_dof(), self.tip_displacement_dof()];
        (0..self.n_dofs()).filter(|d| !fixed.contains(d)).collect()
    }

    /// Element containing `x` and the local coordinate `s ∈ [0, 1]`.
    pub fn locate(&self, x: T) -> (usize, T) {
        let scaled = x / self.h;
        let e = scaled
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(self.n_elems - 1);
        (e, scaled - lit(e as f64))
    }
}

/// Element stiffness and consistent mass for unit rigidity and density.
pub fn element_matrices<T: Real>(h: T) -> ([[T; 4]; 4], [[T; 4]; 4]) {
    let c = |v: f64| -> T { lit(v) };
    let h2 = h * h;
    let ks = T::one() / (h2 * h);
    let k = [
        [c(12.0), c(6.0) * h, c(-12.0), c(6.0) * h],
        [c(6.0) * h, c(4.0) * h2, c(-6.0) * h, c(2.0) * h2],
        [c(-12.0), c(-6.0) * h, c(12.0), c(-6.0) * h],
        [c(6.0) * h, c(2.0) * h2, c(-6.0) * h, c(4.0) * h2],
    ]
    .map(|row| row.map(|v| v * ks));
    let ms = h / c(420.0);
    let m = [
        [c(156.0), c(22.0) * h, c(54.0), c(-13.0) * h],
        [c(22.0) * h, c(4.0) * h2, c(13.0) * h, c(-3.0) * h2],
        [c(54.0), c(13.0) * h, c(156.0), c(-22.0) * h],
        [c(-13.0) * h, c(-3.0) * h2, c(-22.0) * h, c(4.0) * h2],
    ]
    .map(|row| row.map(|v| v * ms));
    (k, m)
}

/// Global consistent mass and stiffness, before constraints.
pub fn assemble_fem<T: Real>(mesh: &BeamMesh<T>) -> (DMatrix<T>, DMatrix<T>) {
    let n = mesh.n_dofs();
    let mut m = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    let (ke, me) = element_matrices(mesh.h);
    for e in 0..mesh.n_elems {
        let base = 2 * e;
        for a in 0..4 {
            for b in 0..4 {
                k[(base + a, base + b)] += ke[a][b];
                m[(base + a, base + b)] += me[a][b];
            }
        }
    }
    (m, k)
}

/// Cubic Hermite displacement shape functions at local coordinate `s`.
pub fn hermite<T: Real>(s: T, h: T) -> [T; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    let two: T = lit(2.0);
    let three: T = lit(3.0);
    [
        T::one() - three * s2 + two * s3,
        h * (s - two * s2 + s3),
        three * s2 - two * s3,
        h * (s3 - s2),
    ]
}

/// Second `x`-derivatives of the Hermite shape functions.
pub fn hermite_xx<T: Real>(s: T, h: T) -> [T; 4] {
    let h2 = h * h;
    let c = |v: f64| -> T { lit(v) };
    [
        (c(-6.0) + c(12.0) * s) / h2,
        (c(-4.0) + c(6.0) * s) / h,
        (c(6.0) - c(12.0) * s) / h2,
        (c(-2.0) + c(6.0) * s) / h,
    ]
}

pub(crate) fn submatrix<T: Real>(a: &DMatrix<T>, rows: &[usize], cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// Natural frequencies `ω_n` of the beam with homogeneous constraints
/// (`u_x(0) = 0`, `u(1) = 0`), ascending.
pub fn sliding_pinned_frequencies<T: Real>(mesh: &BeamMesh<T>, count: usize) -> Result<Vec<T>> {
    let (m, k) = assemble_fem(mesh);
    let free = mesh.free_dofs();
    let mff = submatrix(&m, &free, &free);
    let kff = submatrix(&k, &free, &free);
    let l = Cholesky::new(mff)
        .ok_or_else(|| Error::Solve("mass matrix is not positive definite".into()))?
        .l();
    let linv_k = l
        .solve_lower_triangular(&kff)
        .ok_or_else(|| Error::Solve("triangular solve failed".into()))?;
    let b = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or_else(|| Error::Solve("triangular solve failed".into()))?;
    let b = (&b + b.transpose()) * lit::<T>(0.5);
    let mut eig: Vec<T> = SymmetricEigen::new(b).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(eig.into_iter().take(count).map(|l| l.max(T::zero()).sqrt()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamState<T: Real> {
    pub d: DVector<T>,
    pub v: DVector<T>,
    pub acc: DVector<T>,
    pub t: T,
}

impl<T: Real> BeamState<T> {
    pub fn zeros(mesh: &BeamMesh<T>) -> Self {
        let n = mesh.n_dofs();
        Self {
            d: DVector::zeros(n),
            v: DVector::zeros(n),
            acc: DVector::zeros(n),
            t: T::zero(),
        }
    }
}

/// Boundary inputs applied over one step, evaluated at the end of the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryInputs<T> {
    pub theta1: T,
    pub theta1_tt: T,
    pub theta2: T,
}

/// Assembled beam with a factorised Newmark operator for a fixed `dt`.
#[derive(Debug, Clone)]
pub struct BeamPlant<T: Real> {
    pub mesh: BeamMesh<T>,
    pub mass: DMatrix<T>,
    pub stiffness: DMatrix<T>,
    dt: T,
    free: Vec<usize>,
    effective: Cholesky<T, Dyn>,
    mass_ff: Cholesky<T, Dyn>,
}

impl<T: Real> BeamPlant<T> {
    pub fn new(mesh: BeamMesh<T>, dt: T) -> Result<Self> {
        if !dt.is_finite() || dt <= T::zero() {
            return Err(domain(format!("time step must be finite and > 0, got {dt}")));
        }
        let (mass, stiffness) = assemble_fem(&mesh);
        let free = mesh.free_dofs();
        let mff = submatrix(&mass, &free, &free);
        let kff = submatrix(&stiffness, &free, &free);
        let beta_dt2 = dt * dt * lit(0.25);
        let effective = Cholesky::new(&mff + kff * beta_dt2)
            .ok_or_else(|| Error::Solve("Newmark operator is not positive definite".into()))?;
        let mass_ff = Cholesky::new(mff)
            .ok_or_else(|| Error::Solve("mass matrix is not positive definite".into()))?;
        Ok(Self { mesh, mass, stiffness, dt, free, effective, mass_ff })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    fn load(&self, theta2: T) -> DVector<T> {
        let mut f = DVector::zeros(self.mesh.n_dofs());
        f[self.mesh.tip_rotation_dof()] = theta2;
        f
    }

    fn solve_free(&self, chol: &Cholesky<T, Dyn>, residual: &DVector<T>) -> DVector<T> {
        let rf = DVector::from_iterator(self.free.len(), self.free.iter().map(|&i| residual[i]));
        chol.solve(&rf)
    }

    /// Accelerations consistent with `d`, the moment `θ₂` and the
    /// prescribed tip acceleration.
    pub fn equilibrate(&self, state: &mut BeamState<T>, theta1_tt: T, theta2: T) {
        let tip = self.mesh.tip_displacement_dof();
        let mut ac = DVector::zeros(self.mesh.n_dofs());
        ac[tip] = theta1_tt;
        let residual = self.load(theta2) - &self.mass * &ac - &self.stiffness * &state.d;
        let af = self.solve_free(&self.mass_ff, &residual);
        for (k, &i) in self.free.iter().enumerate() {
            ac[i] = af[k];
        }
        state.acc = ac;
    }

    /// State that follows the probing trajectory with the static deflection
    /// produced by constant inputs `(θ̂₁, θ̂₂)`, at time `t0`.
    pub fn trajectory_state(
        &self,
        dither: &DitherParams<T>,
        theta1_hat: T,
        theta2_hat: T,
        t0: T,
    ) -> BeamState<T> {
        let mut state = BeamState::zeros(&self.mesh);
        let half: T = lit(0.5);
        let phase = dither.omega * t0;
        let (sn, cs) = (phase.sin(), phase.cos());
        for (i, x) in self.mesh.nodes().into_iter().enumerate() {
            let shape = dither.shape(x) * dither.a;
            let shape_x = dither.shape_x(x) * dither.a;
            state.d[2 * i] = theta1_hat + theta2_hat * (x * x - T::one()) * half + shape * sn;
            state.d[2 * i + 1] = theta2_hat * x + shape_x * sn;
            state.v[2 * i] = shape * dither.omega * cs;
            state.v[2 * i + 1] = shape_x * dither.omega * cs;
        }
        state.d[self.mesh.base_rotation_dof()] = T::zero();
        state.v[self.mesh.base_rotation_dof()] = T::zero();
        state.t = t0;
        let (s1, s2) = dither.eval_s(t0);
        let tip = self.mesh.tip_displacement_dof();
        state.d[tip] = theta1_hat + s1;
        self.equilibrate(&mut state, dither.s1_tt(t0), theta2_hat + s2);
        state
    }

    /// One average-acceleration Newmark step.
    pub fn step(&self, state: &BeamState<T>, inputs: BoundaryInputs<T>) -> Result<BeamState<T>> {
        if !(inputs.theta1.is_finite() && inputs.theta1_tt.is_finite() && inputs.theta2.is_finite())
        {
            return Err(Error::NonFinite(format!("boundary inputs {inputs:?}")));
        }
        let dt = self.dt;
        let half_dt = dt * lit(0.5);
        let beta_dt2 = dt * dt * lit(0.25);
        let tip = self.mesh.tip_displacement_dof();
        let base = self.mesh.base_rotation_dof();

        let mut d_pred = &state.d + &state.v * dt + &state.acc * beta_dt2;
        let v_pred = &state.v + &state.acc * half_dt;
        d_pred[tip] = inputs.theta1;
        d_pred[base] = T::zero();

        let mut acc = DVector::zeros(self.mesh.n_dofs());
        acc[tip] = inputs.theta1_tt;
        let residual = self.load(inputs.theta2) - &self.mass * &acc - &self.stiffness * &d_pred;
        let af = self.solve_free(&self.effective, &residual);
        for (k, &i) in self.free.iter().enumerate() {
            acc[i] = af[k];
        }

        let mut d = d_pred;
        for &i in &self.free {
            d[i] += acc[i] * beta_dt2;
        }
        let v = v_pred + &acc * half_dt;
        if !d.iter().chain(v.iter()).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("beam state diverged".into()));
        }
        Ok(BeamState { d, v, acc, t: state.t + dt })
    }

    /// `½vᵀMv + ½dᵀKd`.
    pub fn energy(&self, state: &BeamState<T>) -> T {
        let kin = state.v.dot(&(&self.mass * &state.v));
        let pot = state.d.dot(&(&self.stiffness * &state.d));
        (kin + pot) * lit(0.5)
    }
}

/// Precomputed Hermite interpolation at a fixed set of points.
#[derive(Debug, Clone)]
pub struct Sampler<T> {
    pub points: Vec<T>,
    elems: Vec<usize>,
    shapes: Vec<[T; 4]>,
}

impl<T: Real> Sampler<T> {
    pub fn new(mesh: &BeamMesh<T>, points: &[T]) -> Self {
        let (elems, shapes) = points
            .iter()
            .map(|&x| {
                let (e, s) = mesh.locate(x);
                (e, hermite(s, mesh.h))
            })
            .unzip();
        Self { points: points.to_vec(), elems, shapes }
    }

    /// Interpolated field values (displacement component) at the points.
    pub fn eval(&self, dofs: &DVector<T>) -> Vec<T> {
        self.elems
            .iter()
            .zip(&self.shapes)
            .map(|(&e, n)| {
                let b = 2 * e;
                n[0] * dofs[b] + n[1] * dofs[b + 1] + n[2] * dofs[b + 2] + n[3] * dofs[b + 3]
            })
            .collect()
    }
}

/// Static map `y = y* + (H/2)(Θ - Θ*)²` with `H < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapConfig<T> {
    pub hessian: T,
    pub theta_star: T,
    pub y_star: T,
}

impl<T: Real> MapConfig<T> {
    pub fn new(hessian: T, theta_star: T, y_star: T) -> Result<Self> {
        if !(hessian.is_finite() && theta_star.is_finite() && y_star.is_finite()) {
            return Err(domain("map parameters must be finite"));
        }
        if hessian >= T::zero() {
            return Err(domain(format!("map Hessian must be negative, got {hessian}")));
        }
        Ok(Self { hessian, theta_star, y_star })
    }

    pub fn output(&self, theta: T) -> T {
        let e = theta - self.theta_star;
        self.y_star + self.hessian * lit(0.5) * e * e
    }
}

/// Quantities the controller reads from the plant.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement<T> {
    pub theta: T,
    pub y: T,
    /// `β = u_t - R_t` at the sampler points.
    pub beta: Vec<T>,
    /// `β_t = u_tt - R_tt` at the sampler points.
    pub beta_t: Vec<T>,
    /// `β(t, 1)`.
    pub beta_at_1: T,
}

pub fn measure<T: Real>(
    state: &BeamState<T>,
    mesh: &BeamMesh<T>,
    sampler: &Sampler<T>,
    map: &MapConfig<T>,
    dither: &DitherParams<T>,
) -> Measurement<T> {
    let theta = state.d[0];
    let y = map.output(theta);
    let ut = sampler.eval(&state.v);
    let utt = sampler.eval(&state.acc);
    let (beta, beta_t) = sampler
        .points
        .iter()
        .zip(ut.iter().zip(&utt))
        .map(|(&x, (&v, &a))| {
            let r = dither.eval_r(state.t, x);
            (v - r.r_t, a - r.r_tt)
        })
        .unzip();
    let beta_at_1 = state.v[mesh.tip_displacement_dof()] - dither.eval_r(state.t, T::one()).r_t;
    Measurement { theta, y, beta, beta_t, beta_at_1 }
}
