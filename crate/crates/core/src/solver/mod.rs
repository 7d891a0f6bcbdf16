//! Conservative finite-volume discretization of `∂p/∂t = ∇·(K(|∇p|)∇p)` with
//! the flux condition `−K(|∇p|)∇p·ν = ψ`, advanced by backward Euler and
//! solved with Newton's method.
//!
//! The residual of cell `c` is
//! `R_c = (c − p_old)/dt − (1/vol) (Σ_faces ± area · K(|∇c|_f) ∂_n c − Σ_Γ area · ψ)`.
//! Summing `vol · R_c` telescopes, so every Newton update leaves the discrete
//! mass balance exact up to the linear-solve defect. No damping is applied for
//! that reason; failed steps are retried on halved substeps instead.

mod run;

pub use run::{run, write_csv, ObservationConfig, Observation, RunOutput};
pub(crate) use run::{schedule, step_time};

use serde::{Deserialize, Serialize};

use crate::constitutive::{ConductivityKernel, ForchheimerPolynomial, JACOBIAN_ZERO_GRADIENT};
use crate::error::{domain, Error, Result};
use crate::grid::flux::{BoundFlux, BoundaryFluxSpec};
use crate::grid::{FaceStencil, Grid, ScalarField};
use crate::linalg::{band_lu_solve, bicgstab, StencilMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverKind {
    /// Banded LU in 1D, BiCGSTAB in 2D.
    #[default]
    Auto,
    DirectBand,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig<T> {
    pub dt: T,
    /// Bound on the discrete L² norm of the cell residuals.
    pub newton_tol: T,
    /// Maximum number of linear solves per step attempt.
    pub newton_max_iter: usize,
    pub linear_solver: LinearSolverKind,
    pub linear_tol: T,
    pub max_halvings: u32,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-3),
            newton_tol: T::lit(1e-10),
            newton_max_iter: 50,
            linear_solver: LinearSolverKind::Auto,
            linear_tol: T::lit(1e-12),
            max_halvings: 10,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn with_dt(dt: T) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return domain("dt must be positive");
        }
        if !(self.newton_tol > T::zero()) || !(self.linear_tol > T::zero()) {
            return domain("tolerances must be positive");
        }
        if self.newton_max_iter == 0 {
            return domain("newton_max_iter must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepDiagnostics<T> {
    /// Largest Newton iteration count over the substeps of the last step.
    pub newton_iters: usize,
    /// Residual norm at acceptance of the last substep.
    pub residual: T,
    pub substeps: usize,
    /// Deepest halving level used.
    pub halvings: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState<T> {
    pub time: T,
    pub pressure: ScalarField<T>,
    /// `∫₀^t ∫_Γ ψ`, accumulated with the right-endpoint rule of backward Euler.
    pub accumulated_boundary_outflow: T,
    pub initial_mass: T,
    pub diagnostics: StepDiagnostics<T>,
}

impl<T: Real> SolverState<T> {
    pub fn new(initial: ScalarField<T>) -> Self {
        let initial_mass = initial.integral();
        Self {
            time: T::zero(),
            pressure: initial,
            accumulated_boundary_outflow: T::zero(),
            initial_mass,
            diagnostics: StepDiagnostics::default(),
        }
    }

    /// `|∫p(t) − ∫p(0) + ∫₀^t∫_Γψ| / (1 + |∫p(0)|)`.
    pub fn mass_balance_residual(&self) -> T {
        (self.pressure.integral() - self.initial_mass + self.accumulated_boundary_outflow).abs()
            / (T::one() + self.initial_mass.abs())
    }

    /// `p̄` as the zero-mean shift of `p`.
    pub fn shifted(&self) -> ScalarField<T> {
        self.pressure.zero_mean_shift()
    }

    /// `p̄ = p − (1/|U|)∫p₀ + (1/|U|)∫₀^t∫_Γψ`.
    pub fn shifted_by_formula(&self) -> ScalarField<T> {
        let g = self.pressure.grid();
        let shift = (self.initial_mass - self.accumulated_boundary_outflow) / g.volume();
        let values = self.pressure.values().iter().map(|&v| v - shift).collect();
        ScalarField::new_unchecked(*g, values)
    }
}

/// Terms of the discrete energy balance for one backward-Euler step:
/// `kinetic + numerical_dissipation + flux_dissipation + boundary = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyBalance<T> {
    /// `½(‖p̄ⁿ⁺¹‖² − ‖p̄ⁿ‖²)/dt`.
    pub kinetic: T,
    /// `½‖p̄ⁿ⁺¹ − p̄ⁿ‖²/dt`, the backward-Euler dissipation.
    pub numerical_dissipation: T,
    /// `Σ_faces vol_f K(|∇p|_f) (∂_n p)²`.
    pub flux_dissipation: T,
    /// `Σ_Γ area ψ p̄ⁿ⁺¹`.
    pub boundary: T,
}

impl<T: Real> EnergyBalance<T> {
    pub fn residual(&self) -> T {
        self.kinetic + self.numerical_dissipation + self.flux_dissipation + self.boundary
    }

    pub fn scale(&self) -> T {
        self.kinetic.abs() + self.numerical_dissipation + self.flux_dissipation + self.boundary.abs()
    }

    pub fn relative_residual(&self) -> T {
        let s = self.scale();
        if s == T::zero() {
            T::zero()
        } else {
            self.residual().abs() / s
        }
    }
}

/// Per-step record of an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord<T> {
    pub t: T,
    pub dt: T,
    pub newton_iters: usize,
    pub substeps: usize,
    pub halvings: u32,
    pub residual: T,
    pub mass_balance_residual: T,
    /// `‖p̄‖_{L²}` after the step.
    pub l2_pbar: T,
    pub energy: EnergyBalance<T>,
}

struct Failure<T> {
    iterations: usize,
    residual: T,
}

/// Spatial operator, Newton workspace and configuration for one problem.
#[derive(Debug, Clone)]
pub struct Solver<T> {
    grid: Grid<T>,
    kernel: ConductivityKernel<T>,
    flux_spec: BoundaryFluxSpec<T>,
    flux: BoundFlux<T>,
    stencils: Vec<FaceStencil<T>>,
    config: SolverConfig<T>,
    matrix: StencilMatrix<T>,
    iterative: bool,
}

impl<T: Real> Solver<T> {
    pub fn new(
        grid: Grid<T>,
        poly: ForchheimerPolynomial<T>,
        flux: BoundaryFluxSpec<T>,
        config: SolverConfig<T>,
    ) -> Result<Self> {
        config.validate()?;
        flux.validate()?;
        let stencils = grid.face_stencils();
        let mut rows: Vec<Vec<usize>> = (0..grid.n_cells()).map(|c| vec![c]).collect();
        for st in &stencils {
            let cols: Vec<usize> = [st.left, st.right]
                .into_iter()
                .chain(st.tangential.iter().map(|&(c, _)| c))
                .collect();
            rows[st.left].extend_from_slice(&cols);
            rows[st.right].extend_from_slice(&cols);
        }
        let iterative = match config.linear_solver {
            LinearSolverKind::Auto => grid.dim() == 2,
            LinearSolverKind::DirectBand => false,
            LinearSolverKind::Iterative => true,
        };
        Ok(Self {
            kernel: ConductivityKernel::new(poly),
            flux: flux.bind(&grid),
            flux_spec: flux,
            stencils,
            config,
            matrix: StencilMatrix::with_pattern(rows),
            iterative,
            grid,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn kernel(&self) -> &ConductivityKernel<T> {
        &self.kernel
    }

    pub fn flux(&self) -> &BoundaryFluxSpec<T> {
        &self.flux_spec
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.config
    }

    /// Normal flux `K(|y|) y_n` and its derivatives `(∂F/∂y_n, ∂F/∂y_t)` at one face.
    #[inline]
    fn face_flux(&self, st: &FaceStencil<T>, v: &[T]) -> (T, T, T, T) {
        let gn = st.normal(v);
        let gt = st.tangent(v);
        let xi = gn.hypot(gt);
        if xi < T::lit(JACOBIAN_ZERO_GRADIENT) {
            let k0 = self.kernel.k_at_zero();
            return (k0 * gn, gn, k0, T::zero());
        }
        let (k, xkp) = self.kernel.k_and_xi_k_prime(xi);
        let (un, ut) = (gn / xi, gt / xi);
        (k * gn, gn, k + xkp * un * un, xkp * un * ut)
    }

    /// Fills `res` with the cell residuals and, when requested, the Jacobian.
    /// Returns the per-cell magnitude scale used for the round-off floor.
    fn evaluate(&mut self, c: &[T], p_old: &[T], dt: T, psi: &[T], res: &mut [T], jacobian: bool) -> T {
        let inv_vol = self.grid.cell_volume().recip();
        let inv_dt = dt.recip();
        let mut scale: Vec<T> = c
            .iter()
            .zip(p_old)
            .map(|(&a, &b)| (a.abs() + b.abs()) * inv_dt)
            .collect();
        for ((r, &a), &b) in res.iter_mut().zip(c).zip(p_old) {
            *r = (a - b) * inv_dt;
        }
        if jacobian {
            self.matrix.clear();
            for k in 0..c.len() {
                self.matrix.add(k, k, inv_dt);
            }
        }
        for idx in 0..self.stencils.len() {
            let st = &self.stencils[idx];
            let (f, _, jnn, jnt) = self.face_flux(st, c);
            let w = st.area * inv_vol;
            res[st.left] = res[st.left] - w * f;
            res[st.right] = res[st.right] + w * f;
            scale[st.left] = scale[st.left] + (w * f).abs();
            scale[st.right] = scale[st.right] + (w * f).abs();
            if jacobian {
                let (l, r, ih) = (st.left, st.right, st.inv_h);
                let dl = -jnn * ih;
                let dr = jnn * ih;
                self.matrix.add(l, l, -w * dl);
                self.matrix.add(l, r, -w * dr);
                self.matrix.add(r, l, w * dl);
                self.matrix.add(r, r, w * dr);
                if jnt != T::zero() {
                    for k in 0..self.stencils[idx].tangential.len() {
                        let (cell, wt) = self.stencils[idx].tangential[k];
                        let d = jnt * wt;
                        self.matrix.add(l, cell, -w * d);
                        self.matrix.add(r, cell, w * d);
                    }
                }
            }
        }
        for (face, &p) in self.flux.faces().iter().zip(psi) {
            let v = face.area * inv_vol * p;
            res[face.cell] = res[face.cell] + v;
            scale[face.cell] = scale[face.cell] + v.abs();
        }
        weighted_l2(&scale, self.grid.cell_volume())
    }

    /// Backward-Euler residual of `candidate` against `state.pressure` over a step `dt`
    /// ending at `t_new`.
    pub fn residual(&mut self, state: &SolverState<T>, candidate: &ScalarField<T>, dt: T, t_new: T) -> Result<ScalarField<T>> {
        if candidate.grid() != &self.grid || state.pressure.grid() != &self.grid {
            return domain("fields do not match the solver grid");
        }
        let psi = self.flux.values(t_new);
        let mut res = vec![T::zero(); self.grid.n_cells()];
        self.evaluate(candidate.values(), state.pressure.values(), dt, &psi, &mut res, false);
        Ok(ScalarField::new_unchecked(self.grid, res))
    }

    fn linear_solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        if self.iterative {
            let mut x = vec![T::zero(); rhs.len()];
            let max_iter = 20 * rhs.len().max(50);
            if bicgstab(&self.matrix, rhs, &mut x, self.config.linear_tol, max_iter).is_ok() {
                return Ok(x);
            }
        }
        band_lu_solve(&self.matrix, rhs)
    }

    /// One backward-Euler step without halving.
    fn try_step(&mut self, p_old: &[T], t_new: T, dt: T) -> std::result::Result<(Vec<T>, usize, T, Vec<T>), Failure<T>> {
        let psi = self.flux.values(t_new);
        let mut c = p_old.to_vec();
        let mut res = vec![T::zero(); c.len()];
        let vol = self.grid.cell_volume();
        let floor_factor = T::epsilon() * T::lit(64.0);
        let mut first = None;
        for it in 0..=self.config.newton_max_iter {
            let scale = self.evaluate(&c, p_old, dt, &psi, &mut res, true);
            let rn = weighted_l2(&res, vol);
            if !rn.is_finite() {
                return Err(Failure {
                    iterations: it,
                    residual: rn,
                });
            }
            if rn <= self.config.newton_tol || rn <= floor_factor * scale {
                return Ok((c, it, rn, psi));
            }
            let r0 = *first.get_or_insert(rn);
            if it == self.config.newton_max_iter || rn > T::lit(1e8) * r0 {
                return Err(Failure {
                    iterations: it,
                    residual: rn,
                });
            }
            let rhs: Vec<T> = res.iter().map(|&r| -r).collect();
            let delta = match self.linear_solve(&rhs) {
                Ok(d) => d,
                Err(_) => {
                    return Err(Failure {
                        iterations: it,
                        residual: rn,
                    })
                }
            };
            for (ci, di) in c.iter_mut().zip(&delta) {
                *ci = *ci + *di;
            }
        }
        unreachable!("loop returns on its last iteration")
    }

    fn advance_to(&mut self, state: &mut SolverState<T>, t_target: T, depth: u32, out: &mut Vec<StepRecord<T>>) -> Result<()> {
        let dt = t_target - state.time;
        let p_old = state.pressure.values().to_vec();
        match self.try_step(&p_old, t_target, dt) {
            Ok((c, iters, rn, psi)) => {
                let outflow: T = psi
                    .iter()
                    .zip(self.flux.faces())
                    .map(|(&p, f)| p * f.area)
                    .sum();
                let energy = self.energy_balance(&p_old, &c, dt, &psi);
                state.pressure = ScalarField::new_unchecked(self.grid, c);
                state.time = t_target;
                state.accumulated_boundary_outflow = state.accumulated_boundary_outflow + dt * outflow;
                let d = &mut state.diagnostics;
                d.newton_iters = d.newton_iters.max(iters);
                d.residual = rn;
                d.substeps += 1;
                d.halvings = d.halvings.max(depth);
                let pbar = state.pressure.zero_mean_shift();
                out.push(StepRecord {
                    t: t_target,
                    dt,
                    newton_iters: iters,
                    substeps: 1,
                    halvings: depth,
                    residual: rn,
                    mass_balance_residual: state.mass_balance_residual(),
                    l2_pbar: weighted_l2(pbar.values(), self.grid.cell_volume()),
                    energy,
                });
                Ok(())
            }
            Err(_) if depth < self.config.max_halvings => {
                let mid = state.time + dt * T::lit(0.5);
                self.advance_to(state, mid, depth + 1, out)?;
                self.advance_to(state, t_target, depth + 1, out)
            }
            Err(fail) => Err(Error::StepFailure {
                time: state.time.as_f64(),
                dt: dt.as_f64(),
                halvings: depth,
                residual: fail.residual.as_f64(),
                iterations: fail.iterations,
            }),
        }
    }

    /// Advances `state` by `dt`, halving into substeps on Newton failure. Returns
    /// one record per accepted substep.
    pub fn newton_step(&mut self, state: &mut SolverState<T>, dt: T) -> Result<Vec<StepRecord<T>>> {
        if !(dt > T::zero()) {
            return domain("dt must be positive");
        }
        self.step_to(state, state.time + dt)
    }

    /// Advances `state` to exactly `t_target`.
    pub fn step_to(&mut self, state: &mut SolverState<T>, t_target: T) -> Result<Vec<StepRecord<T>>> {
        if state.pressure.grid() != &self.grid {
            return domain("state does not match the solver grid");
        }
        if !(t_target > state.time) {
            return domain("target time must exceed the current time");
        }
        state.diagnostics = StepDiagnostics::default();
        let mut records = Vec::with_capacity(1);
        self.advance_to(state, t_target, 0, &mut records)?;
        Ok(records)
    }

    /// Face fluxes `K(|∇v|_f) ∂_n v` at every interior face, in stencil order.
    pub fn face_fluxes(&self, v: &[T]) -> Vec<T> {
        self.stencils.iter().map(|st| self.face_flux(st, v).0).collect()
    }

    pub fn stencils(&self) -> &[FaceStencil<T>] {
        &self.stencils
    }

    /// Energy balance of the step `p_old → c` with boundary data `psi`.
    pub fn energy_balance(&self, p_old: &[T], c: &[T], dt: T, psi: &[T]) -> EnergyBalance<T> {
        let vol = self.grid.cell_volume();
        let n = T::from_usize_lossy(c.len());
        let mc = c.iter().copied().sum::<T>() / n;
        let mp = p_old.iter().copied().sum::<T>() / n;
        let half_inv_dt = T::lit(0.5) / dt;
        let mut kinetic = T::zero();
        let mut numerical = T::zero();
        for (&a, &b) in c.iter().zip(p_old) {
            let (ab, bb) = (a - mc, b - mp);
            kinetic = kinetic + (ab - bb) * (ab + bb);
            numerical = numerical + (ab - bb) * (ab - bb);
        }
        let flux_dissipation = self
            .stencils
            .iter()
            .map(|st| {
                let (f, gn, _, _) = self.face_flux(st, c);
                st.dual_volume * f * gn
            })
            .sum();
        let boundary = self
            .flux
            .faces()
            .iter()
            .zip(psi)
            .map(|(face, &p)| face.area * p * (c[face.cell] - mc))
            .sum();
        EnergyBalance {
            kinetic: kinetic * vol * half_inv_dt,
            numerical_dissipation: numerical * vol * half_inv_dt,
            flux_dissipation,
            boundary,
        }
    }
}

pub(crate) fn weighted_l2<T: Real>(v: &[T], vol: T) -> T {
    (v.iter().map(|&x| x * x).sum::<T>() * vol).sqrt()
}
