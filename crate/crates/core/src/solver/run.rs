//! Time integration to a horizon with periodic observation of the norms the
//! estimates are stated in.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{weighted_l2, Solver, SolverState, StepRecord};
use crate::error::{domain, Result};
use crate::estimates::{compute_jh, weighted_gradient_integral};
use crate::grid::{Region, ScalarField};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationConfig<T> {
    /// Time between observation epochs; rounded to a whole number of steps.
    pub interval: T,
    /// Exponents `s` of `‖∇p‖_{L^s(U′)}` and `∫_{U′} K(|∇p|)|∇p|^s`.
    pub grad_s: Vec<T>,
    /// Exponents `δ` of `‖∇²p‖_{L^{2−δ}(U′)}`.
    pub hess_delta: Vec<T>,
}

impl<T: Real> Default for ObservationConfig<T> {
    fn default() -> Self {
        Self {
            interval: T::lit(0.1),
            grad_s: vec![T::lit(2.0), T::lit(4.0)],
            hess_delta: vec![T::lit(0.5)],
        }
    }
}

impl<T: Real> ObservationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.interval > T::zero()) {
            return domain("observation interval must be positive");
        }
        if self.grad_s.iter().any(|&s| !(s >= T::one()) || !s.is_finite()) {
            return domain("gradient exponents s must be finite and at least 1");
        }
        if self.hess_delta.iter().any(|&d| !(d > T::zero() && d < T::one())) {
            return domain("Hessian exponents δ must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn csv_header(&self) -> String {
        let mut cols: Vec<String> = ["t", "L2_pbar", "Linf_pbar", "Linf_pbar_t", "JH"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        cols.extend(self.grad_s.iter().map(|s| format!("grad_L{s}")));
        cols.extend(self.hess_delta.iter().map(|d| format!("hess_norm_{d}")));
        cols.push("mass_balance_residual".into());
        cols.push("newton_iters".into());
        cols.join(",")
    }
}

/// Quantities recorded at one observation epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation<T> {
    pub t: T,
    pub l2_pbar: T,
    pub linf_pbar: T,
    /// `‖p̄_t‖_{L∞(U′)}` from the backward difference between epochs; NaN at the first.
    pub linf_pbar_t: T,
    /// `‖p̄_t‖_{L∞(U′)}` from the last backward-Euler step, i.e. the discrete PDE right-hand side.
    pub linf_pbar_t_rhs: T,
    pub jh: T,
    /// `∫_U K(|∇p|)|∇p|²`.
    pub k_grad2: T,
    /// `‖∇p‖_{L^s(U′)}` per configured `s`.
    pub grad_norms: Vec<T>,
    /// `∫_{U′} K(|∇p|)|∇p|^s` per configured `s`.
    pub k_grad_s: Vec<T>,
    /// `‖∇²p‖_{L^{2−δ}(U′)}` per configured `δ`; NaN when the grid is too coarse.
    pub hess_norms: Vec<T>,
    pub mass_balance_residual: T,
    /// Largest Newton iteration count since the previous epoch.
    pub newton_iters: usize,
    /// `max |p̄_mean-shift − p̄_formula|`.
    pub shift_discrepancy: T,
    /// `‖ψ(t)‖_{L∞(Γ)}`.
    pub psi_sup: T,
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub state: SolverState<T>,
    pub observations: Vec<Observation<T>>,
    pub steps: Vec<StepRecord<T>>,
}

pub(crate) struct Observer<T> {
    config: ObservationConfig<T>,
    previous: Option<(T, ScalarField<T>)>,
    before_last_step: Option<(T, ScalarField<T>)>,
    newton_iters: usize,
}

impl<T: Real> Observer<T> {
    pub(crate) fn new(config: ObservationConfig<T>) -> Self {
        Self {
            config,
            previous: None,
            before_last_step: None,
            newton_iters: 0,
        }
    }

    /// Call before each step with the state about to be advanced.
    pub(crate) fn before_step(&mut self, state: &SolverState<T>) {
        self.before_last_step = Some((state.time, state.shifted()));
    }

    pub(crate) fn after_step(&mut self, records: &[StepRecord<T>]) {
        for r in records {
            self.newton_iters = self.newton_iters.max(r.newton_iters);
        }
    }

    pub(crate) fn observe(&mut self, solver: &Solver<T>, state: &SolverState<T>) -> Result<Observation<T>> {
        let grid = solver.grid();
        let kernel = solver.kernel();
        let p = &state.pressure;
        let pbar = state.shifted();
        let rate = |from: &Option<(T, ScalarField<T>)>| -> Result<T> {
            match from {
                Some((t0, f0)) if state.time > *t0 => {
                    let d = pbar.sub(f0)?.scale((state.time - *t0).recip());
                    d.norm_ls(T::infinity(), Region::Interior)
                }
                _ => Ok(T::nan()),
            }
        };
        let linf_pbar_t = rate(&self.previous)?;
        let linf_pbar_t_rhs = rate(&self.before_last_step)?;
        let formula = state.shifted_by_formula();
        let shift_discrepancy = pbar
            .values()
            .iter()
            .zip(formula.values())
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max);
        let mut grad_norms = Vec::with_capacity(self.config.grad_s.len());
        let mut k_grad_s = Vec::with_capacity(self.config.grad_s.len());
        for &s in &self.config.grad_s {
            grad_norms.push(p.gradient_norm_ls(s, Region::Interior)?);
            k_grad_s.push(weighted_gradient_integral(kernel, p, s, Region::Interior)?);
        }
        let hess_norms = self
            .config
            .hess_delta
            .iter()
            .map(|&d| p.hessian_norm(d, Region::Interior).unwrap_or_else(|_| T::nan()))
            .collect();
        let obs = Observation {
            t: state.time,
            l2_pbar: weighted_l2(pbar.values(), grid.cell_volume()),
            linf_pbar: pbar.norm_ls(T::infinity(), Region::Full)?,
            linf_pbar_t,
            linf_pbar_t_rhs,
            jh: compute_jh(kernel, p),
            k_grad2: weighted_gradient_integral(kernel, p, T::lit(2.0), Region::Full)?,
            grad_norms,
            k_grad_s,
            hess_norms,
            mass_balance_residual: state.mass_balance_residual(),
            newton_iters: self.newton_iters,
            shift_discrepancy,
            psi_sup: solver.flux().sup_norm(grid, state.time),
        };
        self.previous = Some((state.time, pbar));
        self.newton_iters = 0;
        Ok(obs)
    }
}

/// Epoch spacing in steps and the number of steps to reach `t_end`.
pub(crate) fn schedule<T: Real>(dt: T, t_end: T, interval: T) -> Result<(usize, usize)> {
    if !(t_end > T::zero()) || !t_end.is_finite() {
        return domain("t_end must be positive");
    }
    let n_steps = (t_end / dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
    let every = (interval / dt).round().to_usize().unwrap_or(1).max(1);
    Ok((n_steps, every))
}

/// Time of step `k` on the uniform schedule, clipped to `t_end`.
pub(crate) fn step_time<T: Real>(k: usize, dt: T, t_end: T) -> T {
    (T::from_usize_lossy(k) * dt).min(t_end)
}

impl<T: Real> Solver<T> {
    /// Advances `initial` to `t_end` with the configured `dt`, observing every
    /// `obs.interval` and at `t_end`.
    pub fn run(&mut self, initial: ScalarField<T>, t_end: T, obs: &ObservationConfig<T>) -> Result<RunOutput<T>> {
        obs.validate()?;
        let (n_steps, every) = schedule(self.config.dt, t_end, obs.interval)?;
        let mut state = SolverState::new(initial);
        let mut observer = Observer::new(obs.clone());
        let mut observations = vec![observer.observe(self, &state)?];
        let mut steps = Vec::with_capacity(n_steps);
        for k in 1..=n_steps {
            observer.before_step(&state);
            let records = self.step_to(&mut state, step_time(k, self.config.dt, t_end))?;
            observer.after_step(&records);
            steps.extend(records);
            if k % every == 0 || k == n_steps {
                observations.push(observer.observe(self, &state)?);
            }
        }
        Ok(RunOutput {
            state,
            observations,
            steps,
        })
    }
}

/// Free-function form of [`Solver::run`].
pub fn run<T: Real>(
    initial: ScalarField<T>,
    poly: crate::ForchheimerPolynomial<T>,
    flux: crate::BoundaryFluxSpec<T>,
    config: super::SolverConfig<T>,
    t_end: T,
    observers: &ObservationConfig<T>,
) -> Result<RunOutput<T>> {
    let mut solver = Solver::new(*initial.grid(), poly, flux, config)?;
    solver.run(initial, t_end, observers)
}

fn num<T: Real>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

/// Writes the observation log in the CSV schema given by [`ObservationConfig::csv_header`].
pub fn write_csv<T: Real, W: Write>(out: &mut W, config: &ObservationConfig<T>, log: &[Observation<T>]) -> Result<()> {
    writeln!(out, "{}", config.csv_header())?;
    for o in log {
        let mut row = vec![num(o.t), num(o.l2_pbar), num(o.linf_pbar), num(o.linf_pbar_t), num(o.jh)];
        row.extend(o.grad_norms.iter().map(|&v| num(v)));
        row.extend(o.hess_norms.iter().map(|&v| num(v)));
        row.push(num(o.mass_balance_residual));
        row.push(o.newton_iters.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
