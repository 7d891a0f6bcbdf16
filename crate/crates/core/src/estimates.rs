//! Post-processing of solver output into the constant-free content of the
//! long-time estimates: decay targets, plateau targets and exact identities.
//!
//! Every bound in the theory carries an unknown constant, so nothing here
//! asserts an absolute size. Boundedness targets compare the second half of a
//! run against the first; decay targets compare the end of a run against its
//! maximum.

use serde::Serialize;

use crate::constitutive::ConductivityKernel;
use crate::error::{domain, Error, Result};
use crate::grid::flux::{BoundaryFluxSpec, FluxRegime, Profile};
use crate::grid::{Grid, Region, ScalarField};
use crate::scalar::Real;
use crate::solver::{Observation, StepRecord};

/// Allowed growth of a plateau statistic between the halves of a run.
pub const PLATEAU_GROWTH: f64 = 1.05;
/// Allowed final fraction of the maximum for decay targets.
pub const DECAY_FRACTION: f64 = 0.02;
/// Fraction of the horizon forming the tail window of `A_hat` and `beta_hat`.
pub const TAIL_FRACTION: f64 = 0.25;
pub const MASS_BALANCE_TOL: f64 = 1e-10;
pub const ENERGY_TOL: f64 = 1e-6;

/// Exponents of the estimate formulas as functions of `a` and the dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents<T> {
    pub a: T,
    pub n: usize,
    /// `4 / ((2−a)(4−a(n+2)))`.
    pub mu4: T,
    /// `4 (1 − 1/(2−a)*)`, with `(2−a)* = ∞` when `n ≤ 2−a`.
    pub mu5: T,
    /// `1 − 2/μ₅`.
    pub mu6: T,
    /// `2 / (μ₅ (2−a))`.
    pub mu7: T,
    /// `μ₆ − 1/μ` in the limit `μ → ∞`, the largest admissible value.
    pub gamma1: T,
}

impl<T: Real> Exponents<T> {
    pub fn new(a: T, n: usize) -> Result<Self> {
        if !(a >= T::zero() && a < T::one()) {
            return domain("a must lie in [0, 1)");
        }
        if n == 0 {
            return domain("dimension must be positive");
        }
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let nf = T::from_usize_lossy(n);
        let sdc_gap = four - a * (nf + two);
        if !(sdc_gap > T::zero()) {
            return domain("exponents need the strict degree condition a < 4/(n+2)");
        }
        let r = two - a;
        let mu4 = four / (r * sdc_gap);
        let inv_star = if nf > r { (nf - r) / (nf * r) } else { T::zero() };
        let mu5 = four * (T::one() - inv_star);
        let mu6 = T::one() - two / mu5;
        let mu7 = two / (mu5 * r);
        Ok(Self {
            a,
            n,
            mu4,
            mu5,
            mu6,
            mu7,
            gamma1: mu6,
        })
    }

    /// `γ₁/(γ₁+1)`, the reduced order allowed for interior sup-norms of differences.
    pub fn reduced_order(&self) -> T {
        self.gamma1 / (self.gamma1 + T::one())
    }
}

/// `∫_U H(|∇p|)` with cell gradients.
pub fn compute_jh<T: Real>(kernel: &ConductivityKernel<T>, field: &ScalarField<T>) -> T {
    let vol = field.grid().cell_volume();
    field
        .cell_gradients()
        .iter()
        .map(|g| kernel.h_unchecked(g[0].hypot(g[1])))
        .sum::<T>()
        * vol
}

/// `∫_region K(|∇p|)|∇p|^s` with cell gradients.
pub fn weighted_gradient_integral<T: Real>(
    kernel: &ConductivityKernel<T>,
    field: &ScalarField<T>,
    s: T,
    region: Region,
) -> Result<T> {
    let cells = field.grid().region_cells(region)?;
    let grads = field.cell_gradients();
    let total: T = cells
        .iter()
        .map(|&c| {
            let xi = grads[c][0].hypot(grads[c][1]);
            if xi == T::zero() {
                T::zero()
            } else {
                kernel.k(xi) * xi.powf(s)
            }
        })
        .sum();
    Ok(total * field.grid().cell_volume())
}

/// Scalar envelopes of the boundary data sampled at given times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxFunctionals<T> {
    pub times: Vec<T>,
    /// `‖ψ‖² + ‖ψ‖^{(2−a)/(1−a)}`.
    pub f: Vec<T>,
    /// The same functional of `ψ_t`; `None` when a profile is not differentiable.
    pub f_tilde: Option<Vec<T>>,
    /// Running maximum of `f`.
    pub m_f: Vec<T>,
    /// Sup of `f` over the tail window.
    pub a_hat: T,
    /// Sup of `[f′]⁻` over the tail window; `None` when `f` is not differentiable.
    pub beta_hat: Option<T>,
    pub regime: FluxRegime,
    /// Whether `ψ_t → 0`, from the profile families.
    pub derivative_vanishes: bool,
    /// Whether `∫₀^∞ f < ∞`, from the profile families.
    pub integrable: bool,
}

fn envelope<T: Real>(x: T, q: T) -> T {
    x * x + x.powf(q)
}

/// Whether `∫₀^∞ (ψ² + |ψ|^q) dt < ∞` for a profile with limit zero.
fn profile_integrable<T: Real>(p: &Profile<T>) -> bool {
    match *p {
        Profile::Constant { value } => value == T::zero(),
        Profile::DecayingExp { base, .. } => base == T::zero(),
        Profile::PowerGrowth { coefficient, exponent } => {
            coefficient == T::zero() || T::lit(2.0) * exponent < -T::one()
        }
        Profile::Sinusoidal { base, amplitude, .. } => base == T::zero() && amplitude == T::zero(),
        Profile::Step { after, .. } => after == T::zero(),
    }
}

pub fn flux_functionals<T: Real>(flux: &BoundaryFluxSpec<T>, grid: &Grid<T>, a: T, times: &[T]) -> Result<FluxFunctionals<T>> {
    if !(a >= T::zero() && a < T::one()) {
        return domain("a must lie in [0, 1)");
    }
    if times.is_empty() {
        return Err(Error::InsufficientSamples("flux functionals need at least one time".into()));
    }
    let q = (T::lit(2.0) - a) / (T::one() - a);
    let faces = grid.boundary_faces();
    let mut f = Vec::with_capacity(times.len());
    let mut f_tilde = flux.is_differentiable().then(Vec::new);
    let mut f_prime: Option<Vec<T>> = flux.is_differentiable().then(Vec::new);
    for &t in times {
        let n = flux.sup_norm(grid, t);
        f.push(envelope(n, q));
        if let Some(ft) = f_tilde.as_mut() {
            let nt = flux.sup_norm_derivative(grid, t).unwrap_or_else(T::zero);
            ft.push(envelope(nt, q));
        }
        if let Some(fp) = f_prime.as_mut() {
            // d‖ψ‖∞/dt at a maximizing face
            let mut best = (T::zero(), T::zero());
            for face in &faces {
                let v = flux.value(face, grid, t);
                if v.abs() > best.0 {
                    let d = flux.derivative(face, grid, t).unwrap_or_else(T::zero);
                    best = (v.abs(), v.signum() * d);
                }
            }
            let dn = best.1;
            let df = if n > T::zero() {
                (T::lit(2.0) * n + q * n.powf(q - T::one())) * dn
            } else {
                T::zero()
            };
            fp.push(df);
        }
    }
    let mut m_f = Vec::with_capacity(f.len());
    let mut running = T::neg_infinity();
    for &v in &f {
        running = running.max(v);
        m_f.push(running);
    }
    let t0 = times[0];
    let t_end = times[times.len() - 1];
    let tail_start = t_end - (t_end - t0) * T::lit(TAIL_FRACTION);
    let tail: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= tail_start).collect();
    let a_hat = tail.iter().map(|&k| f[k]).fold(T::zero(), T::max);
    let beta_hat = f_prime.map(|fp| tail.iter().map(|&k| (-fp[k]).max(T::zero())).fold(T::zero(), T::max));
    Ok(FluxFunctionals {
        times: times.to_vec(),
        f,
        f_tilde,
        m_f,
        a_hat,
        beta_hat,
        regime: flux.regime(),
        derivative_vanishes: flux.derivative_vanishes(),
        integrable: flux.terms.iter().all(|t| profile_integrable(&t.profile)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMode {
    Decay,
    Boundedness,
    ScalingOrder,
}

/// One verification target. `pass` is meaningful only when `applicable`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetRecord {
    pub target: String,
    pub anchor: String,
    pub mode: CheckMode,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub applicable: bool,
    pub note: String,
}

impl TargetRecord {
    fn new(target: &str, anchor: &str, mode: CheckMode, statistic: f64, threshold: f64, pass: bool) -> Self {
        Self {
            target: target.into(),
            anchor: anchor.into(),
            mode,
            statistic,
            threshold,
            pass,
            applicable: true,
            note: String::new(),
        }
    }

    /// `statistic ≤ threshold`.
    pub fn at_most(target: &str, anchor: &str, mode: CheckMode, statistic: f64, threshold: f64) -> Self {
        Self::new(target, anchor, mode, statistic, threshold, statistic <= threshold)
    }

    /// `statistic ≥ threshold`.
    pub fn at_least(target: &str, anchor: &str, mode: CheckMode, statistic: f64, threshold: f64) -> Self {
        Self::new(target, anchor, mode, statistic, threshold, statistic >= threshold)
    }

    pub fn not_applicable(target: &str, anchor: &str, mode: CheckMode, note: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            anchor: anchor.into(),
            mode,
            statistic: f64::NAN,
            threshold: f64::NAN,
            pass: true,
            applicable: false,
            note: note.into(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn failed(&self) -> bool {
        self.applicable && !self.pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub scenario_hash: String,
    /// Whether the strict degree condition holds; most estimates assume it.
    pub sdc: bool,
    pub targets: Vec<TargetRecord>,
}

impl EstimateReport {
    pub fn all_applicable_pass(&self) -> bool {
        self.targets.iter().all(|t| !t.failed())
    }
}

fn need<T>(log: &[T], n: usize, what: &str) -> Result<()> {
    if log.len() < n {
        return Err(Error::InsufficientSamples(format!(
            "{what} needs at least {n} observations, got {}",
            log.len()
        )));
    }
    Ok(())
}

/// Ratio `max(second half) / max(first half)` of a nonnegative series over
/// epochs; `0/0` counts as 1.
fn half_growth<T: Real>(times: &[T], values: &[T]) -> f64 {
    let t0 = times[0];
    let mid = t0 + (times[times.len() - 1] - t0) * T::lit(0.5);
    let mut first = T::zero();
    let mut second = T::zero();
    for (&t, &v) in times.iter().zip(values) {
        if t <= mid {
            first = first.max(v);
        } else {
            second = second.max(v);
        }
    }
    if second == T::zero() {
        return if first.is_nan() { f64::NAN } else { 0.0 };
    }
    (second / first).as_f64()
}

/// `sup_t ‖p̄‖_{L∞} / (1 + ‖p̄₀‖_{L∞} + ‖p̄₀‖_{L²}^{μ₄(2−a)} + M_f^{μ₄})` must not grow
/// between the halves of the run.
pub fn check_uniform_boundedness<T: Real>(
    log: &[Observation<T>],
    functionals: &FluxFunctionals<T>,
    exps: &Exponents<T>,
) -> Result<TargetRecord> {
    need(log, 4, "uniform boundedness")?;
    if functionals.m_f.len() != log.len() {
        return domain("flux functionals must be sampled at the observation epochs");
    }
    let anchor = "uniform L-infinity bound for the shifted pressure";
    let p0 = &log[0];
    let base = T::one() + p0.linf_pbar + p0.l2_pbar.powf(exps.mu4 * (T::lit(2.0) - exps.a));
    let ratios: Vec<T> = log
        .iter()
        .zip(&functionals.m_f)
        .map(|(o, &m)| o.linf_pbar / (base + m.powf(exps.mu4)))
        .collect();
    let times: Vec<T> = log.iter().map(|o| o.t).collect();
    let growth = half_growth(&times, &ratios);
    let rec = TargetRecord::at_most("uniform_boundedness", anchor, CheckMode::Boundedness, growth, PLATEAU_GROWTH);
    Ok(rec.with_note(format!("regime {:?}", functionals.regime)))
}

/// `‖p̄(t_end)‖_{L∞} ≤ 2% of max_t ‖p̄‖_{L∞}` for decaying fluxes.
pub fn check_decay<T: Real>(log: &[Observation<T>], functionals: &FluxFunctionals<T>) -> Result<TargetRecord> {
    need(log, 2, "decay")?;
    let target = "decay";
    let anchor = "vanishing flux forces the shifted pressure to vanish";
    if functionals.regime != FluxRegime::Decaying {
        return Ok(TargetRecord::not_applicable(target, anchor, CheckMode::Decay, "flux does not decay"));
    }
    let psi0 = log[0].psi_sup;
    let psi_end = log[log.len() - 1].psi_sup;
    if psi0 > T::zero() && psi_end >= T::lit(1e-3) * psi0 {
        return Ok(TargetRecord::not_applicable(
            target,
            anchor,
            CheckMode::Decay,
            "horizon too short: flux has not dropped below 1e-3 of its initial size",
        ));
    }
    let peak = log.iter().map(|o| o.linf_pbar).fold(T::zero(), T::max);
    let stat = if peak == T::zero() { T::zero() } else { log[log.len() - 1].linf_pbar / peak };
    Ok(TargetRecord::at_most(target, anchor, CheckMode::Decay, stat.as_f64(), DECAY_FRACTION))
}

/// `‖p̄_t(t_end)‖_{L∞(U′)} ≤ 2%` of its maximum over the first quarter of the run.
pub fn check_pt_decay<T: Real>(log: &[Observation<T>], functionals: &FluxFunctionals<T>) -> Result<TargetRecord> {
    need(log, 5, "time-derivative decay")?;
    let target = "pbar_t_decay";
    let anchor = "interior time derivative vanishes when the flux derivative does";
    if functionals.regime == FluxRegime::Growing || !functionals.derivative_vanishes {
        return Ok(TargetRecord::not_applicable(
            target,
            anchor,
            CheckMode::Decay,
            "flux unbounded or its time derivative does not vanish",
        ));
    }
    let t0 = log[0].t;
    let early_end = t0 + (log[log.len() - 1].t - t0) * T::lit(TAIL_FRACTION);
    let early = log
        .iter()
        .filter(|o| o.t <= early_end && o.linf_pbar_t.is_finite())
        .map(|o| o.linf_pbar_t)
        .fold(T::zero(), T::max);
    let last = log[log.len() - 1].linf_pbar_t;
    let stat = if early == T::zero() { T::zero() } else { last / early };
    Ok(TargetRecord::at_most(target, anchor, CheckMode::Decay, stat.as_f64(), DECAY_FRACTION))
}

fn cumulative<T: Real>(times: &[T], values: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = T::zero();
    out.push(acc);
    for k in 1..times.len() {
        acc = acc + (times[k] - times[k - 1]) * (values[k] + values[k - 1]) * T::lit(0.5);
        out.push(acc);
    }
    out
}

/// Gradient plateau targets (one per configured `s`): the time integral of
/// `∫_{U′} K|∇p|^s` over `[0, T]` stops growing when `∫f < ∞`. Hessian plateau
/// targets (one per `δ`): the instantaneous `‖∇²p‖_{L^{2−δ}(U′)}` does not grow
/// when `f` and `ψ_t` are bounded.
pub fn check_gradient_and_hessian_boundedness<T: Real>(
    log: &[Observation<T>],
    functionals: &FluxFunctionals<T>,
    grid: &Grid<T>,
    grad_s: &[T],
    hess_delta: &[T],
) -> Result<Vec<TargetRecord>> {
    need(log, 4, "gradient boundedness")?;
    let times: Vec<T> = log.iter().map(|o| o.t).collect();
    let mut out = Vec::new();
    let grad_anchor = "interior gradient integrals bounded in time";
    for (k, s) in grad_s.iter().enumerate() {
        let name = format!("gradient_integral_s{s}");
        if !functionals.integrable {
            out.push(TargetRecord::not_applicable(
                &name,
                grad_anchor,
                CheckMode::Boundedness,
                "flux envelope f is not integrable in time",
            ));
            continue;
        }
        let series: Vec<T> = log.iter().map(|o| o.k_grad_s[k]).collect();
        let cum = cumulative(&times, &series);
        let last = cum[cum.len() - 1];
        let mid_t = times[0] + (times[times.len() - 1] - times[0]) * T::lit(0.5);
        let mid = cum
            .iter()
            .zip(&times)
            .filter(|(_, &t)| t <= mid_t)
            .map(|(&c, _)| c)
            .fold(T::zero(), T::max);
        let growth = if last == T::zero() { 1.0 } else { (last / mid).as_f64() };
        out.push(
            TargetRecord::at_most(&name, grad_anchor, CheckMode::Boundedness, growth, PLATEAU_GROWTH)
                .with_note("ratio of the time integral over [0,T] to that over [0,T/2]"),
        );
    }
    let hess_anchor = "interior Hessian norm bounded in time";
    let (lo, hi) = grid.interior_bounds()?;
    let span = (0..grid.dim()).map(|ax| hi[ax] - lo[ax]).min().unwrap_or(0);
    for (k, d) in hess_delta.iter().enumerate() {
        let name = format!("hessian_norm_delta{d}");
        if span < 8 {
            out.push(TargetRecord::not_applicable(
                &name,
                hess_anchor,
                CheckMode::Boundedness,
                format!("insufficient resolution: interior spans {span} cells, need 8"),
            ));
            continue;
        }
        if functionals.regime == FluxRegime::Growing || functionals.f_tilde.is_none() {
            out.push(TargetRecord::not_applicable(
                &name,
                hess_anchor,
                CheckMode::Boundedness,
                "needs bounded flux with a bounded time derivative",
            ));
            continue;
        }
        let series: Vec<T> = log.iter().map(|o| o.hess_norms[k]).collect();
        let growth = half_growth(&times, &series);
        out.push(TargetRecord::at_most(&name, hess_anchor, CheckMode::Boundedness, growth, PLATEAU_GROWTH));
    }
    Ok(out)
}

/// `∫K|∇p|² ≤ J_H ≤ 2∫K|∇p|²` at every epoch. The statistic is the largest
/// relative violation.
pub fn check_jh_sandwich<T: Real>(log: &[Observation<T>]) -> TargetRecord {
    let violation = log
        .iter()
        .map(|o| {
            let lo = (o.k_grad2 - o.jh).max(T::zero());
            let hi = (o.jh - T::lit(2.0) * o.k_grad2).max(T::zero());
            let scale = o.jh.abs().max(T::min_positive_value());
            (lo.max(hi) / scale).as_f64()
        })
        .fold(0.0, f64::max);
    TargetRecord::at_most(
        "jh_sandwich",
        "K(xi) xi^2 <= H(xi) <= 2 K(xi) xi^2 integrated",
        CheckMode::Boundedness,
        violation,
        1e-12,
    )
}

pub fn check_mass_balance<T: Real>(steps: &[StepRecord<T>]) -> TargetRecord {
    let worst = steps.iter().map(|s| s.mass_balance_residual.as_f64()).fold(0.0, f64::max);
    TargetRecord::at_most(
        "mass_balance",
        "mass balance identity",
        CheckMode::Boundedness,
        worst,
        MASS_BALANCE_TOL,
    )
}

pub fn check_energy_identity<T: Real>(steps: &[StepRecord<T>]) -> TargetRecord {
    let worst = steps
        .iter()
        .map(|s| s.energy.relative_residual().as_f64())
        .fold(0.0, f64::max);
    TargetRecord::at_most(
        "energy_identity",
        "L2 energy balance of the shifted pressure",
        CheckMode::Boundedness,
        worst,
        ENERGY_TOL,
    )
}

/// Relative slack allowed for round-off in per-step monotonicity checks.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Largest relative increase between consecutive entries; zero if nonincreasing.
pub fn max_relative_increase<T: Real>(series: impl IntoIterator<Item = T>) -> f64 {
    let mut worst = 0.0f64;
    let mut prev: Option<T> = None;
    for v in series {
        if let Some(p) = prev {
            if v > p {
                worst = worst.max(((v - p) / p.abs().max(T::min_positive_value())).as_f64());
            }
        }
        prev = Some(v);
    }
    worst
}

/// `‖p̄‖_{L²}` nonincreasing per step; applicable only without boundary flux.
pub fn check_dissipation<T: Real>(steps: &[StepRecord<T>], initial_l2: T, flux: &BoundaryFluxSpec<T>) -> TargetRecord {
    let target = "l2_dissipation";
    let anchor = "L2 norm of the shifted pressure nonincreasing without flux";
    if !flux.is_zero() {
        return TargetRecord::not_applicable(target, anchor, CheckMode::Decay, "boundary flux is not zero");
    }
    let series = std::iter::once(initial_l2).chain(steps.iter().map(|s| s.l2_pbar));
    TargetRecord::at_most(target, anchor, CheckMode::Decay, max_relative_increase(series), MONOTONE_SLACK)
}

/// All single-run targets in a fixed order.
pub fn standard_checks<T: Real>(
    log: &[Observation<T>],
    steps: &[StepRecord<T>],
    flux: &BoundaryFluxSpec<T>,
    grid: &Grid<T>,
    kernel: &ConductivityKernel<T>,
    grad_s: &[T],
    hess_delta: &[T],
) -> Result<Vec<TargetRecord>> {
    let a = kernel.exponents().a;
    let times: Vec<T> = log.iter().map(|o| o.t).collect();
    let functionals = flux_functionals(flux, grid, a, &times)?;
    let mut out = Vec::new();
    out.push(check_mass_balance(steps));
    out.push(check_energy_identity(steps));
    out.push(check_dissipation(steps, log[0].l2_pbar, flux));
    out.push(check_jh_sandwich(log));
    match Exponents::new(a, grid.dim()) {
        Ok(exps) => out.push(check_uniform_boundedness(log, &functionals, &exps)?),
        Err(e) => out.push(TargetRecord::not_applicable(
            "uniform_boundedness",
            "uniform L-infinity bound for the shifted pressure",
            CheckMode::Boundedness,
            e.to_string(),
        )),
    }
    out.push(check_decay(log, &functionals)?);
    out.push(check_pt_decay(log, &functionals)?);
    out.extend(check_gradient_and_hessian_boundedness(log, &functionals, grid, grad_s, hess_delta)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::flux::Shape;
    use crate::ForchheimerPolynomial;

    #[test]
    fn exponent_values() {
        let e = Exponents::<f64>::new(0.5, 2).unwrap();
        assert!((e.mu4 - 4.0 / (1.5 * 2.0)).abs() < 1e-15);
        // (2−a)* = 2·1.5/0.5 = 6
        assert!((e.mu5 - 4.0 * (5.0 / 6.0)).abs() < 1e-14);
        assert!((e.mu6 - 0.4).abs() < 1e-14);
        assert!((e.mu7 - 2.0 / (e.mu5 * 1.5)).abs() < 1e-15);
        assert!(e.mu5 > 2.0 && e.mu5 < 6.0);
        let one = Exponents::<f64>::new(0.5, 1).unwrap();
        assert_eq!(one.mu5, 4.0);
        assert_eq!(one.mu6, 0.5);
        assert!((one.reduced_order() - 1.0 / 3.0).abs() < 1e-15);
        assert!(Exponents::<f64>::new(0.8, 3).is_err());
        let three = Exponents::<f64>::new(0.5, 3).unwrap();
        // (2−a)* = 3·1.5/1.5 = 3
        assert!((three.mu5 - 4.0 * (2.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn jh_examples() {
        let darcy = ConductivityKernel::new(ForchheimerPolynomial::darcy(1.0).unwrap());
        let g = Grid::<f64>::new_1d(1.0, 32).unwrap();
        assert_eq!(compute_jh(&darcy, &ScalarField::constant(g, 2.0)), 0.0);
        let lin = ScalarField::from_fn(g, |x, _| x).unwrap();
        assert!((compute_jh(&darcy, &lin) - 1.0).abs() < 1e-12);
        let k = ConductivityKernel::new(ForchheimerPolynomial::two_term(1.0, 1.0).unwrap());
        let wavy = ScalarField::from_fn(g, |x, _| (7.0 * x).sin() * 3.0).unwrap();
        let jh = compute_jh(&k, &wavy);
        let kg2 = weighted_gradient_integral(&k, &wavy, 2.0, Region::Full).unwrap();
        assert!(kg2 <= jh && jh <= 2.0 * kg2);
    }

    #[test]
    fn functionals_examples() {
        let g = Grid::<f64>::new_1d(1.0, 8).unwrap();
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.5).collect();
        let c = BoundaryFluxSpec::uniform(Profile::Constant { value: 1.0 });
        let ff = flux_functionals(&c, &g, 0.5, &times).unwrap();
        assert!(ff.f.iter().all(|&v| (v - 2.0).abs() < 1e-15));
        assert!(ff.f_tilde.as_ref().unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(ff.a_hat, 2.0);
        let c3 = BoundaryFluxSpec::uniform(Profile::Constant { value: 3.0 });
        let ff3 = flux_functionals(&c3, &g, 0.25, &times).unwrap();
        // q = 1.75/0.75
        let expect = 9.0 + 3f64.powf(1.75 / 0.75);
        assert!((ff3.f[0] - expect).abs() < 1e-12 * expect);
        let e = BoundaryFluxSpec::uniform(Profile::DecayingExp {
            base: 0.0,
            amplitude: 1.0,
            rate: 1.0,
        });
        let fe = flux_functionals(&e, &g, 0.5, &times).unwrap();
        assert!(fe.a_hat < 1e-6);
        assert!(fe.beta_hat.unwrap() < 1e-6);
        assert!(fe.m_f.windows(2).all(|w| w[1] >= w[0]));
        assert!(fe.integrable);
        let step = BoundaryFluxSpec::single(
            Profile::Step {
                before: 1.0,
                after: 0.0,
                time: 1.0,
            },
            Shape::Uniform,
        );
        assert!(flux_functionals(&step, &g, 0.5, &times).unwrap().f_tilde.is_none());
    }

    #[test]
    fn beta_hat_matches_analytic_derivative() {
        let g = Grid::<f64>::new_1d(1.0, 8).unwrap();
        let flux = BoundaryFluxSpec::uniform(Profile::DecayingExp {
            base: 1.0,
            amplitude: 1.0,
            rate: 1.0,
        });
        let times = [0.0, 1.0, 2.0, 3.0];
        let ff = flux_functionals(&flux, &g, 0.5, &times).unwrap();
        // f = N² + N³, N = 1 + e^{−t}, f′ = (2N + 3N²)(−e^{−t}); tail = {3}
        let n = 1.0 + (-3.0f64).exp();
        let expect = (2.0 * n + 3.0 * n * n) * (-3.0f64).exp();
        assert!((ff.beta_hat.unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn monotone_helper() {
        assert_eq!(max_relative_increase([3.0, 2.0, 2.0, 1.0]), 0.0);
        assert!((max_relative_increase([1.0, 1.5, 1.0]) - 0.5).abs() < 1e-15);
        assert_eq!(half_growth(&[0.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 1.0, 0.5]), 0.5);
        assert_eq!(half_growth(&[0.0, 1.0, 2.0, 3.0], &[0.0, 0.0, 0.0, 0.0]), 0.0);
    }
}
