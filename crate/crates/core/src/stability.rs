//! Paired runs and perturbation sweeps measuring how solutions depend on the
//! boundary flux, the Forchheimer coefficients and the initial data.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constitutive::{ConductivityKernel, ForchheimerPolynomial};
use crate::error::{domain, Error, Result};
use crate::estimates::{max_relative_increase, CheckMode, Exponents, TargetRecord, MONOTONE_SLACK};
use crate::grid::flux::BoundaryFluxSpec;
use crate::grid::{Region, ScalarField};
use crate::scalar::Real;
use crate::solver::{schedule, step_time, weighted_l2, Solver, SolverConfig, SolverState};

pub const THREADS_ENV: &str = "FORCHFLOW_THREADS";

/// Everything needed to start one run.
#[derive(Debug, Clone)]
pub struct RunSpec<T> {
    pub poly: ForchheimerPolynomial<T>,
    pub flux: BoundaryFluxSpec<T>,
    pub initial: ScalarField<T>,
    pub config: SolverConfig<T>,
}

/// Horizon, epoch spacing and gradient exponents shared by both runs of a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig<T> {
    pub t_end: T,
    pub interval: T,
    /// `δ` of `‖∇P‖_{L^{2−δ}(U′)}`.
    pub deltas: Vec<T>,
}

impl<T: Real> PairConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > T::zero()) || !(self.interval > T::zero()) {
            return domain("pair horizon and interval must be positive");
        }
        if self.deltas.iter().any(|&d| !(d > T::zero() && d < T::one())) {
            return domain("gradient-difference exponents δ must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Shifted pressure after every step of one run.
struct Trajectory<T> {
    times: Vec<T>,
    fields: Vec<ScalarField<T>>,
    epoch_steps: Vec<usize>,
    mass_balance_residual: T,
}

fn trajectory<T: Real>(spec: &RunSpec<T>, pair: &PairConfig<T>) -> Result<Trajectory<T>> {
    let grid = *spec.initial.grid();
    let mut solver = Solver::new(grid, spec.poly.clone(), spec.flux.clone(), spec.config.clone())?;
    let dt = spec.config.dt;
    let (n_steps, every) = schedule(dt, pair.t_end, pair.interval)?;
    let mut state = SolverState::new(spec.initial.clone());
    let mut times = vec![state.time];
    let mut fields = vec![state.shifted()];
    let mut epoch_steps = vec![0];
    let mut mass = T::zero();
    for k in 1..=n_steps {
        solver.step_to(&mut state, step_time(k, dt, pair.t_end))?;
        mass = mass.max(state.mass_balance_residual());
        times.push(state.time);
        fields.push(state.shifted());
        if k % every == 0 || k == n_steps {
            epoch_steps.push(k);
        }
    }
    Ok(Trajectory {
        times,
        fields,
        epoch_steps,
        mass_balance_residual: mass,
    })
}

/// One term of the Hölder split
/// `∫|∇P|^{2−δ} ≤ (∫K|∇P|²)^{(2−δ)/2} (∫K^{−(2−δ)/δ})^{δ/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderSplit<T> {
    pub delta: T,
    /// `∫_{U′}|∇P|^{2−δ}`.
    pub lhs: T,
    pub rhs: T,
    /// `∫_{U′}(1 + |∇p₁| + |∇p₂|)^{a(2−δ)/δ}`, the growth factor replacing `K^{−1}` up to constants.
    pub growth_integral: T,
}

/// Interior gradient-difference quantities at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientDifference<T> {
    /// `∫_{U′} K(|∇p₁| ∨ |∇p₂|)|∇P|²`.
    pub weighted: T,
    /// `‖∇P‖_{L^{2−δ}(U′)}` per `δ`.
    pub norms: Vec<T>,
    pub holder: Vec<HolderSplit<T>>,
}

/// `kernel` should be built from `a⃗⁽¹⁾ ∨ a⃗⁽²⁾` when the coefficients differ.
pub fn gradient_difference_norms<T: Real>(
    kernel: &ConductivityKernel<T>,
    p1: &ScalarField<T>,
    p2: &ScalarField<T>,
    deltas: &[T],
) -> Result<GradientDifference<T>> {
    if p1.grid() != p2.grid() {
        return domain("gradient differences need fields on the same grid");
    }
    let cells = p1.grid().region_cells(Region::Interior)?;
    let vol = p1.grid().cell_volume();
    let g1 = p1.cell_gradients();
    let g2 = p2.cell_gradients();
    let a = kernel.exponents().a;
    let two = T::lit(2.0);
    let mut weighted = T::zero();
    let mut per_cell = Vec::with_capacity(cells.len());
    for &c in &cells {
        let x1 = g1[c][0].hypot(g1[c][1]);
        let x2 = g2[c][0].hypot(g2[c][1]);
        let d = (g1[c][0] - g2[c][0]).hypot(g1[c][1] - g2[c][1]);
        let k = kernel.k(x1.max(x2));
        weighted = weighted + k * d * d;
        per_cell.push((d, k, x1 + x2));
    }
    weighted = weighted * vol;
    let mut norms = Vec::with_capacity(deltas.len());
    let mut holder = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let s = two - delta;
        let mut lhs = T::zero();
        let mut inv_k = T::zero();
        let mut growth = T::zero();
        for &(d, k, sum) in &per_cell {
            lhs = lhs + d.powf(s);
            inv_k = inv_k + k.powf(-s / delta);
            growth = growth + (T::one() + sum).powf(a * s / delta);
        }
        lhs = lhs * vol;
        norms.push(lhs.powf(s.recip()));
        holder.push(HolderSplit {
            delta,
            lhs,
            rhs: weighted.powf(s / two) * (inv_k * vol).powf(delta / two),
            growth_integral: growth * vol,
        });
    }
    Ok(GradientDifference {
        weighted,
        norms,
        holder,
    })
}

/// Epoch-wise difference norms of a pair, plus `‖P̄‖_{L²}` after every step.
#[derive(Debug, Clone)]
pub struct PairLog<T> {
    pub times: Vec<T>,
    pub deltas: Vec<T>,
    pub l2: Vec<T>,
    pub linf_interior: Vec<T>,
    pub gradient: Vec<GradientDifference<T>>,
    /// `P̄` at each epoch.
    pub pbar: Vec<ScalarField<T>>,
    pub step_times: Vec<T>,
    pub step_l2: Vec<T>,
    /// Largest mass balance residual over both runs and all steps.
    pub mass_balance_residual: T,
}

impl<T: Real> PairLog<T> {
    pub fn sup_l2(&self) -> T {
        self.l2.iter().copied().fold(T::zero(), T::max)
    }

    pub fn sup_linf_interior(&self) -> T {
        self.linf_interior.iter().copied().fold(T::zero(), T::max)
    }

    /// `sup_t ‖∇P‖_{L^{2−δ}(U′)}` per `δ`.
    pub fn sup_gradient(&self) -> Vec<T> {
        (0..self.deltas.len())
            .map(|k| self.gradient.iter().map(|g| g.norms[k]).fold(T::zero(), T::max))
            .collect()
    }

    /// Largest relative per-step increase of `‖P̄‖_{L²}`.
    pub fn contraction_violation(&self) -> f64 {
        max_relative_increase(self.step_l2.iter().copied())
    }

    /// Largest relative Hölder violation over epochs and `δ`.
    pub fn holder_violation(&self) -> f64 {
        self.gradient
            .iter()
            .flat_map(|g| g.holder.iter())
            .map(|h| {
                if h.lhs <= h.rhs {
                    0.0
                } else {
                    ((h.lhs - h.rhs) / h.rhs.max(T::min_positive_value())).as_f64()
                }
            })
            .fold(0.0, f64::max)
    }
}

fn combine<T: Real>(
    t1: &Trajectory<T>,
    t2: &Trajectory<T>,
    kernel: &ConductivityKernel<T>,
    deltas: &[T],
) -> Result<PairLog<T>> {
    if t1.times != t2.times || t1.epoch_steps != t2.epoch_steps {
        return domain("paired runs have mismatched epochs");
    }
    let vol = t1.fields[0].grid().cell_volume();
    let mut step_l2 = Vec::with_capacity(t1.fields.len());
    for (f1, f2) in t1.fields.iter().zip(&t2.fields) {
        step_l2.push(weighted_l2(f1.sub(f2)?.values(), vol));
    }
    let mut log = PairLog {
        times: Vec::new(),
        deltas: deltas.to_vec(),
        l2: Vec::new(),
        linf_interior: Vec::new(),
        gradient: Vec::new(),
        pbar: Vec::new(),
        step_times: t1.times.clone(),
        step_l2,
        mass_balance_residual: t1.mass_balance_residual.max(t2.mass_balance_residual),
    };
    for &k in &t1.epoch_steps {
        let (f1, f2) = (&t1.fields[k], &t2.fields[k]);
        let diff = f1.sub(f2)?;
        log.times.push(t1.times[k]);
        log.l2.push(log.step_l2[k]);
        log.linf_interior.push(diff.norm_ls(T::infinity(), Region::Interior)?);
        log.gradient.push(gradient_difference_norms(kernel, f1, f2, deltas)?);
        log.pbar.push(diff);
    }
    Ok(log)
}

fn check_pair<T: Real>(s1: &RunSpec<T>, s2: &RunSpec<T>) -> Result<ConductivityKernel<T>> {
    if s1.initial.grid() != s2.initial.grid() {
        return domain("paired runs must share the grid");
    }
    if s1.config.dt != s2.config.dt {
        return domain("paired runs must share dt");
    }
    Ok(ConductivityKernel::new(s1.poly.join(&s2.poly)?))
}

/// Runs both scenarios on the same schedule and logs `P̄ = p̄₁ − p̄₂`.
pub fn run_pair<T: Real>(s1: &RunSpec<T>, s2: &RunSpec<T>, pair: &PairConfig<T>) -> Result<PairLog<T>> {
    pair.validate()?;
    let kernel = check_pair(s1, s2)?;
    let (t1, t2) = rayon::join(|| trajectory(s1, pair), || trajectory(s2, pair));
    combine(&t1?, &t2?, &kernel, &pair.deltas)
}

/// Max over epochs of `|P̄_pair − P̄_direct|`, where `P̄_direct` solves the Darcy
/// problem with data `p₁(0) − p₂(0)` and flux `ψ₁ − ψ₂`.
pub fn darcy_superposition_discrepancy<T: Real>(
    s1: &RunSpec<T>,
    s2: &RunSpec<T>,
    pair: &PairConfig<T>,
) -> Result<T> {
    if !s1.poly.is_darcy() || s1.poly != s2.poly {
        return domain("superposition needs the same Darcy law in both runs");
    }
    let log = run_pair(s1, s2, pair)?;
    let direct = RunSpec {
        poly: s1.poly.clone(),
        flux: s1.flux.plus(&s2.flux.scaled(-T::one())),
        initial: s1.initial.sub(&s2.initial)?,
        config: s1.config.clone(),
    };
    let traj = trajectory(&direct, pair)?;
    let mut worst = T::zero();
    for (k, &step) in traj.epoch_steps.iter().enumerate() {
        for (a, b) in traj.fields[step].values().iter().zip(log.pbar[k].values()) {
            worst = worst.max((*a - *b).abs());
        }
    }
    Ok(worst)
}

/// Least-squares fit of `log y = exponent · log x + log prefactor`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r2: f64,
    /// The `x` values used.
    pub window: Vec<f64>,
}

pub const MIN_FIT_POINTS: usize = 4;

pub fn fit_order(x: &[f64], y: &[f64]) -> Result<OrderFit> {
    if x.len() != y.len() {
        return domain("fit needs equally many x and y values");
    }
    if x.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientSamples(format!(
            "order fit needs at least {MIN_FIT_POINTS} ladder points, got {}",
            x.len()
        )));
    }
    if y.iter().all(|&v| v == 0.0) {
        return domain("all differences are zero");
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return domain("order fit needs positive finite values");
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return domain("order fit needs distinct x values");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(OrderFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r2,
        window: x.to_vec(),
    })
}

/// `[first, first·ratio, …]` with `points` entries.
pub fn geometric_ladder<T: Real>(first: T, ratio: T, points: usize) -> Vec<T> {
    (0..points).map(|k| first * ratio.powi(k as i32)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    FluxAmplitude,
    CoefficientVector,
    InitialData,
}

/// What is added, scaled by `ε`, to the base scenario to get the second run.
#[derive(Debug, Clone)]
pub enum Perturbation<T> {
    FluxAmplitude(BoundaryFluxSpec<T>),
    CoefficientVector(Vec<T>),
    InitialData(ScalarField<T>),
}

impl<T: Real> Perturbation<T> {
    pub fn axis(&self) -> SweepAxis {
        match self {
            Perturbation::FluxAmplitude(_) => SweepAxis::FluxAmplitude,
            Perturbation::CoefficientVector(_) => SweepAxis::CoefficientVector,
            Perturbation::InitialData(_) => SweepAxis::InitialData,
        }
    }

    /// The perturbed scenario and the size of the perturbation used on the fit axis.
    pub fn apply(&self, base: &RunSpec<T>, eps: T) -> Result<(RunSpec<T>, T)> {
        let mut out = base.clone();
        let magnitude = match self {
            Perturbation::FluxAmplitude(dir) => {
                out.flux = base.flux.plus(&dir.scaled(eps));
                eps
            }
            Perturbation::CoefficientVector(dir) => {
                let c = base.poly.coefficients();
                if dir.len() != c.len() {
                    return domain("coefficient direction must match the number of terms");
                }
                let next: Vec<T> = c.iter().zip(dir).map(|(a, d)| *a + eps * *d).collect();
                if next.iter().any(|&v| !(v > T::zero())) {
                    return domain("coefficient perturbation leaves the admissible set (a coefficient is not positive)");
                }
                out.poly = base.poly.with_coefficients(next)?;
                base.poly.coefficient_distance(&out.poly)?
            }
            Perturbation::InitialData(dir) => {
                out.initial = base.initial.sub(&dir.scale(-eps))?;
                eps
            }
        };
        Ok((out, magnitude))
    }
}

/// Order acceptance thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrderThresholds {
    pub flux_l2: f64,
    /// Subtracted from `γ₁/(γ₁+1)` for the interior sup-norm order.
    pub flux_linf_slack: f64,
    pub coefficient_l2: f64,
    pub coefficient_gradient: f64,
    /// Allowed `|q − 1|` for Darcy flux sweeps.
    pub darcy_linearity: f64,
}

impl Default for OrderThresholds {
    fn default() -> Self {
        Self {
            flux_l2: 0.9,
            flux_linf_slack: 0.1,
            coefficient_l2: 0.45,
            coefficient_gradient: 0.2,
            darcy_linearity: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec<T> {
    pub base: RunSpec<T>,
    pub perturbation: Perturbation<T>,
    pub epsilons: Vec<T>,
    pub pair: PairConfig<T>,
    pub thresholds: OrderThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub magnitude: f64,
    pub sup_l2: f64,
    pub sup_linf_interior: f64,
    /// `sup_t ‖∇P‖_{L^{2−δ}(U′)}` per `δ`.
    pub sup_gradient: Vec<f64>,
    pub contraction_violation: f64,
    pub holder_violation: f64,
    pub mass_balance_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOutcome {
    pub quantity: String,
    pub fit: Option<OrderFit>,
    pub skipped: Option<String>,
}

impl FitOutcome {
    fn new(quantity: String, x: &[f64], y: &[f64]) -> Self {
        match fit_order(x, y) {
            Ok(fit) => Self {
                quantity,
                fit: Some(fit),
                skipped: None,
            },
            Err(e) => Self {
                quantity,
                fit: None,
                skipped: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub scenario_hash: String,
    pub sdc: bool,
    pub axis: SweepAxis,
    pub epsilons: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub fits: Vec<FitOutcome>,
    pub targets: Vec<TargetRecord>,
}

impl SweepReport {
    pub fn all_applicable_pass(&self) -> bool {
        self.targets.iter().all(|t| !t.failed())
    }

    pub fn fit(&self, quantity: &str) -> Option<&FitOutcome> {
        self.fits.iter().find(|f| f.quantity == quantity)
    }
}

/// Pool sized by `FORCHFLOW_THREADS` when set, else rayon's default.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Domain(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Domain(format!("thread pool: {e}")))
}

/// Output of [`run_sweep`]: the report plus the per-point pair logs.
pub struct SweepOutput<T> {
    pub report: SweepReport,
    pub logs: Vec<PairLog<T>>,
}

fn gradient_name<T: Real>(d: T) -> String {
    format!("grad_L{}", (T::lit(2.0) - d).as_f64())
}

/// Runs the ladder concurrently; the base run is shared by all points.
pub fn run_sweep<T: Real>(spec: &SweepSpec<T>) -> Result<SweepOutput<T>> {
    spec.pair.validate()?;
    if spec.epsilons.iter().any(|&e| !(e > T::zero())) {
        return domain("ladder magnitudes must be positive");
    }
    let perturbed: Vec<(RunSpec<T>, T)> = spec
        .epsilons
        .iter()
        .map(|&e| spec.perturbation.apply(&spec.base, e))
        .collect::<Result<_>>()?;
    let pool = thread_pool()?;
    let (base, runs) = pool.install(|| {
        rayon::join(
            || trajectory(&spec.base, &spec.pair),
            || {
                perturbed
                    .par_iter()
                    .map(|(s, _)| {
                        let kernel = check_pair(&spec.base, s)?;
                        Ok((trajectory(s, &spec.pair)?, kernel))
                    })
                    .collect::<Result<Vec<_>>>()
            },
        )
    });
    let base = base?;
    let logs: Vec<PairLog<T>> = runs?
        .iter()
        .map(|(t, k)| combine(&base, t, k, &spec.pair.deltas))
        .collect::<Result<_>>()?;

    let points: Vec<SweepPoint> = logs
        .iter()
        .zip(&perturbed)
        .zip(&spec.epsilons)
        .map(|((log, (_, mag)), &eps)| SweepPoint {
            epsilon: eps.as_f64(),
            magnitude: mag.as_f64(),
            sup_l2: log.sup_l2().as_f64(),
            sup_linf_interior: log.sup_linf_interior().as_f64(),
            sup_gradient: log.sup_gradient().iter().map(|v| v.as_f64()).collect(),
            contraction_violation: log.contraction_violation(),
            holder_violation: log.holder_violation(),
            mass_balance_residual: log.mass_balance_residual.as_f64(),
        })
        .collect();
    let x: Vec<f64> = points.iter().map(|p| p.magnitude).collect();
    let mut fits = vec![
        FitOutcome::new("L2".into(), &x, &points.iter().map(|p| p.sup_l2).collect::<Vec<_>>()),
        FitOutcome::new(
            "Linf_interior".into(),
            &x,
            &points.iter().map(|p| p.sup_linf_interior).collect::<Vec<_>>(),
        ),
    ];
    for (k, &d) in spec.pair.deltas.iter().enumerate() {
        let y: Vec<f64> = points.iter().map(|p| p.sup_gradient[k]).collect();
        fits.push(FitOutcome::new(gradient_name(d), &x, &y));
    }
    let grid = spec.base.initial.grid();
    let a = spec.base.poly.degeneracy().a;
    let sdc = crate::constitutive::degree_condition(&spec.base.poly, grid.dim())?.satisfies_sdc;
    let targets = sweep_targets(spec, &points, &fits, a, grid.dim());
    Ok(SweepOutput {
        report: SweepReport {
            scenario_hash: String::new(),
            sdc,
            axis: spec.perturbation.axis(),
            epsilons: spec.epsilons.iter().map(|e| e.as_f64()).collect(),
            points,
            fits,
            targets,
        },
        logs,
    })
}

fn order_target(name: &str, anchor: &str, fit: &FitOutcome, threshold: f64) -> TargetRecord {
    match &fit.fit {
        Some(f) => TargetRecord::at_least(name, anchor, CheckMode::ScalingOrder, f.exponent, threshold)
            .with_note(format!("r2 = {:.6}", f.r2)),
        None => TargetRecord::not_applicable(
            name,
            anchor,
            CheckMode::ScalingOrder,
            format!("fit skipped: {}", fit.skipped.as_deref().unwrap_or("")),
        ),
    }
}

fn sweep_targets<T: Real>(
    spec: &SweepSpec<T>,
    points: &[SweepPoint],
    fits: &[FitOutcome],
    a: T,
    n: usize,
) -> Vec<TargetRecord> {
    let th = &spec.thresholds;
    let find = |q: &str| fits.iter().find(|f| f.quantity == q).expect("fit present");
    let mut out = Vec::new();
    match &spec.perturbation {
        Perturbation::FluxAmplitude(_) => {
            let anchor = "Lipschitz dependence of the shifted pressure on the boundary flux";
            out.push(order_target("flux_l2_order", anchor, find("L2"), th.flux_l2));
            let linf_anchor = "interior sup-norm dependence on the flux with reduced exponent";
            match Exponents::new(a, n) {
                Ok(e) => {
                    let thr = e.reduced_order().as_f64() - th.flux_linf_slack;
                    out.push(order_target("flux_linf_order", linf_anchor, find("Linf_interior"), thr));
                }
                Err(err) => out.push(TargetRecord::not_applicable(
                    "flux_linf_order",
                    linf_anchor,
                    CheckMode::ScalingOrder,
                    err.to_string(),
                )),
            }
            if spec.base.poly.is_darcy() {
                let fit = find("L2");
                let name = "darcy_linearity";
                let anchor = "exact superposition for the linear law";
                out.push(match &fit.fit {
                    Some(f) => TargetRecord::at_most(
                        name,
                        anchor,
                        CheckMode::ScalingOrder,
                        (f.exponent - 1.0).abs(),
                        th.darcy_linearity,
                    ),
                    None => TargetRecord::not_applicable(name, anchor, CheckMode::ScalingOrder, "fit skipped"),
                });
            }
        }
        Perturbation::CoefficientVector(_) => {
            let anchor = "dependence of the shifted pressure on the Forchheimer coefficients";
            out.push(order_target("coefficient_l2_order", anchor, find("L2"), th.coefficient_l2));
            for &d in &spec.pair.deltas {
                let q = gradient_name(d);
                out.push(order_target(
                    &format!("coefficient_{q}_order"),
                    "interior gradient dependence on the Forchheimer coefficients",
                    find(&q),
                    th.coefficient_gradient,
                ));
            }
        }
        Perturbation::InitialData(_) => {}
    }
    let contraction_applies = matches!(spec.perturbation, Perturbation::InitialData(_));
    let name = "pair_l2_contraction";
    let anchor = "L2 contraction of differences with equal flux and coefficients";
    out.push(if contraction_applies {
        let worst = points.iter().map(|p| p.contraction_violation).fold(0.0, f64::max);
        TargetRecord::at_most(name, anchor, CheckMode::Decay, worst, MONOTONE_SLACK)
    } else {
        TargetRecord::not_applicable(name, anchor, CheckMode::Decay, "runs differ in flux or coefficients")
    });
    let worst_holder = points.iter().map(|p| p.holder_violation).fold(0.0, f64::max);
    if !spec.pair.deltas.is_empty() {
        out.push(TargetRecord::at_most(
            "holder_split",
            "weighted gradient integral controls the L^(2-delta) gradient norm",
            CheckMode::Boundedness,
            worst_holder,
            1e-12,
        ));
    }
    out
}

/// Per-epoch difference norms, one block of rows per ladder point.
pub fn write_sweep_csv<T: Real, W: Write>(out: &mut W, epsilons: &[T], logs: &[PairLog<T>]) -> Result<()> {
    let deltas = logs.first().map(|l| l.deltas.clone()).unwrap_or_default();
    let mut header = vec!["epsilon".to_string(), "t".into(), "L2_Pbar".into(), "Linf_Pbar_interior".into()];
    header.extend(deltas.iter().map(|&d| gradient_name(d)));
    header.push("weighted_K_gradP2".into());
    writeln!(out, "{}", header.join(","))?;
    let num = |v: T| format!("{:.16e}", v.as_f64());
    for (eps, log) in epsilons.iter().zip(logs) {
        for k in 0..log.times.len() {
            let mut row = vec![num(*eps), num(log.times[k]), num(log.l2[k]), num(log.linf_interior[k])];
            row.extend(log.gradient[k].norms.iter().map(|&v| num(v)));
            row.push(num(log.gradient[k].weighted));
            writeln!(out, "{}", row.join(","))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::flux::Profile;
    use crate::grid::Grid;
    use crate::initial::InitialData;

    fn spec_1d(poly: ForchheimerPolynomial<f64>, flux: BoundaryFluxSpec<f64>, amp: f64) -> RunSpec<f64> {
        let g = Grid::<f64>::new_1d(1.0, 32).unwrap();
        RunSpec {
            poly,
            flux,
            initial: InitialData::cosine(0.0, 1, 0, amp).build(&g, 0).unwrap(),
            config: SolverConfig::with_dt(0.01),
        }
    }

    fn pair() -> PairConfig<f64> {
        PairConfig {
            t_end: 0.2,
            interval: 0.05,
            deltas: vec![0.25],
        }
    }

    #[test]
    fn identical_runs_give_zero() {
        let s = spec_1d(ForchheimerPolynomial::two_term(1.0, 1.0).unwrap(), BoundaryFluxSpec::zero(), 1.0);
        let log = run_pair(&s, &s, &pair()).unwrap();
        assert!(log.l2.iter().chain(&log.linf_interior).all(|&v| v == 0.0));
        assert!(log.gradient.iter().all(|g| g.weighted == 0.0 && g.norms[0] == 0.0));
        assert_eq!(log.times.len(), 5);
    }

    #[test]
    fn swapping_negates() {
        let p = ForchheimerPolynomial::two_term(1.0, 1.0).unwrap();
        let s1 = spec_1d(p.clone(), BoundaryFluxSpec::zero(), 1.0);
        let s2 = spec_1d(p, BoundaryFluxSpec::zero(), 0.5);
        let ab = run_pair(&s1, &s2, &pair()).unwrap();
        let ba = run_pair(&s2, &s1, &pair()).unwrap();
        assert_eq!(ab.l2, ba.l2);
        for (x, y) in ab.pbar.iter().zip(&ba.pbar) {
            assert!(x.values().iter().zip(y.values()).all(|(u, v)| *u == -*v));
        }
        assert!(ab.contraction_violation() <= MONOTONE_SLACK);
        assert!(ab.holder_violation() == 0.0);
    }

    #[test]
    fn mismatched_schedules_rejected() {
        let p = ForchheimerPolynomial::darcy(1.0).unwrap();
        let s1 = spec_1d(p.clone(), BoundaryFluxSpec::zero(), 1.0);
        let mut s2 = s1.clone();
        s2.config.dt = 0.02;
        assert!(run_pair(&s1, &s2, &pair()).is_err());
        let mut s3 = s1.clone();
        s3.initial = ScalarField::constant(Grid::new_1d(1.0, 16).unwrap(), 0.0);
        assert!(run_pair(&s1, &s3, &pair()).is_err());
    }

    #[test]
    fn darcy_weighted_integral_is_scaled_l2() {
        let g = Grid::<f64>::new_1d(1.0, 32).unwrap();
        let k = ConductivityKernel::new(ForchheimerPolynomial::darcy(2.0).unwrap());
        let p1 = ScalarField::from_fn(g, |x, _| (3.0 * x).sin()).unwrap();
        let p2 = ScalarField::from_fn(g, |x, _| x * x).unwrap();
        let gd = gradient_difference_norms(&k, &p1, &p2, &[0.5]).unwrap();
        let diff = p1.sub(&p2).unwrap();
        let plain = diff.gradient_norm_ls(2.0, Region::Interior).unwrap().powi(2);
        assert!((gd.weighted - plain / 2.0).abs() < 1e-13 * plain);
        assert!(gd.holder[0].lhs <= gd.holder[0].rhs * (1.0 + 1e-12));
    }

    #[test]
    fn darcy_superposition() {
        let p = ForchheimerPolynomial::darcy(1.0).unwrap();
        let s1 = spec_1d(p.clone(), BoundaryFluxSpec::uniform(Profile::Constant { value: 0.3 }), 1.0);
        let s2 = spec_1d(p, BoundaryFluxSpec::uniform(Profile::Constant { value: 0.1 }), 0.5);
        let d = darcy_superposition_discrepancy(&s1, &s2, &pair()).unwrap();
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn fit_recovers_power_law() {
        let x = geometric_ladder::<f64>(1.0, 0.5, 6);
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(1.7)).collect();
        let f = fit_order(&x, &y).unwrap();
        assert!((f.exponent - 1.7).abs() < 1e-12);
        assert!((f.prefactor - 3.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(matches!(fit_order(&x[..3], &y[..3]), Err(Error::InsufficientSamples(_))));
        assert!(fit_order(&x, &[0.0; 6]).unwrap_err().to_string().contains("all differences are zero"));
    }

    #[test]
    fn coefficient_perturbation_domain() {
        let base = spec_1d(ForchheimerPolynomial::two_term(1.0, 1.0).unwrap(), BoundaryFluxSpec::zero(), 1.0);
        let pert = Perturbation::CoefficientVector(vec![0.0, -1.0]);
        let (s, mag) = pert.apply(&base, 0.5).unwrap();
        assert_eq!(s.poly.coefficients(), &[1.0, 0.5]);
        assert_eq!(mag, 0.5);
        assert!(pert.apply(&base, 1.0).is_err());
    }

    #[test]
    fn darcy_flux_sweep_is_linear() {
        let base = spec_1d(
            ForchheimerPolynomial::darcy(1.0).unwrap(),
            BoundaryFluxSpec::uniform(Profile::Constant { value: 0.5 }),
            1.0,
        );
        let spec = SweepSpec {
            base,
            perturbation: Perturbation::FluxAmplitude(BoundaryFluxSpec::single(
                Profile::Constant { value: 1.0 },
                crate::grid::flux::Shape::Sides {
                    west: 1.0,
                    east: 0.0,
                    south: 0.0,
                    north: 0.0,
                },
            )),
            epsilons: geometric_ladder(1.0, 0.5, 6),
            pair: pair(),
            thresholds: OrderThresholds::default(),
        };
        let out = run_sweep(&spec).unwrap();
        let q = out.report.fit("L2").unwrap().fit.as_ref().unwrap().exponent;
        assert!((q - 1.0).abs() < 1e-6, "{q}");
        assert!(out.report.all_applicable_pass(), "{:?}", out.report.targets);
        let mut csv = Vec::new();
        write_sweep_csv(&mut csv, &spec.epsilons, &out.logs).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("epsilon,t,L2_Pbar,Linf_Pbar_interior,grad_L1.75,weighted_K_gradP2\n"));
        assert_eq!(text.lines().count(), 1 + 6 * 5);
    }
}
