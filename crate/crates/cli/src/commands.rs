//! The four subcommands. Each returns whether every applicable check passed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use forchflow::estimates::standard_checks;
use forchflow::grid::snapshot::write_text;
use forchflow::sequences::{
    builtin_limsup_cases, iterate_recurrence, limsup_integral, multiseq_threshold, oriseq_bound, oriseq_threshold,
    IterationMode,
};
use forchflow::solver::write_csv;
use forchflow::stability::{geometric_ladder, run_sweep, write_sweep_csv};
use forchflow::{
    EstimateReport, GeometricRecurrence, LogValue, PairConfig, RecurrenceTerm, RunOutput, RunSpec, Solver, StepRecord,
    SweepSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::scenario::{LemmaSpec, Loaded};

/// Cutoff below which an iterate counts as having reached zero.
const CONVERGED: f64 = 1e-20;
/// Allowed relative log distance between an iterate and the closed-form bound.
const CLOSED_FORM_TOL: f64 = 1e-12;
/// Allowed relative excess of the observed limsup over the exact limit.
const LIMSUP_TOL: f64 = 5e-3;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn write_json<S: Serialize>(dir: &Path, name: &str, value: &S) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn run(loaded: &Loaded) -> Result<(Solver<f64>, RunOutput<f64>)> {
    let s = &loaded.scenario;
    let mut solver = Solver::new(loaded.grid, loaded.poly.clone(), s.flux.clone(), s.solver)?;
    let out = solver.run(loaded.initial.clone(), s.t_end, &s.observation)?;
    Ok((solver, out))
}

fn write_steps(dir: &Path, steps: &[StepRecord<f64>]) -> Result<()> {
    let mut w = create(dir, "steps.csv")?;
    writeln!(w, "t,dt,newton_iters,substeps,halvings,residual,mass_balance_residual,L2_pbar,energy_residual")?;
    for s in steps {
        writeln!(
            w,
            "{:.16e},{:.16e},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.t,
            s.dt,
            s.newton_iters,
            s.substeps,
            s.halvings,
            s.residual,
            s.mass_balance_residual,
            s.l2_pbar,
            s.energy.relative_residual()
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunSummary {
    scenario_hash: String,
    sdc: bool,
    t_final: f64,
    steps: usize,
    observations: usize,
    max_newton_iters: usize,
    total_halvings: u64,
    max_mass_balance_residual: f64,
    max_energy_residual: f64,
}

fn simulate_into(loaded: &Loaded, hash: &str, dir: &Path) -> Result<(Solver<f64>, RunOutput<f64>)> {
    let (solver, out) = run(loaded)?;
    let obs = &loaded.scenario.observation;
    let mut w = create(dir, "timeseries.csv")?;
    write_csv(&mut w, obs, &out.observations)?;
    w.flush()?;
    write_steps(dir, &out.steps)?;
    let mut w = create(dir, "final_state.txt")?;
    write_text(&mut w, &out.state.pressure, out.state.time)?;
    w.flush()?;
    let summary = RunSummary {
        scenario_hash: hash.to_string(),
        sdc: loaded.sdc,
        t_final: out.state.time,
        steps: out.steps.len(),
        observations: out.observations.len(),
        max_newton_iters: out.steps.iter().map(|s| s.newton_iters).max().unwrap_or(0),
        total_halvings: out.steps.iter().map(|s| u64::from(s.halvings)).sum(),
        max_mass_balance_residual: out.steps.iter().map(|s| s.mass_balance_residual).fold(0.0, f64::max),
        max_energy_residual: out.steps.iter().map(|s| s.energy.relative_residual()).fold(0.0, f64::max),
    };
    write_json(dir, "summary.json", &summary)?;
    Ok((solver, out))
}

pub fn simulate(loaded: &Loaded, hash: &str, dir: &Path) -> Result<bool> {
    simulate_into(loaded, hash, dir)?;
    Ok(true)
}

pub fn verify(loaded: &Loaded, hash: &str, dir: &Path) -> Result<bool> {
    let (solver, out) = simulate_into(loaded, hash, dir)?;
    let obs = &loaded.scenario.observation;
    let targets = standard_checks(
        &out.observations,
        &out.steps,
        solver.flux(),
        &loaded.grid,
        solver.kernel(),
        &obs.grad_s,
        &obs.hess_delta,
    )?;
    let report = EstimateReport {
        scenario_hash: hash.to_string(),
        sdc: loaded.sdc,
        targets,
    };
    write_json(dir, "report.json", &report)?;
    Ok(report.all_applicable_pass())
}

pub fn sweep(loaded: &Loaded, hash: &str, dir: &Path) -> Result<bool> {
    let s = &loaded.scenario;
    let section = s.sweep.as_ref().ok_or_else(|| anyhow!("sweep: scenario has no sweep section"))?;
    let perturbation = s.perturbation(&loaded.grid)?.expect("sweep section present");
    let spec = SweepSpec {
        base: RunSpec {
            poly: loaded.poly.clone(),
            flux: s.flux.clone(),
            initial: loaded.initial.clone(),
            config: s.solver,
        },
        perturbation,
        epsilons: geometric_ladder(section.ladder.first, section.ladder.ratio, section.ladder.points),
        pair: PairConfig {
            t_end: s.t_end,
            interval: s.observation.interval,
            deltas: section.deltas.clone(),
        },
        thresholds: section.thresholds.clone(),
    };
    let mut out = run_sweep(&spec)?;
    out.report.scenario_hash = hash.to_string();
    let mut w = create(dir, "sweep.csv")?;
    write_sweep_csv(&mut w, &spec.epsilons, &out.logs)?;
    w.flush()?;
    write_json(dir, "sweep_report.json", &out.report)?;
    Ok(out.report.all_applicable_pass())
}

#[derive(Debug, Serialize)]
struct Verdict {
    lemma: String,
    instance: serde_json::Value,
    /// Leading `ln Y_i` (or `y(t)` for limsup cases); `null` stands for `ln 0`.
    observed: Vec<f64>,
    statistic: f64,
    threshold: f64,
    pass: bool,
    note: String,
}

#[derive(Serialize)]
struct LemmaReport {
    scenario_hash: String,
    verdicts: Vec<Verdict>,
}

fn truncated(seq: &[LogValue<f64>], n: usize) -> Vec<f64> {
    seq.iter().take(n).map(|y| y.ln()).collect()
}

fn terms_json(terms: &[RecurrenceTerm<f64>]) -> serde_json::Value {
    serde_json::to_value(terms).expect("plain numbers serialize")
}

/// `ln Y_i ≤ ln Y₀ − i ln B/μ` up to relative rounding.
fn envelope_violations(seq: &[LogValue<f64>], b: f64, mu: f64) -> usize {
    let y0 = seq[0].ln();
    seq.iter()
        .enumerate()
        .filter(|(i, y)| {
            let env = y0 - *i as f64 * b.ln() / mu;
            y.ln() > env + CLOSED_FORM_TOL * env.abs().max(1.0)
        })
        .count()
}

fn single_verdict(t: RecurrenceTerm<f64>, spec: &LemmaSpec, rng: &mut ChaCha8Rng) -> Result<Verdict> {
    let th = oriseq_threshold(t.a, t.b, t.mu)?;
    let y0 = LogValue(th.ln() + spec.start_fraction.ln());
    let rec = GeometricRecurrence::from_log(vec![t], y0)?;
    let seq = iterate_recurrence(&rec, spec.steps, IterationMode::Equality, rng)?;
    let mut worst: f64 = 0.0;
    for (i, y) in seq.iter().enumerate() {
        let bound = oriseq_bound(t.a, t.b, t.mu, y0, i as u32)?;
        if !(y.is_overflow() && bound.is_overflow()) {
            worst = worst.max(y.log_distance(bound));
        }
    }
    let violations = envelope_violations(&seq, t.b, t.mu);
    let last = seq[spec.steps].value();
    Ok(Verdict {
        lemma: "oriseq".into(),
        instance: json!({"term": t, "ln_y0": y0.ln(), "ln_threshold": th.ln(), "steps": spec.steps}),
        observed: truncated(&seq, spec.truncate),
        statistic: worst,
        threshold: CLOSED_FORM_TOL,
        pass: worst <= CLOSED_FORM_TOL && violations == 0 && last < CONVERGED,
        note: format!("closed-form bound vs equality iterate; {violations} envelope violations; Y_n = {last:.3e}"),
    })
}

fn multi_verdict(
    lemma: &str,
    terms: Vec<RecurrenceTerm<f64>>,
    fraction: f64,
    spec: &LemmaSpec,
    mode: IterationMode,
    rng: &mut ChaCha8Rng,
) -> Result<Verdict> {
    let probe = GeometricRecurrence::new(terms.clone(), 0.0)?;
    let th = multiseq_threshold(&probe)?;
    let y0 = LogValue(th.closed_form.ln() + fraction.ln());
    let rec = GeometricRecurrence::from_log(terms, y0)?;
    let th = multiseq_threshold(&rec)?;
    let seq = iterate_recurrence(&rec, spec.steps, mode, rng)?;
    let last = seq[spec.steps].value();
    let ordered = th.closed_form.ln() <= th.root.ln() + CLOSED_FORM_TOL * th.root.ln().abs().max(1.0);
    Ok(Verdict {
        lemma: lemma.into(),
        instance: json!({
            "terms": terms_json(&rec.terms),
            "ln_y0": y0.ln(),
            "ln_closed_form": th.closed_form.ln(),
            "ln_root": th.root.ln(),
            "predicate": th.predicate,
            "mode": mode,
            "steps": spec.steps,
        }),
        observed: truncated(&seq, spec.truncate),
        statistic: last,
        threshold: CONVERGED,
        pass: th.predicate && ordered && last < CONVERGED,
        note: format!(
            "summed condition {}; closed form {} root",
            if th.predicate { "holds" } else { "fails" },
            if ordered { "≤" } else { ">" }
        ),
    })
}

fn random_terms(rng: &mut ChaCha8Rng) -> Vec<RecurrenceTerm<f64>> {
    let m = rng.gen_range(1..=4);
    (0..m)
        .map(|_| RecurrenceTerm {
            a: 10f64.powf(rng.gen_range(-1.0..1.0)),
            b: rng.gen_range(1.1..10.0),
            mu: rng.gen_range(0.1..3.0),
        })
        .collect()
}

pub fn lemma_check(spec: &LemmaSpec, hash: &str, dir: &Path) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut verdicts = Vec::new();
    for &t in &spec.single {
        verdicts.push(single_verdict(t.into(), spec, &mut rng)?);
    }
    for terms in &spec.multi {
        let terms = terms.iter().map(|&t| t.into()).collect();
        verdicts.push(multi_verdict("multiseq", terms, spec.start_fraction, spec, IterationMode::Equality, &mut rng)?);
    }
    for _ in 0..spec.random_instances {
        let terms = random_terms(&mut rng);
        let fraction = rng.gen_range(1e-3..1.0);
        verdicts.push(multi_verdict(
            "multiseq_random",
            terms,
            fraction,
            spec,
            IterationMode::InequalitySampler,
            &mut rng,
        )?);
    }
    for case in builtin_limsup_cases() {
        let out = limsup_integral(&case.h, &case.f, &case.g, 0.0, spec.limsup.t_end, spec.limsup.dt)?;
        let scale = case.limit.abs().max(1.0);
        let excess = (out.observed_limsup - case.limit) / scale;
        verdicts.push(Verdict {
            lemma: format!("limsup_{}", case.name),
            instance: json!({
                "limit": case.limit,
                "t_end": spec.limsup.t_end,
                "dt": spec.limsup.dt,
                "integral_g": out.integral_g,
                "h_ratio_tail": out.h_ratio_tail,
                "predicted_bound": out.predicted_bound,
            }),
            observed: out.y.iter().take(spec.truncate).copied().collect(),
            statistic: excess,
            threshold: LIMSUP_TOL,
            pass: out.hypothesis_ok && excess <= LIMSUP_TOL,
            note: format!(
                "observed tail limsup {:.6e}; hypotheses {}",
                out.observed_limsup,
                if out.hypothesis_ok { "met" } else { "not met on this horizon" }
            ),
        });
    }
    let pass = verdicts.iter().all(|v| v.pass);
    write_json(
        dir,
        "lemma_report.json",
        &LemmaReport {
            scenario_hash: hash.to_string(),
            verdicts,
        },
    )?;
    Ok(pass)
}
