//! Scenario files: loading, validation, defaults and the normalized dump.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use forchflow::stability::OrderThresholds;
use forchflow::{
    degree_condition, BoundaryFluxSpec, ForchheimerPolynomial, Grid, InitialData, ObservationConfig, Perturbation,
    RecurrenceTerm, ScalarField, SolverConfig,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Named physics laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    Darcy { a0: f64 },
    TwoTerm { alpha: f64, beta: f64 },
    ThreeTerm { alpha: f64, beta: f64, gamma: f64 },
    PowerLaw { alpha: f64, gamma_m: f64, m: f64 },
}

/// Either `[[exponent, coefficient], ...]` or a preset object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolynomialSpec {
    Pairs(Vec<(f64, f64)>),
    Preset(Preset),
}

impl PolynomialSpec {
    pub fn build(&self) -> forchflow::Result<ForchheimerPolynomial<f64>> {
        type P = ForchheimerPolynomial<f64>;
        match *self {
            PolynomialSpec::Pairs(ref pairs) => P::new(pairs),
            PolynomialSpec::Preset(Preset::Darcy { a0 }) => P::darcy(a0),
            PolynomialSpec::Preset(Preset::TwoTerm { alpha, beta }) => P::two_term(alpha, beta),
            PolynomialSpec::Preset(Preset::ThreeTerm { alpha, beta, gamma }) => P::three_term(alpha, beta, gamma),
            PolynomialSpec::Preset(Preset::PowerLaw { alpha, gamma_m, m }) => P::power_law(alpha, gamma_m, m),
        }
    }
}

fn default_margin() -> f64 {
    forchflow::grid::DEFAULT_INTERIOR_MARGIN
}

/// `extents` and `cells` have one entry per axis; the dimension is their length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub extents: Vec<f64>,
    pub cells: Vec<usize>,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

impl GridSpec {
    pub fn build(&self) -> forchflow::Result<Grid<f64>> {
        Grid::new(self.extents.len(), &self.extents, &self.cells)?.with_margin(self.margin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationSpec {
    /// The perturbed run uses `flux + ε · direction`.
    FluxAmplitude { direction: BoundaryFluxSpec<f64> },
    /// The perturbed run uses coefficients `a⃗ + ε · direction`.
    CoefficientVector { direction: Vec<f64> },
    /// The perturbed run starts from `p₀ + ε · direction`, sampled with `seed + 1`.
    InitialData { direction: InitialData<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ladder {
    pub first: f64,
    pub ratio: f64,
    pub points: usize,
}

impl Default for Ladder {
    fn default() -> Self {
        Self {
            first: 1.0,
            ratio: 0.5,
            points: 6,
        }
    }
}

fn default_deltas() -> Vec<f64> {
    vec![0.25]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub ladder: Ladder,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub thresholds: OrderThresholds,
}

fn default_initial() -> InitialData<f64> {
    InitialData::Constant { value: 0.0 }
}

fn default_t_end() -> f64 {
    1.0
}

/// Input of `simulate`, `verify` and `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub polynomial: PolynomialSpec,
    pub grid: GridSpec,
    pub flux: BoundaryFluxSpec<f64>,
    #[serde(default = "default_initial")]
    pub initial: InitialData<f64>,
    #[serde(default)]
    pub solver: SolverConfig<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub observation: ObservationConfig<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

/// A scenario with its parts built and checked.
pub struct Loaded {
    pub scenario: Scenario,
    pub poly: ForchheimerPolynomial<f64>,
    pub grid: Grid<f64>,
    pub initial: ScalarField<f64>,
    pub sdc: bool,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| anyhow!("parse error: {e}"))
    }

    pub fn validate(self) -> Result<Loaded> {
        let poly = self.polynomial.build().context("polynomial")?;
        let grid = self.grid.build().context("grid")?;
        self.flux.validate().context("flux")?;
        let initial = self.initial.build(&grid, self.seed).context("initial")?;
        self.solver.validate().context("solver")?;
        self.observation.validate().context("observation")?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(anyhow!("t_end: must be positive and finite"));
        }
        if let Some(s) = &self.sweep {
            let l = &s.ladder;
            if !(l.first > 0.0 && l.ratio > 0.0 && l.ratio < 1.0) || l.points == 0 {
                return Err(anyhow!("sweep.ladder: need first > 0, 0 < ratio < 1 and points ≥ 1"));
            }
            if let PerturbationSpec::CoefficientVector { direction } = &s.perturbation {
                if direction.len() != poly.order() + 1 {
                    return Err(anyhow!(
                        "sweep.perturbation.direction: expected {} entries, one per coefficient",
                        poly.order() + 1
                    ));
                }
            }
            if let PerturbationSpec::FluxAmplitude { direction } = &s.perturbation {
                direction.validate().context("sweep.perturbation.direction")?;
            }
        }
        let sdc = degree_condition(&poly, grid.dim()).context("polynomial")?.satisfies_sdc;
        Ok(Loaded {
            scenario: self,
            poly,
            grid,
            initial,
            sdc,
        })
    }

    pub fn perturbation(&self, grid: &Grid<f64>) -> Result<Option<Perturbation<f64>>> {
        let Some(s) = &self.sweep else { return Ok(None) };
        Ok(Some(match &s.perturbation {
            PerturbationSpec::FluxAmplitude { direction } => Perturbation::FluxAmplitude(direction.clone()),
            PerturbationSpec::CoefficientVector { direction } => Perturbation::CoefficientVector(direction.clone()),
            PerturbationSpec::InitialData { direction } => {
                Perturbation::InitialData(direction.build(grid, self.seed.wrapping_add(1)).context("sweep")?)
            }
        }))
    }
}

fn default_single() -> Vec<TermSpec> {
    vec![
        TermSpec { a: 1.0, b: 2.0, mu: 1.0 },
        TermSpec { a: 4.0, b: 8.0, mu: 0.5 },
    ]
}

fn default_multi() -> Vec<Vec<TermSpec>> {
    vec![
        vec![TermSpec { a: 1.0, b: 2.0, mu: 1.0 }, TermSpec { a: 0.5, b: 3.0, mu: 2.0 }],
        vec![
            TermSpec { a: 2.0, b: 1.5, mu: 0.5 },
            TermSpec { a: 1.0, b: 4.0, mu: 1.0 },
            TermSpec { a: 0.1, b: 2.0, mu: 3.0 },
        ],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub a: f64,
    pub b: f64,
    pub mu: f64,
}

impl From<TermSpec> for RecurrenceTerm<f64> {
    fn from(t: TermSpec) -> Self {
        RecurrenceTerm { a: t.a, b: t.b, mu: t.mu }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimsupSettings {
    pub t_end: f64,
    pub dt: f64,
}

impl Default for LimsupSettings {
    fn default() -> Self {
        Self { t_end: 50.0, dt: 0.01 }
    }
}

/// Input of `lemma-check`; every field has a default, so `{}` is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaSpec {
    pub seed: u64,
    /// Single-term recurrences, started at `start_fraction` times their threshold.
    pub single: Vec<TermSpec>,
    /// Multi-term recurrences, started at `start_fraction` times the closed-form threshold.
    pub multi: Vec<Vec<TermSpec>>,
    pub start_fraction: f64,
    pub steps: usize,
    /// Seeded random multi-term instances iterated with the inequality sampler.
    pub random_instances: usize,
    /// Number of leading sequence entries kept in the report.
    pub truncate: usize,
    pub limsup: LimsupSettings,
}

impl Default for LemmaSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            single: default_single(),
            multi: default_multi(),
            start_fraction: 0.5,
            steps: 200,
            random_instances: 100,
            truncate: 12,
            limsup: LimsupSettings::default(),
        }
    }
}

impl LemmaSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| anyhow!("parse error: {e}"))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start_fraction > 0.0 && self.start_fraction <= 1.0) {
            return Err(anyhow!("start_fraction: must lie in (0, 1]"));
        }
        if self.steps == 0 || self.truncate == 0 {
            return Err(anyhow!("steps and truncate must be at least 1"));
        }
        let l = &self.limsup;
        if !(l.dt > 0.0 && l.t_end > l.dt && l.t_end.is_finite()) {
            return Err(anyhow!("limsup: need 0 < dt < t_end"));
        }
        for (i, t) in self.single.iter().enumerate() {
            forchflow::sequences::oriseq_threshold(t.a, t.b, t.mu).with_context(|| format!("single[{i}]"))?;
        }
        for (i, terms) in self.multi.iter().enumerate() {
            let terms = terms.iter().map(|&t| t.into()).collect();
            forchflow::GeometricRecurrence::new(terms, 0.0).with_context(|| format!("multi[{i}]"))?;
        }
        Ok(())
    }
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Pretty JSON with a trailing newline; the hash is taken over these bytes.
pub fn normalized<S: Serialize>(value: &S) -> Result<(String, String)> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let hash = format!("{:x}", Sha256::digest(text.as_bytes()));
    Ok((text, hash))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "polynomial": {"preset": "two_term", "alpha": 1.0, "beta": 1.0},
        "grid": {"extents": [1.0], "cells": [16]},
        "flux": [{"profile": {"kind": "constant", "value": 0.5}, "shape": {"kind": "uniform"}}]
    }"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.initial, InitialData::Constant { value: 0.0 });
        assert_eq!(s.solver, SolverConfig::default());
        assert_eq!(s.observation, ObservationConfig::default());
        assert_eq!(s.t_end, 1.0);
        assert_eq!(s.grid.margin, 0.125);
        assert!(s.sweep.is_none());
        let loaded = s.validate().unwrap();
        assert!(loaded.sdc);
        assert_eq!(loaded.grid.dim(), 1);
    }

    #[test]
    fn zero_a0_is_rejected_by_name() {
        let text = MINIMAL.replace(r#"{"preset": "two_term", "alpha": 1.0, "beta": 1.0}"#, "[[0.0, 0.0], [1.0, 1.0]]");
        let err = Scenario::from_json(&text).unwrap().validate().err().unwrap();
        let msg = format!("{err:#}");
        assert!(msg.contains("polynomial") && msg.contains("a₀ must be positive"), "{msg}");
    }

    #[test]
    fn normalized_dump_round_trips() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        let (text, hash) = normalized(&s).unwrap();
        let again = Scenario::from_json(&text).unwrap();
        assert_eq!(again, s);
        assert_eq!(normalized(&again).unwrap().1, hash);
    }

    #[test]
    fn unknown_keys_and_bad_syntax() {
        let err = Scenario::from_json(&MINIMAL.replace("\"flux\"", "\"flux\": [], \"fluxx\"")).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
        let err = Scenario::from_json("{\n  \"grid\": ,\n}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn lemma_spec_defaults() {
        let spec = LemmaSpec::from_json("{}").unwrap();
        assert_eq!(spec, LemmaSpec::default());
        spec.validate().unwrap();
        let bad = LemmaSpec::from_json(r#"{"single": [{"a": 1.0, "b": 0.5, "mu": 1.0}]}"#).unwrap();
        assert!(format!("{:#}", bad.validate().unwrap_err()).contains("single[0]"));
    }
}
