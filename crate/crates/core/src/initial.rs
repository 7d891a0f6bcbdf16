//! Initial pressure families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::grid::{Grid, ScalarField};
use crate::scalar::Real;

/// One term `amplitude · cos(kx π x / Lx) · cos(ky π y / Ly)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineMode<T> {
    pub kx: u32,
    #[serde(default)]
    pub ky: u32,
    pub amplitude: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData<T> {
    Constant { value: T },
    /// `offset + Σ modes`.
    Cosine { offset: T, modes: Vec<CosineMode<T>> },
    /// Random cosine series with wavenumbers up to `max_mode` per axis and
    /// coefficients `U(−1, 1) · amplitude / (1 + kx² + ky²)`.
    RandomSmooth { offset: T, amplitude: T, max_mode: u32 },
}

impl<T: Real> InitialData<T> {
    pub fn cosine(offset: T, kx: u32, ky: u32, amplitude: T) -> Self {
        InitialData::Cosine {
            offset,
            modes: vec![CosineMode { kx, ky, amplitude }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            InitialData::Constant { value } => value.is_finite(),
            InitialData::Cosine { offset, modes } => {
                offset.is_finite() && modes.iter().all(|m| m.amplitude.is_finite())
            }
            InitialData::RandomSmooth {
                offset,
                amplitude,
                max_mode,
            } => {
                if *max_mode == 0 || *max_mode > 64 {
                    return domain("random_smooth max_mode must lie in 1..=64");
                }
                offset.is_finite() && amplitude.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            domain("initial data parameters must be finite")
        }
    }

    /// Samples the family at cell centers. `seed` only matters for `RandomSmooth`.
    pub fn build(&self, grid: &Grid<T>, seed: u64) -> Result<ScalarField<T>> {
        self.validate()?;
        let modes = match self {
            InitialData::Constant { value } => return Ok(ScalarField::constant(*grid, *value)),
            InitialData::Cosine { modes, .. } => modes.clone(),
            InitialData::RandomSmooth {
                amplitude, max_mode, ..
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let ky_max = if grid.dim() == 2 { *max_mode } else { 0 };
                let mut out = Vec::new();
                for ky in 0..=ky_max {
                    for kx in 0..=*max_mode {
                        if kx == 0 && ky == 0 {
                            continue;
                        }
                        let u: f64 = rng.gen_range(-1.0..1.0);
                        let damp = 1.0 + f64::from(kx * kx + ky * ky);
                        out.push(CosineMode {
                            kx,
                            ky,
                            amplitude: *amplitude * T::lit(u / damp),
                        });
                    }
                }
                out
            }
        };
        let offset = match self {
            InitialData::Cosine { offset, .. } | InitialData::RandomSmooth { offset, .. } => *offset,
            InitialData::Constant { .. } => unreachable!(),
        };
        let ext = grid.extents();
        let lx = ext[0];
        let ly = if grid.dim() == 2 { ext[1] } else { T::one() };
        ScalarField::from_fn(*grid, |x, y| {
            modes.iter().fold(offset, |acc, m| {
                let cx = (T::lit(f64::from(m.kx)) * T::PI() * x / lx).cos();
                let cy = if m.ky == 0 {
                    T::one()
                } else {
                    (T::lit(f64::from(m.ky)) * T::PI() * y / ly).cos()
                };
                acc + m.amplitude * cx * cy
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_samples_cell_centers() {
        let g = Grid::<f64>::new_1d(1.0, 4).unwrap();
        let f = InitialData::cosine(1.0, 1, 0, 2.0).build(&g, 0).unwrap();
        let expect = 1.0 + 2.0 * (std::f64::consts::PI * 0.125).cos();
        assert!((f.values()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn random_smooth_is_seeded_and_mean_offset() {
        let g = Grid::<f64>::new_2d([1.0, 1.0], [16, 16]).unwrap();
        let spec = InitialData::RandomSmooth {
            offset: 0.5,
            amplitude: 1.0,
            max_mode: 3,
        };
        let a = spec.build(&g, 42).unwrap();
        let b = spec.build(&g, 42).unwrap();
        let c = spec.build(&g, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // cosine modes with k ≥ 1 have zero midpoint mean on a uniform grid
        assert!((a.mean() - 0.5).abs() < 1e-12);
        assert!(InitialData::RandomSmooth {
            offset: 0.0,
            amplitude: 1.0,
            max_mode: 0
        }
        .build(&g, 0)
        .is_err());
    }
}
