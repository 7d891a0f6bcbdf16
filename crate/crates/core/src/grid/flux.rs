//! Boundary flux data `ψ(x, t)`: sums of time profiles times boundary shapes.
//!
//! `ψ` is the outward normal flux, `−K(|∇p|)∇p·ν = ψ`, so positive values drain
//! mass from the domain.

use serde::{Deserialize, Serialize};

use super::{BoundaryFace, Grid, Side};
use crate::error::{domain, Result};
use crate::scalar::Real;

/// Time profile of one flux term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile<T> {
    Constant { value: T },
    /// `base + amplitude · e^{−rate t}`.
    DecayingExp { base: T, amplitude: T, rate: T },
    /// `coefficient · (1 + t)^exponent`.
    PowerGrowth { coefficient: T, exponent: T },
    /// `base + amplitude · sin(omega t)`.
    Sinusoidal { base: T, amplitude: T, omega: T },
    /// `before` until `time`, `after` from then on; not differentiable.
    Step { before: T, after: T, time: T },
}

impl<T: Real> Profile<T> {
    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[T]| xs.iter().all(|x| x.is_finite());
        let ok = match *self {
            Profile::Constant { value } => finite(&[value]),
            Profile::DecayingExp { base, amplitude, rate } => {
                if !(rate > T::zero()) {
                    return domain("decaying_exp rate must be positive");
                }
                finite(&[base, amplitude, rate])
            }
            Profile::PowerGrowth { coefficient, exponent } => finite(&[coefficient, exponent]),
            Profile::Sinusoidal { base, amplitude, omega } => finite(&[base, amplitude, omega]),
            Profile::Step { before, after, time } => {
                if !(time >= T::zero()) {
                    return domain("step time must be nonnegative");
                }
                finite(&[before, after, time])
            }
        };
        if ok {
            Ok(())
        } else {
            domain("flux profile parameters must be finite")
        }
    }

    pub fn value(&self, t: T) -> T {
        match *self {
            Profile::Constant { value } => value,
            Profile::DecayingExp { base, amplitude, rate } => base + amplitude * (-rate * t).exp(),
            Profile::PowerGrowth { coefficient, exponent } => coefficient * (T::one() + t).powf(exponent),
            Profile::Sinusoidal { base, amplitude, omega } => base + amplitude * (omega * t).sin(),
            Profile::Step { before, after, time } => {
                if t < time {
                    before
                } else {
                    after
                }
            }
        }
    }

    /// Analytic time derivative; `None` for profiles that are not differentiable.
    pub fn derivative(&self, t: T) -> Option<T> {
        match *self {
            Profile::Constant { .. } => Some(T::zero()),
            Profile::DecayingExp { amplitude, rate, .. } => Some(-rate * amplitude * (-rate * t).exp()),
            Profile::PowerGrowth { coefficient, exponent } => {
                Some(coefficient * exponent * (T::one() + t).powf(exponent - T::one()))
            }
            Profile::Sinusoidal { amplitude, omega, .. } => Some(amplitude * omega * (omega * t).cos()),
            Profile::Step { before, after, .. } => (before == after).then(T::zero),
        }
    }

    /// `lim_{t→∞}` of the profile when it exists and is finite.
    pub fn limit(&self) -> Option<T> {
        match *self {
            Profile::Constant { value } => Some(value),
            Profile::DecayingExp { base, .. } => Some(base),
            Profile::PowerGrowth { coefficient, exponent } => {
                if coefficient == T::zero() || exponent < T::zero() {
                    Some(T::zero())
                } else if exponent == T::zero() {
                    Some(coefficient)
                } else {
                    None
                }
            }
            Profile::Sinusoidal { base, amplitude, omega } => {
                (amplitude == T::zero() || omega == T::zero()).then_some(base)
            }
            Profile::Step { after, .. } => Some(after),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Profile::Sinusoidal { .. }) || self.limit().is_some()
    }

    /// Whether `ψ_t(t) → 0`.
    pub fn derivative_vanishes(&self) -> bool {
        match *self {
            Profile::Constant { .. } | Profile::DecayingExp { .. } | Profile::Step { .. } => true,
            Profile::PowerGrowth { coefficient, exponent } => {
                coefficient == T::zero() || exponent == T::zero() || exponent < T::one()
            }
            Profile::Sinusoidal { amplitude, omega, .. } => amplitude == T::zero() || omega == T::zero(),
        }
    }
}

/// Spatial weight of one flux term along the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape<T> {
    Uniform,
    /// One weight per side; south and north are ignored in 1D.
    Sides { west: T, east: T, south: T, north: T },
    /// `cos(mode π x / Lx)` at the face midpoint.
    Cosine { mode: u32 },
}

impl<T: Real> Shape<T> {
    pub fn weight(&self, face: &BoundaryFace<T>, grid: &Grid<T>) -> T {
        match *self {
            Shape::Uniform => T::one(),
            Shape::Sides { west, east, south, north } => match face.side {
                Side::West => west,
                Side::East => east,
                Side::South => south,
                Side::North => north,
            },
            Shape::Cosine { mode } => {
                (T::from_usize_lossy(mode as usize) * T::PI() * face.center[0] / grid.extents[0]).cos()
            }
        }
    }

    /// `sup_Γ |w|` over the continuous boundary.
    pub fn sup_abs(&self, dim: usize) -> T {
        match *self {
            Shape::Uniform | Shape::Cosine { .. } => T::one(),
            Shape::Sides { west, east, south, north } => {
                let m = west.abs().max(east.abs());
                if dim == 2 {
                    m.max(south.abs()).max(north.abs())
                } else {
                    m
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxTerm<T> {
    pub profile: Profile<T>,
    pub shape: Shape<T>,
}

/// Long-time behaviour of a flux, read off the profile families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxRegime {
    /// `‖ψ(t)‖ → 0`.
    Decaying,
    /// `limsup f < ∞`.
    Bounded,
    /// `f` unbounded.
    Growing,
}

/// `ψ(x, t) = Σ_k profile_k(t) · shape_k(x)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundaryFluxSpec<T> {
    pub terms: Vec<FluxTerm<T>>,
}

impl<T: Real> BoundaryFluxSpec<T> {
    /// `ψ ≡ 0`.
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn single(profile: Profile<T>, shape: Shape<T>) -> Self {
        Self {
            terms: vec![FluxTerm { profile, shape }],
        }
    }

    pub fn uniform(profile: Profile<T>) -> Self {
        Self::single(profile, Shape::Uniform)
    }

    pub fn validate(&self) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.profile.validate())
    }

    /// The flux with every profile multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        let scale = |p: Profile<T>| match p {
            Profile::Constant { value } => Profile::Constant { value: c * value },
            Profile::DecayingExp { base, amplitude, rate } => Profile::DecayingExp {
                base: c * base,
                amplitude: c * amplitude,
                rate,
            },
            Profile::PowerGrowth { coefficient, exponent } => Profile::PowerGrowth {
                coefficient: c * coefficient,
                exponent,
            },
            Profile::Sinusoidal { base, amplitude, omega } => Profile::Sinusoidal {
                base: c * base,
                amplitude: c * amplitude,
                omega,
            },
            Profile::Step { before, after, time } => Profile::Step {
                before: c * before,
                after: c * after,
                time,
            },
        };
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| FluxTerm {
                    profile: scale(t.profile),
                    shape: t.shape,
                })
                .collect(),
        }
    }

    /// Term list of `self` followed by that of `other`: `ψ = ψ_self + ψ_other`.
    pub fn plus(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn value(&self, face: &BoundaryFace<T>, grid: &Grid<T>, t: T) -> T {
        self.terms
            .iter()
            .map(|term| term.profile.value(t) * term.shape.weight(face, grid))
            .sum()
    }

    pub fn derivative(&self, face: &BoundaryFace<T>, grid: &Grid<T>, t: T) -> Option<T> {
        let mut total = T::zero();
        for term in &self.terms {
            total = total + term.profile.derivative(t)? * term.shape.weight(face, grid);
        }
        Some(total)
    }

    pub fn is_differentiable(&self) -> bool {
        self.terms.iter().all(|t| t.profile.derivative(T::zero()).is_some())
    }

    fn closed_form_sup(&self, dim: usize, eval: impl Fn(&Profile<T>) -> T) -> Option<T> {
        match self.terms.as_slice() {
            [] => Some(T::zero()),
            [only] => Some(eval(&only.profile).abs() * only.shape.sup_abs(dim)),
            terms if terms.iter().all(|t| t.shape == Shape::Uniform) => {
                Some(terms.iter().map(|t| eval(&t.profile)).sum::<T>().abs())
            }
            _ => None,
        }
    }

    /// `‖ψ(t)‖_{L∞(Γ)}`: closed form for one term or all-uniform terms, the
    /// boundary-face maximum otherwise.
    pub fn sup_norm(&self, grid: &Grid<T>, t: T) -> T {
        self.closed_form_sup(grid.dim(), |p| p.value(t)).unwrap_or_else(|| {
            grid.boundary_faces()
                .iter()
                .map(|f| self.value(f, grid, t).abs())
                .fold(T::zero(), T::max)
        })
    }

    /// `‖ψ_t(t)‖_{L∞(Γ)}`, or `None` when a profile is not differentiable.
    pub fn sup_norm_derivative(&self, grid: &Grid<T>, t: T) -> Option<T> {
        if !self.is_differentiable() {
            return None;
        }
        let closed = self.closed_form_sup(grid.dim(), |p| p.derivative(t).unwrap_or_else(T::zero));
        Some(closed.unwrap_or_else(|| {
            grid.boundary_faces()
                .iter()
                .filter_map(|f| self.derivative(f, grid, t))
                .map(T::abs)
                .fold(T::zero(), T::max)
        }))
    }

    pub fn regime(&self) -> FluxRegime {
        if self.terms.iter().all(|t| t.profile.limit() == Some(T::zero())) {
            FluxRegime::Decaying
        } else if self.terms.iter().all(|t| t.profile.is_bounded()) {
            FluxRegime::Bounded
        } else {
            FluxRegime::Growing
        }
    }

    /// Whether `‖ψ_t(t)‖ → 0`, from the profile families.
    pub fn derivative_vanishes(&self) -> bool {
        self.terms.iter().all(|t| t.profile.derivative_vanishes())
    }

    /// Per-face weights cached for a grid.
    pub fn bind(&self, grid: &Grid<T>) -> BoundFlux<T> {
        let faces = grid.boundary_faces();
        let weights = self
            .terms
            .iter()
            .map(|term| faces.iter().map(|f| term.shape.weight(f, grid)).collect())
            .collect();
        BoundFlux {
            profiles: self.terms.iter().map(|t| t.profile).collect(),
            faces,
            weights,
        }
    }
}

/// A flux with its shapes evaluated on the boundary faces of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundFlux<T> {
    profiles: Vec<Profile<T>>,
    faces: Vec<BoundaryFace<T>>,
    weights: Vec<Vec<T>>,
}

impl<T: Real> BoundFlux<T> {
    pub fn faces(&self) -> &[BoundaryFace<T>] {
        &self.faces
    }

    /// `ψ(face, t)` for every boundary face, written into `out`.
    pub fn values_into(&self, t: T, out: &mut Vec<T>) {
        out.clear();
        out.resize(self.faces.len(), T::zero());
        for (profile, w) in self.profiles.iter().zip(&self.weights) {
            let p = profile.value(t);
            if p == T::zero() {
                continue;
            }
            for (o, &wk) in out.iter_mut().zip(w) {
                *o = *o + p * wk;
            }
        }
    }

    pub fn values(&self, t: T) -> Vec<T> {
        let mut out = Vec::new();
        self.values_into(t, &mut out);
        out
    }

    /// `∫_Γ ψ(t)`.
    pub fn outflow(&self, t: T) -> T {
        self.values(t)
            .iter()
            .zip(&self.faces)
            .map(|(&v, f)| v * f.area)
            .sum()
    }
}
