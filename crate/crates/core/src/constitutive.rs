//! Forchheimer polynomials and the conductivity kernel they induce.
//!
//! A Forchheimer polynomial `g(s) = a_0 + a_1 s^{α_1} + … + a_N s^{α_N}`
//! relates the speed `s = |u|` to the pressure gradient through
//! `g(|u|) u = -∇p`. Solving `s g(s) = ξ` for the speed at gradient magnitude
//! `ξ` gives the conductivity `K(ξ) = 1 / g(s(ξ))`, so that `u = -K(|∇p|) ∇p`.
//!
//! Everything here is a pure function of its inputs.

use crate::error::{domain, Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::scalar::Real;

/// Relative tolerance of the `H` quadrature.
pub const H_QUADRATURE_TOL: f64 = 1e-9;

/// Gradients shorter than this use the `ξ = 0` Jacobian.
pub const JACOBIAN_ZERO_GRADIENT: f64 = 1e-12;

const ROOT_MAX_ITER: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Power<T> {
    Zero,
    One,
    Int(i32),
    Real(T),
}

impl<T: Real> Power<T> {
    fn new(alpha: T) -> Self {
        if alpha == T::zero() {
            Power::Zero
        } else if alpha == T::one() {
            Power::One
        } else if alpha == alpha.round() && alpha.abs() < T::lit(64.0) {
            Power::Int(alpha.to_i32().expect("small integer exponent"))
        } else {
            Power::Real(alpha)
        }
    }

    /// `s^α` with `0^α = 0` for `α > 0` and `0^0 = 1`.
    #[inline]
    fn apply(self, s: T) -> T {
        match self {
            Power::Zero => T::one(),
            Power::One => s,
            Power::Int(k) => s.powi(k),
            Power::Real(a) => {
                if s == T::zero() {
                    T::zero()
                } else {
                    s.powf(a)
                }
            }
        }
    }
}

/// A generalized polynomial with nonnegative coefficients, class FP(N, α⃗).
#[derive(Debug, Clone, PartialEq)]
pub struct ForchheimerPolynomial<T> {
    exponents: Vec<T>,
    coefficients: Vec<T>,
    powers: Vec<Power<T>>,
}

impl<T: Real> ForchheimerPolynomial<T> {
    /// Builds a polynomial from `(exponent, coefficient)` pairs, exponents ascending
    /// and the first one zero.
    pub fn new(pairs: &[(T, T)]) -> Result<Self> {
        let (exponents, coefficients): (Vec<T>, Vec<T>) = pairs.iter().copied().unzip();
        Self::from_parts(exponents, coefficients)
    }

    pub fn from_parts(exponents: Vec<T>, coefficients: Vec<T>) -> Result<Self> {
        if exponents.is_empty() {
            return domain("polynomial needs at least one term");
        }
        if exponents.len() != coefficients.len() {
            return domain("exponent and coefficient vectors differ in length");
        }
        if exponents.iter().chain(&coefficients).any(|v| !v.is_finite()) {
            return domain("exponents and coefficients must be finite");
        }
        if exponents[0] != T::zero() {
            return domain("first exponent α₀ must be 0");
        }
        if exponents.windows(2).any(|w| w[1] <= w[0]) {
            return domain("exponents must be strictly increasing");
        }
        if coefficients[0] <= T::zero() {
            return domain("a₀ must be positive");
        }
        let last = coefficients.len() - 1;
        if coefficients[last] <= T::zero() {
            return domain("a_N must be positive");
        }
        if coefficients.iter().any(|&c| c < T::zero()) {
            return domain("coefficients must be nonnegative");
        }
        let powers = exponents.iter().map(|&a| Power::new(a)).collect();
        Ok(Self {
            exponents,
            coefficients,
            powers,
        })
    }

    /// Darcy's law `g = a₀`.
    pub fn darcy(a0: T) -> Result<Self> {
        Self::new(&[(T::zero(), a0)])
    }

    /// Forchheimer two-term law `g = α + β s`.
    pub fn two_term(alpha: T, beta: T) -> Result<Self> {
        Self::new(&[(T::zero(), alpha), (T::one(), beta)])
    }

    /// Forchheimer three-term law `g = α + β s + γ s²`.
    pub fn three_term(alpha: T, beta: T, gamma: T) -> Result<Self> {
        Self::new(&[(T::zero(), alpha), (T::one(), beta), (T::lit(2.0), gamma)])
    }

    /// Forchheimer power law `g = α + γ_m s^{m-1}`, `m > 1`.
    pub fn power_law(alpha: T, gamma_m: T, m: T) -> Result<Self> {
        if m <= T::one() {
            return domain("power law exponent m must exceed 1");
        }
        Self::new(&[(T::zero(), alpha), (m - T::one(), gamma_m)])
    }

    pub fn exponents(&self) -> &[T] {
        &self.exponents
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    /// `N`: the index of the leading term.
    pub fn order(&self) -> usize {
        self.exponents.len() - 1
    }

    /// `deg(g) = α_N`.
    pub fn degree(&self) -> T {
        self.exponents[self.order()]
    }

    /// A single constant term; the degenerate case excluded from FP(N, α⃗) proper.
    pub fn is_darcy(&self) -> bool {
        self.order() == 0
    }

    pub fn degeneracy(&self) -> DegeneracyExponents<T> {
        let deg = self.degree();
        let a = deg / (T::one() + deg);
        let b = deg / (T::lit(2.0) + deg);
        let a0 = self.coefficients[0];
        let an = self.coefficients[self.order()];
        let chi = self
            .coefficients
            .iter()
            .copied()
            .fold(a0.recip().max(an.recip()), T::max);
        DegeneracyExponents { a, b, chi }
    }

    /// Same exponents, new coefficients.
    pub fn with_coefficients(&self, coefficients: Vec<T>) -> Result<Self> {
        Self::from_parts(self.exponents.clone(), coefficients)
    }

    fn check_same_exponents(&self, other: &Self) -> Result<()> {
        if self.exponents != other.exponents {
            return domain("polynomials must share the exponent vector");
        }
        Ok(())
    }

    /// `|a⃗ − a⃗′|` in the max norm.
    pub fn coefficient_distance(&self, other: &Self) -> Result<T> {
        self.check_same_exponents(other)?;
        Ok(self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(x, y)| (*x - *y).abs())
            .fold(T::zero(), T::max))
    }

    /// Componentwise maximum of coefficient vectors, `a⃗ ∨ a⃗′`.
    pub fn join(&self, other: &Self) -> Result<Self> {
        self.combine(other, T::max)
    }

    /// Componentwise minimum of coefficient vectors, `a⃗ ∧ a⃗′`.
    pub fn meet(&self, other: &Self) -> Result<Self> {
        self.combine(other, T::min)
    }

    fn combine(&self, other: &Self, op: fn(T, T) -> T) -> Result<Self> {
        self.check_same_exponents(other)?;
        let c = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(x, y)| op(*x, *y))
            .collect();
        self.with_coefficients(c)
    }

    /// `g(s)`.
    pub fn eval_g(&self, s: T) -> Result<T> {
        if !(s >= T::zero()) {
            return domain(format!("g evaluated at negative or NaN speed {s}"));
        }
        Ok(self.g_and_sgprime(s).0)
    }

    /// `(g(s), s·g′(s))`; the second entry stays finite at `s = 0` even when
    /// some `α_j < 1`.
    #[inline]
    pub(crate) fn g_and_sgprime(&self, s: T) -> (T, T) {
        let mut g = T::zero();
        let mut sgp = T::zero();
        for ((&alpha, &c), &pw) in self.exponents.iter().zip(&self.coefficients).zip(&self.powers) {
            let term = c * pw.apply(s);
            g = g + term;
            sgp = sgp + alpha * term;
        }
        (g, sgp)
    }

    /// `g′(0)`, which is `+∞` when a positive coefficient sits on an exponent in (0, 1).
    fn gprime_at_zero(&self) -> T {
        let mut total = T::zero();
        for (&alpha, &c) in self.exponents.iter().zip(&self.coefficients).skip(1) {
            if c == T::zero() {
                continue;
            }
            if alpha < T::one() {
                return T::infinity();
            }
            if alpha == T::one() {
                total = total + c;
            }
        }
        total
    }
}

/// Exponents derived from the degree and the coefficient bound `χ(a⃗)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneracyExponents<T> {
    /// `α_N / (1 + α_N)`; zero for Darcy.
    pub a: T,
    /// `a / (2 − a)`.
    pub b: T,
    /// `max{a₀, …, a_N, 1/a₀, 1/a_N}`.
    pub chi: T,
}

/// Result of evaluating the conductivity at one gradient magnitude.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEvaluation<T> {
    pub xi: T,
    /// Speed solving `s g(s) = ξ`.
    pub s: T,
    pub K: T,
    /// `dK/dξ`; may be `-∞` at `ξ = 0`.
    pub k_prime: T,
    /// `ξ dK/dξ`, always finite and within `[-aK, 0]`.
    pub xi_k_prime: T,
}

/// Dimension-dependent degree conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeCondition {
    pub satisfies_dc: bool,
    pub satisfies_sdc: bool,
}

/// `deg(g) ≤ 4/(n−2)` (DC) and `deg(g) < 4/(n−2)` (SDC); unconstrained for `n ≤ 2`.
pub fn degree_condition<T: Real>(poly: &ForchheimerPolynomial<T>, n: usize) -> Result<DegreeCondition> {
    if n == 0 {
        return domain("spatial dimension must be at least 1");
    }
    if n <= 2 {
        return Ok(DegreeCondition {
            satisfies_dc: true,
            satisfies_sdc: true,
        });
    }
    let lhs = poly.degree() * T::from_usize_lossy(n - 2);
    let four = T::lit(4.0);
    Ok(DegreeCondition {
        satisfies_dc: lhs <= four,
        satisfies_sdc: lhs < four,
    })
}

/// Evaluator for `s(ξ)`, `K(ξ)`, `K′(ξ)`, `H(ξ)` and the flux Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityKernel<T> {
    poly: ForchheimerPolynomial<T>,
    exps: DegeneracyExponents<T>,
    leading_root: T,
}

impl<T: Real> ConductivityKernel<T> {
    pub fn new(poly: ForchheimerPolynomial<T>) -> Self {
        let exps = poly.degeneracy();
        let leading_root = (T::one() + poly.degree()).recip();
        Self {
            poly,
            exps,
            leading_root,
        }
    }

    pub fn polynomial(&self) -> &ForchheimerPolynomial<T> {
        &self.poly
    }

    pub fn exponents(&self) -> DegeneracyExponents<T> {
        self.exps
    }

    /// `K(0) = 1/a₀`.
    pub fn k_at_zero(&self) -> T {
        self.poly.coefficients[0].recip()
    }

    /// The unique `s ≥ 0` with `s g(s) = ξ`.
    ///
    /// Safeguarded Newton on `φ(s) = s g(s) − ξ`. `φ` is increasing and convex,
    /// so starting from an upper bound Newton descends monotonically; bisection
    /// takes over whenever an iterate leaves the bracket.
    pub fn solve_s(&self, xi: T) -> Result<T> {
        if !(xi >= T::zero()) || !xi.is_finite() {
            return domain(format!("gradient magnitude must be finite and nonnegative, got {xi}"));
        }
        self.root(xi)
    }

    fn root(&self, xi: T) -> Result<T> {
        if xi == T::zero() {
            return Ok(T::zero());
        }
        let a0 = self.poly.coefficients[0];
        let an = self.poly.coefficients[self.poly.order()];
        // s g(s) ≥ a₀ s and s g(s) ≥ a_N s^{1+α_N}: both give upper bounds.
        let mut hi = (xi / a0).min((xi / an).powf(self.leading_root));
        if !(hi > T::zero()) || !hi.is_finite() {
            hi = (xi / a0).max(T::one());
        }
        let mut lo = T::zero();
        let mut s = hi;
        let tol = T::tight_tol();
        for _ in 0..ROOT_MAX_ITER {
            let (g, sgp) = self.poly.g_and_sgprime(s);
            let phi = s * g - xi;
            if phi == T::zero() {
                return Ok(s);
            }
            if phi > T::zero() {
                hi = s;
            } else {
                lo = s;
            }
            let slope = g + sgp;
            let mut next = s - phi / slope;
            if !(next > lo && next < hi) {
                next = (lo + hi) * T::lit(0.5);
            }
            if (next - s).abs() <= tol * next || hi - lo <= tol * hi {
                return Ok(next);
            }
            s = next;
        }
        Err(Error::RootNonConvergence {
            xi: xi.as_f64(),
            lo: lo.as_f64(),
            hi: hi.as_f64(),
            iterations: ROOT_MAX_ITER,
        })
    }

    /// Full evaluation at `ξ`.
    pub fn eval(&self, xi: T) -> Result<KernelEvaluation<T>> {
        let s = self.solve_s(xi)?;
        let (g, sgp) = self.poly.g_and_sgprime(s);
        let k = g.recip();
        let xi_k_prime = -sgp / (g * (g + sgp));
        let k_prime = if xi > T::zero() {
            xi_k_prime / xi
        } else {
            -self.poly.gprime_at_zero() / (g * g * g)
        };
        Ok(KernelEvaluation {
            xi,
            s,
            K: k,
            k_prime,
            xi_k_prime,
        })
    }

    /// `(K(ξ), ξK′(ξ))` for a known-valid `ξ ≥ 0`; the solver hot path.
    #[inline]
    pub fn k_and_xi_k_prime(&self, xi: T) -> (T, T) {
        let s = self.root(xi).unwrap_or_else(|e| panic!("conductivity root solve failed: {e}"));
        let (g, sgp) = self.poly.g_and_sgprime(s);
        (g.recip(), -sgp / (g * (g + sgp)))
    }

    /// `K(ξ)` for a known-valid `ξ ≥ 0`.
    #[inline]
    pub fn k(&self, xi: T) -> T {
        self.k_and_xi_k_prime(xi).0
    }

    /// `H(ξ) = ∫₀^{ξ²} K(√s) ds`, by adaptive Simpson in `u = √s`:
    /// `H(ξ) = ∫₀^ξ 2u K(u) du`.
    pub fn eval_h(&self, xi: T) -> Result<T> {
        if !(xi >= T::zero()) || !xi.is_finite() {
            return domain(format!("H evaluated at invalid ξ = {xi}"));
        }
        if xi == T::zero() {
            return Ok(T::zero());
        }
        let two = T::lit(2.0);
        Ok(adaptive_simpson(
            |u| two * u * self.k(u),
            T::zero(),
            xi,
            T::lit(H_QUADRATURE_TOL),
        ))
    }

    /// `H(ξ)` through the antiderivative in the speed variable:
    /// with `ξ = s g(s)`, `H = Σ_j 2 a_j (1+α_j)/(2+α_j) s^{2+α_j}`.
    pub fn eval_h_closed_form(&self, xi: T) -> Result<T> {
        let s = self.solve_s(xi)?;
        Ok(self.h_from_speed(s))
    }

    #[inline]
    pub(crate) fn h_unchecked(&self, xi: T) -> T {
        let s = self.root(xi).unwrap_or_else(|e| panic!("conductivity root solve failed: {e}"));
        self.h_from_speed(s)
    }

    fn h_from_speed(&self, s: T) -> T {
        let one = T::one();
        let two = T::lit(2.0);
        let s2 = s * s;
        self.poly
            .exponents
            .iter()
            .zip(&self.poly.coefficients)
            .zip(&self.poly.powers)
            .map(|((&alpha, &c), &pw)| two * c * (one + alpha) / (two + alpha) * s2 * pw.apply(s))
            .sum()
    }

    /// The vector flux `K(|y|) y`.
    pub fn flux<const D: usize>(&self, y: [T; D]) -> [T; D] {
        let k = self.k(norm(&y));
        y.map(|v| k * v)
    }

    /// Jacobian of `y ↦ K(|y|) y`: `K I + ξK′ ŷŷᵀ`. Returns `K(0) I` for vanishing `y`.
    pub fn flux_jacobian<const D: usize>(&self, y: [T; D]) -> [[T; D]; D] {
        let xi = norm(&y);
        let mut out = [[T::zero(); D]; D];
        if xi < T::lit(JACOBIAN_ZERO_GRADIENT) {
            let k0 = self.k_at_zero();
            for (i, row) in out.iter_mut().enumerate() {
                row[i] = k0;
            }
            return out;
        }
        let (k, xkp) = self.k_and_xi_k_prime(xi);
        let inv = xi.recip();
        for i in 0..D {
            for j in 0..D {
                let outer = xkp * (y[i] * inv) * (y[j] * inv);
                out[i][j] = if i == j { k + outer } else { outer };
            }
        }
        out
    }

    /// Smallest eigenvalue of [`flux_jacobian`](Self::flux_jacobian): `K + ξK′` along `ŷ`.
    pub fn jacobian_min_eigenvalue<const D: usize>(&self, y: [T; D]) -> T {
        let xi = norm(&y);
        if xi < T::lit(JACOBIAN_ZERO_GRADIENT) {
            return self.k_at_zero();
        }
        let (k, xkp) = self.k_and_xi_k_prime(xi);
        if D == 1 {
            k + xkp
        } else {
            (k + xkp).min(k)
        }
    }
}

pub(crate) fn norm<T: Real>(y: &[T]) -> T {
    y.iter().map(|&v| v * v).sum::<T>().sqrt()
}

fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

/// The three terms of the (perturbed) monotonicity inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityGap<T> {
    /// `(K₁(|y|) y − K₂(|y′|) y′)·(y − y′)`.
    pub lhs: T,
    /// `(1−a) K(|y|∨|y′|, a⃗∨a⃗′) |y−y′|²`.
    pub rhs_coercive: T,
    /// `N max{χ(a⃗),χ(a⃗′)} |a⃗−a⃗′| K(|y|∨|y′|, a⃗∧a⃗′) (|y|∨|y′|) |y−y′|`.
    pub rhs_perturb: T,
}

impl<T: Real> MonotonicityGap<T> {
    /// `lhs − (rhs_coercive − rhs_perturb)`; nonnegative when the inequality holds.
    pub fn slack(&self) -> T {
        self.lhs - (self.rhs_coercive - self.rhs_perturb)
    }
}

/// Evaluates both sides of the monotonicity inequality for two polynomials
/// sharing an exponent vector.
pub fn monotonicity_gap<T: Real, const D: usize>(
    poly1: &ForchheimerPolynomial<T>,
    poly2: &ForchheimerPolynomial<T>,
    y: [T; D],
    yp: [T; D],
) -> Result<MonotonicityGap<T>> {
    let distance = poly1.coefficient_distance(poly2)?;
    let k1 = ConductivityKernel::new(poly1.clone());
    let k2 = ConductivityKernel::new(poly2.clone());
    let join = ConductivityKernel::new(poly1.join(poly2)?);
    let meet = ConductivityKernel::new(poly1.meet(poly2)?);

    let ny = norm(&y);
    let nyp = norm(&yp);
    let top = ny.max(nyp);
    let diff: Vec<T> = y.iter().zip(&yp).map(|(&a, &b)| a - b).collect();
    let diff_norm = norm(&diff);

    let f1 = k1.flux(y);
    let f2 = k2.flux(yp);
    let flux_diff: Vec<T> = f1.iter().zip(&f2).map(|(&a, &b)| a - b).collect();
    let lhs = dot(&flux_diff, &diff);

    let a = poly1.degeneracy().a;
    let rhs_coercive = (T::one() - a) * join.k(top) * diff_norm * diff_norm;
    let chi = poly1.degeneracy().chi.max(poly2.degeneracy().chi);
    let n_terms = T::from_usize_lossy(poly1.order());
    let rhs_perturb = n_terms * chi * distance * meet.k(top) * top * diff_norm;
    Ok(MonotonicityGap {
        lhs,
        rhs_coercive,
        rhs_perturb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = ForchheimerPolynomial<f64>;

    fn two_term() -> ConductivityKernel<f64> {
        ConductivityKernel::new(P::two_term(1.0, 1.0).unwrap())
    }

    #[test]
    fn eval_g_examples() {
        let darcy = P::darcy(1.0).unwrap();
        assert_eq!(darcy.eval_g(5.0).unwrap(), 1.0);
        let p = P::two_term(1.0, 1.0).unwrap();
        assert_eq!(p.eval_g(1.0).unwrap(), 2.0);
        let p = P::three_term(1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.eval_g(2.0).unwrap(), 7.0);
        assert!(matches!(p.eval_g(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_to_fractional_power_is_zero() {
        let p = P::new(&[(0.0, 2.0), (0.5, 3.0)]).unwrap();
        assert_eq!(p.eval_g(0.0).unwrap(), 2.0);
        assert!((p.eval_g(4.0).unwrap() - 8.0).abs() < 1e-15);
    }

    #[test]
    fn validation_messages() {
        let err = P::new(&[(0.0, 0.0), (1.0, 1.0)]).unwrap_err();
        assert_eq!(err, Error::Domain("a₀ must be positive".into()));
        assert!(P::new(&[(0.0, 1.0), (1.0, 0.0)]).is_err());
        assert!(P::new(&[(0.5, 1.0), (1.0, 1.0)]).is_err());
        assert!(P::new(&[(0.0, 1.0), (1.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(P::new(&[(0.0, 1.0), (1.0, -1.0), (2.0, 1.0)]).is_err());
        assert!(P::new(&[]).is_err());
        assert!(P::power_law(1.0, 1.0, 1.0).is_err());
        // interior coefficients may vanish
        assert!(P::new(&[(0.0, 1.0), (1.0, 0.0), (2.0, 1.0)]).is_ok());
    }

    #[test]
    fn degeneracy_exponents() {
        let p = P::new(&[(0.0, 0.5), (1.0, 3.0), (2.0, 0.25)]).unwrap();
        let e = p.degeneracy();
        assert!((e.a - 2.0 / 3.0).abs() < 1e-15);
        assert!((e.b - 0.5).abs() < 1e-15);
        assert!((e.b - e.a / (2.0 - e.a)).abs() < 1e-15);
        assert_eq!(e.chi, 4.0);
        let d = P::darcy(2.0).unwrap();
        assert!(d.is_darcy());
        assert_eq!(d.degeneracy().a, 0.0);
        assert_eq!(d.degeneracy().chi, 2.0);
    }

    #[test]
    fn solve_s_closed_forms() {
        let k = two_term();
        // s² + s − 2 = 0
        assert!((k.solve_s(2.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(k.solve_s(0.0).unwrap(), 0.0);
        let cubic = ConductivityKernel::new(P::new(&[(0.0, 1.0), (2.0, 1.0)]).unwrap());
        // 2·(1+4) = 10
        assert!((cubic.solve_s(10.0).unwrap() - 2.0).abs() < 1e-14);
        assert!(k.solve_s(-1.0).is_err());
        assert!(k.solve_s(f64::NAN).is_err());
    }

    #[test]
    fn solve_s_residual_is_tight_over_many_scales() {
        let polys = [
            P::new(&[(0.0, 0.1), (0.3, 10.0), (3.7, 0.2)]).unwrap(),
            P::three_term(2.0, 0.5, 7.0).unwrap(),
            P::power_law(1.0, 3.0, 1.5).unwrap(),
        ];
        for p in polys {
            let k = ConductivityKernel::new(p.clone());
            for e in -12..=12 {
                let xi = 10f64.powi(e);
                let s = k.solve_s(xi).unwrap();
                let r = (s * p.eval_g(s).unwrap() - xi).abs() / xi.max(1.0);
                assert!(r <= 1e-12, "xi={xi} residual={r}");
                let rel = (s * p.eval_g(s).unwrap() - xi).abs() / xi;
                assert!(rel <= 1e-13, "xi={xi} relative residual={rel}");
            }
        }
    }

    #[test]
    fn eval_k_examples() {
        let darcy = ConductivityKernel::new(P::darcy(4.0).unwrap());
        for xi in [0.0, 0.3, 17.0, 1e9] {
            let e = darcy.eval(xi).unwrap();
            assert_eq!(e.K, 0.25);
            assert_eq!(e.k_prime, 0.0);
            assert_eq!(e.xi_k_prime, 0.0);
        }
        let e = two_term().eval(2.0).unwrap();
        assert!((e.s - 1.0).abs() < 1e-14);
        assert!((e.K - 0.5).abs() < 1e-14);
        // K′ = −g′/(g²(g+sg′)) = −1/(4·3)
        assert!((e.k_prime + 1.0 / 12.0).abs() < 1e-14);
        assert!(two_term().eval(-0.5).is_err());
    }

    #[test]
    fn k_prime_at_zero() {
        assert!((two_term().eval(0.0).unwrap().k_prime + 1.0).abs() < 1e-15);
        let frac = ConductivityKernel::new(P::new(&[(0.0, 1.0), (0.5, 1.0)]).unwrap());
        let e = frac.eval(0.0).unwrap();
        assert_eq!(e.k_prime, f64::NEG_INFINITY);
        assert_eq!(e.xi_k_prime, 0.0);
        let flat = ConductivityKernel::new(P::new(&[(0.0, 1.0), (2.0, 1.0)]).unwrap());
        assert_eq!(flat.eval(0.0).unwrap().k_prime, 0.0);
    }

    #[test]
    fn two_term_asymptotics_bracket() {
        // K(ξ) = 2/(1+√(1+4ξ)) so K(ξ)(1+ξ)^{1/2} → 1.
        let k = two_term();
        for xi in [1e3, 1e6] {
            let r = k.eval(xi).unwrap().K * (1.0 + xi).sqrt();
            assert!(r > 0.9 && r < 1.1, "ratio {r}");
            let exact = 2.0 / (1.0 + (1.0 + 4.0 * xi).sqrt());
            assert!((k.eval(xi).unwrap().K - exact).abs() < 1e-14 * exact.max(1e-300));
        }
    }

    #[test]
    fn h_examples() {
        let darcy = ConductivityKernel::new(P::darcy(2.0).unwrap());
        assert!((darcy.eval_h(3.0).unwrap() - 4.5).abs() < 1e-12);
        assert!((darcy.eval_h_closed_form(3.0).unwrap() - 4.5).abs() < 1e-12);
        let k = two_term();
        let h = k.eval_h(2.0).unwrap();
        assert!((2.0..=4.0).contains(&h), "H(2) = {h}");
        // s = 1: 2·1·(1/2)·1 + 2·1·(2/3)·1
        assert!((h - (1.0 + 4.0 / 3.0)).abs() < 1e-9 * h);
        assert_eq!(k.eval_h(0.0).unwrap(), 0.0);
        assert!(k.eval_h(-1.0).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let darcy = ConductivityKernel::new(P::darcy(2.0).unwrap());
        assert_eq!(darcy.flux_jacobian([3.0, -1.0]), [[0.5, 0.0], [0.0, 0.5]]);
        let k = two_term();
        let j = k.flux_jacobian([2.0, 0.0]);
        assert!((j[0][0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((j[1][1] - 0.5).abs() < 1e-14);
        assert_eq!(j[0][1], 0.0);
        assert!(j[0][0] >= 0.25 && j[1][1] >= 0.25);
        assert_eq!(k.flux_jacobian([0.0, 0.0]), [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(k.flux_jacobian([0.0; 3])[2][2], 1.0);
    }

    #[test]
    fn degree_condition_examples() {
        let p2 = P::three_term(1.0, 1.0, 1.0).unwrap();
        let dc = degree_condition(&p2, 3).unwrap();
        assert!(dc.satisfies_dc && dc.satisfies_sdc);
        let p4 = P::new(&[(0.0, 1.0), (4.0, 1.0)]).unwrap();
        let dc = degree_condition(&p4, 3).unwrap();
        assert!(dc.satisfies_dc && !dc.satisfies_sdc);
        let p9 = P::new(&[(0.0, 1.0), (9.0, 1.0)]).unwrap();
        let dc = degree_condition(&p9, 2).unwrap();
        assert!(dc.satisfies_dc && dc.satisfies_sdc);
        assert!(!degree_condition(&p9, 3).unwrap().satisfies_dc);
        assert!(degree_condition(&p9, 0).is_err());
    }

    #[test]
    fn monotonicity_examples() {
        let p = P::two_term(1.0, 1.0).unwrap();
        let g = monotonicity_gap(&p, &p, [0.3, 0.4], [0.3, 0.4]).unwrap();
        assert_eq!(g.lhs, 0.0);
        assert_eq!(g.rhs_coercive, 0.0);
        let g = monotonicity_gap(&p, &p, [1.0, 0.0], [0.0, 0.0]).unwrap();
        let k1 = two_term().k(1.0);
        assert!((g.lhs - k1).abs() < 1e-15);
        assert!((g.rhs_coercive - 0.5 * k1).abs() < 1e-15);
        assert_eq!(g.rhs_perturb, 0.0);
        let other = P::new(&[(0.0, 1.0), (2.0, 1.0)]).unwrap();
        assert!(monotonicity_gap(&p, &other, [1.0], [0.0]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let k = ConductivityKernel::new(ForchheimerPolynomial::<f32>::two_term(1.0, 1.0).unwrap());
        let e = k.eval(2.0).unwrap();
        assert!((e.K - 0.5).abs() < 1e-6);
        assert!((k.eval_h_closed_form(2.0).unwrap() - 7.0 / 3.0).abs() < 1e-5);
    }
}
