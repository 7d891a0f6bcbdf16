//! Fast geometric convergence of recurrences `Y_{i+1} ≤ Σ A_k B_k^i Y_i^{1+μ_k}`
//! and the limsup bound for `y(t) = h(t) ∫_T^t e^{−∫_τ^t g} f dτ`.
//!
//! Sequence values are carried as natural logarithms; `−∞` is zero and `+∞`
//! is the overflow sentinel. `(1+μ)^i` leaves the double range after a few
//! dozen steps, so nothing here exponentiates a sequence value.

use rand::Rng;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::scalar::Real;

/// A nonnegative number stored as its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct LogValue<T>(pub T);

impl<T: Real> LogValue<T> {
    pub fn zero() -> Self {
        LogValue(T::neg_infinity())
    }

    pub fn overflow() -> Self {
        LogValue(T::infinity())
    }

    pub fn from_value(x: T) -> Result<Self> {
        if !(x >= T::zero()) {
            return domain("log-space values must be nonnegative");
        }
        Ok(LogValue(x.ln()))
    }

    pub fn ln(self) -> T {
        self.0
    }

    /// The value itself; may underflow to 0 or overflow to ∞.
    pub fn value(self) -> T {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == T::neg_infinity()
    }

    pub fn is_overflow(self) -> bool {
        self.0 == T::infinity()
    }

    /// `ln(e^x + e^y)`.
    pub fn add(self, other: Self) -> Self {
        let (hi, lo) = if self.0 >= other.0 { (self.0, other.0) } else { (other.0, self.0) };
        if hi == T::neg_infinity() || hi == T::infinity() {
            return LogValue(hi);
        }
        LogValue(hi + (lo - hi).exp().ln_1p())
    }

    /// Relative distance `|x − y| / max(1, |x|)` between logarithms; 0 when
    /// both are the same infinity.
    pub fn log_distance(self, other: Self) -> T {
        if self.0 == other.0 {
            return T::zero();
        }
        (self.0 - other.0).abs() / T::one().max(self.0.abs())
    }
}

/// `c·x` with `0·∞ = 0`, for exponents multiplying possibly infinite logs.
fn scaled<T: Real>(c: T, x: T) -> T {
    if c == T::zero() {
        T::zero()
    } else {
        c * x
    }
}

fn check_single<T: Real>(a: T, b: T, mu: T) -> Result<()> {
    if !(a > T::zero() && b > T::one() && mu > T::zero()) || !(a.is_finite() && b.is_finite() && mu.is_finite()) {
        return domain("recurrence needs A > 0, B > 1, μ > 0, all finite");
    }
    Ok(())
}

/// `A^{−1/μ} B^{−1/μ²}`, the smallness of `Y₀` that forces `Y_i → 0` for one term.
pub fn oriseq_threshold<T: Real>(a: T, b: T, mu: T) -> Result<LogValue<T>> {
    check_single(a, b, mu)?;
    Ok(LogValue(-a.ln() / mu - b.ln() / (mu * mu)))
}

/// `A^{((1+μ)^i−1)/μ} B^{((1+μ)^i−1)/μ² − i/μ} Y₀^{(1+μ)^i}`.
///
/// Evaluated as `(1+μ)^i (ln Y₀ − ln θ) + ln θ − i ln B/μ` with `θ` the
/// threshold, so the result at `Y₀ = θ` is exact for every `i`.
pub fn oriseq_bound<T: Real>(a: T, b: T, mu: T, y0: LogValue<T>, i: u32) -> Result<LogValue<T>> {
    let theta = oriseq_threshold(a, b, mu)?.0;
    if i == 0 {
        return Ok(y0);
    }
    if y0.is_zero() {
        return Ok(LogValue::zero());
    }
    let growth = (T::one() + mu).powi(i as i32);
    let excess = y0.0 - theta;
    let lead = if excess == T::zero() { T::zero() } else { growth * excess };
    let out = lead + theta - T::from_usize_lossy(i as usize) * b.ln() / mu;
    Ok(if out.is_nan() || out == T::infinity() {
        LogValue::overflow()
    } else {
        LogValue(out)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecurrenceTerm<T> {
    pub a: T,
    pub b: T,
    pub mu: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricRecurrence<T> {
    pub terms: Vec<RecurrenceTerm<T>>,
    pub y0: LogValue<T>,
}

impl<T: Real> GeometricRecurrence<T> {
    pub fn new(terms: Vec<RecurrenceTerm<T>>, y0: T) -> Result<Self> {
        Self::from_log(terms, LogValue::from_value(y0)?)
    }

    pub fn from_log(terms: Vec<RecurrenceTerm<T>>, y0: LogValue<T>) -> Result<Self> {
        if terms.is_empty() {
            return domain("recurrence needs at least one term");
        }
        for t in &terms {
            check_single(t.a, t.b, t.mu)?;
        }
        if y0.0.is_nan() || y0.is_overflow() {
            return domain("Y₀ must be finite and nonnegative");
        }
        Ok(Self { terms, y0 })
    }

    pub fn m(&self) -> usize {
        self.terms.len()
    }

    /// `max B_k`.
    pub fn b_max(&self) -> T {
        self.terms.iter().map(|t| t.b).fold(T::one(), T::max)
    }

    /// `min μ_k`.
    pub fn mu_min(&self) -> T {
        self.terms.iter().map(|t| t.mu).fold(T::infinity(), T::min)
    }

    /// `ln Σ A_k Y^{μ_k}`.
    fn ln_weighted_sum(&self, ln_y: T) -> T {
        self.terms
            .iter()
            .fold(LogValue::zero(), |acc, t| acc.add(LogValue(t.a.ln() + scaled(t.mu, ln_y))))
            .0
    }
}

/// The three smallness conditions on `Y₀` for a multi-term recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiseqThreshold<T> {
    /// `min_k (m^{−1} A_k^{−1} B^{−1/μ})^{1/μ_k}`.
    pub closed_form: LogValue<T>,
    /// `D` with `Σ A_k D^{μ_k} = B^{−1/μ}`; `Y₀ ≤ D` is the summed condition.
    pub root: LogValue<T>,
    /// Whether `Σ A_k Y₀^{μ_k} ≤ B^{−1/μ}`.
    pub predicate: bool,
    /// For `m = 1`, the single-term threshold `A^{−1/μ} B^{−1/μ²}`. It differs
    /// from `closed_form` in the power of `B` (`1/μ²` against `1/μ`).
    pub single_term: Option<LogValue<T>>,
}

pub fn multiseq_threshold<T: Real>(rec: &GeometricRecurrence<T>) -> Result<MultiseqThreshold<T>> {
    let b = rec.b_max();
    let mu = rec.mu_min();
    let ln_target = -b.ln() / mu;
    let ln_m = T::from_usize_lossy(rec.m()).ln();
    let closed = rec
        .terms
        .iter()
        .map(|t| (ln_target - ln_m - t.a.ln()) / t.mu)
        .fold(T::infinity(), T::min);
    // Σ A_k D^{μ_k} is increasing in ln D; bracket then bisect
    let f = |ln_d: T| rec.ln_weighted_sum(ln_d) - ln_target;
    let mut lo = closed;
    let mut hi = closed + T::one();
    while f(lo) > T::zero() {
        lo = lo - T::one();
    }
    while f(hi) < T::zero() {
        hi = hi + T::one();
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) <= T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let predicate = rec.y0.is_zero() || rec.ln_weighted_sum(rec.y0.0) <= ln_target;
    let single_term = if rec.m() == 1 {
        let t = rec.terms[0];
        Some(oriseq_threshold(t.a, t.b, t.mu)?)
    } else {
        None
    };
    Ok(MultiseqThreshold {
        closed_form: LogValue(closed),
        root: LogValue(lo),
        predicate,
        single_term,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationMode {
    /// `Y_{i+1} = Σ A_k B_k^i Y_i^{1+μ_k}`.
    Equality,
    /// The equality step multiplied by an independent `U(0, 1)` factor.
    InequalitySampler,
}

/// `Y_0, …, Y_{n_steps}` in log-space. Once a value overflows it stays at the sentinel.
pub fn iterate_recurrence<T: Real, R: Rng>(
    rec: &GeometricRecurrence<T>,
    n_steps: usize,
    mode: IterationMode,
    rng: &mut R,
) -> Result<Vec<LogValue<T>>> {
    if n_steps == 0 {
        return domain("n_steps must be at least 1");
    }
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut y = rec.y0;
    out.push(y);
    for i in 0..n_steps {
        let fi = T::from_usize_lossy(i);
        y = if y.is_zero() || y.is_overflow() {
            y
        } else {
            let next = rec.terms.iter().fold(LogValue::zero(), |acc, t| {
                acc.add(LogValue(t.a.ln() + fi * t.b.ln() + (T::one() + t.mu) * y.0))
            });
            let next = match mode {
                IterationMode::Equality => next,
                IterationMode::InequalitySampler => {
                    let u: f64 = rng.gen();
                    LogValue(next.0 + T::lit(u).ln())
                }
            };
            if next.0.is_nan() || next.0 == T::infinity() {
                LogValue::overflow()
            } else {
                next
            }
        };
        out.push(y);
    }
    Ok(out)
}

/// Output of [`limsup_integral`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimsupOutcome<T> {
    pub times: Vec<T>,
    pub y: Vec<T>,
    /// Max of `y` over the tail window.
    pub observed_limsup: T,
    /// Max of `h f / g` over the tail window.
    pub predicted_bound: T,
    /// `∫_T^{t_end} g`, the finite-horizon stand-in for `∫ g = ∞`.
    pub integral_g: T,
    /// Max of `|h′/(h g)|` over the tail window, from centered differences.
    pub h_ratio_tail: T,
    /// `integral_g ≥ 20` and `h_ratio_tail ≤ 1e−2`.
    pub hypothesis_ok: bool,
}

/// Fraction of `[T, t_end]` forming the tail window.
pub const LIMSUP_TAIL: f64 = 0.25;

/// `y(t) = h(t) z(t)` with `z′ = −g z + f`, `z(T) = 0`, advanced by
/// `z ← e^{−g(t_mid) dt} z + dt/2 (e^{−g(t_mid) dt} f(t_k) + f(t_{k+1}))`.
pub fn limsup_integral<T: Real>(
    h: &dyn Fn(T) -> T,
    f: &dyn Fn(T) -> T,
    g: &dyn Fn(T) -> T,
    t0: T,
    t_end: T,
    dt: T,
) -> Result<LimsupOutcome<T>> {
    if !(t_end > t0) || !(dt > T::zero()) {
        return domain("limsup integral needs t_end > T and dt > 0");
    }
    let n = ((t_end - t0) / dt).ceil().to_usize().unwrap_or(1).max(1);
    let step = (t_end - t0) / T::from_usize_lossy(n);
    let half = T::lit(0.5);
    let mut times = Vec::with_capacity(n + 1);
    let mut y = Vec::with_capacity(n + 1);
    let mut z = T::zero();
    let mut integral_g = T::zero();
    times.push(t0);
    y.push(T::zero());
    let mut f_prev = f(t0);
    for k in 0..n {
        let ta = t0 + T::from_usize_lossy(k) * step;
        let tb = t0 + T::from_usize_lossy(k + 1) * step;
        let gm = g(ta + half * step);
        if !(gm > T::zero()) {
            return domain("g must be positive");
        }
        let fb = f(tb);
        if !(f_prev >= T::zero() && fb >= T::zero()) {
            return domain("f must be nonnegative");
        }
        let decay = (-gm * step).exp();
        z = decay * z + half * step * (decay * f_prev + fb);
        integral_g = integral_g + gm * step;
        f_prev = fb;
        times.push(tb);
        y.push(h(tb) * z);
    }
    let tail_start = t_end - (t_end - t0) * T::lit(LIMSUP_TAIL);
    let mut observed = T::zero();
    let mut predicted = T::zero();
    let mut h_ratio = T::zero();
    for (k, &t) in times.iter().enumerate() {
        if t < tail_start {
            continue;
        }
        observed = observed.max(y[k]);
        predicted = predicted.max(h(t) * f(t) / g(t));
        let e = step * T::lit(0.5);
        let dh = (h(t + e) - h(t - e)) / (e + e);
        h_ratio = h_ratio.max((dh / (h(t) * g(t))).abs());
    }
    Ok(LimsupOutcome {
        times,
        y,
        observed_limsup: observed,
        predicted_bound: predicted,
        integral_g,
        h_ratio_tail: h_ratio,
        hypothesis_ok: integral_g >= T::lit(20.0) && h_ratio <= T::lit(1e-2),
    })
}

/// A built-in `(h, f, g)` case with the exact limit of `h f / g`.
pub struct LimsupCase {
    pub name: &'static str,
    pub h: fn(f64) -> f64,
    pub f: fn(f64) -> f64,
    pub g: fn(f64) -> f64,
    pub limit: f64,
}

pub fn builtin_limsup_cases() -> Vec<LimsupCase> {
    vec![
        LimsupCase {
            name: "constant_forcing",
            h: |_| 1.0,
            f: |_| 2.0,
            g: |_| 1.0,
            limit: 2.0,
        },
        LimsupCase {
            name: "fast_damping",
            h: |_| 1.0,
            f: |_| 1.0,
            g: |_| 2.0,
            limit: 0.5,
        },
        LimsupCase {
            name: "decaying_forcing",
            h: |_| 1.0,
            f: |t| (-t).exp(),
            g: |_| 1.0,
            limit: 0.0,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn bound_matches_direct_iteration() {
        // Y_{i+1} = 2^i Y_i², Y₀ = 1/4: 1/16, 1/128, 1/4096
        let y0 = LogValue::from_value(0.25f64).unwrap();
        let b3 = oriseq_bound(1.0, 2.0, 1.0, y0, 3).unwrap().value();
        assert!((b3 - 1.0 / 4096.0).abs() < 1e-12 / 4096.0);
        assert_eq!(oriseq_bound(1.0, 2.0, 1.0, y0, 0).unwrap(), y0);
        let rec = GeometricRecurrence::<f64>::new(vec![RecurrenceTerm { a: 1.0, b: 2.0, mu: 1.0 }], 0.25).unwrap();
        let seq = iterate_recurrence(&rec, 3, IterationMode::Equality, &mut rng()).unwrap();
        let expect = [0.25, 1.0 / 16.0, 1.0 / 128.0, 1.0 / 4096.0];
        for (s, e) in seq.iter().zip(expect) {
            assert!((s.value() - e).abs() < 1e-15 * e);
        }
    }

    #[test]
    fn bound_at_threshold_decays_geometrically() {
        let (a, b, mu) = (3.0f64, 5.0, 0.7);
        let th = oriseq_threshold(a, b, mu).unwrap();
        for i in [1u32, 10, 100, 1000] {
            let bd = oriseq_bound(a, b, mu, th, i).unwrap();
            let env = th.0 - f64::from(i) * b.ln() / mu;
            assert!((bd.0 - env).abs() <= 1e-12 * env.abs());
        }
        let above = LogValue(th.0 + 1e-3);
        assert!(oriseq_bound(a, b, mu, above, 5000).unwrap().is_overflow());
        assert!(oriseq_bound(a, b, mu, LogValue::zero(), 7).unwrap().is_zero());
    }

    #[test]
    fn two_term_threshold_example() {
        let rec = GeometricRecurrence::<f64>::new(
            vec![
                RecurrenceTerm { a: 1.0, b: 2.0, mu: 1.0 },
                RecurrenceTerm { a: 1.0, b: 2.0, mu: 2.0 },
            ],
            0.25,
        )
        .unwrap();
        let t = multiseq_threshold(&rec).unwrap();
        assert!((t.closed_form.value() - 0.25).abs() < 1e-15);
        // D + D² = 1/2
        let d = (-1.0 + 3f64.sqrt()) / 2.0;
        assert!((t.root.value() - d).abs() < 1e-13);
        assert!(t.predicate);
        assert!(t.single_term.is_none());
        let seq = iterate_recurrence(&rec, 100, IterationMode::Equality, &mut rng()).unwrap();
        assert!(seq[100].value() < 1e-30);
    }

    #[test]
    fn single_term_reports_both_thresholds() {
        let rec = GeometricRecurrence::<f64>::new(vec![RecurrenceTerm { a: 2.0, b: 4.0, mu: 0.5 }], 0.0).unwrap();
        let t = multiseq_threshold(&rec).unwrap();
        let lemma = t.single_term.unwrap();
        // closed form uses B^{−1/μ}, the single-term lemma B^{−1/μ²}
        assert!((t.closed_form.0 - (-(2f64.ln()) - 4f64.ln() / 0.5) / 0.5).abs() < 1e-14);
        assert!((lemma.0 - (-(2f64.ln()) / 0.5 - 4f64.ln() / 0.25)).abs() < 1e-14);
        assert!((t.root.0 - t.closed_form.0).abs() < 1e-12);
    }

    #[test]
    fn zero_stays_zero() {
        let rec = GeometricRecurrence::<f64>::new(vec![RecurrenceTerm { a: 5.0, b: 3.0, mu: 1.0 }], 0.0).unwrap();
        let seq = iterate_recurrence(&rec, 10, IterationMode::InequalitySampler, &mut rng()).unwrap();
        assert!(seq.iter().all(|v| v.is_zero()));
        assert!(GeometricRecurrence::new(vec![RecurrenceTerm { a: 1.0, b: 1.0, mu: 1.0 }], 0.1).is_err());
        assert!(iterate_recurrence(&rec, 0, IterationMode::Equality, &mut rng()).is_err());
    }

    #[test]
    fn log_add() {
        let s = LogValue(2f64.ln()).add(LogValue(3f64.ln()));
        assert!((s.value() - 5.0).abs() < 1e-14);
        assert_eq!(LogValue::zero().add(LogValue(1.0f64)), LogValue(1.0));
        assert!(LogValue::<f64>::overflow().add(LogValue(1.0)).is_overflow());
    }

    #[test]
    fn limsup_cases() {
        for case in builtin_limsup_cases() {
            let out = limsup_integral(&case.h, &case.f, &case.g, 0.0, 50.0, 0.01).unwrap();
            assert!(out.hypothesis_ok, "{}", case.name);
            assert!((out.observed_limsup - case.limit).abs() <= 5e-3 * case.limit.max(1e-12) + 1e-12, "{}", case.name);
        }
        // y = c(1 − e^{−t}) exactly for constant data
        let out = limsup_integral(&|_: f64| 1.0, &|_| 3.0, &|_| 1.0, 0.0, 10.0, 1e-3).unwrap();
        let k = 1000;
        let exact = 3.0 * (1.0 - (-out.times[k]).exp());
        assert!((out.y[k] - exact).abs() < 1e-6);
        assert!(out.observed_limsup <= 3.0 * (1.0 + 1e-3));
        assert!(limsup_integral(&|_| 1.0, &|_| 1.0, &|_| 0.0, 0.0, 1.0, 0.1).is_err());
    }
}
