//! ε-sweeps, affine fits in `|ln ε|` and comparison with the predicted slope.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::constant_d;
use crate::error::{Error, Result};
use crate::fields::{Domain, PiecewiseConstantField};
use crate::kernel::Mollifier;
use crate::mollify::{mollify, ResolutionPolicy};
use crate::scalar::Scalar;
use crate::seminorm::{
    gagliardo_energy_with, localized_functional, profile_energy_for_field, relative_energy_with, ShiftConfig,
};
use crate::special::sphere_area;

/// Geometric schedule `ε_k = ε_max · ratio^k`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule<T> {
    pub eps_max: T,
    pub ratio: T,
    pub count: usize,
}

impl<T: Scalar> Schedule<T> {
    /// `count` points from `eps_max` down to `eps_min`, both included.
    pub fn between(eps_max: T, eps_min: T, count: usize) -> Result<Self> {
        if count < 2 || !(eps_min > T::zero() && eps_min < eps_max) {
            return Err(Error::InvalidSchedule("need eps_min < eps_max and at least two points".into()));
        }
        let ratio = (eps_min / eps_max).powf(T::one() / T::from_count(count - 1));
        let s = Self { eps_max, ratio, count };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 4 {
            return Err(Error::InvalidSchedule(format!("at least 4 points required, got {}", self.count)));
        }
        if !(self.ratio > T::zero() && self.ratio < T::one()) {
            return Err(Error::InvalidSchedule("ratio must lie in (0, 1)".into()));
        }
        if !(self.eps_max > T::zero() && self.eps_max <= (-T::one()).exp() * T::lit(1.0 + 1e-12)) {
            return Err(Error::InvalidSchedule(format!("eps_max must lie in (0, 1/e], got {}", self.eps_max)));
        }
        Ok(())
    }

    pub fn epsilons(&self) -> Vec<T> {
        (0..self.count).map(|k| self.eps_max * self.ratio.powi(k as i32)).collect()
    }
}

/// Which energy a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// Energy on `Ω × Ω` through the shift decomposition.
    Gagliardo,
    /// `E(R^N) − E(R^N \ Ω̄)`.
    Relative,
    /// 1D single-jump oracle.
    Profile1d,
    /// Localized difference functional of the raw field.
    Localized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry<T> {
    pub epsilon: T,
    pub value: T,
    pub error_estimate: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries<T> {
    pub functional: Functional,
    pub schedule: Schedule<T>,
    pub entries: Vec<SweepEntry<T>>,
}

impl<T: Scalar> SweepSeries<T> {
    pub fn validate(&self) -> Result<()> {
        if self.entries.len() < 4 {
            return Err(Error::InvalidSchedule("a series needs at least 4 entries".into()));
        }
        if self.entries.windows(2).any(|w| w[1].epsilon >= w[0].epsilon) {
            return Err(Error::InvalidSchedule("epsilon must decrease strictly".into()));
        }
        if self.entries.iter().any(|e| !e.value.is_finite() || e.value < T::zero()) {
            return Err(Error::InvalidInput("series values must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Everything a sweep needs besides the schedule.
#[derive(Debug, Clone)]
pub struct Experiment<'a, T> {
    pub functional: Functional,
    pub field: &'a PiecewiseConstantField<T>,
    pub eta: &'a Mollifier<T>,
    pub q: T,
    pub domain: &'a Domain<T>,
    pub policy: ResolutionPolicy,
    pub shift: ShiftConfig,
}

impl<'a, T: Scalar> Experiment<'a, T> {
    pub fn new(
        functional: Functional,
        field: &'a PiecewiseConstantField<T>,
        eta: &'a Mollifier<T>,
        q: T,
        domain: &'a Domain<T>,
    ) -> Self {
        Self { functional, field, eta, q, domain, policy: ResolutionPolicy::default(), shift: ShiftConfig::default() }
    }

    /// Value and error estimate at a single `ε`.
    pub fn evaluate(&self, eps: T) -> Result<(T, T)> {
        let omega = &self.domain.omega;
        match self.functional {
            Functional::Gagliardo => {
                let f = mollify(self.field, self.eta, eps, omega, &self.policy)?;
                let r = gagliardo_energy_with(&f, omega, self.q, &self.shift)?;
                Ok((r.value, r.error_estimate))
            }
            Functional::Relative => {
                let f = mollify(self.field, self.eta, eps, &self.domain.ambient, &self.policy)?;
                let r = relative_energy_with(&f, self.domain, self.q, &self.shift)?;
                Ok((r.value, r.error_estimate))
            }
            Functional::Profile1d => {
                let r = profile_energy_for_field(self.field, self.eta, eps, omega, self.q)?;
                Ok((r.value, r.error_estimate))
            }
            Functional::Localized => Ok((localized_functional(self.field, omega, self.q, eps)?, T::zero())),
        }
    }
}

/// One evaluation per `ε`, in parallel, returned in schedule order.
pub fn sweep<T: Scalar>(exp: &Experiment<'_, T>, schedule: &Schedule<T>) -> Result<SweepSeries<T>> {
    schedule.validate()?;
    let entries = schedule
        .epsilons()
        .into_par_iter()
        .map(|eps| exp.evaluate(eps).map(|(value, error_estimate)| SweepEntry { epsilon: eps, value, error_estimate }))
        .collect::<Result<Vec<_>>>()?;
    let s = SweepSeries { functional: exp.functional, schedule: *schedule, entries };
    s.validate()?;
    Ok(s)
}

/// Weighted least squares of `value = A |ln ε| + B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit<T> {
    pub slope: T,
    pub intercept: T,
    pub slope_std_error: T,
    pub rms_residual: T,
    /// Slope refitted without the largest `ε`.
    pub slope_without_largest: T,
    /// `|slope_without_largest − slope| ≤ 2 · slope_std_error`.
    pub stable: bool,
}

fn weighted_fit<T: Scalar>(x: &[T], y: &[T], w: &[T]) -> Result<(T, T, T, T)> {
    let sw: T = w.iter().copied().sum();
    let mx = x.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / sw;
    let my = y.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / sw;
    let sxx: T = x.iter().zip(w).map(|(&a, &b)| b * (a - mx) * (a - mx)).sum();
    if !(sxx > T::zero()) {
        return Err(Error::DegenerateFit("all |ln eps| coincide".into()));
    }
    let sxy: T = x.iter().zip(y).zip(w).map(|((&a, &c), &b)| b * (a - mx) * (c - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res: Vec<T> = x.iter().zip(y).map(|(&a, &c)| c - slope * a - intercept).collect();
    let n = T::from_count(x.len());
    let rms = (res.iter().map(|&r| r * r).sum::<T>() / n).sqrt();
    let dof = x.len().saturating_sub(2).max(1);
    let s2 = res.iter().zip(w).map(|(&r, &b)| b * r * r).sum::<T>() / T::from_count(dof);
    Ok((slope, intercept, (s2 / sxx).sqrt(), rms))
}

pub fn fit_log_slope<T: Scalar>(series: &SweepSeries<T>) -> Result<LogFit<T>> {
    series.validate()?;
    let x: Vec<T> = series.entries.iter().map(|e| e.epsilon.ln().abs()).collect();
    let y: Vec<T> = series.entries.iter().map(|e| e.value).collect();
    let w: Vec<T> = if series.entries.iter().all(|e| e.error_estimate > T::zero()) {
        series.entries.iter().map(|e| T::one() / (e.error_estimate * e.error_estimate)).collect()
    } else {
        vec![T::one(); x.len()]
    };
    let (slope, intercept, se, rms) = weighted_fit(&x, &y, &w)?;
    // entries are in decreasing ε, so the largest one comes first
    let (slope2, ..) = weighted_fit(&x[1..], &y[1..], &w[1..])?;
    Ok(LogFit {
        slope,
        intercept,
        slope_std_error: se,
        rms_residual: rms,
        slope_without_largest: slope2,
        stable: (slope2 - slope).abs() <= T::lit(2.0) * se,
    })
}

/// A fit compared with a predicted slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit<T> {
    pub fit: LogFit<T>,
    pub predicted: T,
    /// Denominator of `relative_gap`: `predicted`, or the mass-free scale
    /// `2 D_N ‖η‖_{L¹}^q J_q` when the prediction vanishes.
    pub reference: T,
    pub relative_gap: T,
}

/// Inputs of the predicted slope `2 |∫η|^q D_N J_q(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    pub mass: T,
    pub l1_norm: T,
    pub d_n: T,
    pub jump_energy: T,
    pub q: T,
    pub predicted: T,
    pub reference: T,
}

pub fn predicted_slope<T: Scalar>(u: &PiecewiseConstantField<T>, eta: &Mollifier<T>, q: T, domain: &Domain<T>) -> Result<Prediction<T>> {
    let d_n = constant_d::<T>(u.dim())?.value;
    let jump_energy = u.jump_energy(&domain.omega, q)?;
    let two = T::lit(2.0);
    let predicted = two * eta.mass().abs().powf(q) * d_n * jump_energy;
    let reference = if predicted > T::zero() { predicted } else { two * eta.l1_norm().powf(q) * d_n * jump_energy };
    Ok(Prediction { mass: eta.mass(), l1_norm: eta.l1_norm(), d_n, jump_energy, q, predicted, reference })
}

impl<T: Scalar> AsymptoticFit<T> {
    pub fn new(fit: LogFit<T>, prediction: &Prediction<T>) -> Self {
        let gap = (fit.slope - prediction.predicted).abs();
        let relative_gap = if prediction.reference > T::zero() {
            gap / prediction.reference
        } else if gap == T::zero() {
            T::zero()
        } else {
            T::infinity()
        };
        Self { fit, predicted: prediction.predicted, reference: prediction.reference, relative_gap }
    }
}

/// Both sides of the uniform bound at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformBound<T> {
    pub epsilon: T,
    pub lhs: T,
    pub rhs: T,
    pub pass: bool,
}

/// Compares `E / (ω_{N−1} |ln ε|)` for a known energy `E` on `Ω × Ω` with
/// the bound built from `‖u‖_{L¹}`, `‖u‖_{L∞}`, `‖Du‖`, `‖η‖_{L¹}`, `‖η‖_{W^{1,1}}`.
pub fn uniform_bound_from_value<T: Scalar>(u: &PiecewiseConstantField<T>, eta: &Mollifier<T>, q: T, eps: T, energy: T) -> Result<UniformBound<T>> {
    if !(eps > T::zero() && eps < T::one()) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    let l = eps.ln().abs();
    let lhs = energy / (sphere_area::<T>(u.dim() - 1) * l);
    let (l1u, linf, du) = (u.l1_norm(), u.linf_norm(), u.total_variation()?);
    let (l1e, w11) = (eta.l1_norm(), eta.w11_norm());
    let qm1 = q - T::one();
    let grad = (T::lit(3.0) * linf * w11).powf(qm1) * l1e * du;
    let rhs = T::lit(2.0).powf(q) * l1u * linf.powf(qm1) * l1e.powf(q) / l + grad / (qm1 * l) + grad;
    Ok(UniformBound { epsilon: eps, lhs, rhs, pass: lhs <= rhs })
}

/// Evaluates the energy on `Ω × Ω` and checks the uniform bound.
pub fn uniform_bound<T: Scalar>(u: &PiecewiseConstantField<T>, eta: &Mollifier<T>, q: T, eps: T, domain: &Domain<T>) -> Result<UniformBound<T>> {
    let exp = Experiment::new(Functional::Gagliardo, u, eta, q, domain);
    let (value, _) = exp.evaluate(eps)?;
    uniform_bound_from_value(u, eta, q, eps, value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport<T> {
    pub prediction: Prediction<T>,
    pub series: SweepSeries<T>,
    pub fit: AsymptoticFit<T>,
    pub tolerance: T,
    /// Uniform bound at every entry (energies on `Ω × Ω` only).
    pub uniform_bound: Vec<UniformBound<T>>,
    pub pass: bool,
}

/// Sweeps, fits and compares with `2 |∫η|^q D_N J_q(u)`. When the prediction
/// vanishes the slope is compared with the mass-free scale instead.
pub fn verify_limit<T: Scalar>(exp: &Experiment<'_, T>, schedule: &Schedule<T>, tol: T) -> Result<LimitReport<T>> {
    if !(tol > T::zero() && tol < T::one()) {
        return Err(Error::InvalidInput(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let prediction = predicted_slope(exp.field, exp.eta, exp.q, exp.domain)?;
    let series = sweep(exp, schedule)?;
    let fit = AsymptoticFit::new(fit_log_slope(&series)?, &prediction);
    let uniform_bound = match exp.functional {
        Functional::Gagliardo | Functional::Profile1d => series
            .entries
            .iter()
            .map(|e| uniform_bound_from_value(exp.field, exp.eta, exp.q, e.epsilon, e.value))
            .collect::<Result<Vec<_>>>()?,
        _ => Vec::new(),
    };
    let pass = fit.relative_gap <= tol;
    Ok(LimitReport { prediction, series, fit, tolerance: tol, uniform_bound, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64, n: usize) -> SweepSeries<f64> {
        let schedule = Schedule::between(0.1, 1e-4, n).unwrap();
        let entries = schedule
            .epsilons()
            .into_iter()
            .map(|e| SweepEntry { epsilon: e, value: f(e), error_estimate: 0.0 })
            .collect();
        SweepSeries { functional: Functional::Gagliardo, schedule, entries }
    }

    #[test]
    fn exact_affine_data() {
        let fit = fit_log_slope(&synthetic(|e| 3.0 * e.ln().abs() + 5.0, 8)).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12 && (fit.intercept - 5.0).abs() < 1e-12);
        assert!(fit.rms_residual < 1e-12);
    }

    #[test]
    fn constant_series() {
        let fit = fit_log_slope(&synthetic(|_| 7.0, 6)).unwrap();
        assert!(fit.slope.abs() < 1e-13 && (fit.intercept - 7.0).abs() < 1e-12);
    }

    #[test]
    fn schedule_limits() {
        assert!(Schedule::between(0.5, 1e-3, 6).is_err());
        assert!(Schedule::between(0.1, 1e-3, 3).is_err());
        let s = Schedule::between(10f64.powf(-1.5), 1e-4, 12).unwrap();
        let e = s.epsilons();
        assert!((e[11] - 1e-4).abs() < 1e-16 && e.windows(2).all(|w| w[1] < w[0]));
    }
}
