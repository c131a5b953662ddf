//! Potentials, recovery sequences and the two-scale limit in `(ρ, ε)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::Schedule;
use crate::constants::constant_d;
use crate::error::{Error, Result};
use crate::fields::{Aabb, Domain, PiecewiseConstantField};
use crate::kernel::Mollifier;
use crate::mollify::{mollify, ResolutionPolicy, SampledField};
use crate::scalar::{norm, Scalar};
use crate::seminorm::{gagliardo_energy_with, relative_energy_with, ShiftConfig};

/// Absolute threshold for every term when the target vanishes.
pub const ZERO_TARGET_ABS: f64 = 0.01;

/// Tolerance on the discrete mean after correction.
pub const MEAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential<T> {
    /// `(1 − |v|²)²`.
    DoubleWell,
    /// `Π_k g(|v − z_k|²)` with `g(s) = s/(1+s)`: smooth, vanishing exactly
    /// at the listed zeros, quadratic near each of them.
    Wells { zeros: Vec<Vec<T>> },
    /// Piecewise linear in `|v|` on a uniform table over `[0, r_max]`,
    /// constant beyond.
    Tabulated { r_max: T, values: Vec<T> },
}

fn saturate<T: Scalar>(s: T) -> (T, T) {
    let d = T::one() + s;
    (s / d, T::one() / (d * d))
}

impl<T: Scalar> Potential<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            Potential::DoubleWell => Ok(()),
            Potential::Wells { zeros } => {
                if zeros.is_empty() || zeros.iter().any(|z| z.len() != zeros[0].len()) {
                    return Err(Error::InvalidInput("wells need at least one zero, all of one length".into()));
                }
                Ok(())
            }
            Potential::Tabulated { r_max, values } => {
                if values.len() < 2 || !(*r_max > T::zero()) || values.iter().any(|v| !(*v >= T::zero())) {
                    return Err(Error::InvalidInput("table needs r_max > 0 and at least two values >= 0".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, v: &[T]) -> T {
        match self {
            Potential::DoubleWell => {
                let s = T::one() - v.iter().map(|&x| x * x).sum::<T>();
                s * s
            }
            Potential::Wells { zeros } => zeros
                .iter()
                .map(|z| saturate(v.iter().zip(z).map(|(&a, &b)| (a - b) * (a - b)).sum()).0)
                .product(),
            Potential::Tabulated { r_max, values } => {
                let n = values.len() - 1;
                let t = (norm(v) / *r_max * T::from_count(n)).min(T::from_count(n));
                let i = t.floor().to_usize().unwrap_or(0).min(n - 1);
                let f = t - T::from_count(i);
                values[i] + f * (values[i + 1] - values[i])
            }
        }
    }

    pub fn grad(&self, v: &[T]) -> Vec<T> {
        match self {
            Potential::DoubleWell => {
                let s = T::one() - v.iter().map(|&x| x * x).sum::<T>();
                v.iter().map(|&x| -T::lit(4.0) * s * x).collect()
            }
            Potential::Wells { zeros } => {
                let parts: Vec<(T, T)> = zeros
                    .iter()
                    .map(|z| saturate(v.iter().zip(z).map(|(&a, &b)| (a - b) * (a - b)).sum()))
                    .collect();
                let mut g = vec![T::zero(); v.len()];
                for (k, z) in zeros.iter().enumerate() {
                    let others: T = parts.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, p)| p.0).product();
                    for (i, gi) in g.iter_mut().enumerate() {
                        *gi += others * parts[k].1 * T::lit(2.0) * (v[i] - z[i]);
                    }
                }
                g
            }
            Potential::Tabulated { r_max, values } => {
                let n = values.len() - 1;
                let r = norm(v);
                let t = r / *r_max * T::from_count(n);
                if r == T::zero() || t >= T::from_count(n) {
                    return vec![T::zero(); v.len()];
                }
                let i = t.floor().to_usize().unwrap_or(0).min(n - 1);
                let slope = (values[i + 1] - values[i]) * T::from_count(n) / *r_max;
                v.iter().map(|&x| slope * x / r).collect()
            }
        }
    }

    /// `C_D` with `|∇W(b)| ≤ C_D` for `|b| ≤ D`.
    pub fn lipschitz_on_ball(&self, d: T) -> T {
        match self {
            Potential::DoubleWell => {
                // |∇W| = 4 r |1 − r²|, interior maximum at r = 1/√3
                let f = |r: T| T::lit(4.0) * r * (T::one() - r * r).abs();
                let crit = T::one() / T::lit(3.0).sqrt();
                if d >= crit { f(crit).max(f(d)) } else { f(d) }
            }
            // each factor is at most 1 and 2t/(1+t²)² ≤ 9/(8√3)
            Potential::Wells { zeros } => T::from_count(zeros.len()) * T::lit(9.0) / (T::lit(8.0) * T::lit(3.0).sqrt()),
            Potential::Tabulated { r_max, values } => {
                let n = values.len() - 1;
                let h = *r_max / T::from_count(n);
                // the segment starting at |b| = D counts as well
                let m = ((d / h).floor().to_usize().unwrap_or(n) + 1).min(n);
                values.windows(2).take(m).map(|w| (w[1] - w[0]).abs() / h).fold(T::zero(), T::max)
            }
        }
    }
}

/// `(1/ε) ∫_Ω W(f)` on the grid of `f`.
pub fn potential_energy<T: Scalar>(w: &Potential<T>, f: &SampledField<T>, omega: &Aabb<T>, eps: T) -> Result<T> {
    Ok(f.integrate_nodes(omega, |_, v| w.eval(v))? / eps)
}

/// `|ln ε|^{−1} E(Ω × Ω) + (1/ε) ∫_Ω W`.
pub fn e1<T: Scalar>(f: &SampledField<T>, w: &Potential<T>, q: T, domain: &Domain<T>, eps: T) -> Result<T> {
    let s = gagliardo_energy_with(f, &domain.omega, q, &ShiftConfig::default())?;
    Ok(s.value / eps.ln().abs() + potential_energy(w, f, &domain.omega, eps)?)
}

/// Same with the relative energy; `f` must cover the ambient box.
pub fn e2<T: Scalar>(f: &SampledField<T>, w: &Potential<T>, q: T, domain: &Domain<T>, eps: T) -> Result<T> {
    let s = relative_energy_with(f, domain, q, &ShiftConfig::default())?;
    Ok(s.value / eps.ln().abs() + potential_energy(w, f, &domain.omega, eps)?)
}

/// Product bump `Π_k b((x_k − c_k)/h_k)`, `b(t) = exp(−1/(1−t²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump<T> {
    pub center: Vec<T>,
    pub half_width: Vec<T>,
}

fn bump_1d<T: Scalar>(t: T) -> T {
    if t.abs() >= T::one() {
        T::zero()
    } else {
        (-T::one() / (T::one() - t * t)).exp()
    }
}

impl<T: Scalar> Bump<T> {
    /// Centered in `omega` with half widths `fraction · len`.
    pub fn centered_in(omega: &Aabb<T>, fraction: T) -> Self {
        Self { center: omega.center(), half_width: (0..omega.dim()).map(|k| omega.len(k) * fraction).collect() }
    }

    pub fn eval(&self, x: &[T]) -> T {
        x.iter().zip(&self.center).zip(&self.half_width).map(|((&a, &c), &h)| bump_1d((a - c) / h)).product()
    }

    /// `max |∇ Π b|` from the 1D profile: `max|b'| · max b^{N−1} · |h⁻¹|`.
    fn gradient_bound(&self) -> T {
        let n = self.center.len();
        // max |b'| is attained near |t| ≈ 0.62; dense sampling suffices
        let dmax = (1..2000)
            .map(|i| {
                let t = T::from_count(i) / T::lit(2000.0);
                let h = T::lit(1e-6);
                ((bump_1d(t + h) - bump_1d(t - h)) / (h + h)).abs()
            })
            .fold(T::zero(), T::max);
        let inv: T = self.half_width.iter().map(|&h| T::one() / (h * h)).sum::<T>().sqrt();
        dmax * bump_1d(T::zero()).powi(n as i32 - 1) * inv * T::lit(1.01)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correction<T> {
    pub phi: Bump<T>,
    /// `c = ∫_Ω u_{ρ,ε} − ∫_Ω u` on the grid of the realized field.
    pub constant: Vec<T>,
    /// `∫_Ω φ` after normalization.
    pub phi_mass: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryField<T> {
    pub base: PiecewiseConstantField<T>,
    pub rho: T,
    pub epsilon: T,
    pub correction: Option<Correction<T>>,
    pub realized: SampledField<T>,
}

impl<T: Scalar> RecoveryField<T> {
    /// `|∫_Ω realized − ∫_Ω u|` on the realized grid.
    pub fn mean_defect(&self, omega: &Aabb<T>) -> Result<T> {
        let a = self.realized.integral(omega)?;
        let b = base_integral(&self.base, &self.realized, omega)?;
        Ok(norm(&a.iter().zip(&b).map(|(&x, &y)| x - y).collect::<Vec<_>>()))
    }
}

/// `∫_Ω u` by the node rule of `f`, with `u` read at the nodes (mean of
/// the traces on the jump set, which keeps the rule exact for steps).
fn base_integral<T: Scalar>(u: &PiecewiseConstantField<T>, f: &SampledField<T>, omega: &Aabb<T>) -> Result<Vec<T>> {
    (0..u.codim()).map(|c| f.integrate_nodes(omega, |x, _| u.value_tiebreak(x)[c])).collect()
}

/// `u_{ρ,ε}(x) = ∫ η(z) u(x + ερ z) dz` sampled on `target`.
pub fn recovery<T: Scalar>(
    u: &PiecewiseConstantField<T>,
    eta: &Mollifier<T>,
    rho: T,
    eps: T,
    target: &Aabb<T>,
    policy: &ResolutionPolicy,
) -> Result<RecoveryField<T>> {
    if !(rho > T::zero() && rho <= T::one()) {
        return Err(Error::InvalidInput(format!("rho must lie in (0, 1], got {rho}")));
    }
    let realized = mollify(u, eta, eps * rho, target, policy)?;
    Ok(RecoveryField { base: u.clone(), rho, epsilon: eps, correction: None, realized })
}

/// Recovery field minus `φ c`, so that its mean over `omega` matches `u`.
#[allow(clippy::too_many_arguments)]
pub fn mean_corrected_recovery<T: Scalar>(
    u: &PiecewiseConstantField<T>,
    eta: &Mollifier<T>,
    rho: T,
    eps: T,
    omega: &Aabb<T>,
    target: &Aabb<T>,
    phi: &Bump<T>,
    policy: &ResolutionPolicy,
) -> Result<RecoveryField<T>> {
    let support = Aabb::new(
        phi.center.iter().zip(&phi.half_width).map(|(&c, &h)| c - h).collect(),
        phi.center.iter().zip(&phi.half_width).map(|(&c, &h)| c + h).collect(),
    )?;
    if !support.inside(omega) {
        return Err(Error::InvalidInput("the correction bump must be supported in omega".into()));
    }
    let mut rec = recovery(u, eta, rho, eps, target, policy)?;
    let f = &rec.realized;
    let raw_mass = f.integrate_nodes(omega, |x, _| phi.eval(x))?;
    if !(raw_mass > T::zero()) {
        return Err(Error::PhiMassNotOne(raw_mass.to_f64_lossy()));
    }
    let phi_nodes: Vec<T> = (0..f.grid.len()).map(|k| phi.eval(&f.grid.node(k)) / raw_mass).collect();
    let phi_mass = {
        let w = f.integration_weights(omega)?;
        let terms: Vec<T> = (0..f.grid.len())
            .map(|k| {
                let idx = f.grid.multi_index(k);
                idx.iter().enumerate().fold(T::one(), |a, (ax, &i)| a * w[ax][i]) * phi_nodes[k]
            })
            .collect();
        crate::quadrature::pairwise_sum(&terms)
    };
    if (phi_mass - T::one()).abs() > T::lit(MEAN_TOL) {
        return Err(Error::PhiMassNotOne(phi_mass.to_f64_lossy()));
    }
    let mean_f = f.integral(omega)?;
    let mean_u = base_integral(u, f, omega)?;
    let c: Vec<T> = mean_f.iter().zip(&mean_u).map(|(&a, &b)| a - b).collect();
    let codim = f.codim;
    let lip_phi = phi.gradient_bound() / raw_mass;
    let realized = &mut rec.realized;
    for (k, &p) in phi_nodes.iter().enumerate() {
        for j in 0..codim {
            realized.values[k * codim + j] -= p * c[j];
        }
    }
    realized.lipschitz += norm(&c) * lip_phi;
    realized.pure = false;
    rec.correction = Some(Correction { phi: phi.clone(), constant: c, phi_mass });
    Ok(rec)
}

/// One `(ρ, ε)` evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleLimitRow<T> {
    pub rho: T,
    pub epsilon: T,
    /// `E(Ω × Ω)` of the recovery field.
    pub seminorm: T,
    pub seminorm_error: T,
    /// `(1/ε) ∫_Ω W`.
    pub potential: T,
    /// `|c_{ε,ρ}|`.
    pub correction: T,
    pub mean_defect: T,
}

/// Per-`ρ` summary: fitted `|ln ε|` slope of the seminorm term plus the
/// largest potential term over the ε-schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoSummary<T> {
    pub rho: T,
    pub slope: T,
    pub slope_std_error: T,
    pub potential_plateau: T,
    pub total: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleLimitReport<T> {
    pub target: T,
    pub d_n: T,
    pub jump_energy: T,
    pub rows: Vec<DoubleLimitRow<T>>,
    pub per_rho: Vec<RhoSummary<T>>,
    /// `total(ρ) ≈ a + b ρ`, `extrapolated = a`.
    pub extrapolated: T,
    pub extrapolation_slope: T,
    pub extrapolation_residual: T,
    /// Potential plateau ratios between consecutive `ρ`, rescaled to a halving.
    pub potential_ratios: Vec<T>,
    pub ratio_test: bool,
    pub max_mean_defect: T,
    pub mean_test: bool,
    pub tolerance: T,
    pub pass: bool,
}

/// Inputs of [`double_limit_verify`].
#[derive(Debug, Clone)]
pub struct DoubleLimit<'a, T> {
    pub field: &'a PiecewiseConstantField<T>,
    pub eta: &'a Mollifier<T>,
    pub potential: &'a Potential<T>,
    pub q: T,
    pub domain: &'a Domain<T>,
    pub rhos: Vec<T>,
    pub schedule: Schedule<T>,
    pub tolerance: T,
    pub policy: ResolutionPolicy,
    pub shift: ShiftConfig,
}

fn fit_line<T: Scalar>(x: &[T], y: &[T]) -> Result<(T, T, T)> {
    let n = T::from_count(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let sxx: T = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
    if !(sxx > T::zero()) {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let sxy: T = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rms = (x.iter().zip(y).map(|(&u, &v)| (v - a - b * u).powi(2)).sum::<T>() / n).sqrt();
    Ok((a, b, rms))
}

/// Runs the `(ρ, ε)` table with mean-corrected recovery fields, fits each
/// `ρ` in `|ln ε|` and extrapolates linearly to `ρ = 0`.
pub fn double_limit_verify<T: Scalar>(p: &DoubleLimit<'_, T>) -> Result<DoubleLimitReport<T>> {
    if p.rhos.len() < 3 {
        return Err(Error::InvalidSchedule("at least three rho values required".into()));
    }
    if p.schedule.count < 6 {
        return Err(Error::InvalidSchedule("at least six epsilon values required".into()));
    }
    p.schedule.validate()?;
    p.potential.validate()?;
    let omega = &p.domain.omega;
    let d_n = constant_d::<T>(p.field.dim())?.value;
    let jump_energy = p.field.jump_energy(omega, p.q)?;
    let target = T::lit(2.0) * p.eta.mass().abs().powf(p.q) * d_n * jump_energy;
    let phi = Bump::centered_in(omega, T::lit(0.25));
    let tasks: Vec<(T, T)> = p.rhos.iter().flat_map(|&r| p.schedule.epsilons().into_iter().map(move |e| (r, e))).collect();
    let rows = tasks
        .into_par_iter()
        .map(|(rho, eps)| {
            let rec = mean_corrected_recovery(p.field, p.eta, rho, eps, omega, omega, &phi, &p.policy)?;
            let s = gagliardo_energy_with(&rec.realized, omega, p.q, &p.shift)?;
            let c = rec.correction.as_ref().map(|c| norm(&c.constant)).unwrap_or(T::zero());
            Ok(DoubleLimitRow {
                rho,
                epsilon: eps,
                seminorm: s.value,
                seminorm_error: s.error_estimate,
                potential: potential_energy(p.potential, &rec.realized, omega, eps)?,
                correction: c,
                mean_defect: rec.mean_defect(omega)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_rho = Vec::new();
    for (i, &rho) in p.rhos.iter().enumerate() {
        let block = &rows[i * p.schedule.count..(i + 1) * p.schedule.count];
        let series = crate::asymptotics::SweepSeries {
            functional: crate::asymptotics::Functional::Gagliardo,
            schedule: p.schedule,
            entries: block
                .iter()
                .map(|r| crate::asymptotics::SweepEntry { epsilon: r.epsilon, value: r.seminorm, error_estimate: r.seminorm_error })
                .collect(),
        };
        let fit = crate::asymptotics::fit_log_slope(&series)?;
        let plateau = block.iter().map(|r| r.potential).fold(T::zero(), T::max);
        per_rho.push(RhoSummary { rho, slope: fit.slope, slope_std_error: fit.slope_std_error, potential_plateau: plateau, total: fit.slope + plateau });
    }
    let xs: Vec<T> = per_rho.iter().map(|s| s.rho).collect();
    let ys: Vec<T> = per_rho.iter().map(|s| s.total).collect();
    let (extrapolated, extrapolation_slope, extrapolation_residual) = fit_line(&xs, &ys)?;

    let potential_ratios: Vec<T> = per_rho
        .windows(2)
        .filter(|w| w[1].potential_plateau > T::zero())
        .map(|w| {
            let r = w[0].potential_plateau / w[1].potential_plateau;
            r.powf(T::LN_2() / (w[0].rho / w[1].rho).ln())
        })
        .collect();
    let zero_target = target == T::zero();
    let ratio_test = if zero_target {
        true
    } else {
        !potential_ratios.is_empty() && potential_ratios.iter().all(|&r| r >= T::lit(1.5) && r <= T::lit(2.5))
    };
    let max_mean_defect = rows.iter().map(|r| r.mean_defect).fold(T::zero(), T::max);
    let mean_test = max_mean_defect <= T::lit(MEAN_TOL);
    let limit_ok = if zero_target {
        let abs = T::lit(ZERO_TARGET_ABS);
        extrapolated.abs() <= abs && rows.iter().all(|r| r.seminorm <= abs && r.potential <= abs)
    } else {
        (extrapolated - target).abs() <= p.tolerance * target
    };
    Ok(DoubleLimitReport {
        target,
        d_n,
        jump_energy,
        rows,
        per_rho,
        extrapolated,
        extrapolation_slope,
        extrapolation_residual,
        potential_ratios,
        ratio_test,
        max_mean_defect,
        mean_test,
        tolerance: p.tolerance,
        pass: limit_ok && ratio_test && mean_test,
    })
}
