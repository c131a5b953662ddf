//! Dimensional constants `D_N`, `C_N` and the kernel profile integral.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Mollifier;
use crate::quadrature::GaussLegendre;
use crate::scalar::Scalar;
use crate::special::{gamma_half, sphere_area};

/// Samples drawn per independent random stream.
pub const MC_BLOCK: usize = 1 << 16;

/// Largest supported dimension.
pub const MAX_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstantKind {
    D,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    MonteCarlo,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalConstant<T> {
    pub kind: ConstantKind,
    pub dim: usize,
    pub value: T,
    pub method: Method,
    pub std_error: T,
}

fn check(n: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n, MAX_DIM))
    }
}

/// `D_N = π^{(N−1)/2} / Γ((N+1)/2)`.
pub fn constant_d<T: Scalar>(n: usize) -> Result<DimensionalConstant<T>> {
    check(n)?;
    let value = T::PI().powf(T::from_count(n - 1) * T::lit(0.5)) / gamma_half::<T>(n + 1);
    Ok(DimensionalConstant { kind: ConstantKind::D, dim: n, value, method: Method::ClosedForm, std_error: T::zero() })
}

/// `D_N` by radial quadrature `ω_{N−2} ∫_0^∞ r^{N−2} (1+r²)^{−(N+1)/2} dr`
/// under `r = t/(1−t)`.
pub fn constant_d_quadrature<T: Scalar>(n: usize) -> Result<DimensionalConstant<T>> {
    check(n)?;
    let value = if n == 1 {
        T::one()
    } else {
        let gl = GaussLegendre::<T>::new(20);
        let breaks: Vec<T> = (0..=64).map(|i| T::from_count(i) / T::lit(64.0)).collect();
        let p = -(T::from_count(n + 1)) * T::lit(0.5);
        let integral = gl.composite(&breaks, |t| {
            let one_m = T::one() - t;
            let r = t / one_m;
            r.powi(n as i32 - 2) * (T::one() + r * r).powf(p) / (one_m * one_m)
        });
        sphere_area::<T>(n - 2) * integral
    };
    Ok(DimensionalConstant { kind: ConstantKind::D, dim: n, value, method: Method::Quadrature, std_error: T::zero() })
}

/// `C_N = (1/N) ∫_{S^{N−1}} |z₁| = 2 ω_{N−2} / (N(N−1))`, with `C_1 = 2`.
pub fn constant_c<T: Scalar>(n: usize) -> Result<DimensionalConstant<T>> {
    check(n)?;
    let value = if n == 1 {
        T::lit(2.0)
    } else {
        T::lit(2.0) * sphere_area::<T>(n - 2) / T::from_count(n * (n - 1))
    };
    Ok(DimensionalConstant { kind: ConstantKind::C, dim: n, value, method: Method::ClosedForm, std_error: T::zero() })
}

/// Mean and standard error of `f(rng)` over `samples` draws, split into
/// blocks of [`MC_BLOCK`] with one ChaCha stream per block.
fn blocked_mean<F>(samples: usize, seed: u64, f: F) -> (f64, f64)
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let blocks = samples.div_ceil(MC_BLOCK);
    let partial: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..count {
                let v = f(&mut rng);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = samples as f64;
    let mean = s / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 10_000 {
        Err(Error::InvalidInput(format!("at least 10^4 samples required, got {samples}")))
    } else {
        Ok(())
    }
}

/// Importance-sampled `D_N` with a multivariate Cauchy proposal on `R^{N−1}`.
pub fn constant_d_monte_carlo<T: Scalar>(n: usize, samples: usize, seed: u64) -> Result<DimensionalConstant<T>> {
    check(n)?;
    let mc = |value: f64, std_error: f64| DimensionalConstant {
        kind: ConstantKind::D,
        dim: n,
        value: T::lit(value),
        method: Method::MonteCarlo,
        std_error: T::lit(std_error),
    };
    if n == 1 {
        return Ok(mc(1.0, 0.0));
    }
    check_samples(samples)?;
    let k = n - 1;
    // target / proposal = π^{(k+1)/2}/Γ((k+1)/2) · (1+|v|²)^{−1/2}
    let norm_const = std::f64::consts::PI.powf((k as f64 + 1.0) / 2.0) / gamma_half::<f64>(k + 1);
    let (mean, se) = blocked_mean(samples, seed, |rng| {
        let w: f64 = rng.sample::<f64, _>(StandardNormal).abs();
        let mut r2 = 0.0;
        for _ in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            r2 += z * z;
        }
        let v2 = r2 / (w * w);
        norm_const / (1.0 + v2).sqrt()
    });
    Ok(mc(mean, se))
}

/// `C_N` from uniform directions on `S^{N−1}`.
pub fn constant_c_monte_carlo<T: Scalar>(n: usize, samples: usize, seed: u64) -> Result<DimensionalConstant<T>> {
    check(n)?;
    let mc = |value: f64, std_error: f64| DimensionalConstant {
        kind: ConstantKind::C,
        dim: n,
        value: T::lit(value),
        method: Method::MonteCarlo,
        std_error: T::lit(std_error),
    };
    if n == 1 {
        return Ok(mc(2.0, 0.0));
    }
    check_samples(samples)?;
    let factor = sphere_area::<f64>(n - 1) / n as f64;
    let (mean, se) = blocked_mean(samples, seed, |rng| {
        let mut r2 = 0.0;
        let mut first = 0.0;
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            if i == 0 {
                first = z;
            }
            r2 += z * z;
        }
        factor * first.abs() / r2.sqrt()
    });
    Ok(mc(mean, se))
}

/// `Λ(η, ν, a, b)`.
pub fn profile_integral<T: Scalar>(eta: &Mollifier<T>, nu: &[T], a: T, b: T) -> Result<T> {
    eta.profile_integral(nu, a, b)
}
