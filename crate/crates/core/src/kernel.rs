//! Mollifier kernels and their one-dimensional marginals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::scalar::{dot, norm, Scalar};
use crate::special::sphere_area;

/// Number of intervals of every tabulated profile.
const TABLE_INTERVALS: usize = 2048;

/// Ratio of the Gaussian cutoff to σ.
pub const GAUSSIAN_CUTOFF: f64 = 6.0;

/// Serializable description of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `exp(-r²/2σ²) − exp(-R²/2σ²)` on `r < R = 6σ`.
    Gaussian {
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    /// `exp(-1/(1 − r²/R²))` on `r < R`.
    Bump {
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    /// `Π (1 − |z_i|/R)₊ / R`.
    Hat {
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    /// `z₁ · bump(z)`, scaled to unit L¹ norm; its mass is zero.
    OddBump {
        #[serde(default = "one")]
        radius: f64,
    },
    /// Another kernel sampled on a uniform grid with `points` nodes per axis.
    Sampled { base: Box<KernelSpec>, points: usize },
}

fn one() -> f64 {
    1.0
}
fn default_sigma() -> f64 {
    1.0 / GAUSSIAN_CUTOFF
}

impl KernelSpec {
    pub fn build<T: Scalar>(&self, dim: usize) -> Result<Mollifier<T>> {
        match self {
            KernelSpec::Gaussian { sigma, mass } => Mollifier::gaussian(dim, T::lit(*sigma), T::lit(*mass)),
            KernelSpec::Bump { radius, mass } => Mollifier::bump(dim, T::lit(*radius), T::lit(*mass)),
            KernelSpec::Hat { radius, mass } => Mollifier::hat(dim, T::lit(*radius), T::lit(*mass)),
            KernelSpec::OddBump { radius } => Mollifier::odd_bump(dim, T::lit(*radius)),
            KernelSpec::Sampled { base, points } => Mollifier::sampled_from(&base.build(dim)?, *points),
        }
    }
}

/// Piecewise cubic Hermite table on a uniform grid with its exact running integral.
#[derive(Debug, Clone)]
pub struct HermiteTable<T> {
    a: T,
    h: T,
    v: Vec<T>,
    d: Vec<T>,
    cum: Vec<T>,
}

impl<T: Scalar> HermiteTable<T> {
    /// Tabulates `f` (value, derivative) on `[a, b]`.
    pub fn new<F: Fn(T) -> (T, T)>(a: T, b: T, n: usize, f: F) -> Self {
        let h = (b - a) / T::from_count(n);
        let (v, d): (Vec<T>, Vec<T>) = (0..=n).map(|i| f(a + h * T::from_count(i))).unzip();
        let mut cum = vec![T::zero(); n + 1];
        for i in 0..n {
            cum[i + 1] = cum[i] + h * (v[i] + v[i + 1]) * T::lit(0.5) + h * h * (d[i] - d[i + 1]) / T::lit(12.0);
        }
        Self { a, h, v, d, cum }
    }

    fn n(&self) -> usize {
        self.v.len() - 1
    }

    fn end(&self) -> T {
        self.a + self.h * T::from_count(self.n())
    }

    fn locate(&self, t: T) -> (usize, T) {
        let s = ((t - self.a) / self.h).max(T::zero());
        let i = s.floor().to_usize().unwrap_or(0).min(self.n() - 1);
        (i, s - T::from_count(i))
    }

    /// Interpolated value, zero outside the table range.
    pub fn value(&self, t: T) -> T {
        if !(t >= self.a && t <= self.end()) {
            return T::zero();
        }
        let (i, s) = self.locate(t);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = T::lit(2.0) * s3 - T::lit(3.0) * s2 + T::one();
        let h10 = s3 - T::lit(2.0) * s2 + s;
        let h01 = T::lit(-2.0) * s3 + T::lit(3.0) * s2;
        let h11 = s3 - s2;
        h00 * self.v[i] + h10 * self.h * self.d[i] + h01 * self.v[i + 1] + h11 * self.h * self.d[i + 1]
    }

    /// `∫_a^t` of the interpolant, clamped to the table range.
    pub fn integral(&self, t: T) -> T {
        if t <= self.a {
            return T::zero();
        }
        if t >= self.end() {
            return self.cum[self.n()];
        }
        let (i, s) = self.locate(t);
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        // antiderivatives of the Hermite basis on [0, s]
        let i00 = s4 * T::lit(0.5) - s3 + s;
        let i10 = s4 * T::lit(0.25) - s3 * T::lit(2.0 / 3.0) + s2 * T::lit(0.5);
        let i01 = -s4 * T::lit(0.5) + s3;
        let i11 = s4 * T::lit(0.25) - s3 / T::lit(3.0);
        self.cum[i]
            + self.h * (i00 * self.v[i] + i10 * self.h * self.d[i] + i01 * self.v[i + 1] + i11 * self.h * self.d[i + 1])
    }

    pub fn total(&self) -> T {
        self.cum[self.n()]
    }
}

/// Radial profile `φ` with derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Profile<T> {
    Gaussian { sigma: T, cutoff: T },
    Bump { radius: T },
}

impl<T: Scalar> Profile<T> {
    fn radius(&self) -> T {
        match *self {
            Profile::Gaussian { cutoff, .. } => cutoff,
            Profile::Bump { radius } => radius,
        }
    }

    fn eval(&self, r: T) -> (T, T) {
        match *self {
            Profile::Gaussian { sigma, cutoff } => {
                if r >= cutoff {
                    return (T::zero(), T::zero());
                }
                let s2 = sigma * sigma;
                let g = (-r * r / (T::lit(2.0) * s2)).exp();
                let gc = (-cutoff * cutoff / (T::lit(2.0) * s2)).exp();
                (g - gc, -r / s2 * g)
            }
            Profile::Bump { radius } => {
                let u = r / radius;
                if u >= T::one() {
                    return (T::zero(), T::zero());
                }
                let w = T::one() - u * u;
                let v = (-T::one() / w).exp();
                (v, v * (T::lit(-2.0) * u / radius) / (w * w))
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Shape<T> {
    /// `η(z) = scale · φ(|z|)`.
    Radial { profile: Profile<T> },
    /// `η(z) = scale · Π (1 − |z_i|/R)₊ / R`.
    Hat { radius: T },
    /// `η(z) = scale · z₁ φ(|z|)`.
    Odd { profile: Profile<T> },
    /// Multilinear interpolant of node values on `[-w, w]^N`.
    Sampled { half_width: T, n: usize, values: Vec<T> },
}

/// Compactly supported kernel `η : R^N → R`.
#[derive(Debug, Clone)]
pub struct Mollifier<T> {
    dim: usize,
    spec: Option<KernelSpec>,
    shape: Shape<T>,
    scale: T,
    support_radius: T,
    mass: T,
    l1: T,
    w11: T,
    /// Mass cut off by truncation, relative to the untruncated kernel.
    truncation_loss: T,
    /// Marginal of `φ` along any direction (radial and odd shapes), unscaled.
    marginal: Option<HermiteTable<T>>,
    /// First moment `t·M(t)` of the marginal (odd shape), unscaled.
    moment: Option<HermiteTable<T>>,
    /// `∫_0^ρ ψ(r) r^{N−1} dr` with `ψ = φ` (radial) or `r φ` (odd), unscaled.
    radial_cumulative: Option<HermiteTable<T>>,
    /// Axis marginals of a sampled kernel: node values on the kernel grid.
    axis_marginals: Vec<Vec<T>>,
}

impl<T: Scalar> Mollifier<T> {
    fn check_dim(dim: usize) -> Result<()> {
        if (1..=3).contains(&dim) {
            Ok(())
        } else {
            Err(Error::UnsupportedDimension(dim, 3))
        }
    }

    fn check_len(x: T, what: &str) -> Result<()> {
        if x > T::zero() && x.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidKernel(format!("{what} must be positive and finite")))
        }
    }

    fn radial_like(dim: usize, profile: Profile<T>, odd: bool) -> Self {
        let r = profile.radius();
        let n = dim;
        let marginal = HermiteTable::new(-r, r, TABLE_INTERVALS, |t| radial_marginal(profile, n, t));
        let moment = odd.then(|| {
            HermiteTable::new(-r, r, TABLE_INTERVALS, |t| {
                let (m, dm) = radial_marginal(profile, n, t);
                (t * m, m + t * dm)
            })
        });
        let radial_cumulative = HermiteTable::new(T::zero(), r, TABLE_INTERVALS, |s| {
            let (p, dp) = profile.eval(s);
            let k = T::from_count(n - 1);
            let pw = if n == 1 { T::one() } else { s.powi(n as i32 - 1) };
            let dpw = if n == 1 { T::zero() } else { k * s.powi(n as i32 - 2) };
            if odd {
                (s * p * pw, p * pw + s * dp * pw + s * p * dpw)
            } else {
                (p * pw, dp * pw + p * dpw)
            }
        });
        Self {
            dim,
            spec: None,
            shape: if odd { Shape::Odd { profile } } else { Shape::Radial { profile } },
            scale: T::one(),
            support_radius: r,
            mass: T::zero(),
            l1: T::zero(),
            w11: T::zero(),
            truncation_loss: T::zero(),
            marginal: Some(marginal),
            moment,
            radial_cumulative: Some(radial_cumulative),
            axis_marginals: Vec::new(),
        }
    }

    /// Truncated Gaussian with cutoff `6σ`, shifted to vanish continuously at the cutoff.
    pub fn gaussian(dim: usize, sigma: T, mass: T) -> Result<Self> {
        Self::check_dim(dim)?;
        Self::check_len(sigma, "sigma")?;
        let cutoff = sigma * T::lit(GAUSSIAN_CUTOFF);
        let mut k = Self::radial_like(dim, Profile::Gaussian { sigma, cutoff }, false);
        let raw = k.marginal.as_ref().expect("radial").total();
        k.scale = mass / raw;
        // untruncated integral of exp(-r²/2σ²) is (2π)^{N/2} σ^N
        let full = (T::TAU()).powf(T::from_count(dim) * T::lit(0.5)) * sigma.powi(dim as i32);
        k.truncation_loss = (full - raw) / full;
        k.finish_radial(mass, KernelSpec::Gaussian { sigma: sigma.to_f64_lossy(), mass: mass.to_f64_lossy() });
        Ok(k)
    }

    pub fn bump(dim: usize, radius: T, mass: T) -> Result<Self> {
        Self::check_dim(dim)?;
        Self::check_len(radius, "radius")?;
        let mut k = Self::radial_like(dim, Profile::Bump { radius }, false);
        k.scale = mass / k.marginal.as_ref().expect("radial").total();
        k.finish_radial(mass, KernelSpec::Bump { radius: radius.to_f64_lossy(), mass: mass.to_f64_lossy() });
        Ok(k)
    }

    fn finish_radial(&mut self, mass: T, spec: KernelSpec) {
        let Shape::Radial { profile } = self.shape else { unreachable!() };
        let (a, g) = radial_norms(profile, self.dim);
        self.mass = mass;
        self.l1 = self.scale.abs() * a;
        self.w11 = self.l1 + self.scale.abs() * g;
        self.spec = Some(spec);
    }

    /// Tensor hat with per-axis half-width `radius`.
    pub fn hat(dim: usize, radius: T, mass: T) -> Result<Self> {
        Self::check_dim(dim)?;
        Self::check_len(radius, "radius")?;
        let l1 = mass.abs();
        let mut k = Self {
            dim,
            spec: Some(KernelSpec::Hat { radius: radius.to_f64_lossy(), mass: mass.to_f64_lossy() }),
            shape: Shape::Hat { radius },
            scale: mass,
            support_radius: radius * T::from_count(dim).sqrt(),
            mass,
            l1,
            w11: l1 + l1 * T::lit(2.0) / radius,
            truncation_loss: T::zero(),
            marginal: None,
            moment: None,
            radial_cumulative: None,
            axis_marginals: Vec::new(),
        };
        if dim > 1 {
            k.w11 = l1 + k.gradient_l1_numeric();
        }
        Ok(k)
    }

    /// `z₁ φ_bump(|z|)` with unit L¹ norm and zero mass.
    pub fn odd_bump(dim: usize, radius: T) -> Result<Self> {
        Self::check_dim(dim)?;
        Self::check_len(radius, "radius")?;
        let profile = Profile::Bump { radius };
        let mut k = Self::radial_like(dim, profile, true);
        k.spec = Some(KernelSpec::OddBump { radius: radius.to_f64_lossy() });
        // ∫|z₁|φ = (∫_{S^{N−1}}|θ₁|) ∫ r^N φ dr
        let ang = abs_first_coordinate_integral::<T>(dim);
        let raw_l1 = ang * k.radial_cumulative.as_ref().expect("odd").total();
        k.scale = T::one() / raw_l1;
        k.mass = T::zero();
        k.l1 = T::one();
        k.w11 = T::one() + k.gradient_l1_numeric();
        Ok(k)
    }

    /// Samples `base` on a uniform grid with `points` nodes per axis covering its support box.
    pub fn sampled_from(base: &Mollifier<T>, points: usize) -> Result<Self> {
        if points < 5 || points.is_multiple_of(2) {
            return Err(Error::InvalidKernel("sampled kernels need an odd node count of at least 5".into()));
        }
        let dim = base.dim;
        let w = match base.shape {
            Shape::Hat { radius } => radius,
            _ => base.support_radius,
        };
        let h = T::lit(2.0) * w / T::from_count(points - 1);
        let total = points.pow(dim as u32);
        let mut values = Vec::with_capacity(total);
        let mut z = vec![T::zero(); dim];
        for flat in 0..total {
            let mut rem = flat;
            for zi in z.iter_mut().rev() {
                *zi = -w + h * T::from_count(rem % points);
                rem /= points;
            }
            values.push(base.eval(&z));
        }
        Self::sampled(dim, w, points, values, base.spec.clone())
    }

    /// Multilinear interpolant of row-major `values` on `[-w, w]^dim`.
    pub fn sampled(dim: usize, half_width: T, points: usize, values: Vec<T>, base: Option<KernelSpec>) -> Result<Self> {
        Self::check_dim(dim)?;
        Self::check_len(half_width, "half width")?;
        if values.len() != points.pow(dim as u32) || points < 2 {
            return Err(Error::InvalidKernel("sampled values do not match the grid".into()));
        }
        let h = T::lit(2.0) * half_width / T::from_count(points - 1);
        let tw = |i: usize| if i == 0 || i == points - 1 { h * T::lit(0.5) } else { h };
        let mut axis_marginals = vec![vec![T::zero(); points]; dim];
        let mut mass = T::zero();
        for (flat, &v) in values.iter().enumerate() {
            let mut idx = vec![0usize; dim];
            let mut rem = flat;
            for slot in idx.iter_mut().rev() {
                *slot = rem % points;
                rem /= points;
            }
            let wall: T = idx.iter().fold(T::one(), |a, &i| a * tw(i));
            mass += wall * v;
            for k in 0..dim {
                axis_marginals[k][idx[k]] += wall / tw(idx[k]) * v;
            }
        }
        let mut k = Self {
            dim,
            spec: base.map(|b| KernelSpec::Sampled { base: Box::new(b), points }),
            shape: Shape::Sampled { half_width, n: points, values },
            scale: T::one(),
            support_radius: half_width * T::from_count(dim).sqrt(),
            mass,
            l1: T::zero(),
            w11: T::zero(),
            truncation_loss: T::zero(),
            marginal: None,
            moment: None,
            radial_cumulative: None,
            axis_marginals,
        };
        k.l1 = k.l1_numeric();
        k.w11 = k.l1 + k.gradient_l1_numeric();
        Ok(k)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> Option<&KernelSpec> {
        self.spec.as_ref()
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn l1_norm(&self) -> T {
        self.l1
    }

    pub fn w11_norm(&self) -> T {
        self.w11
    }

    pub fn support_radius(&self) -> T {
        self.support_radius
    }

    pub fn truncation_loss(&self) -> T {
        self.truncation_loss
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.shape, Shape::Radial { .. })
    }

    /// True when `η` is a product of identical even 1D factors (tensor hat).
    pub fn is_tensor(&self) -> bool {
        matches!(self.shape, Shape::Hat { .. })
    }

    /// Half-width of the smallest cube containing the support.
    pub fn box_radius(&self) -> T {
        match self.shape {
            Shape::Hat { radius } => radius,
            Shape::Sampled { half_width, .. } => half_width,
            _ => self.support_radius,
        }
    }

    /// Returns the same shape scaled to the given mass (not available for zero-mass shapes).
    pub fn with_mass(&self, mass: T) -> Result<Self> {
        if self.mass == T::zero() {
            return Err(Error::InvalidKernel("cannot rescale a zero-mass kernel to a target mass".into()));
        }
        let f = mass / self.mass;
        let mut k = self.clone();
        k.scale *= f;
        k.mass = mass;
        k.l1 *= f.abs();
        k.w11 *= f.abs();
        if let Shape::Sampled { values, .. } = &mut k.shape {
            values.iter_mut().for_each(|v| *v *= f);
            k.axis_marginals.iter_mut().flatten().for_each(|v| *v *= f);
        }
        k.spec = match k.spec {
            Some(KernelSpec::Gaussian { sigma, .. }) => Some(KernelSpec::Gaussian { sigma, mass: mass.to_f64_lossy() }),
            Some(KernelSpec::Bump { radius, .. }) => Some(KernelSpec::Bump { radius, mass: mass.to_f64_lossy() }),
            Some(KernelSpec::Hat { radius, .. }) => Some(KernelSpec::Hat { radius, mass: mass.to_f64_lossy() }),
            _ => None,
        };
        Ok(k)
    }

    pub fn eval(&self, z: &[T]) -> T {
        match &self.shape {
            Shape::Radial { profile } => self.scale * profile.eval(norm(z)).0,
            Shape::Odd { profile } => self.scale * z[0] * profile.eval(norm(z)).0,
            Shape::Hat { radius } => {
                let mut p = self.scale;
                for &zi in z {
                    let f = T::one() - zi.abs() / *radius;
                    if f <= T::zero() {
                        return T::zero();
                    }
                    p *= f / *radius;
                }
                p
            }
            Shape::Sampled { half_width, n, values } => sampled_eval(*half_width, *n, values, z),
        }
    }

    /// Gradient of `η`, by central differences for the sampled shape.
    pub fn grad(&self, z: &[T], out: &mut [T]) {
        match &self.shape {
            Shape::Radial { profile } | Shape::Odd { profile } => {
                let r = norm(z);
                let (p, dp) = profile.eval(r);
                let odd = matches!(self.shape, Shape::Odd { .. });
                for i in 0..self.dim {
                    let radial = if r > T::zero() { dp * z[i] / r } else { T::zero() };
                    out[i] = if odd {
                        z[0] * radial + if i == 0 { p } else { T::zero() }
                    } else {
                        radial
                    } * self.scale;
                }
            }
            Shape::Hat { radius } => {
                let f: Vec<T> = z.iter().map(|&zi| (T::one() - zi.abs() / *radius).max(T::zero()) / *radius).collect();
                for i in 0..self.dim {
                    let mut p = -z[i].signum() / (*radius * *radius) * self.scale;
                    if f[i] == T::zero() {
                        p = T::zero();
                    }
                    for (j, &fj) in f.iter().enumerate() {
                        if j != i {
                            p *= fj;
                        }
                    }
                    out[i] = p;
                }
            }
            Shape::Sampled { half_width, n, values } => {
                let h = T::lit(2.0) * *half_width / T::from_count(*n - 1) * T::lit(1e-3);
                let mut zp = z.to_vec();
                for i in 0..self.dim {
                    zp[i] = z[i] + h;
                    let a = sampled_eval(*half_width, *n, values, &zp);
                    zp[i] = z[i] - h;
                    let b = sampled_eval(*half_width, *n, values, &zp);
                    zp[i] = z[i];
                    out[i] = (a - b) / (T::lit(2.0) * h);
                }
            }
        }
    }

    /// Mass of `η` on `{z·ν < t}`.
    pub fn marginal_cdf(&self, nu: &[T], t: T) -> T {
        match &self.shape {
            Shape::Radial { .. } => self.scale * self.marginal.as_ref().expect("radial").integral(t),
            Shape::Odd { .. } => {
                let m = self.moment.as_ref().expect("odd");
                self.scale * nu[0] * m.integral(t)
            }
            Shape::Hat { radius } => match axis_of(nu) {
                Some(_) => self.scale * hat_cdf(t, *radius),
                None => self.marginal_cdf_numeric(nu, t),
            },
            Shape::Sampled { half_width, n, .. } => match axis_of(nu) {
                Some((k, s)) => {
                    let m = &self.axis_marginals[k];
                    if s > T::zero() {
                        pl_cdf(m, *half_width, *n, t)
                    } else {
                        // marginal along -e_k is t ↦ m(-t)
                        self.mass - pl_cdf(m, *half_width, *n, -t)
                    }
                }
                None => self.marginal_cdf_numeric(nu, t),
            },
        }
    }

    /// `Λ(ν, a, b)`: mass of `η` between `{z·ν = a}` and `{z·ν = b}`.
    pub fn profile_integral(&self, nu: &[T], a: T, b: T) -> Result<T> {
        if nu.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: nu.len() });
        }
        if (norm(nu) - T::one()).abs() > T::lit(1e-12) {
            return Err(Error::InvalidInput("profile direction must be a unit vector".into()));
        }
        if a.is_nan() || b.is_nan() || a > b {
            return Err(Error::InvalidInput("profile integral needs a <= b".into()));
        }
        let fb = if b == T::infinity() { self.mass } else { self.marginal_cdf(nu, b) };
        let fa = if a == T::neg_infinity() { T::zero() } else { self.marginal_cdf(nu, a) };
        Ok(fb - fa)
    }

    /// `m(t) = ∫_{z·ν = t} η`.
    pub fn marginal_density(&self, nu: &[T], t: T) -> T {
        match &self.shape {
            Shape::Radial { .. } => self.scale * self.marginal.as_ref().expect("radial").value(t),
            Shape::Odd { .. } => self.scale * nu[0] * self.moment.as_ref().expect("odd").value(t),
            Shape::Hat { radius } if axis_of(nu).is_some() => {
                self.scale * (T::one() - t.abs() / *radius).max(T::zero()) / *radius
            }
            Shape::Sampled { half_width, n, .. } if axis_of(nu).is_some() => {
                let (k, s) = axis_of(nu).expect("checked");
                pl_eval(&self.axis_marginals[k], *half_width, *n, s * t)
            }
            _ => self.marginal_density_numeric(nu, t),
        }
    }

    /// Points where the marginal along an axis is not smooth.
    pub fn marginal_knots(&self) -> Vec<T> {
        match &self.shape {
            Shape::Hat { radius } => vec![-*radius, T::zero(), *radius],
            Shape::Sampled { half_width, n, .. } => {
                let h = T::lit(2.0) * *half_width / T::from_count(*n - 1);
                (0..*n).map(|i| -*half_width + h * T::from_count(i)).collect()
            }
            _ => vec![-self.support_radius, self.support_radius],
        }
    }

    /// Angular factor and radial cumulative for shapes of the form
    /// `a(θ) ψ(r)`: returns `a(θ)·∫_0^ρ ψ(r) r^{N−1} dr`.
    pub fn ray_mass(&self, e: &[T], rho: T) -> Option<T> {
        let h = self.radial_cumulative.as_ref()?;
        match self.shape {
            Shape::Radial { .. } => Some(self.scale * h.integral(rho)),
            Shape::Odd { .. } => Some(self.scale * e[0] * h.integral(rho)),
            _ => None,
        }
    }

    fn marginal_density_numeric(&self, nu: &[T], t: T) -> T {
        let r = self.support_radius;
        if t.abs() >= r {
            return T::zero();
        }
        let gl = GaussLegendre::<T>::new(8);
        let rr = (r * r - t * t).sqrt();
        let mut z = vec![T::zero(); self.dim];
        match self.dim {
            1 => self.eval(&[nu[0] * t]),
            2 => {
                let perp = [-nu[1], nu[0]];
                let breaks = uniform_breaks(-rr, rr, 64);
                gl.composite(&breaks, |s| {
                    z[0] = t * nu[0] + s * perp[0];
                    z[1] = t * nu[1] + s * perp[1];
                    self.eval(&z)
                })
            }
            _ => {
                let (e1, e2) = orthonormal_complement(nu);
                let rb = uniform_breaks(T::zero(), rr, 32);
                let ab = uniform_breaks(T::zero(), T::TAU(), 64);
                gl.composite(&rb, |s| {
                    s * gl.composite(&ab, |a| {
                        let (c, sn) = (a.cos(), a.sin());
                        for i in 0..3 {
                            z[i] = t * nu[i] + s * (c * e1[i] + sn * e2[i]);
                        }
                        self.eval(&z)
                    })
                })
            }
        }
    }

    fn marginal_cdf_numeric(&self, nu: &[T], t: T) -> T {
        let r = self.support_radius;
        let top = t.min(r);
        if top <= -r {
            return T::zero();
        }
        let gl = GaussLegendre::<T>::new(8);
        let breaks = uniform_breaks(-r, top, 64);
        gl.composite(&breaks, |s| self.marginal_density_numeric(nu, s))
    }

    /// `∫ |η|` by tensor quadrature over the support box.
    fn l1_numeric(&self) -> T {
        self.integrate_box(|z, k| k.eval(z).abs())
    }

    /// `∫ |∇η|` by quadrature: polar for radial-type shapes, tensor otherwise.
    fn gradient_l1_numeric(&self) -> T {
        let mut g = vec![T::zero(); self.dim];
        match self.shape {
            Shape::Odd { .. } => {
                let r = self.support_radius;
                polar_integrate(self.dim, r, |z| {
                    self.grad(z, &mut g);
                    norm(&g)
                })
            }
            _ => self.integrate_box(|z, k| {
                k.grad(z, &mut g);
                norm(&g)
            }),
        }
    }

    fn integrate_box<F: FnMut(&[T], &Self) -> T>(&self, mut f: F) -> T {
        let w = self.box_radius();
        let breaks = match &self.shape {
            Shape::Sampled { n, .. } => uniform_breaks(-w, w, *n - 1),
            _ => uniform_breaks(-w, w, if self.dim == 3 { 24 } else { 64 }),
        };
        let gl = GaussLegendre::<T>::new(4);
        let pts: Vec<(T, T)> = breaks
            .windows(2)
            .flat_map(|p| gl.mapped(p[0], p[1]).collect::<Vec<_>>())
            .collect();
        let mut z = vec![T::zero(); self.dim];
        let mut acc = T::zero();
        let total = pts.len().pow(self.dim as u32);
        for flat in 0..total {
            let mut rem = flat;
            let mut wt = T::one();
            for zi in z.iter_mut() {
                let (x, w) = pts[rem % pts.len()];
                rem /= pts.len();
                *zi = x;
                wt *= w;
            }
            acc += wt * f(&z, self);
        }
        acc
    }
}

fn uniform_breaks<T: Scalar>(a: T, b: T, n: usize) -> Vec<T> {
    (0..=n).map(|i| a + (b - a) * T::from_count(i) / T::from_count(n)).collect()
}

fn axis_of<T: Scalar>(nu: &[T]) -> Option<(usize, T)> {
    let tol = T::lit(1e-12);
    let mut found = None;
    for (i, &c) in nu.iter().enumerate() {
        if (c.abs() - T::one()).abs() <= tol {
            found = Some((i, c.signum()));
        } else if c.abs() > tol {
            return None;
        }
    }
    found
}

fn orthonormal_complement<T: Scalar>(nu: &[T]) -> (Vec<T>, Vec<T>) {
    let pick = if nu[0].abs() < T::lit(0.9) { [T::one(), T::zero(), T::zero()] } else { [T::zero(), T::one(), T::zero()] };
    let d = dot(&pick, nu);
    let mut e1: Vec<T> = (0..3).map(|i| pick[i] - d * nu[i]).collect();
    let n1 = norm(&e1);
    e1.iter_mut().for_each(|v| *v /= n1);
    let e2 = vec![
        nu[1] * e1[2] - nu[2] * e1[1],
        nu[2] * e1[0] - nu[0] * e1[2],
        nu[0] * e1[1] - nu[1] * e1[0],
    ];
    (e1, e2)
}

/// CDF of the unit-mass 1D hat `(1 − |t|/R)₊ / R`.
pub fn hat_cdf<T: Scalar>(t: T, r: T) -> T {
    if t <= -r {
        T::zero()
    } else if t >= r {
        T::one()
    } else if t <= T::zero() {
        (t + r) * (t + r) / (T::lit(2.0) * r * r)
    } else {
        T::one() - (r - t) * (r - t) / (T::lit(2.0) * r * r)
    }
}

fn pl_eval<T: Scalar>(m: &[T], w: T, n: usize, t: T) -> T {
    let h = T::lit(2.0) * w / T::from_count(n - 1);
    let s = (t + w) / h;
    if !(s >= T::zero() && s <= T::from_count(n - 1)) {
        return T::zero();
    }
    let i = s.floor().to_usize().unwrap_or(0).min(n - 2);
    let f = s - T::from_count(i);
    m[i] * (T::one() - f) + m[i + 1] * f
}

fn pl_cdf<T: Scalar>(m: &[T], w: T, n: usize, t: T) -> T {
    let h = T::lit(2.0) * w / T::from_count(n - 1);
    let s = ((t + w) / h).max(T::zero()).min(T::from_count(n - 1));
    let i = s.floor().to_usize().unwrap_or(0).min(n - 2);
    let f = s - T::from_count(i);
    let mut acc = T::zero();
    for j in 0..i {
        acc += (m[j] + m[j + 1]) * h * T::lit(0.5);
    }
    acc + h * (m[i] * f + (m[i + 1] - m[i]) * f * f * T::lit(0.5))
}

fn sampled_eval<T: Scalar>(w: T, n: usize, values: &[T], z: &[T]) -> T {
    let dim = z.len();
    let h = T::lit(2.0) * w / T::from_count(n - 1);
    let mut base = 0usize;
    let mut frac = [T::zero(); 3];
    let mut stride = [0usize; 3];
    let mut s = 1usize;
    for k in (0..dim).rev() {
        stride[k] = s;
        s *= n;
    }
    for k in 0..dim {
        let u = (z[k] + w) / h;
        if !(u >= T::zero() && u <= T::from_count(n - 1)) {
            return T::zero();
        }
        let i = u.floor().to_usize().unwrap_or(0).min(n - 2);
        frac[k] = u - T::from_count(i);
        base += i * stride[k];
    }
    let mut acc = T::zero();
    for corner in 0..(1usize << dim) {
        let mut wt = T::one();
        let mut idx = base;
        for k in 0..dim {
            if corner >> k & 1 == 1 {
                wt *= frac[k];
                idx += stride[k];
            } else {
                wt *= T::one() - frac[k];
            }
        }
        acc += wt * values[idx];
    }
    acc
}

/// `M(t) = ∫_{H₀} φ(|tν + ξ|) dξ` and its derivative.
fn radial_marginal<T: Scalar>(p: Profile<T>, n: usize, t: T) -> (T, T) {
    let r = p.radius();
    if t.abs() >= r {
        return (T::zero(), T::zero());
    }
    match n {
        1 => p.eval(t.abs()).map_sign(t),
        // s dr = ... with r = √(t² + s²): M(t) = ω_{N−2} ∫_{|t|}^R φ(r) r (r² − t²)^{(N−3)/2} dr
        2 => {
            // M(t) = 2∫_0^{√(R²−t²)} φ(√(t²+s²)) ds, M'(t) = 2∫ φ'(r) t/r ds
            let top = (r * r - t * t).sqrt();
            let gl = GaussLegendre::<T>::new(16);
            // substitution s = top·sin(θ) clusters nodes near the support edge
            let breaks = uniform_breaks(T::zero(), T::FRAC_PI_2(), 16);
            let mut m = T::zero();
            let mut dm = T::zero();
            for w in breaks.windows(2) {
                for (th, wt) in gl.mapped(w[0], w[1]) {
                    let s = top * th.sin();
                    let ds = top * th.cos();
                    let rr = (t * t + s * s).sqrt();
                    let (v, dv) = p.eval(rr);
                    m += wt * ds * v;
                    if rr > T::zero() {
                        dm += wt * ds * dv * t / rr;
                    }
                }
            }
            (T::lit(2.0) * m, T::lit(2.0) * dm)
        }
        _ => {
            // M(t) = 2π ∫_{|t|}^R φ(r) r dr
            let a = t.abs();
            let gl = GaussLegendre::<T>::new(16);
            let breaks = uniform_breaks(a, r, 16);
            let m = gl.composite(&breaks, |s| p.eval(s).0 * s);
            (T::TAU() * m, -T::TAU() * p.eval(a).0 * t)
        }
    }
}

trait MapSign<T> {
    fn map_sign(self, t: T) -> (T, T);
}

impl<T: Scalar> MapSign<T> for (T, T) {
    /// Converts `(φ(|t|), φ'(|t|))` to `(φ(|t|), d/dt φ(|t|))`.
    fn map_sign(self, t: T) -> (T, T) {
        (self.0, if t < T::zero() { -self.1 } else { self.1 })
    }
}

/// `(∫ φ(|z|) dz, ∫ |φ'(|z|)| dz)` over `R^N`.
fn radial_norms<T: Scalar>(p: Profile<T>, n: usize) -> (T, T) {
    let r = p.radius();
    let gl = GaussLegendre::<T>::new(16);
    let breaks = uniform_breaks(T::zero(), r, 64);
    let w = sphere_area::<T>(n - 1);
    let a = gl.composite(&breaks, |s| p.eval(s).0.abs() * s.powi(n as i32 - 1));
    let g = gl.composite(&breaks, |s| p.eval(s).1.abs() * s.powi(n as i32 - 1));
    (w * a, w * g)
}

/// `∫_{S^{N−1}} |θ₁|`.
fn abs_first_coordinate_integral<T: Scalar>(n: usize) -> T {
    match n {
        1 => T::lit(2.0),
        2 => T::lit(4.0),
        _ => T::TAU(),
    }
}

/// `∫_{B_R} f` in polar/spherical coordinates.
fn polar_integrate<T: Scalar, F: FnMut(&[T]) -> T>(n: usize, r: T, mut f: F) -> T {
    let gl = GaussLegendre::<T>::new(16);
    let rb = uniform_breaks(T::zero(), r, 32);
    match n {
        1 => gl.composite(&rb, |x| f(&[x]) + f(&[-x])),
        2 => {
            // angular panels end on the axes, where |z_i| has kinks
            let glt = GaussLegendre::<T>::new(32);
            glt.composite(&uniform_breaks(T::zero(), T::TAU(), 8), |th| {
                let (c, s) = (th.cos(), th.sin());
                gl.composite(&rb, |rr| rr * f(&[rr * c, rr * s]))
            })
        }
        _ => {
            let m = 128;
            let glc = GaussLegendre::<T>::new(32);
            let mut acc = T::zero();
            for (ct, wc) in glc.mapped(-T::one(), T::one()) {
                let st = (T::one() - ct * ct).sqrt();
                for k in 0..m {
                    let ph = T::TAU() * T::from_count(k) / T::from_count(m);
                    let e = [st * ph.cos(), st * ph.sin(), ct];
                    acc += wc * gl.composite(&rb, |rr| rr * rr * f(&[rr * e[0], rr * e[1], rr * e[2]]));
                }
            }
            acc * T::TAU() / T::from_count(m)
        }
    }
}
