//! Energy of a single mollified 1D jump in scaled variables.
//!
//! With `t = (x − p)/ε` the mollified step is `u⁻ m + J P(t)`, where
//! `P(t) = m − F(−t)` and `F` is the kernel cumulative. `P` is constant
//! outside the core `[−R, R]`, so the square `(−L⁻, L⁺)²` splits into the
//! far/far rectangle (closed form), two core/far strips (1D integrals) and
//! the core square (a 2D integral in `(d, s)`).

use super::{SeminormMethod, SeminormResult};
use crate::error::{Error, Result};
use crate::fields::{Aabb, JumpGeometry, PiecewiseConstantField};
use crate::kernel::Mollifier;
use crate::quadrature::{clean_breaks, GaussLegendre};
use crate::scalar::{norm, Scalar};

/// Geometric panels per unit of `ln(2R/δ)` in the core square.
const RADIAL_PANELS: usize = 6;

struct Profile<'a, T> {
    eta: &'a Mollifier<T>,
    mass: T,
    radius: T,
    knots: Vec<T>,
}

impl<T: Scalar> Profile<'_, T> {
    fn p(&self, s: T) -> T {
        if s <= -self.radius {
            T::zero()
        } else if s >= self.radius {
            self.mass
        } else {
            self.mass - self.eta.marginal_cdf(&[T::one()], -s)
        }
    }
}

/// Breakpoints on `[a, b]` graded geometrically toward `b` (or `a`).
fn graded_toward<T: Scalar>(a: T, b: T, toward_b: bool, levels: usize, extra: &[T]) -> Vec<T> {
    let len = b - a;
    let mut pts: Vec<T> = extra.to_vec();
    let mut h = len;
    for _ in 0..levels {
        h *= T::lit(0.5);
        pts.push(if toward_b { b - h } else { a + h });
    }
    clean_breaks(pts, a, b)
}

/// Returns `(value, |fine − coarse|)` of the jump-normalized integral.
fn unit_jump_integral<T: Scalar>(prof: &Profile<'_, T>, lm: T, lp: T, q: T) -> (T, T) {
    let r = prof.radius;
    let two = T::lit(2.0);
    let m = prof.mass;
    let far = two * m.abs().powf(q) * ((r + lm) * (r + lp) / (two * r * (lp + lm))).ln();

    let knots = clean_breaks(prof.knots.iter().map(|&k| -k).collect(), -r, r);
    let strips = |gl: &GaussLegendre<T>| {
        let right = graded_toward(-r, r, true, 50, &knots);
        let a = gl.composite(&right, |s| (prof.p(s) - m).abs().powf(q) * (T::one() / (r - s) - T::one() / (lp - s)));
        let left = graded_toward(-r, r, false, 50, &knots);
        let b = gl.composite(&left, |s| prof.p(s).abs().powf(q) * (T::one() / (s + r) - T::one() / (s + lm)));
        two * (a + b)
    };

    // core square: 2 ∫_δ^{2R} d^{−2} ∫_{−R}^{R−d} |P(s+d) − P(s)|^q ds dd
    let delta = r * T::lit(1e-9);
    let decades = (two * r / delta).ln();
    let n_panels = (decades * T::from_count(RADIAL_PANELS)).ceil().to_usize().unwrap_or(1).max(1);
    let mut dbreaks: Vec<T> = (0..=n_panels)
        .map(|i| delta * (two * r / delta).powf(T::from_count(i) / T::from_count(n_panels)))
        .collect();
    for &a in &knots {
        for &b in &knots {
            if b > a {
                dbreaks.push(b - a);
            }
        }
    }
    let dbreaks = clean_breaks(dbreaks, delta, two * r);
    let core = |gl: &GaussLegendre<T>| {
        let inner = |d: T| {
            let mut br: Vec<T> = knots.clone();
            br.extend(knots.iter().map(|&k| k - d));
            let br = clean_breaks(br, -r, r - d);
            gl.composite(&br, |s| (prof.p(s + d) - prof.p(s)).abs().powf(q))
        };
        two * gl.composite(&dbreaks, |d| inner(d) / (d * d))
    };
    let eta_q = {
        let gl = GaussLegendre::<T>::new(16);
        gl.composite(&knots, |s| prof.eta.eval(&[-s]).abs().powf(q))
    };
    let near = two * eta_q * delta.powf(q - T::one()) / (q - T::one());

    let fine = GaussLegendre::<T>::new(12);
    let coarse = GaussLegendre::<T>::new(8);
    let sf = strips(&fine);
    let cf = core(&fine);
    let sc = strips(&coarse);
    let cc = core(&coarse);
    let value = far + sf + cf + near;
    (value, (sf - sc).abs() + (cf - cc).abs() + near)
}

/// Energy on `Ω × Ω` of `u⁻ + jump·1_{x>0}` mollified by `η` at scale `ε`,
/// for a 1D interval `Ω` containing 0.
pub fn gagliardo_energy_1d_profile<T: Scalar>(
    eta: &Mollifier<T>,
    jump: &[T],
    eps: T,
    omega: &Aabb<T>,
    q: T,
) -> Result<SeminormResult<T>> {
    energy_at(eta, jump, T::zero(), eps, omega, q)
}

fn energy_at<T: Scalar>(eta: &Mollifier<T>, jump: &[T], p: T, eps: T, omega: &Aabb<T>, q: T) -> Result<SeminormResult<T>> {
    if eta.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: eta.dim() });
    }
    if omega.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: omega.dim() });
    }
    if !(q > T::one()) {
        return Err(Error::QClampError(q.to_f64_lossy()));
    }
    if !(eps > T::zero()) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let radius = eta.support_radius();
    let lm = (p - omega.lo[0]) / eps;
    let lp = (omega.hi[0] - p) / eps;
    if !(lm > radius && lp > radius) {
        return Err(Error::EpsilonTooLarge {
            eps: eps.to_f64_lossy(),
            reason: "the mollified layer must stay inside the interval".into(),
        });
    }
    let result = |value, error_estimate| SeminormResult {
        value,
        q,
        domain: omega.clone(),
        method: SeminormMethod::ScaledProfile1d,
        error_estimate,
    };
    let j = norm(jump);
    if j == T::zero() {
        return Ok(result(T::zero(), T::zero()));
    }
    let prof = Profile { eta, mass: eta.mass(), radius, knots: eta.marginal_knots() };
    let (v, e) = unit_jump_integral(&prof, lm, lp, q);
    let jq = j.powf(q);
    Ok(result(jq * v, jq * e))
}

/// Profile oracle for a 1D field with exactly one jump inside `Ω`; any other
/// jump must be at least `diam(Ω)` away from it.
pub fn profile_energy_for_field<T: Scalar>(
    u: &PiecewiseConstantField<T>,
    eta: &Mollifier<T>,
    eps: T,
    omega: &Aabb<T>,
    q: T,
) -> Result<SeminormResult<T>> {
    if u.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: u.dim() });
    }
    let mut points = Vec::new();
    for piece in u.pieces() {
        let JumpGeometry::Hyperplane { point, normal, .. } = &piece.geometry else {
            return Err(Error::UnsupportedGeometry("1D jumps must be points".into()));
        };
        // orient the jump from x < p to x > p
        let sign = normal[0];
        let jump: Vec<T> = piece.jump().into_iter().map(|v| v * sign).collect();
        points.push((point[0], jump));
    }
    let inside: Vec<&(T, Vec<T>)> = points.iter().filter(|(x, _)| omega.contains_open(&[*x])).collect();
    let [(p, jump)] = inside.as_slice() else {
        return Err(Error::InvalidField(format!("expected one jump inside omega, found {}", inside.len())));
    };
    let window = omega.diam();
    for (x, _) in &points {
        let d = (*x - *p).abs();
        if d > T::zero() && d < window {
            return Err(Error::MultipleJumpsInWindow(d.to_f64_lossy()));
        }
    }
    energy_at(eta, jump, *p, eps, omega, q)
}
