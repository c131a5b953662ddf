//! `ε^{−N} ∫_Ω ∫_{B_ε(x)∩Ω} |u(y)−u(x)|^q / |y−x| dy dx` for raw
//! piecewise-constant fields.
//!
//! With `y = x + z` this is `ε^{−N} ∫_{|z|<ε} |z|^{−1} M(z) dz`, where
//! `M(z)` is the measure of straddling pairs weighted by `|J|^q`. Axis
//! hyperplanes spanning Ω and spheres kept `ε` away from ∂Ω have `M` in
//! closed form; anything else goes through a layer-graded midpoint rule.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{Aabb, JumpGeometry, JumpPiece, PiecewiseConstantField};
use crate::kernel::Mollifier;
use crate::mollify::{layer_grid, ResolutionPolicy};
use crate::quadrature::{clean_breaks, pairwise_sum, GaussLegendre};
use crate::scalar::{norm, Scalar};
use crate::special::{ball_volume, sphere_area};

use super::shift::{directions, ShiftConfig};

enum Analytic<T> {
    /// Normal axis, plane coordinate, `|J|^q`.
    Plane(usize, T, T),
    /// Radius, `|J|^q`.
    Sphere(T, T),
}

fn classify<T: Scalar>(piece: &JumpPiece<T>, omega: &Aabb<T>, eps: T, q: T) -> Option<Analytic<T>> {
    let jq = piece.jump_norm().powf(q);
    match &piece.geometry {
        JumpGeometry::Hyperplane { point, extent, .. } => {
            let (k, _) = piece.geometry.normal_axis()?;
            let spans = (0..omega.dim()).all(|i| i == k || (extent[i].0 <= omega.lo[i] && extent[i].1 >= omega.hi[i]));
            spans.then_some(Analytic::Plane(k, point[k], jq))
        }
        JumpGeometry::Sphere { center, radius } => {
            let clear = (0..omega.dim())
                .all(|i| center[i] - *radius - eps >= omega.lo[i] && center[i] + *radius + eps <= omega.hi[i]);
            (clear && center.len() >= 2).then_some(Analytic::Sphere(*radius, jq))
        }
        JumpGeometry::Polyline { .. } => None,
    }
}

/// Part of Ω within `reach` of a piece (both points of a pair lie in Ω).
fn neighbourhood<T: Scalar>(piece: &JumpPiece<T>, omega: &Aabb<T>, reach: T) -> Option<Aabb<T>> {
    let (lo, hi) = piece.geometry.bounds();
    let b = Aabb { lo: lo.into_iter().map(|v| v - reach).collect(), hi: hi.into_iter().map(|v| v + reach).collect() };
    b.intersect(omega)
}

/// Length of the set of `x_k` with `x_k`, `x_k + z_k` on opposite
/// sides of `c` and both in `[lo, hi]`.
fn straddle_len<T: Scalar>(c: T, lo: T, hi: T, zk: T) -> T {
    let (a, b) = if zk > T::zero() {
        ((c - zk).max(lo), c.min(hi - zk))
    } else {
        (c.max(lo - zk), (c - zk).min(hi))
    };
    (b - a).max(T::zero())
}

/// `M(z) / |J|^q` for an axis hyperplane spanning Ω.
fn plane_measure<T: Scalar>(k: usize, c: T, omega: &Aabb<T>, z: &[T]) -> T {
    let mut m = straddle_len(c, omega.lo[k], omega.hi[k], z[k]);
    for i in 0..z.len() {
        if i != k {
            m *= (omega.len(i) - z[i].abs()).max(T::zero());
        }
    }
    m
}

/// `|B| − |B ∩ (B − z)|` for `|z| = d`.
fn ball_defect<T: Scalar>(dim: usize, r: T, d: T) -> T {
    let two = T::lit(2.0);
    let full = ball_volume::<T>(dim) * r.powi(dim as i32);
    if d >= two * r {
        return full;
    }
    let lens = match dim {
        2 => two * r * r * (d / (two * r)).acos() - d / two * (T::lit(4.0) * r * r - d * d).sqrt(),
        _ => T::PI() * (T::lit(4.0) * r + d) * (two * r - d).powi(2) / T::lit(12.0),
    };
    full - lens
}

/// Directions `e` with weights for integrals over `S^{N−1}`, panels split at
/// the coordinate planes so `|e_i|` is smooth on each panel.
fn sphere_rule<T: Scalar>(dim: usize) -> Vec<(Vec<T>, T)> {
    match dim {
        1 => vec![(vec![T::one()], T::one()), (vec![-T::one()], T::one())],
        2 => {
            let gl = GaussLegendre::<T>::new(16);
            let panels = 32;
            let h = T::TAU() / T::from_count(panels);
            (0..panels)
                .flat_map(|p| {
                    let a = h * T::from_count(p);
                    gl.mapped(a, a + h).map(|(t, w)| (vec![t.cos(), t.sin()], w)).collect::<Vec<_>>()
                })
                .collect()
        }
        _ => {
            let gl = GaussLegendre::<T>::new(12);
            let (pc, pa) = (16, 32);
            let mut out = Vec::new();
            let hc = T::lit(2.0) / T::from_count(pc);
            let ha = T::TAU() / T::from_count(pa);
            for i in 0..pc {
                let c0 = -T::one() + hc * T::from_count(i);
                for (ct, wc) in gl.mapped(c0, c0 + hc) {
                    let st = (T::one() - ct * ct).sqrt();
                    for j in 0..pa {
                        let a0 = ha * T::from_count(j);
                        for (ph, wa) in gl.mapped(a0, a0 + ha) {
                            out.push((vec![st * ph.cos(), st * ph.sin(), ct], wc * wa));
                        }
                    }
                }
            }
            out
        }
    }
}

/// `ε^{−N} ∫_{S} ∫_0^ε r^{N−2} M(r e) dr de` for a hyperplane.
fn plane_term<T: Scalar>(k: usize, c: T, omega: &Aabb<T>, eps: T) -> T {
    let dim = omega.dim();
    let gl = GaussLegendre::<T>::new(8);
    let rule = sphere_rule::<T>(dim);
    let parts: Vec<T> = rule
        .par_iter()
        .map(|(e, w)| {
            // M is piecewise polynomial in r; break where a clipping switches
            let mut br = Vec::new();
            for i in 0..dim {
                let a = e[i].abs();
                if a == T::zero() {
                    continue;
                }
                if i == k {
                    br.push((c - omega.lo[k]).abs() / a);
                    br.push((omega.hi[k] - c).abs() / a);
                    br.push(omega.len(k) / a);
                } else {
                    br.push(omega.len(i) / a);
                }
            }
            let br = clean_breaks(br, T::zero(), eps);
            let z = |r: T| e.iter().map(|&v| v * r).collect::<Vec<_>>();
            *w * gl.composite(&br, |r| r.powi(dim as i32 - 2) * plane_measure(k, c, omega, &z(r)))
        })
        .collect();
    pairwise_sum(&parts) / eps.powi(dim as i32)
}

fn sphere_term<T: Scalar>(dim: usize, radius: T, eps: T) -> T {
    let gl = GaussLegendre::<T>::new(16);
    let br = clean_breaks((1..32).map(|i| eps * T::from_count(i) / T::lit(32.0)).collect(), T::zero(), eps);
    let radial = gl.composite(&br, |r| r.powi(dim as i32 - 2) * T::lit(2.0) * ball_defect(dim, radius, r));
    sphere_area::<T>(dim - 1) * radial / eps.powi(dim as i32)
}

/// Direct evaluation on a layer-graded grid: midpoint rule in `x`, polar
/// Gauss rule in `z`.
fn midpoint_fallback<T: Scalar>(u: &PiecewiseConstantField<T>, omega: &Aabb<T>, q: T, eps: T) -> Result<T> {
    let dim = omega.dim();
    let probe = Mollifier::hat(dim, T::one(), T::one())?;
    let policy = ResolutionPolicy { max_nodes: 2_000_000, ..ResolutionPolicy::default() };
    let grid = layer_grid(u, &probe, eps, omega, &policy)?;
    let rule = directions::<T>(dim, &ShiftConfig::default());
    let gl = GaussLegendre::<T>::new(8);
    let rb = clean_breaks((1..8).map(|i| eps * T::from_count(i) / T::lit(8.0)).collect(), T::zero(), eps);
    let rnodes: Vec<(T, T)> = rb.windows(2).flat_map(|w| gl.mapped(w[0], w[1]).collect::<Vec<_>>()).collect();
    let shape = grid.shape();
    let cells: usize = shape.iter().map(|n| n - 1).product();
    let parts: Vec<T> = (0..cells)
        .into_par_iter()
        .map(|cidx| {
            let mut rem = cidx;
            let mut x = vec![T::zero(); dim];
            let mut vol = T::one();
            for k in (0..dim).rev() {
                let i = rem % (shape[k] - 1);
                rem /= shape[k] - 1;
                let (a, b) = (grid.axes[k][i], grid.axes[k][i + 1]);
                x[k] = (a + b) * T::lit(0.5);
                vol *= b - a;
            }
            if u.distance_to_jumps(&x) >= eps {
                return T::zero();
            }
            let ux = u.value_raw(&x);
            let mut acc = T::zero();
            let mut y = vec![T::zero(); dim];
            for (e, w) in &rule {
                for &(r, wr) in &rnodes {
                    for k in 0..dim {
                        y[k] = x[k] + r * e[k];
                    }
                    if !omega.contains_open(&y) {
                        continue;
                    }
                    let uy = u.value_raw(&y);
                    let d: Vec<T> = uy.iter().zip(&ux).map(|(&a, &b)| a - b).collect();
                    let n = norm(&d);
                    if n > T::zero() {
                        acc += *w * wr * r.powi(dim as i32 - 2) * n.powf(q);
                    }
                }
            }
            vol * acc
        })
        .collect();
    Ok(pairwise_sum(&parts) / eps.powi(dim as i32))
}

/// Localized difference functional of the raw field `u` at scale `eps`.
pub fn localized_functional<T: Scalar>(u: &PiecewiseConstantField<T>, omega: &Aabb<T>, q: T, eps: T) -> Result<T> {
    if omega.dim() != u.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), got: omega.dim() });
    }
    if !(q > T::zero()) {
        return Err(Error::QClampError(q.to_f64_lossy()));
    }
    if !(eps > T::zero()) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let closed = omega.inflated(T::zero());
    let relevant: Vec<&JumpPiece<T>> = u
        .pieces()
        .iter()
        .filter(|p| p.jump_norm() > T::zero())
        .filter(|p| {
            let (lo, hi) = p.geometry.bounds();
            (0..omega.dim()).all(|i| lo[i] <= closed.hi[i] && hi[i] >= closed.lo[i])
        })
        .collect();
    // pieces closer than 2ε interact through a single pair
    for a in &relevant {
        let Some(nb) = neighbourhood(a, omega, eps + eps) else { continue };
        for b in u.pieces() {
            if std::ptr::eq(*a, b) || b.jump_norm() == T::zero() || shares_only_boundary(a, b, omega) {
                continue;
            }
            if b.measure_in(&nb)? > T::zero() {
                return Err(Error::EpsilonTooLarge {
                    eps: eps.to_f64_lossy(),
                    reason: "jump pieces closer than 2 epsilon inside omega".into(),
                });
            }
        }
    }
    let classes: Vec<Option<Analytic<T>>> = relevant.iter().map(|p| classify(p, omega, eps, q)).collect();
    if classes.iter().any(Option::is_none) {
        return midpoint_fallback(u, omega, q, eps);
    }
    let mut total = T::zero();
    for c in classes.into_iter().flatten() {
        total += match c {
            Analytic::Plane(k, c, jq) => jq * plane_term(k, c, omega, eps),
            Analytic::Sphere(r, jq) => jq * sphere_term(omega.dim(), r, eps),
        };
    }
    Ok(total)
}

/// Two axis hyperplanes whose only common points lie outside the open Ω
/// (faces of one box meeting at an edge outside Ω) do not interact.
fn shares_only_boundary<T: Scalar>(a: &JumpPiece<T>, b: &JumpPiece<T>, omega: &Aabb<T>) -> bool {
    let (Some((ka, _)), Some((kb, _))) = (a.geometry.normal_axis(), b.geometry.normal_axis()) else {
        return false;
    };
    let (JumpGeometry::Hyperplane { point: pa, .. }, JumpGeometry::Hyperplane { point: pb, .. }) = (&a.geometry, &b.geometry)
    else {
        return false;
    };
    let outside = |k: usize, c: T| c <= omega.lo[k] || c >= omega.hi[k];
    ka != kb && (outside(ka, pa[ka]) || outside(kb, pb[kb]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::catalog::catalog;
    use serde_json::{json, Value};

    #[test]
    fn one_dimensional_step_is_exactly_two() {
        let c = catalog::<f64>("step1d_box", &Value::Null).unwrap();
        for eps in [0.4, 0.3, 0.1, 0.01] {
            for q in [1.5, 2.0, 3.0] {
                let v = localized_functional(&c.field, &c.domain.omega, q, eps).unwrap();
                assert!((v - 2.0).abs() < 1e-12, "eps={eps} q={q}: {v}");
            }
        }
    }

    #[test]
    fn half_plane_has_boundary_defect() {
        let c = catalog::<f64>("halfplane_in_square", &Value::Null).unwrap();
        let eps = 0.01;
        let v = localized_functional(&c.field, &c.domain.omega, 2.0, eps).unwrap();
        assert!((v - (2.0 - 2.0 * eps / 3.0)).abs() < 1e-10, "{v}");
    }

    #[test]
    fn disc_uses_lens_formula() {
        let c = catalog::<f64>("disc_in_square", &json!({"r": 0.3})).unwrap();
        let eps = 0.01;
        let v = localized_functional(&c.field, &c.domain.omega, 2.0, eps).unwrap();
        let target = 2.0 * 2.0 * std::f64::consts::PI * 0.3;
        assert!((v - target).abs() < 0.01 * target, "{v} vs {target}");
    }

    #[test]
    fn constant_field_vanishes() {
        let u = PiecewiseConstantField::<f64>::zero(2, 1).unwrap();
        let om = Aabb::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(localized_functional(&u, &om, 2.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn close_jumps_are_rejected() {
        let c = catalog::<f64>("two_jumps_1d", &Value::Null).unwrap();
        assert!(matches!(
            localized_functional(&c.field, &c.domain.omega, 2.0, 0.3),
            Err(Error::EpsilonTooLarge { .. })
        ));
        let v = localized_functional(&c.field, &c.domain.omega, 2.0, 0.1).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
    }
}
