//! Mollification `u_ε(x) = ∫ η(z) u(x + εz) dz` of piecewise-constant fields
//! on graded tensor grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Aabb, JumpGeometry, PiecewiseConstantField, Region};
use crate::kernel::{hat_cdf, Mollifier};
use crate::quadrature::GaussLegendre;
use crate::scalar::{norm, Scalar};

/// Rectilinear grid with sorted per-axis node coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    pub axes: Vec<Vec<T>>,
}

impl<T: Scalar> Grid<T> {
    pub fn new(axes: Vec<Vec<T>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::UnsupportedDimension(axes.len(), 3));
        }
        for a in &axes {
            if a.len() < 2 || a.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidInput("grid axes need at least two increasing nodes".into()));
            }
        }
        Ok(Self { axes })
    }

    /// Uniform grid with `n` intervals per axis.
    pub fn uniform(bx: &Aabb<T>, n: usize) -> Result<Self> {
        Self::new(
            (0..bx.dim())
                .map(|i| (0..=n).map(|k| bx.lo[i] + bx.len(i) * T::from_count(k) / T::from_count(n)).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self) -> Aabb<T> {
        Aabb {
            lo: self.axes.iter().map(|a| a[0]).collect(),
            hi: self.axes.iter().map(|a| *a.last().expect("nonempty axis")).collect(),
        }
    }

    /// Row-major strides (last axis fastest).
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for k in (0..self.dim().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.axes[k + 1].len();
        }
        s
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            let n = self.axes[k].len();
            idx[k] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn node(&self, flat: usize) -> Vec<T> {
        self.multi_index(flat).iter().enumerate().map(|(k, &i)| self.axes[k][i]).collect()
    }

    /// Smallest spacing on each axis.
    pub fn min_spacing(&self) -> Vec<T> {
        self.axes
            .iter()
            .map(|a| a.windows(2).map(|w| w[1] - w[0]).fold(T::infinity(), T::min))
            .collect()
    }

    /// Largest spacing among intervals of `axis` that meet `[a, b]`.
    pub fn max_spacing_in(&self, axis: usize, a: T, b: T) -> T {
        self.axes[axis]
            .windows(2)
            .filter(|w| w[1] > a && w[0] < b)
            .map(|w| w[1] - w[0])
            .fold(T::zero(), T::max)
    }

    /// Integrals of the hat basis functions of `axis` over `[a, b]`: the
    /// weights of the exact integral of the piecewise-linear interpolant.
    pub fn axis_weights(&self, axis: usize, a: T, b: T) -> Vec<T> {
        let x = &self.axes[axis];
        let mut w = vec![T::zero(); x.len()];
        for i in 0..x.len() - 1 {
            let (x0, x1) = (x[i], x[i + 1]);
            let lo = a.max(x0);
            let hi = b.min(x1);
            if hi <= lo {
                continue;
            }
            let h = x1 - x0;
            // ∫ (x1 - t)/h and ∫ (t - x0)/h over [lo, hi]
            let s0 = ((x1 - lo) * (x1 - lo) - (x1 - hi) * (x1 - hi)) / (T::lit(2.0) * h);
            let s1 = ((hi - x0) * (hi - x0) - (lo - x0) * (lo - x0)) / (T::lit(2.0) * h);
            w[i] += s0;
            w[i + 1] += s1;
        }
        w
    }

    /// Interval index and local coordinate of `t` on `axis`, clamped to the grid.
    pub fn locate(&self, axis: usize, t: T) -> (usize, T) {
        let x = &self.axes[axis];
        let n = x.len();
        let i = match x.binary_search_by(|v| v.partial_cmp(&t).expect("finite coordinate")) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let f = ((t - x[i]) / (x[i + 1] - x[i])).max(T::zero()).min(T::one());
        (i, f)
    }
}

/// How the layer around the jump set is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPolicy {
    /// Layer spacing is `ε / layer_factor` (at least 8).
    pub layer_factor: usize,
    /// Refined band extends `(R + band) ε` from the jump set.
    pub band: f64,
    /// Spacing far from the jump set.
    pub coarse: f64,
    /// Ratio between neighbouring spacings in the grading zone.
    pub grading: f64,
    /// Maximal total node count.
    pub max_nodes: usize,
}

impl Default for ResolutionPolicy {
    fn default() -> Self {
        Self { layer_factor: 16, band: 1.0, coarse: 1.0 / 32.0, grading: 1.2, max_nodes: 4_000_000 }
    }
}

impl ResolutionPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.layer_factor < 8 {
            return Err(Error::InvalidInput("layer_factor must be at least 8".into()));
        }
        if !(self.band >= 0.0 && self.coarse > 0.0 && self.grading > 1.0 && self.max_nodes >= 4) {
            return Err(Error::InvalidInput("band >= 0, coarse > 0 and grading > 1 required".into()));
        }
        Ok(())
    }

    /// Same policy with every mesh parameter halved.
    pub fn refined(&self) -> Self {
        Self {
            layer_factor: self.layer_factor * 2,
            coarse: self.coarse / 2.0,
            grading: 1.0 + (self.grading - 1.0) / 2.0,
            ..*self
        }
    }
}

/// Mollified (or otherwise sampled) field on a tensor grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledField<T> {
    pub grid: Grid<T>,
    pub codim: usize,
    /// Node values, `codim` entries per node in row-major node order.
    pub values: Vec<T>,
    /// Mollification scale, `None` for fields sampled from a function.
    pub epsilon: Option<T>,
    /// Upper bound for `|∇f|` used by the small-shift estimate.
    pub lipschitz: T,
    /// Finest spacing required near the jump set (`ε/8`), if any.
    pub layer_limit: Option<T>,
    /// Largest spacing found inside the refined bands.
    pub layer_spacing: Option<T>,
    /// `‖u‖_{L∞} ‖η‖_{W^{1,1}}` of the source.
    pub w11_bound: Option<T>,
    /// `‖u‖_{L∞} ‖η‖_{L¹}` of the source.
    pub linf_bound: Option<T>,
    /// False once the values were modified after mollification.
    pub pure: bool,
}

impl<T: Scalar> SampledField<T> {
    /// Samples `f` at the nodes of `grid`.
    pub fn from_fn<F: Fn(&[T]) -> Vec<T> + Sync>(grid: Grid<T>, codim: usize, f: F) -> Result<Self> {
        let values: Vec<T> = (0..grid.len())
            .into_par_iter()
            .map(|k| f(&grid.node(k)))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect();
        if values.len() != grid.len() * codim {
            return Err(Error::DimensionMismatch { expected: grid.len() * codim, got: values.len() });
        }
        let mut s = Self {
            grid,
            codim,
            values,
            epsilon: None,
            lipschitz: T::zero(),
            layer_limit: None,
            layer_spacing: None,
            w11_bound: None,
            linf_bound: None,
            pure: false,
        };
        s.lipschitz = s.discrete_lipschitz();
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn value(&self, flat: usize) -> &[T] {
        &self.values[flat * self.codim..(flat + 1) * self.codim]
    }

    /// Largest difference quotient between neighbouring nodes, times √N.
    pub fn discrete_lipschitz(&self) -> T {
        let strides = self.grid.strides();
        let mut best = T::zero();
        for flat in 0..self.grid.len() {
            let idx = self.grid.multi_index(flat);
            for k in 0..self.dim() {
                if idx[k] + 1 < self.grid.axes[k].len() {
                    let h = self.grid.axes[k][idx[k] + 1] - self.grid.axes[k][idx[k]];
                    let a = self.value(flat);
                    let b = self.value(flat + strides[k]);
                    let d: T = a.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum::<T>().sqrt();
                    best = best.max(d / h);
                }
            }
        }
        best * T::from_count(self.dim()).sqrt()
    }

    /// Multilinear interpolation at `x` (clamped to the grid box).
    pub fn interpolate(&self, x: &[T]) -> Vec<T> {
        let dim = self.dim();
        let strides = self.grid.strides();
        let loc: Vec<(usize, T)> = (0..dim).map(|k| self.grid.locate(k, x[k])).collect();
        let mut out = vec![T::zero(); self.codim];
        for corner in 0..(1usize << dim) {
            let mut w = T::one();
            let mut flat = 0;
            for k in 0..dim {
                let (i, f) = loc[k];
                if corner >> k & 1 == 1 {
                    w *= f;
                    flat += (i + 1) * strides[k];
                } else {
                    w *= T::one() - f;
                    flat += i * strides[k];
                }
            }
            if w != T::zero() {
                for (o, &v) in out.iter_mut().zip(self.value(flat)) {
                    *o += w * v;
                }
            }
        }
        out
    }

    /// Per-axis weights for integrals over `bx` (must lie inside the grid box).
    pub fn integration_weights(&self, bx: &Aabb<T>) -> Result<Vec<Vec<T>>> {
        let gb = self.grid.bounds();
        if !bx.inside(&gb) {
            return Err(Error::InvalidDomain("integration box leaves the grid".into()));
        }
        Ok((0..self.dim()).map(|k| self.grid.axis_weights(k, bx.lo[k], bx.hi[k])).collect())
    }

    /// Exact integral of the multilinear interpolant of `g(values)` over `bx`.
    pub fn integrate_nodes<F: Fn(&[T], &[T]) -> T>(&self, bx: &Aabb<T>, g: F) -> Result<T> {
        let w = self.integration_weights(bx)?;
        let mut terms = Vec::with_capacity(self.grid.len());
        for flat in 0..self.grid.len() {
            let idx = self.grid.multi_index(flat);
            let wt = idx.iter().enumerate().fold(T::one(), |a, (k, &i)| a * w[k][i]);
            if wt != T::zero() {
                terms.push(wt * g(&self.grid.node(flat), self.value(flat)));
            }
        }
        Ok(crate::quadrature::pairwise_sum(&terms))
    }

    /// Componentwise integral over `bx`.
    pub fn integral(&self, bx: &Aabb<T>) -> Result<Vec<T>> {
        (0..self.codim).map(|c| self.integrate_nodes(bx, |_, v| v[c])).collect()
    }

    /// Multiplies every value by `lambda`.
    pub fn scaled(&self, lambda: T) -> Self {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v *= lambda);
        s.lipschitz *= lambda.abs();
        s.w11_bound = s.w11_bound.map(|b| b * lambda.abs());
        s.linf_bound = s.linf_bound.map(|b| b * lambda.abs());
        s
    }

    /// Shifts the grid by `v`.
    pub fn translated(&self, v: &[T]) -> Self {
        let mut s = self.clone();
        for (a, &d) in s.grid.axes.iter_mut().zip(v) {
            a.iter_mut().for_each(|x| *x += d);
        }
        s
    }
}

/// Selects the evaluation path of [`mollify_point`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathChoice {
    /// Exact formulas where available, quadrature otherwise.
    #[default]
    Auto,
    /// Always use the direction quadrature (for cross-checks).
    Quadrature,
}

/// Adaptive angular tolerance (absolute, relative to the kernel mass).
const ANGULAR_TOL: f64 = 1e-11;

/// Mollified value at a single point.
pub fn mollify_point<T: Scalar>(u: &PiecewiseConstantField<T>, eta: &Mollifier<T>, eps: T, x: &[T]) -> Result<Vec<T>> {
    mollify_point_with(u, eta, eps, x, PathChoice::Auto)
}

pub fn mollify_point_with<T: Scalar>(
    u: &PiecewiseConstantField<T>,
    eta: &Mollifier<T>,
    eps: T,
    x: &[T],
    path: PathChoice,
) -> Result<Vec<T>> {
    if x.len() != u.dim() || eta.dim() != u.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), got: x.len().min(eta.dim()) });
    }
    if !(eps > T::zero()) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let reach = eta.support_radius() * eps;
    let near: Vec<_> = u.pieces().iter().filter(|p| p.geometry.distance(x) < reach).collect();
    if near.is_empty() && path == PathChoice::Auto {
        return Ok(u.value_raw(x).into_iter().map(|v| v * eta.mass()).collect());
    }
    if u.dim() == 1 && path == PathChoice::Auto {
        return Ok(mollify_1d(u, eta, eps, x[0]));
    }
    if path == PathChoice::Auto && near.len() == 1 {
        if let Some(v) = hyperplane_value(near[0], eta, eps, x) {
            return Ok(v);
        }
    }
    if path == PathChoice::Auto && eta.is_tensor() && u.patches().iter().all(|p| matches!(p.region, Region::Box(_))) {
        return Ok(tensor_box_value(u, eta, eps, x));
    }
    Ok(ray_value(u, eta, eps, x))
}

fn mollify_1d<T: Scalar>(u: &PiecewiseConstantField<T>, eta: &Mollifier<T>, eps: T, x: T) -> Vec<T> {
    let nu = [T::one()];
    let mut out = vec![T::zero(); u.codim()];
    for p in u.patches() {
        let Region::Box(b) = &p.region else { continue };
        let m = eta.marginal_cdf(&nu, (b.hi[0] - x) / eps) - eta.marginal_cdf(&nu, (b.lo[0] - x) / eps);
        for (o, &v) in out.iter_mut().zip(&p.value) {
            *o += v * m;
        }
    }
    out
}

fn hyperplane_value<T: Scalar>(
    piece: &crate::fields::JumpPiece<T>,
    eta: &Mollifier<T>,
    eps: T,
    x: &[T],
) -> Option<Vec<T>> {
    let JumpGeometry::Hyperplane { point, normal, extent } = &piece.geometry else {
        return None;
    };
    let (k, _) = piece.geometry.normal_axis()?;
    let reach = eta.support_radius() * eps;
    for (i, &(a, b)) in extent.iter().enumerate() {
        if i != k && !(x[i] - reach >= a && x[i] + reach <= b) {
            return None;
        }
    }
    let s = (point[k] - x[k]) * normal[k] / eps;
    let below = eta.marginal_cdf(normal, s);
    let above = eta.mass() - below;
    Some(piece.left.iter().zip(&piece.right).map(|(&l, &r)| l * below + r * above).collect())
}

fn tensor_box_value<T: Scalar>(u: &PiecewiseConstantField<T>, eta: &Mollifier<T>, eps: T, x: &[T]) -> Vec<T> {
    let r = eta.box_radius();
    let mut out = vec![T::zero(); u.codim()];
    for p in u.patches() {
        let Region::Box(b) = &p.region else { continue };
        let mut m = eta.mass();
        for i in 0..x.len() {
            m *= hat_cdf((b.hi[i] - x[i]) / eps, r) - hat_cdf((b.lo[i] - x[i]) / eps, r);
        }
        for (o, &v) in out.iter_mut().zip(&p.value) {
            *o += v * m;
        }
    }
    out
}

/// Direction quadrature: `Σ_directions Σ_segments value · (mass of η on the segment)`.
fn ray_value<T: Scalar>(u: &PiecewiseConstantField<T>, eta: &Mollifier<T>, eps: T, x: &[T]) -> Vec<T> {
    let reach = eta.support_radius() * eps;
    let stencil = Aabb { lo: x.iter().map(|&v| v - reach).collect(), hi: x.iter().map(|&v| v + reach).collect() };
    let patches: Vec<_> = u.patches().iter().filter(|p| p.region.bounds().distance_to_box(&stencil) <= T::zero()).collect();
    let codim = u.codim();
    let ray = |e: &[T], out: &mut [T]| {
        let mut ts: Vec<T> = Vec::new();
        for p in &patches {
            p.region.ray_crossings(x, e, reach, &mut ts);
        }
        ts.sort_by(|a, b| a.partial_cmp(b).expect("finite crossing"));
        ts.push(reach);
        let mut prev = T::zero();
        let mut mprev = T::zero();
        let mut y = vec![T::zero(); x.len()];
        for &t in &ts {
            if t <= prev {
                continue;
            }
            let mid = (prev + t) * T::lit(0.5);
            for i in 0..x.len() {
                y[i] = x[i] + mid * e[i];
            }
            let m = segment_mass(eta, e, prev / eps, t / eps, mprev);
            let val = patches.iter().find(|p| p.region.contains(&y)).map(|p| &p.value);
            if let Some(v) = val {
                for c in 0..codim {
                    out[c] += v[c] * (m.0 - m.1);
                }
            }
            mprev = m.0;
            prev = t;
        }
    };
    match x.len() {
        1 => {
            let mut out = vec![T::zero(); codim];
            ray(&[T::one()], &mut out);
            ray(&[-T::one()], &mut out);
            out
        }
        2 => {
            let mut crit = critical_angles(&patches, x, reach);
            if !eta.is_radial() {
                for k in 0..8 {
                    crit.push(T::FRAC_PI_4() * T::from_count(k));
                }
            }
            crit.push(T::zero());
            crit.push(T::TAU());
            let crit = crate::quadrature::clean_breaks(crit, T::zero(), T::TAU());
            let gl = GaussLegendre::<T>::new(10);
            let f = |th: T| {
                let mut out = vec![T::zero(); codim];
                ray(&[th.cos(), th.sin()], &mut out);
                out
            };
            let tol = T::lit(ANGULAR_TOL) * eta.l1_norm();
            let mut out = vec![T::zero(); codim];
            for w in crit.windows(2) {
                let v = adaptive(&gl, &f, w[0], w[1], tol, 0);
                for c in 0..codim {
                    out[c] += v[c];
                }
            }
            out
        }
        _ => {
            let glc = GaussLegendre::<T>::new(48);
            let m = 96;
            let mut out = vec![T::zero(); codim];
            let mut tmp = vec![T::zero(); codim];
            for (ct, wc) in glc.composite_nodes(&[-T::one(), T::zero(), T::one()]) {
                let st = (T::one() - ct * ct).max(T::zero()).sqrt();
                for k in 0..m {
                    let ph = T::TAU() * (T::from_count(k) + T::lit(0.5)) / T::from_count(m);
                    tmp.iter_mut().for_each(|v| *v = T::zero());
                    ray(&[st * ph.cos(), st * ph.sin(), ct], &mut tmp);
                    let w = wc * T::TAU() / T::from_count(m);
                    for c in 0..codim {
                        out[c] += w * tmp[c];
                    }
                }
            }
            out
        }
    }
}

/// `(M(b), M(a))` where `M(ρ)` is the mass of `η` on the ray segment `[0, ρ]`
/// (in kernel units) per unit solid angle; `M(a)` is reused from the previous segment.
fn segment_mass<T: Scalar>(eta: &Mollifier<T>, e: &[T], a: T, b: T, ma: T) -> (T, T) {
    if let Some(mb) = eta.ray_mass(e, b) {
        return (mb, ma);
    }
    let n = e.len() as i32;
    let gl = GaussLegendre::<T>::new(8);
    let r = eta.support_radius();
    let b = b.min(r);
    if b <= a {
        return (ma, ma);
    }
    let mut z = vec![T::zero(); e.len()];
    let mut breaks: Vec<T> = (0..=16).map(|i| a + (b - a) * T::from_count(i) / T::lit(16.0)).collect();
    // exit from the support box of tensor kernels
    let w = eta.box_radius();
    let exit = e.iter().map(|&c| if c == T::zero() { T::infinity() } else { w / c.abs() }).fold(T::infinity(), T::min);
    if exit > a && exit < b {
        breaks.push(exit);
    }
    let breaks = crate::quadrature::clean_breaks(breaks, a, b);
    let m = gl.composite(&breaks, |rho| {
        for i in 0..e.len() {
            z[i] = rho * e[i];
        }
        eta.eval(&z) * rho.powi(n - 1)
    });
    (ma + m, ma)
}

fn adaptive<T: Scalar, F: Fn(T) -> Vec<T>>(gl: &GaussLegendre<T>, f: &F, a: T, b: T, tol: T, depth: usize) -> Vec<T> {
    let whole = apply(gl, f, a, b);
    let mid = (a + b) * T::lit(0.5);
    let left = apply(gl, f, a, mid);
    let right = apply(gl, f, mid, b);
    let halves: Vec<T> = left.iter().zip(&right).map(|(&p, &q)| p + q).collect();
    let err = whole.iter().zip(&halves).map(|(&p, &q)| (p - q).abs()).fold(T::zero(), T::max);
    if err <= tol || depth >= 40 {
        halves
    } else {
        let l = adaptive(gl, f, a, mid, tol * T::lit(0.5), depth + 1);
        let r = adaptive(gl, f, mid, b, tol * T::lit(0.5), depth + 1);
        l.iter().zip(&r).map(|(&p, &q)| p + q).collect()
    }
}

fn apply<T: Scalar, F: Fn(T) -> Vec<T>>(gl: &GaussLegendre<T>, f: &F, a: T, b: T) -> Vec<T> {
    let mut acc: Vec<T> = Vec::new();
    for (t, w) in gl.mapped(a, b) {
        let v = f(t);
        if acc.is_empty() {
            acc = vec![T::zero(); v.len()];
        }
        for (o, x) in acc.iter_mut().zip(v) {
            *o += w * x;
        }
    }
    acc
}

fn angle_of<T: Scalar>(dx: T, dy: T) -> T {
    let a = dy.atan2(dx);
    if a < T::zero() {
        a + T::TAU()
    } else {
        a
    }
}

/// Directions where the segment structure of the ray changes (2D).
fn critical_angles<T: Scalar>(patches: &[&crate::fields::Patch<T>], x: &[T], reach: T) -> Vec<T> {
    let mut out = Vec::new();
    let circle_line = |axis: usize, c: T, out: &mut Vec<T>| {
        // points of {y_axis = c} on the circle |y − x| = reach
        let s = (c - x[axis]) / reach;
        if s.abs() < T::one() {
            let a = s.asin();
            let cands = if axis == 1 { [a, T::PI() - a] } else { [T::FRAC_PI_2() - a, -(T::FRAC_PI_2() - a)] };
            for th in cands {
                out.push(angle_of(th.cos(), th.sin()));
            }
        }
    };
    for p in patches {
        match &p.region {
            Region::Box(b) => {
                for cx in [b.lo[0], b.hi[0]] {
                    for cy in [b.lo[1], b.hi[1]] {
                        out.push(angle_of(cx - x[0], cy - x[1]));
                    }
                }
                for axis in 0..2 {
                    circle_line(axis, b.lo[axis], &mut out);
                    circle_line(axis, b.hi[axis], &mut out);
                }
            }
            Region::Ball { center, radius } => {
                let dx = center[0] - x[0];
                let dy = center[1] - x[1];
                let d = (dx * dx + dy * dy).sqrt();
                let base = angle_of(dx, dy);
                if d > *radius {
                    let a = (*radius / d).asin();
                    out.push(wrap(base - a));
                    out.push(wrap(base + a));
                }
                if d > T::zero() {
                    let c = (d * d + reach * reach - *radius * *radius) / (T::lit(2.0) * d * reach);
                    if c.abs() < T::one() {
                        let a = c.acos();
                        out.push(wrap(base - a));
                        out.push(wrap(base + a));
                    }
                }
                out.push(base);
            }
            Region::Polygon { vertices } => {
                let n = vertices.len();
                for k in 0..n {
                    let a = vertices[k];
                    let b = vertices[(k + 1) % n];
                    out.push(angle_of(a[0] - x[0], a[1] - x[1]));
                    // segment ∩ circle
                    let d = [b[0] - a[0], b[1] - a[1]];
                    let w = [a[0] - x[0], a[1] - x[1]];
                    let qa = d[0] * d[0] + d[1] * d[1];
                    let qb = T::lit(2.0) * (w[0] * d[0] + w[1] * d[1]);
                    let qc = w[0] * w[0] + w[1] * w[1] - reach * reach;
                    let disc = qb * qb - T::lit(4.0) * qa * qc;
                    if disc > T::zero() {
                        for s in [(-qb - disc.sqrt()) / (T::lit(2.0) * qa), (-qb + disc.sqrt()) / (T::lit(2.0) * qa)] {
                            if s > T::zero() && s < T::one() {
                                out.push(angle_of(w[0] + s * d[0], w[1] + s * d[1]));
                            }
                        }
                    }
                    // foot of the perpendicular: ray crossing distance is extremal there
                    let s = -(w[0] * d[0] + w[1] * d[1]) / qa;
                    if s > T::zero() && s < T::one() {
                        out.push(angle_of(w[0] + s * d[0], w[1] + s * d[1]));
                    }
                }
            }
        }
    }
    out
}

fn wrap<T: Scalar>(a: T) -> T {
    let mut t = a % T::TAU();
    if t < T::zero() {
        t += T::TAU();
    }
    t
}

/// Critical intervals per axis: coordinates around which the layer lives.
fn critical_intervals<T: Scalar>(u: &PiecewiseConstantField<T>, axis: usize) -> Vec<(T, T)> {
    let mut out = Vec::new();
    for p in u.pieces() {
        match &p.geometry {
            JumpGeometry::Hyperplane { point, .. } => {
                let (k, _) = p.geometry.normal_axis().expect("validated hyperplane");
                if k == axis {
                    out.push((point[k], point[k]));
                }
            }
            JumpGeometry::Sphere { center, radius } => out.push((center[axis] - *radius, center[axis] + *radius)),
            JumpGeometry::Polyline { vertices } => {
                for w in vertices.windows(2) {
                    let (a, b) = (w[0][axis], w[1][axis]);
                    out.push((a.min(b), a.max(b)));
                }
            }
        }
    }
    out
}

/// Axis nodes on `[lo, hi]`: uniform spacing `fine` on the zones, geometric
/// grading up to `coarse` in between.
fn graded_axis<T: Scalar>(lo: T, hi: T, zones: &[(T, T)], fine: T, coarse: T, g: T) -> Vec<T> {
    let mut z: Vec<(T, T)> = zones
        .iter()
        .map(|&(a, b)| (a.max(lo), b.min(hi)))
        .filter(|&(a, b)| a <= b && b >= lo && a <= hi)
        .collect();
    z.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite zone"));
    let mut merged: Vec<(T, T)> = Vec::new();
    for (a, b) in z {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    let coarse = coarse.max(fine);
    let mut nodes = vec![lo];
    let mut cursor = lo;
    let mut h_cursor = if merged.first().is_some_and(|f| f.0 <= lo) { fine } else { coarse };
    for &(a, b) in &merged {
        if a > cursor {
            gap(&mut nodes, cursor, a, h_cursor, fine, coarse, g);
        }
        let start = a.max(cursor);
        if b > start {
            let n = ((b - start) / fine).ceil().to_usize().unwrap_or(1).max(1);
            for i in 1..=n {
                nodes.push(start + (b - start) * T::from_count(i) / T::from_count(n));
            }
        }
        cursor = b.max(cursor);
        h_cursor = fine;
    }
    if hi > cursor {
        gap(&mut nodes, cursor, hi, h_cursor, coarse, coarse, g);
    }
    *nodes.last_mut().expect("nonempty") = hi;
    nodes.dedup_by(|a, b| (*a - *b).abs() <= (hi - lo) * T::lit(1e-14));
    nodes
}

/// Appends nodes in `(p, q]` growing from `hp` at `p` and `hq` at `q`.
fn gap<T: Scalar>(nodes: &mut Vec<T>, p: T, q: T, hp: T, hq: T, coarse: T, g: T) {
    let mut left = Vec::new();
    let mut right = vec![q];
    let (mut a, mut b) = (p, q);
    let (mut hl, mut hr) = ((hp * g).min(coarse), (hq * g).min(coarse));
    while b - a > hl + hr {
        if hl <= hr {
            a += hl;
            left.push(a);
            hl = (hl * g).min(coarse);
        } else {
            b -= hr;
            right.push(b);
            hr = (hr * g).min(coarse);
        }
    }
    let h = hl.max(hr);
    let n = ((b - a) / h).ceil().to_usize().unwrap_or(1).max(1);
    nodes.extend(left);
    for i in 1..n {
        nodes.push(a + (b - a) * T::from_count(i) / T::from_count(n));
    }
    nodes.extend(right.into_iter().rev());
}

/// Layer-resolving grid on `bx` for `u` mollified at scale `eps`.
pub fn layer_grid<T: Scalar>(
    u: &PiecewiseConstantField<T>,
    eta: &Mollifier<T>,
    eps: T,
    bx: &Aabb<T>,
    policy: &ResolutionPolicy,
) -> Result<Grid<T>> {
    policy.validate()?;
    let fine = eps / T::from_count(policy.layer_factor);
    let w = (eta.support_radius() + T::lit(policy.band)) * eps;
    let coarse = T::lit(policy.coarse);
    let g = T::lit(policy.grading);
    let mut axes = Vec::new();
    let mut total: usize = 1;
    for k in 0..bx.dim() {
        let zones: Vec<(T, T)> = critical_intervals(u, k).into_iter().map(|(a, b)| (a - w, b + w)).collect();
        // rough count before building, so huge requests fail fast
        let est: T = zones.iter().map(|&(a, b)| (b.min(bx.hi[k]) - a.max(bx.lo[k])).max(T::zero()) / fine).sum();
        if est.to_f64_lossy() > policy.max_nodes as f64 {
            return Err(Error::ResolutionTooCoarse(format!(
                "axis {k} would need about {:.0} layer nodes (budget {})",
                est.to_f64_lossy(),
                policy.max_nodes
            )));
        }
        let axis = graded_axis(bx.lo[k], bx.hi[k], &zones, fine, coarse, g);
        total = total.saturating_mul(axis.len());
        axes.push(axis);
    }
    if total > policy.max_nodes {
        return Err(Error::ResolutionTooCoarse(format!("{total} nodes exceed the budget of {}", policy.max_nodes)));
    }
    Grid::new(axes)
}

/// Mollifies `u` at scale `eps` on a layer-resolving grid covering `target`.
pub fn mollify<T: Scalar>(
    u: &PiecewiseConstantField<T>,
    eta: &Mollifier<T>,
    eps: T,
    target: &Aabb<T>,
    policy: &ResolutionPolicy,
) -> Result<SampledField<T>> {
    if !(eps > T::zero() && eps <= T::one()) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1], got {}", eps)));
    }
    if target.dim() != u.dim() || eta.dim() != u.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), got: target.dim() });
    }
    let grid = layer_grid(u, eta, eps, target, policy)?;
    let values: Vec<T> = (0..grid.len())
        .into_par_iter()
        .map(|k| mollify_point(u, eta, eps, &grid.node(k)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let linf = u.linf_norm();
    let w11 = linf * eta.w11_norm();
    let grad_l1 = eta.w11_norm() - eta.l1_norm();
    let mut f = SampledField {
        grid,
        codim: u.codim(),
        values,
        epsilon: Some(eps),
        lipschitz: linf * grad_l1 / eps,
        layer_limit: Some(eps / T::lit(8.0)),
        layer_spacing: None,
        w11_bound: Some(w11),
        linf_bound: Some(linf * eta.l1_norm()),
        pure: true,
    };
    f.layer_spacing = Some(layer_spacing(u, eta, eps, &f.grid, policy));
    Ok(f)
}

/// Largest grid spacing within `(R + 1) ε` of the jump set, along the axes
/// across which the jump set varies.
fn layer_spacing<T: Scalar>(u: &PiecewiseConstantField<T>, eta: &Mollifier<T>, eps: T, grid: &Grid<T>, policy: &ResolutionPolicy) -> T {
    let w = (eta.support_radius() + T::lit(policy.band.min(1.0))) * eps;
    let mut worst = T::zero();
    for k in 0..grid.dim() {
        for (a, b) in critical_intervals(u, k) {
            worst = worst.max(grid.max_spacing_in(k, a - w, b + w));
        }
    }
    worst
}

/// Result of [`gradient_bound_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoundReport<T> {
    /// `max |u_ε| + ε |∇_h u_ε|` over interior nodes.
    pub max_value: T,
    /// `‖u‖_{L∞} ‖η‖_{W^{1,1}}`.
    pub bound: T,
    /// Node where the maximum is attained.
    pub argmax: Vec<T>,
    /// `max_value ≤ 1.05 · bound`.
    pub pass: bool,
}

/// Checks `|u_ε| + ε|∇u_ε| ≤ ‖u‖_{L∞}‖η‖_{W^{1,1}}` with central differences.
pub fn gradient_bound_check<T: Scalar>(f: &SampledField<T>) -> Result<GradientBoundReport<T>> {
    let (Some(eps), Some(bound)) = (f.epsilon, f.w11_bound) else {
        return Err(Error::InvalidInput("gradient check needs a mollified field".into()));
    };
    let strides = f.grid.strides();
    let mut best = (T::neg_infinity(), 0usize);
    for flat in 0..f.grid.len() {
        let idx = f.grid.multi_index(flat);
        if idx.iter().enumerate().any(|(k, &i)| i == 0 || i + 1 == f.grid.axes[k].len()) {
            continue;
        }
        let v = f.value(flat);
        let mut g2 = T::zero();
        for k in 0..f.dim() {
            let x = &f.grid.axes[k];
            let h = x[idx[k] + 1] - x[idx[k] - 1];
            let a = f.value(flat + strides[k]);
            let b = f.value(flat - strides[k]);
            for c in 0..f.codim {
                let d = (a[c] - b[c]) / h;
                g2 += d * d;
            }
        }
        let m = norm(v) + eps * g2.sqrt();
        if m > best.0 {
            best = (m, flat);
        }
    }
    if best.0 == T::neg_infinity() {
        best = (T::zero(), 0);
    }
    Ok(GradientBoundReport {
        max_value: best.0,
        bound,
        argmax: f.grid.node(best.1),
        pass: best.0 <= bound * T::lit(1.05),
    })
}

trait CompositeNodes<T> {
    fn composite_nodes(&self, breaks: &[T]) -> Vec<(T, T)>;
}

impl<T: Scalar> CompositeNodes<T> for GaussLegendre<T> {
    fn composite_nodes(&self, breaks: &[T]) -> Vec<(T, T)> {
        breaks.windows(2).flat_map(|w| self.mapped(w[0], w[1]).collect::<Vec<_>>()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::catalog::catalog;
    use serde_json::Value;

    fn step() -> PiecewiseConstantField<f64> {
        catalog::<f64>("step1d_box", &Value::Null).unwrap().field
    }

    #[test]
    fn hat_examples_1d() {
        let u = step();
        let hat = Mollifier::hat(1, 1.0, 1.0).unwrap();
        assert!((mollify_point(&u, &hat, 0.1, &[0.0]).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!((mollify_point(&u, &hat, 0.1, &[0.05]).unwrap()[0] - 0.875).abs() < 1e-14);
        assert_eq!(mollify_point(&u, &hat, 0.1, &[0.5]).unwrap()[0], 1.0);
    }

    #[test]
    fn axis_weights_integrate_linear_functions_exactly() {
        let g = Grid::new(vec![vec![0.0, 0.1, 0.35, 0.7, 1.0]]).unwrap();
        let w = g.axis_weights(0, 0.05, 0.8);
        let s: f64 = w.iter().zip(&g.axes[0]).map(|(w, x)| w * (2.0 * x + 1.0)).sum();
        let exact = (0.8f64 * 0.8 + 0.8) - (0.05 * 0.05 + 0.05);
        assert!((s - exact).abs() < 1e-15);
    }

    #[test]
    fn graded_axis_resolves_the_layer() {
        let nodes = graded_axis(-0.5, 0.5, &[(-0.02, 0.02)], 0.001, 1.0 / 32.0, 1.2);
        assert_eq!(nodes[0], -0.5);
        assert_eq!(*nodes.last().unwrap(), 0.5);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        let in_zone = nodes.windows(2).filter(|w| w[1] > -0.02 && w[0] < 0.02).map(|w| w[1] - w[0]);
        assert!(in_zone.fold(0.0, f64::max) <= 0.001 + 1e-15);
        let max = nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(max <= 1.0 / 32.0 + 1e-15);
    }

    #[test]
    fn ray_quadrature_matches_exact_marginal_in_2d() {
        let c = catalog::<f64>("halfplane_in_square", &Value::Null).unwrap();
        let bump = Mollifier::bump(2, 1.0, 1.0).unwrap();
        for x in [[0.003, 0.1], [-0.02, -0.3], [0.0, 0.0], [0.049, 0.2]] {
            let a = mollify_point(&c.field, &bump, 0.05, &x).unwrap()[0];
            let b = mollify_point_with(&c.field, &bump, 0.05, &x, PathChoice::Quadrature).unwrap()[0];
            assert!((a - b).abs() < 1e-6, "{x:?}: {a} vs {b}");
        }
    }

    #[test]
    fn node_budget_is_enforced() {
        let c = catalog::<f64>("disc_in_square", &Value::Null).unwrap();
        let bump = Mollifier::bump(2, 1.0, 1.0).unwrap();
        let policy = ResolutionPolicy { max_nodes: 10_000, ..Default::default() };
        let r = mollify(&c.field, &bump, 1e-3, &c.domain.omega, &policy);
        assert!(matches!(r, Err(Error::ResolutionTooCoarse(_))));
    }
}
