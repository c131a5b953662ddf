//! Piecewise-constant BV test fields with exact jump data.
//!
//! A field is a list of disjoint open patches (boxes, balls, polygons), each
//! carrying a constant value vector, plus the list of jump pieces with their
//! traces. The value is zero off the patches. Traces are checked against the
//! patches when the field is built.

pub mod catalog;
mod geometry;

use serde::{Deserialize, Serialize};

pub use geometry::{Aabb, Domain, JumpGeometry};

use crate::error::{Error, Result};
use crate::scalar::{dist, norm, Scalar};
use crate::special::ball_volume;

/// Distance below which a point counts as lying on a jump.
pub const ON_JUMP_TOL: f64 = 1e-12;

/// Open region carrying one constant value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region<T> {
    Box(Aabb<T>),
    Ball { center: Vec<T>, radius: T },
    /// Simple closed polygon (N = 2), vertices in either orientation.
    Polygon { vertices: Vec<[T; 2]> },
}

impl<T: Scalar> Region<T> {
    pub fn dim(&self) -> usize {
        match self {
            Region::Box(b) => b.dim(),
            Region::Ball { center, .. } => center.len(),
            Region::Polygon { .. } => 2,
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        match self {
            Region::Box(b) => b.contains_open(x),
            Region::Ball { center, radius } => dist(x, center) < *radius,
            Region::Polygon { vertices } => polygon_contains(vertices, x),
        }
    }

    pub fn volume(&self) -> T {
        match self {
            Region::Box(b) => b.volume(),
            Region::Ball { center, radius } => ball_volume::<T>(center.len()) * radius.powi(center.len() as i32),
            Region::Polygon { vertices } => polygon_area(vertices).abs(),
        }
    }

    pub fn bounds(&self) -> Aabb<T> {
        match self {
            Region::Box(b) => b.clone(),
            Region::Ball { center, radius } => Aabb {
                lo: center.iter().map(|&c| c - *radius).collect(),
                hi: center.iter().map(|&c| c + *radius).collect(),
            },
            Region::Polygon { vertices } => {
                let mut lo = vec![T::infinity(); 2];
                let mut hi = vec![T::neg_infinity(); 2];
                for p in vertices {
                    for i in 0..2 {
                        lo[i] = lo[i].min(p[i]);
                        hi[i] = hi[i].max(p[i]);
                    }
                }
                Aabb { lo, hi }
            }
        }
    }

    /// Parameters `t` in `(0, tmax)` where the ray `x + t·e` crosses the boundary.
    pub fn ray_crossings(&self, x: &[T], e: &[T], tmax: T, out: &mut Vec<T>) {
        match self {
            Region::Box(b) => {
                let mut t0 = T::neg_infinity();
                let mut t1 = T::infinity();
                for i in 0..b.dim() {
                    if e[i] == T::zero() {
                        if !(x[i] > b.lo[i] && x[i] < b.hi[i]) {
                            return;
                        }
                        continue;
                    }
                    let ta = (b.lo[i] - x[i]) / e[i];
                    let tb = (b.hi[i] - x[i]) / e[i];
                    let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
                    t0 = t0.max(lo);
                    t1 = t1.min(hi);
                }
                if t1 > t0 {
                    for t in [t0, t1] {
                        if t > T::zero() && t < tmax {
                            out.push(t);
                        }
                    }
                }
            }
            Region::Ball { center, radius } => {
                // |x - c + t e|^2 = r^2 with |e| = 1
                let w: Vec<T> = x.iter().zip(center).map(|(&a, &c)| a - c).collect();
                let bq = w.iter().zip(e).fold(T::zero(), |s, (&a, &b)| s + a * b);
                let cq = w.iter().fold(T::zero(), |s, &a| s + a * a) - *radius * *radius;
                let disc = bq * bq - cq;
                if disc > T::zero() {
                    let s = disc.sqrt();
                    for t in [-bq - s, -bq + s] {
                        if t > T::zero() && t < tmax {
                            out.push(t);
                        }
                    }
                }
            }
            Region::Polygon { vertices } => {
                let n = vertices.len();
                for k in 0..n {
                    let a = vertices[k];
                    let b = vertices[(k + 1) % n];
                    let d = [b[0] - a[0], b[1] - a[1]];
                    let den = e[0] * d[1] - e[1] * d[0];
                    if den == T::zero() {
                        continue;
                    }
                    let w = [a[0] - x[0], a[1] - x[1]];
                    let t = (w[0] * d[1] - w[1] * d[0]) / den;
                    let s = (w[0] * e[1] - w[1] * e[0]) / den;
                    if s >= T::zero() && s <= T::one() && t > T::zero() && t < tmax {
                        out.push(t);
                    }
                }
            }
        }
    }

    pub fn translated(&self, v: &[T]) -> Self {
        match self {
            Region::Box(b) => Region::Box(b.translated(v)),
            Region::Ball { center, radius } => Region::Ball {
                center: center.iter().zip(v).map(|(&c, &d)| c + d).collect(),
                radius: *radius,
            },
            Region::Polygon { vertices } => Region::Polygon {
                vertices: vertices.iter().map(|p| [p[0] + v[0], p[1] + v[1]]).collect(),
            },
        }
    }
}

fn polygon_area<T: Scalar>(v: &[[T; 2]]) -> T {
    let n = v.len();
    let mut s = T::zero();
    for k in 0..n {
        let a = v[k];
        let b = v[(k + 1) % n];
        s += a[0] * b[1] - a[1] * b[0];
    }
    s * T::lit(0.5)
}

fn polygon_contains<T: Scalar>(v: &[[T; 2]], x: &[T]) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a[1] > x[1]) != (b[1] > x[1]) {
            let xc = (b[0] - a[0]) * (x[1] - a[1]) / (b[1] - a[1]) + a[0];
            if x[0] < xc {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// A region together with its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch<T> {
    pub region: Region<T>,
    pub value: Vec<T>,
}

/// One piece of the jump set with its one-sided traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpPiece<T> {
    pub geometry: JumpGeometry<T>,
    /// Trace u⁻ on the side `-ν`.
    pub left: Vec<T>,
    /// Trace u⁺ on the side `+ν`.
    pub right: Vec<T>,
}

impl<T: Scalar> JumpPiece<T> {
    pub fn jump(&self) -> Vec<T> {
        self.right.iter().zip(&self.left).map(|(&a, &b)| a - b).collect()
    }

    pub fn jump_norm(&self) -> T {
        dist(&self.right, &self.left)
    }

    pub fn measure_in(&self, bx: &Aabb<T>) -> Result<T> {
        self.geometry.measure_in(bx)
    }
}

/// Compactly supported piecewise-constant field `R^N -> R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstantField<T> {
    dim: usize,
    codim: usize,
    patches: Vec<Patch<T>>,
    pieces: Vec<JumpPiece<T>>,
}

impl<T: Scalar> PiecewiseConstantField<T> {
    /// Builds a field and checks that the stored traces match the patches.
    pub fn new(dim: usize, codim: usize, patches: Vec<Patch<T>>, pieces: Vec<JumpPiece<T>>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim, 3));
        }
        if codim == 0 {
            return Err(Error::InvalidField("codim must be at least 1".into()));
        }
        for p in &patches {
            if p.region.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.region.dim() });
            }
            if p.value.len() != codim {
                return Err(Error::DimensionMismatch { expected: codim, got: p.value.len() });
            }
            if let Region::Polygon { vertices } = &p.region {
                if vertices.len() < 3 || polygon_area(vertices) == T::zero() {
                    return Err(Error::InvalidField("degenerate polygon".into()));
                }
            }
            if let Region::Ball { radius, .. } = &p.region {
                if !(*radius > T::zero()) {
                    return Err(Error::InvalidField("ball radius must be positive".into()));
                }
            }
        }
        for piece in &pieces {
            if piece.geometry.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: piece.geometry.dim() });
            }
            piece.geometry.validate()?;
            if piece.left.len() != codim || piece.right.len() != codim {
                return Err(Error::DimensionMismatch { expected: codim, got: piece.left.len().min(piece.right.len()) });
            }
            if piece.left == piece.right {
                return Err(Error::InvalidField("jump piece with equal traces".into()));
            }
            if dim > 1 {
                let (lo, hi) = piece.geometry.bounds();
                if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidField("jump piece must be bounded".into()));
                }
            }
        }
        let field = Self { dim, codim, patches, pieces };
        field.check_traces()?;
        Ok(field)
    }

    /// Indicator-type field: one box with value `value`, jumps on its faces.
    pub fn box_patch(bx: Aabb<T>, value: Vec<T>) -> Result<Self> {
        let dim = bx.dim();
        let codim = value.len();
        let zero = vec![T::zero(); codim];
        let mut pieces = Vec::new();
        if value.iter().any(|&v| v != T::zero()) {
            for k in 0..dim {
                let extent: Vec<(T, T)> = (0..dim)
                    .map(|i| {
                        if i == k {
                            (T::zero(), T::zero())
                        } else if dim == 1 {
                            (T::neg_infinity(), T::infinity())
                        } else {
                            (bx.lo[i], bx.hi[i])
                        }
                    })
                    .collect();
                let mut normal = vec![T::zero(); dim];
                normal[k] = T::one();
                let mut p_lo = bx.center();
                p_lo[k] = bx.lo[k];
                let mut p_hi = bx.center();
                p_hi[k] = bx.hi[k];
                pieces.push(JumpPiece {
                    geometry: JumpGeometry::hyperplane(p_lo, normal.clone(), extent.clone())?,
                    left: zero.clone(),
                    right: value.clone(),
                });
                pieces.push(JumpPiece {
                    geometry: JumpGeometry::hyperplane(p_hi, normal, extent)?,
                    left: value.clone(),
                    right: zero.clone(),
                });
            }
        }
        Self::new(dim, codim, vec![Patch { region: Region::Box(bx), value }], pieces)
    }

    /// The zero field.
    pub fn zero(dim: usize, codim: usize) -> Result<Self> {
        Self::new(dim, codim, Vec::new(), Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn patches(&self) -> &[Patch<T>] {
        &self.patches
    }

    pub fn pieces(&self) -> &[JumpPiece<T>] {
        &self.pieces
    }

    fn check_traces(&self) -> Result<()> {
        let delta = T::lit(1e-7);
        for piece in &self.pieces {
            for p in piece.geometry.sample_points() {
                let nu = piece.geometry.normal_near(&p);
                let minus: Vec<T> = p.iter().zip(&nu).map(|(&a, &n)| a - delta * n).collect();
                let plus: Vec<T> = p.iter().zip(&nu).map(|(&a, &n)| a + delta * n).collect();
                let close = |a: &[T], b: &[T]| dist(a, b) <= T::lit(1e-12) * (T::one() + norm(b));
                if !close(&self.value_raw(&minus), &piece.left) || !close(&self.value_raw(&plus), &piece.right) {
                    return Err(Error::InvalidField(format!(
                        "stored traces disagree with the regions near {:?}",
                        p.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Value of the patch containing `x`, without any jump-set check.
    pub fn value_raw(&self, x: &[T]) -> Vec<T> {
        self.patches
            .iter()
            .find(|p| p.region.contains(x))
            .map(|p| p.value.clone())
            .unwrap_or_else(|| vec![T::zero(); self.codim])
    }

    /// Distance from `x` to the nearest jump piece.
    pub fn distance_to_jumps(&self, x: &[T]) -> T {
        self.pieces
            .iter()
            .map(|p| p.geometry.distance(x))
            .fold(T::infinity(), T::min)
    }

    pub fn evaluate(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let tol = T::lit(ON_JUMP_TOL);
        if self.distance_to_jumps(x) <= tol {
            return Err(Error::OnJumpSet { tol: ON_JUMP_TOL });
        }
        Ok(self.value_raw(x))
    }

    /// Value with the symmetric convention on the jump set: the mean of the
    /// traces of the nearest piece.
    pub fn value_tiebreak(&self, x: &[T]) -> Vec<T> {
        let tol = T::lit(ON_JUMP_TOL);
        let nearest = self
            .pieces
            .iter()
            .map(|p| (p.geometry.distance(x), p))
            .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distance"));
        match nearest {
            Some((d, p)) if d <= tol => p
                .left
                .iter()
                .zip(&p.right)
                .map(|(&a, &b)| (a + b) * T::lit(0.5))
                .collect(),
            _ => self.value_raw(x),
        }
    }

    /// `Σ |u⁺ − u⁻|^q H^{N−1}(piece ∩ Ω)`.
    pub fn jump_energy(&self, omega: &Aabb<T>, q: T) -> Result<T> {
        if omega.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: omega.dim() });
        }
        if !(q > T::zero()) {
            return Err(Error::QClampError(q.to_f64_lossy()));
        }
        let mut s = T::zero();
        for p in &self.pieces {
            s += p.jump_norm().powf(q) * p.measure_in(omega)?;
        }
        Ok(s)
    }

    /// Fails when a jump piece runs along a face of Ω.
    pub fn check_boundary(&self, omega: &Aabb<T>) -> Result<()> {
        for p in &self.pieces {
            if let Some((k, _)) = p.geometry.normal_axis() {
                let JumpGeometry::Hyperplane { point, .. } = &p.geometry else {
                    unreachable!()
                };
                if point[k] == omega.lo[k] || point[k] == omega.hi[k] {
                    let mut face = omega.clone();
                    face.lo[k] = point[k] - T::one();
                    face.hi[k] = point[k] + T::one();
                    if p.measure_in(&face)? > T::zero() {
                        return Err(Error::InvalidDomain("a jump piece lies on a face of omega".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Bounding box of the support, `None` for the zero field.
    pub fn support_box(&self) -> Option<Aabb<T>> {
        let mut it = self.patches.iter().filter(|p| p.value.iter().any(|&v| v != T::zero()));
        let first = it.next()?.region.bounds();
        Some(it.fold(first, |acc, p| {
            let b = p.region.bounds();
            Aabb {
                lo: acc.lo.iter().zip(&b.lo).map(|(&a, &c)| a.min(c)).collect(),
                hi: acc.hi.iter().zip(&b.hi).map(|(&a, &c)| a.max(c)).collect(),
            }
        }))
    }

    /// `‖Du‖(R^N)`: jump heights times the full measure of every piece.
    pub fn total_variation(&self) -> Result<T> {
        let Some(sb) = self.support_box() else {
            return Ok(T::zero());
        };
        let everything = sb.inflated(T::one());
        let mut s = T::zero();
        for p in &self.pieces {
            s += p.jump_norm() * p.measure_in(&everything)?;
        }
        Ok(s)
    }

    pub fn l1_norm(&self) -> T {
        self.patches
            .iter()
            .map(|p| norm(&p.value) * p.region.volume())
            .fold(T::zero(), |a, b| a + b)
    }

    pub fn linf_norm(&self) -> T {
        self.patches.iter().map(|p| norm(&p.value)).fold(T::zero(), T::max)
    }

    /// Multiplies every value by `lambda`.
    pub fn scaled(&self, lambda: T) -> Self {
        let sc = |v: &Vec<T>| v.iter().map(|&a| a * lambda).collect::<Vec<T>>();
        if lambda == T::zero() {
            return Self {
                dim: self.dim,
                codim: self.codim,
                patches: Vec::new(),
                pieces: Vec::new(),
            };
        }
        Self {
            dim: self.dim,
            codim: self.codim,
            patches: self.patches.iter().map(|p| Patch { region: p.region.clone(), value: sc(&p.value) }).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| JumpPiece { geometry: p.geometry.clone(), left: sc(&p.left), right: sc(&p.right) })
                .collect(),
        }
    }

    pub fn translated(&self, v: &[T]) -> Self {
        Self {
            dim: self.dim,
            codim: self.codim,
            patches: self
                .patches
                .iter()
                .map(|p| Patch { region: p.region.translated(v), value: p.value.clone() })
                .collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| JumpPiece { geometry: p.geometry.translated(v), left: p.left.clone(), right: p.right.clone() })
                .collect(),
        }
    }

    /// `alpha·u + beta·v` for fields whose supports are a positive distance apart.
    pub fn linear_combination(alpha: T, u: &Self, beta: T, v: &Self) -> Result<Self> {
        if u.dim != v.dim || u.codim != v.codim {
            return Err(Error::DimensionMismatch { expected: u.dim, got: v.dim });
        }
        if let (Some(a), Some(b)) = (u.support_box(), v.support_box()) {
            if !(a.distance_to_box(&b) > T::zero()) {
                return Err(Error::InvalidField("linear combination needs disjoint supports".into()));
            }
        }
        let su = u.scaled(alpha);
        let sv = v.scaled(beta);
        Self::new(
            u.dim,
            u.codim,
            su.patches.into_iter().chain(sv.patches).collect(),
            su.pieces.into_iter().chain(sv.pieces).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chi01() -> PiecewiseConstantField<f64> {
        PiecewiseConstantField::box_patch(Aabb::new(vec![0.0], vec![1.0]).unwrap(), vec![1.0]).unwrap()
    }

    #[test]
    fn evaluate_indicator() {
        let u = chi01();
        assert_eq!(u.evaluate(&[0.5]).unwrap(), vec![1.0]);
        assert_eq!(u.evaluate(&[-0.3]).unwrap(), vec![0.0]);
        assert!(matches!(u.evaluate(&[0.0]), Err(Error::OnJumpSet { .. })));
        assert_eq!(u.value_tiebreak(&[1.0]), vec![0.5]);
    }

    #[test]
    fn indicator_norms() {
        let u = chi01();
        assert_eq!(u.l1_norm(), 1.0);
        assert_eq!(u.linf_norm(), 1.0);
        assert_eq!(u.total_variation().unwrap(), 2.0);
        let om = Aabb::new(vec![-0.5], vec![0.5]).unwrap();
        assert_eq!(u.jump_energy(&om, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn wrong_traces_are_rejected() {
        let bx = Aabb::new(vec![0.0], vec![1.0]).unwrap();
        let piece = JumpPiece {
            geometry: JumpGeometry::point_1d(0.0),
            left: vec![1.0],
            right: vec![0.0],
        };
        let r = PiecewiseConstantField::new(1, 1, vec![Patch { region: Region::Box(bx), value: vec![1.0] }], vec![piece]);
        assert!(matches!(r, Err(Error::InvalidField(_))));
    }

    #[test]
    fn ray_crossings_of_ball() {
        let r: Region<f64> = Region::Ball { center: vec![0.0, 0.0], radius: 1.0 };
        let mut out = Vec::new();
        r.ray_crossings(&[-2.0, 0.0], &[1.0, 0.0], 10.0, &mut out);
        assert_eq!(out, vec![1.0, 3.0]);
    }

    #[test]
    fn polygon_membership_and_area() {
        let sq: Region<f64> = Region::Polygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] };
        assert!(sq.contains(&[0.5, 0.5]));
        assert!(!sq.contains(&[1.5, 0.5]));
        assert_eq!(sq.volume(), 1.0);
    }

    #[test]
    fn disjoint_combination() {
        let a = chi01();
        let b = a.translated(&[3.0]);
        let c = PiecewiseConstantField::linear_combination(2.0, &a, -1.0, &b).unwrap();
        assert_eq!(c.evaluate(&[0.5]).unwrap(), vec![2.0]);
        assert_eq!(c.evaluate(&[3.5]).unwrap(), vec![-1.0]);
        assert!(PiecewiseConstantField::linear_combination(1.0, &a, 1.0, &a).is_err());
    }
}
