use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dist, dot, norm, Scalar};

/// Axis-aligned box, treated as an open set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> Aabb<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidDomain(format!(
                "box corners have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(&a, &b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidDomain("box needs lo_i < hi_i, finite".into()));
        }
        Ok(Self { lo, hi })
    }

    /// Cube `(-half, half)^dim` shifted by `center`.
    pub fn centered(center: &[T], half: T) -> Result<Self> {
        Self::new(
            center.iter().map(|&c| c - half).collect(),
            center.iter().map(|&c| c + half).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self, axis: usize) -> T {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> T {
        (0..self.dim()).fold(T::one(), |acc, i| acc * self.len(i))
    }

    pub fn diam(&self) -> T {
        dist(&self.lo, &self.hi)
    }

    pub fn center(&self) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| (a + b) * T::lit(0.5))
            .collect()
    }

    pub fn contains_open(&self, x: &[T]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&a, &b))| v > a && v < b)
    }

    pub fn contains_closed(&self, x: &[T]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&a, &b))| v >= a && v <= b)
    }

    /// True when `self` lies inside `other` with every face strictly inside.
    pub fn strictly_inside(&self, other: &Self) -> bool {
        (0..self.dim()).all(|i| self.lo[i] > other.lo[i] && self.hi[i] < other.hi[i])
    }

    pub fn inside(&self, other: &Self) -> bool {
        (0..self.dim()).all(|i| self.lo[i] >= other.lo[i] && self.hi[i] <= other.hi[i])
    }

    /// Intersection, `None` when it has empty interior.
    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo: Vec<T> = self.lo.iter().zip(&other.lo).map(|(&a, &b)| a.max(b)).collect();
        let hi: Vec<T> = self.hi.iter().zip(&other.hi).map(|(&a, &b)| a.min(b)).collect();
        if lo.iter().zip(&hi).all(|(&a, &b)| a < b) {
            Some(Self { lo, hi })
        } else {
            None
        }
    }

    pub fn translated(&self, v: &[T]) -> Self {
        Self {
            lo: self.lo.iter().zip(v).map(|(&a, &d)| a + d).collect(),
            hi: self.hi.iter().zip(v).map(|(&a, &d)| a + d).collect(),
        }
    }

    pub fn inflated(&self, pad: T) -> Self {
        Self {
            lo: self.lo.iter().map(|&a| a - pad).collect(),
            hi: self.hi.iter().map(|&a| a + pad).collect(),
        }
    }

    /// Euclidean distance from `x` to the closed box (0 inside).
    pub fn distance_to(&self, x: &[T]) -> T {
        let mut s = T::zero();
        for i in 0..self.dim() {
            let e = (self.lo[i] - x[i]).max(x[i] - self.hi[i]).max(T::zero());
            s += e * e;
        }
        s.sqrt()
    }

    /// Distance between two closed boxes (0 if they touch or overlap).
    pub fn distance_to_box(&self, other: &Self) -> T {
        let mut s = T::zero();
        for i in 0..self.dim() {
            let e = (other.lo[i] - self.hi[i]).max(self.lo[i] - other.hi[i]).max(T::zero());
            s += e * e;
        }
        s.sqrt()
    }

    /// Smallest gap between the faces of `self` and those of an enclosing `outer`.
    pub fn margin_within(&self, outer: &Self) -> T {
        (0..self.dim())
            .map(|i| (self.lo[i] - outer.lo[i]).min(outer.hi[i] - self.hi[i]))
            .fold(T::infinity(), T::min)
    }
}

/// The open box Ω together with the enclosing box used to truncate R^N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain<T> {
    pub omega: Aabb<T>,
    pub ambient: Aabb<T>,
}

impl<T: Scalar> Domain<T> {
    pub fn new(omega: Aabb<T>, ambient: Aabb<T>) -> Result<Self> {
        if omega.dim() != ambient.dim() {
            return Err(Error::DimensionMismatch {
                expected: omega.dim(),
                got: ambient.dim(),
            });
        }
        if !(1..=3).contains(&omega.dim()) {
            return Err(Error::UnsupportedDimension(omega.dim(), 3));
        }
        if !omega.strictly_inside(&ambient) {
            return Err(Error::InvalidDomain("omega must lie strictly inside the ambient box".into()));
        }
        Ok(Self { omega, ambient })
    }

    pub fn with_margin(omega: Aabb<T>, margin: T) -> Result<Self> {
        let ambient = omega.inflated(margin);
        Self::new(omega, ambient)
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn translated(&self, v: &[T]) -> Self {
        Self {
            omega: self.omega.translated(v),
            ambient: self.ambient.translated(v),
        }
    }
}

/// Geometry of one piece of a jump set.
///
/// The normal ν points from the `left` trace (u⁻) to the `right` trace (u⁺).
/// Spheres use the outward normal; polyline segments use the direction
/// rotated clockwise, `(dy, -dx) / |d|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum JumpGeometry<T> {
    /// `{x : x_k = point_k}` restricted to `extent` on the tangential axes.
    /// The normal must be a signed coordinate axis.
    Hyperplane {
        point: Vec<T>,
        normal: Vec<T>,
        extent: Vec<(T, T)>,
    },
    Sphere { center: Vec<T>, radius: T },
    /// Open or closed chain of segments, N = 2 only.
    Polyline { vertices: Vec<[T; 2]> },
}

impl<T: Scalar> JumpGeometry<T> {
    pub fn hyperplane(point: Vec<T>, normal: Vec<T>, extent: Vec<(T, T)>) -> Result<Self> {
        let g = JumpGeometry::Hyperplane { point, normal, extent };
        g.validate()?;
        Ok(g)
    }

    /// Jump point for N = 1 with ν = +1.
    pub fn point_1d(x: T) -> Self {
        JumpGeometry::Hyperplane {
            point: vec![x],
            normal: vec![T::one()],
            extent: vec![(T::neg_infinity(), T::infinity())],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            JumpGeometry::Hyperplane { point, .. } => point.len(),
            JumpGeometry::Sphere { center, .. } => center.len(),
            JumpGeometry::Polyline { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            JumpGeometry::Hyperplane { point, normal, extent } => {
                if normal.len() != point.len() || extent.len() != point.len() {
                    return Err(Error::InvalidField("hyperplane component lengths differ".into()));
                }
                if (norm(normal) - T::one()).abs() > T::lit(1e-12) {
                    return Err(Error::InvalidField("hyperplane normal is not unit".into()));
                }
                if self.normal_axis().is_none() {
                    return Err(Error::UnsupportedGeometry(
                        "hyperplane normals must be coordinate axes (use a polyline for oblique 2D interfaces)"
                            .into(),
                    ));
                }
                let (k, _) = self.normal_axis().expect("checked");
                for (i, &(a, b)) in extent.iter().enumerate() {
                    if i != k && !(a < b) {
                        return Err(Error::InvalidField("empty hyperplane extent".into()));
                    }
                }
                Ok(())
            }
            JumpGeometry::Sphere { center, radius } => {
                if !(2..=3).contains(&center.len()) {
                    return Err(Error::UnsupportedGeometry("spheres need N = 2 or 3".into()));
                }
                if !(*radius > T::zero()) {
                    return Err(Error::InvalidField("sphere radius must be positive".into()));
                }
                Ok(())
            }
            JumpGeometry::Polyline { vertices } => {
                if vertices.len() < 2 {
                    return Err(Error::InvalidField("polyline needs two vertices".into()));
                }
                if vertices.windows(2).any(|w| dist(&w[0], &w[1]) == T::zero()) {
                    return Err(Error::InvalidField("degenerate polyline segment".into()));
                }
                Ok(())
            }
        }
    }

    /// Axis index and sign when the geometry is an axis-aligned hyperplane.
    pub fn normal_axis(&self) -> Option<(usize, T)> {
        match self {
            JumpGeometry::Hyperplane { normal, .. } => {
                let tol = T::lit(1e-12);
                let mut found = None;
                for (i, &c) in normal.iter().enumerate() {
                    if (c.abs() - T::one()).abs() <= tol {
                        found = Some((i, c.signum()));
                    } else if c.abs() > tol {
                        return None;
                    }
                }
                found
            }
            _ => None,
        }
    }

    /// Euclidean distance from `x` to the geometry.
    pub fn distance(&self, x: &[T]) -> T {
        match self {
            JumpGeometry::Hyperplane { point, extent, .. } => {
                let (k, _) = self.normal_axis().expect("validated hyperplane");
                let mut s = (x[k] - point[k]) * (x[k] - point[k]);
                for (i, &(a, b)) in extent.iter().enumerate() {
                    if i == k {
                        continue;
                    }
                    let e = (a - x[i]).max(x[i] - b).max(T::zero());
                    s += e * e;
                }
                s.sqrt()
            }
            JumpGeometry::Sphere { center, radius } => (dist(x, center) - *radius).abs(),
            JumpGeometry::Polyline { vertices } => vertices
                .windows(2)
                .map(|w| point_segment_distance(x, &w[0], &w[1]))
                .fold(T::infinity(), T::min),
        }
    }

    /// Exact H^{N-1} measure of the geometry inside the open box.
    pub fn measure_in(&self, bx: &Aabb<T>) -> Result<T> {
        if bx.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: bx.dim(),
            });
        }
        match self {
            JumpGeometry::Hyperplane { point, extent, .. } => {
                let (k, _) = self.normal_axis().expect("validated hyperplane");
                if !(point[k] > bx.lo[k] && point[k] < bx.hi[k]) {
                    return Ok(T::zero());
                }
                let mut m = T::one();
                for (i, &(a, b)) in extent.iter().enumerate() {
                    if i == k {
                        continue;
                    }
                    let len = b.min(bx.hi[i]) - a.max(bx.lo[i]);
                    if len <= T::zero() {
                        return Ok(T::zero());
                    }
                    m *= len;
                }
                Ok(m)
            }
            JumpGeometry::Sphere { center, radius } => match center.len() {
                2 => Ok(circle_arc_in_box(center, *radius, bx)),
                _ => sphere_area_in_box(center, *radius, bx),
            },
            JumpGeometry::Polyline { vertices } => Ok(vertices
                .windows(2)
                .map(|w| clipped_segment_length(&w[0], &w[1], bx))
                .fold(T::zero(), |a, b| a + b)),
        }
    }

    /// Normal at the point of the geometry nearest to `x`.
    pub fn normal_near(&self, x: &[T]) -> Vec<T> {
        match self {
            JumpGeometry::Hyperplane { normal, .. } => normal.clone(),
            JumpGeometry::Sphere { center, .. } => {
                let d: Vec<T> = x.iter().zip(center).map(|(&a, &c)| a - c).collect();
                let n = norm(&d);
                if n > T::zero() {
                    d.into_iter().map(|v| v / n).collect()
                } else {
                    let mut e = vec![T::zero(); center.len()];
                    e[0] = T::one();
                    e
                }
            }
            JumpGeometry::Polyline { vertices } => {
                let mut best = (T::infinity(), 0usize);
                for (i, w) in vertices.windows(2).enumerate() {
                    let d = point_segment_distance(x, &w[0], &w[1]);
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                segment_normal(&vertices[best.1], &vertices[best.1 + 1]).to_vec()
            }
        }
    }

    /// A few points lying on the geometry, used for consistency checks.
    pub fn sample_points(&self) -> Vec<Vec<T>> {
        match self {
            JumpGeometry::Hyperplane { point, extent, .. } => {
                let (k, _) = self.normal_axis().expect("validated hyperplane");
                let mut p = point.clone();
                for (i, &(a, b)) in extent.iter().enumerate() {
                    if i == k {
                        continue;
                    }
                    p[i] = match (a.is_finite(), b.is_finite()) {
                        (true, true) => (a + b) * T::lit(0.5),
                        (true, false) => a + T::one(),
                        (false, true) => b - T::one(),
                        (false, false) => point[i],
                    };
                }
                vec![p]
            }
            JumpGeometry::Sphere { center, radius } => {
                let n = center.len();
                // irrational-ish directions avoid coinciding with axis-aligned pieces
                let dir: Vec<T> = (0..n).map(|i| T::lit([0.6, 0.48, 0.64][i])).collect();
                let dn = norm(&dir);
                vec![center
                    .iter()
                    .zip(&dir)
                    .map(|(&c, &d)| c + *radius * d / dn)
                    .collect()]
            }
            JumpGeometry::Polyline { vertices } => vertices
                .windows(2)
                .map(|w| vec![(w[0][0] + w[1][0]) * T::lit(0.5), (w[0][1] + w[1][1]) * T::lit(0.5)])
                .collect(),
        }
    }

    pub fn translated(&self, v: &[T]) -> Self {
        match self {
            JumpGeometry::Hyperplane { point, normal, extent } => {
                let (k, _) = self.normal_axis().expect("validated hyperplane");
                JumpGeometry::Hyperplane {
                    point: point.iter().zip(v).map(|(&p, &d)| p + d).collect(),
                    normal: normal.clone(),
                    extent: extent
                        .iter()
                        .enumerate()
                        .map(|(i, &(a, b))| if i == k { (a, b) } else { (a + v[i], b + v[i]) })
                        .collect(),
                }
            }
            JumpGeometry::Sphere { center, radius } => JumpGeometry::Sphere {
                center: center.iter().zip(v).map(|(&p, &d)| p + d).collect(),
                radius: *radius,
            },
            JumpGeometry::Polyline { vertices } => JumpGeometry::Polyline {
                vertices: vertices.iter().map(|p| [p[0] + v[0], p[1] + v[1]]).collect(),
            },
        }
    }

    /// Bounding box of the geometry (tangential extents may be infinite).
    pub fn bounds(&self) -> (Vec<T>, Vec<T>) {
        match self {
            JumpGeometry::Hyperplane { point, extent, .. } => {
                let (k, _) = self.normal_axis().expect("validated hyperplane");
                let lo = extent
                    .iter()
                    .enumerate()
                    .map(|(i, &(a, _))| if i == k { point[k] } else { a })
                    .collect();
                let hi = extent
                    .iter()
                    .enumerate()
                    .map(|(i, &(_, b))| if i == k { point[k] } else { b })
                    .collect();
                (lo, hi)
            }
            JumpGeometry::Sphere { center, radius } => (
                center.iter().map(|&c| c - *radius).collect(),
                center.iter().map(|&c| c + *radius).collect(),
            ),
            JumpGeometry::Polyline { vertices } => {
                let mut lo = vec![T::infinity(); 2];
                let mut hi = vec![T::neg_infinity(); 2];
                for p in vertices {
                    for i in 0..2 {
                        lo[i] = lo[i].min(p[i]);
                        hi[i] = hi[i].max(p[i]);
                    }
                }
                (lo, hi)
            }
        }
    }
}

pub(crate) fn segment_normal<T: Scalar>(a: &[T; 2], b: &[T; 2]) -> [T; 2] {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let l = (dx * dx + dy * dy).sqrt();
    [dy / l, -dx / l]
}

pub(crate) fn point_segment_distance<T: Scalar>(x: &[T], a: &[T; 2], b: &[T; 2]) -> T {
    let d = [b[0] - a[0], b[1] - a[1]];
    let w = [x[0] - a[0], x[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = (dot(&w, &d) / l2).max(T::zero()).min(T::one());
    let p = [a[0] + t * d[0], a[1] + t * d[1]];
    dist(x, &p)
}

/// Liang–Barsky clipping of a segment against the open box.
fn clipped_segment_length<T: Scalar>(a: &[T; 2], b: &[T; 2], bx: &Aabb<T>) -> T {
    let d = [b[0] - a[0], b[1] - a[1]];
    let mut t0 = T::zero();
    let mut t1 = T::one();
    for i in 0..2 {
        if d[i] == T::zero() {
            if !(a[i] > bx.lo[i] && a[i] < bx.hi[i]) {
                return T::zero();
            }
            continue;
        }
        let ta = (bx.lo[i] - a[i]) / d[i];
        let tb = (bx.hi[i] - a[i]) / d[i];
        let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
        t0 = t0.max(lo);
        t1 = t1.min(hi);
    }
    if t1 <= t0 {
        return T::zero();
    }
    (t1 - t0) * (d[0] * d[0] + d[1] * d[1]).sqrt()
}

fn circle_arc_in_box<T: Scalar>(c: &[T], r: T, bx: &Aabb<T>) -> T {
    let two_pi = T::TAU();
    let mut angles = vec![T::zero(), two_pi];
    for i in 0..2 {
        for &face in &[bx.lo[i], bx.hi[i]] {
            let s = (face - c[i]) / r;
            if s.abs() < T::one() {
                let base = s.acos(); // angle measured from axis i
                for a in [base, -base] {
                    // convert to angle from the x axis
                    let theta = if i == 0 { a } else { T::FRAC_PI_2() - a };
                    let mut t = theta % two_pi;
                    if t < T::zero() {
                        t += two_pi;
                    }
                    angles.push(t);
                }
            }
        }
    }
    angles.sort_by(|a, b| a.partial_cmp(b).expect("finite angle"));
    let mut total = T::zero();
    for w in angles.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let mid = (w[0] + w[1]) * T::lit(0.5);
        let p = [c[0] + r * mid.cos(), c[1] + r * mid.sin()];
        if bx.contains_open(&p) {
            total += r * (w[1] - w[0]);
        }
    }
    total
}

fn sphere_area_in_box<T: Scalar>(c: &[T], r: T, bx: &Aabb<T>) -> Result<T> {
    let n = c.len();
    let cut: Vec<usize> = (0..n)
        .filter(|&i| c[i] - r < bx.lo[i] || c[i] + r > bx.hi[i])
        .collect();
    let four_pi_r2 = T::lit(4.0) * T::PI() * r * r;
    if bx.distance_to(c) >= r {
        return Ok(T::zero());
    }
    match cut.as_slice() {
        [] => Ok(four_pi_r2),
        // Archimedes: the zone between two parallel planes has area 2πr·height.
        [i] => {
            let a = bx.lo[*i].max(c[*i] - r);
            let b = bx.hi[*i].min(c[*i] + r);
            Ok(T::lit(2.0) * T::PI() * r * (b - a).max(T::zero()))
        }
        _ => Err(Error::UnsupportedGeometry(
            "sphere cut by faces of more than one axis".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_square() -> Aabb<f64> {
        Aabb::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn box_rejects_inverted_corners() {
        assert!(Aabb::new(vec![1.0], vec![0.0]).is_err());
        assert!(Aabb::<f64>::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn domain_requires_strict_nesting() {
        let om = Aabb::new(vec![-0.5], vec![0.5]).unwrap();
        assert!(Domain::new(om.clone(), om.clone()).is_err());
        assert!(Domain::with_margin(om, 1.0).is_ok());
    }

    #[test]
    fn circle_inside_box_has_full_perimeter() {
        let g = JumpGeometry::Sphere { center: vec![0.5, 0.5], radius: 0.3 };
        let m = g.measure_in(&unit_square()).unwrap();
        assert!((m - 2.0 * PI * 0.3).abs() < 1e-14);
    }

    #[test]
    fn circle_cut_by_one_face() {
        // half the circle sticks out through x = 0.5
        let g = JumpGeometry::Sphere { center: vec![0.5, 0.5], radius: 0.3 };
        let half = Aabb::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        let m = g.measure_in(&half).unwrap();
        assert!((m - PI * 0.3).abs() < 1e-14);
    }

    #[test]
    fn polyline_circle_approximation_matches_perimeter() {
        // 10^6 segment polygon as independent perimeter oracle
        let n = 1_000_000;
        let r = 0.3;
        let verts: Vec<[f64; 2]> = (0..=n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                [0.5 + r * t.cos(), 0.5 + r * t.sin()]
            })
            .collect();
        let poly = JumpGeometry::Polyline { vertices: verts };
        let m = poly.measure_in(&unit_square()).unwrap();
        assert!((m - 2.0 * PI * r).abs() < 1e-9, "{m}");
    }

    #[test]
    fn sphere_zone_area() {
        let g = JumpGeometry::Sphere { center: vec![0.0, 0.0, 0.0], radius: 1.0 };
        let upper = Aabb::new(vec![-2.0, -2.0, 0.0], vec![2.0, 2.0, 2.0]).unwrap();
        assert!((g.measure_in(&upper).unwrap() - 2.0 * PI).abs() < 1e-14);
        let corner = Aabb::new(vec![0.0, 0.0, 0.0], vec![2.0, 2.0, 2.0]).unwrap();
        assert!(g.measure_in(&corner).is_err());
    }

    #[test]
    fn oblique_hyperplane_is_rejected() {
        let s = 0.5f64.sqrt();
        let g = JumpGeometry::hyperplane(vec![0.0, 0.0], vec![s, s], vec![(-1.0, 1.0), (-1.0, 1.0)]);
        assert!(matches!(g, Err(Error::UnsupportedGeometry(_))));
    }

    #[test]
    fn hyperplane_distance_accounts_for_extent() {
        let g: JumpGeometry<f64> = JumpGeometry::hyperplane(vec![0.0, 0.0], vec![1.0, 0.0], vec![(0.0, 0.0), (-1.0, 1.0)])
            .unwrap();
        assert!((g.distance(&[0.3, 0.2]) - 0.3).abs() < 1e-15);
        assert!((g.distance(&[0.3, 1.4]) - 0.5).abs() < 1e-15);
    }
}
