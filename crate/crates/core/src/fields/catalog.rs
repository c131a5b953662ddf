//! Named test fields with closed-form jump energies.
//!
//! | name | field | Ω | J_q(u) |
//! |---|---|---|---|
//! | `step1d_box` | `height·χ_(lo,hi)` | `(lo−½, lo+½)` | `|height|^q` |
//! | `halfplane_in_square` | `height·χ_{(0,2)×(−2,2)}` | `(−½,½)²` | `|height|^q` |
//! | `disc_in_square` | `height·χ_{B_r(c)}` | `(0,1)²` | `2πr|height|^q` |
//! | `two_jumps_1d` | `height·χ_(a,b)` | `(−½,½)` | `2|height|^q` |
//! | `vector_step` | `a` on `(−L,0)`, `b` on `(0,L)` | `(−½,½)` | `|b−a|^q` |

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Aabb, Domain, JumpGeometry, JumpPiece, Patch, PiecewiseConstantField, Region};
use crate::error::{Error, Result};
use crate::scalar::{dist, Scalar};

pub const NAMES: [&str; 5] = ["step1d_box", "halfplane_in_square", "disc_in_square", "two_jumps_1d", "vector_step"];

/// Catalog field together with its reference domain and closed-form data.
#[derive(Debug, Clone)]
pub struct CatalogField<T> {
    pub name: String,
    pub field: PiecewiseConstantField<T>,
    pub domain: Domain<T>,
    /// `(|u⁺−u⁻|, H^{N−1}(piece ∩ Ω))` for every piece meeting Ω.
    pub jumps_in_omega: Vec<(T, T)>,
}

impl<T: Scalar> CatalogField<T> {
    /// `Σ |u⁺−u⁻|^q · measure`, from the construction data only.
    pub fn closed_form_jump_energy(&self, q: T) -> T {
        self.jumps_in_omega
            .iter()
            .map(|&(h, m)| h.powf(q) * m)
            .fold(T::zero(), |a, b| a + b)
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct StepParams {
    #[serde(default = "one")]
    height: f64,
    #[serde(default)]
    lo: f64,
    #[serde(default = "one")]
    hi: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct HeightParams {
    #[serde(default = "one")]
    height: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct DiscParams {
    #[serde(default = "default_r")]
    r: f64,
    #[serde(default = "one")]
    height: f64,
    #[serde(default = "default_center")]
    center: [f64; 2],
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TwoJumpParams {
    #[serde(default = "one")]
    height: f64,
    #[serde(default = "default_a")]
    a: f64,
    #[serde(default = "default_b")]
    b: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct VectorStepParams {
    #[serde(default = "default_va")]
    a: Vec<f64>,
    #[serde(default = "default_vb")]
    b: Vec<f64>,
    #[serde(default = "one")]
    extent: f64,
}

fn one() -> f64 {
    1.0
}
fn default_r() -> f64 {
    0.3
}
fn default_center() -> [f64; 2] {
    [0.5, 0.5]
}
fn default_a() -> f64 {
    -0.25
}
fn default_b() -> f64 {
    0.25
}
fn default_va() -> Vec<f64> {
    vec![1.0, 0.0]
}
fn default_vb() -> Vec<f64> {
    vec![-1.0, 0.0]
}

fn params<P: for<'de> Deserialize<'de>>(name: &str, v: &Value) -> Result<P> {
    let v = if v.is_null() { Value::Object(Default::default()) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| Error::CatalogParams {
        entry: name.to_string(),
        reason: e.to_string(),
    })
}

fn bad(name: &str, reason: &str) -> Error {
    Error::CatalogParams {
        entry: name.to_string(),
        reason: reason.to_string(),
    }
}

fn lit<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn interval<T: Scalar>(lo: f64, hi: f64) -> Result<Aabb<T>> {
    Aabb::new(vec![T::lit(lo)], vec![T::lit(hi)])
}

/// Builds a catalog field from its name and a JSON parameter object
/// (`null` or `{}` selects the defaults).
pub fn catalog<T: Scalar>(name: &str, p: &Value) -> Result<CatalogField<T>> {
    match name {
        "step1d_box" => {
            let s: StepParams = params(name, p)?;
            if !(s.lo < s.hi) || s.height == 0.0 || !s.height.is_finite() {
                return Err(bad(name, "need lo < hi and a finite nonzero height"));
            }
            let field = PiecewiseConstantField::box_patch(interval(s.lo, s.hi)?, vec![T::lit(s.height)])?;
            let omega = interval(s.lo - 0.5, s.lo + 0.5)?;
            let mut jumps = vec![(T::lit(s.height.abs()), T::one())];
            if s.hi < s.lo + 0.5 {
                jumps.push((T::lit(s.height.abs()), T::one()));
            }
            let ambient = interval(s.lo - 1.5, s.hi.max(s.lo + 0.5) + 1.5)?;
            Ok(CatalogField {
                name: name.into(),
                field,
                domain: Domain::new(omega, ambient)?,
                jumps_in_omega: jumps,
            })
        }
        "halfplane_in_square" => {
            let s: HeightParams = params(name, p)?;
            if s.height == 0.0 || !s.height.is_finite() {
                return Err(bad(name, "height must be finite and nonzero"));
            }
            let bx = Aabb::new(lit(&[0.0, -2.0]), lit(&[2.0, 2.0]))?;
            let field = PiecewiseConstantField::box_patch(bx, vec![T::lit(s.height)])?;
            let omega = Aabb::new(lit(&[-0.5, -0.5]), lit(&[0.5, 0.5]))?;
            let ambient = Aabb::new(lit(&[-1.5, -2.5]), lit(&[2.5, 2.5]))?;
            Ok(CatalogField {
                name: name.into(),
                field,
                domain: Domain::new(omega, ambient)?,
                jumps_in_omega: vec![(T::lit(s.height.abs()), T::one())],
            })
        }
        "disc_in_square" => {
            let s: DiscParams = params(name, p)?;
            let c = s.center;
            let inside = c.iter().all(|&v| v - s.r > 0.0 && v + s.r < 1.0);
            if !(s.r > 0.0) || !inside || s.height == 0.0 || !s.height.is_finite() {
                return Err(bad(name, "the disc must lie inside (0,1)^2 with a nonzero height"));
            }
            let h = vec![T::lit(s.height)];
            let field = PiecewiseConstantField::new(
                2,
                1,
                vec![Patch {
                    region: Region::Ball { center: lit(&c), radius: T::lit(s.r) },
                    value: h.clone(),
                }],
                vec![JumpPiece {
                    geometry: JumpGeometry::Sphere { center: lit(&c), radius: T::lit(s.r) },
                    left: h,
                    right: vec![T::zero()],
                }],
            )?;
            let omega = Aabb::new(lit(&[0.0, 0.0]), lit(&[1.0, 1.0]))?;
            let ambient = Aabb::new(lit(&[-0.5, -0.5]), lit(&[1.5, 1.5]))?;
            Ok(CatalogField {
                name: name.into(),
                field,
                domain: Domain::new(omega, ambient)?,
                jumps_in_omega: vec![(T::lit(s.height.abs()), T::TAU() * T::lit(s.r))],
            })
        }
        "two_jumps_1d" => {
            let s: TwoJumpParams = params(name, p)?;
            if !(-0.5 < s.a && s.a < s.b && s.b < 0.5) || s.height == 0.0 || !s.height.is_finite() {
                return Err(bad(name, "need -1/2 < a < b < 1/2 and a nonzero height"));
            }
            let field = PiecewiseConstantField::box_patch(interval(s.a, s.b)?, vec![T::lit(s.height)])?;
            let hh = T::lit(s.height.abs());
            Ok(CatalogField {
                name: name.into(),
                field,
                domain: Domain::new(interval(-0.5, 0.5)?, interval(-1.5, 1.5)?)?,
                jumps_in_omega: vec![(hh, T::one()), (hh, T::one())],
            })
        }
        "vector_step" => {
            let s: VectorStepParams = params(name, p)?;
            if s.a.len() != s.b.len() || s.a.is_empty() {
                return Err(bad(name, "a and b must be nonempty vectors of equal length"));
            }
            if s.a == s.b || !(s.extent > 0.5) {
                return Err(bad(name, "need a != b and extent > 1/2"));
            }
            let a: Vec<T> = lit(&s.a);
            let b: Vec<T> = lit(&s.b);
            let zero = vec![T::zero(); a.len()];
            let d = a.len();
            let l = s.extent;
            let mut patches = Vec::new();
            let mut pieces = Vec::new();
            let mut push_jump = |x: f64, left: &Vec<T>, right: &Vec<T>| {
                if left != right {
                    pieces.push(JumpPiece {
                        geometry: JumpGeometry::point_1d(T::lit(x)),
                        left: left.clone(),
                        right: right.clone(),
                    });
                }
            };
            push_jump(-l, &zero, &a);
            push_jump(0.0, &a, &b);
            push_jump(l, &b, &zero);
            if a != zero {
                patches.push(Patch { region: Region::Box(interval(-l, 0.0)?), value: a.clone() });
            }
            if b != zero {
                patches.push(Patch { region: Region::Box(interval(0.0, l)?), value: b.clone() });
            }
            let field = PiecewiseConstantField::new(1, d, patches, pieces)?;
            Ok(CatalogField {
                name: name.into(),
                field,
                domain: Domain::new(interval(-0.5, 0.5)?, interval(-l - 1.0, l + 1.0)?)?,
                jumps_in_omega: vec![(dist(&a, &b), T::one())],
            })
        }
        other => Err(Error::UnknownCatalogEntry(other.to_string())),
    }
}
