//! Gagliardo `W^{1/q,q}` energies of sampled fields.
//!
//! Every routine returns the double integral itself (the `q`-th power of the
//! seminorm), never its `q`-th root.

mod localized;
mod profile;
mod shift;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Aabb, Domain};
use crate::mollify::SampledField;
use crate::scalar::Scalar;

pub use localized::localized_functional;
pub use profile::{gagliardo_energy_1d_profile, profile_energy_for_field};
pub use shift::ShiftConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeminormMethod {
    ShiftDecomposition,
    ScaledProfile1d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormResult<T> {
    /// `∫∫ |f(x)−f(y)|^q / |x−y|^{N+1}`.
    pub value: T,
    pub q: T,
    /// Box the outer variable ranges over.
    pub domain: Aabb<T>,
    pub method: SeminormMethod,
    pub error_estimate: T,
}

impl<T: Scalar> SeminormResult<T> {
    /// The seminorm itself.
    pub fn seminorm(&self) -> T {
        self.value.powf(T::one() / self.q)
    }
}

fn check_input<T: Scalar>(f: &SampledField<T>, omega: &Aabb<T>, q: T) -> Result<()> {
    if !(q > T::one()) {
        return Err(Error::QClampError(q.to_f64_lossy()));
    }
    if omega.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: omega.dim() });
    }
    if let (Some(spacing), Some(limit)) = (f.layer_spacing, f.layer_limit) {
        // grid coordinates carry rounding, so allow a few ulps of excess
        if spacing > limit * T::lit(1.0 + 1e-9) {
            return Err(Error::LayerUnresolved { spacing: spacing.to_f64_lossy(), limit: limit.to_f64_lossy() });
        }
    }
    Ok(())
}

/// `∫_Ω ∫_Ω |f(x)−f(y)|^q / |x−y|^{N+1} dy dx` with the default shift grid.
pub fn gagliardo_energy<T: Scalar>(f: &SampledField<T>, omega: &Aabb<T>, q: T) -> Result<SeminormResult<T>> {
    gagliardo_energy_with(f, omega, q, &ShiftConfig::default())
}

pub fn gagliardo_energy_with<T: Scalar>(
    f: &SampledField<T>,
    omega: &Aabb<T>,
    q: T,
    cfg: &ShiftConfig,
) -> Result<SeminormResult<T>> {
    check_input(f, omega, q)?;
    let (value, err) = shift::shift_energy(f, omega, omega, q, cfg)?;
    Ok(SeminormResult {
        value,
        q,
        domain: omega.clone(),
        method: SeminormMethod::ShiftDecomposition,
        error_estimate: err,
    })
}

/// `E(R^N) − E(R^N \ Ω̄) = E(Ω, Ω) + 2 E(Ω, R^N \ Ω)`. `f` must vanish
/// outside the ambient box; the part of `R^N` beyond it is integrated
/// along rays from each point of Ω.
pub fn relative_energy<T: Scalar>(f: &SampledField<T>, domain: &Domain<T>, q: T) -> Result<SeminormResult<T>> {
    relative_energy_with(f, domain, q, &ShiftConfig::default())
}

pub fn relative_energy_with<T: Scalar>(
    f: &SampledField<T>,
    domain: &Domain<T>,
    q: T,
    cfg: &ShiftConfig,
) -> Result<SeminormResult<T>> {
    let omega = &domain.omega;
    check_input(f, omega, q)?;
    let (inner, e_inner) = shift::shift_energy(f, omega, omega, q, cfg)?;
    let (cross, e_cross) = shift::shift_energy(f, omega, &domain.ambient, q, cfg)?;
    let (tail, e_tail) = shift::exterior_tail(f, omega, &domain.ambient, q, cfg)?;
    let two = T::lit(2.0);
    Ok(SeminormResult {
        value: (two * (cross + tail) - inner).max(T::zero()),
        q,
        domain: omega.clone(),
        method: SeminormMethod::ShiftDecomposition,
        error_estimate: two * (e_cross + e_tail) + e_inner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollify::Grid;

    fn linear_1d(n: usize) -> SampledField<f64> {
        let grid = Grid::new(vec![(0..=n).map(|i| i as f64 / n as f64).collect()]).unwrap();
        SampledField::from_fn(grid, 1, |x| vec![x[0]]).unwrap()
    }

    #[test]
    fn linear_field_has_unit_energy() {
        let f = linear_1d(20);
        let bx = Aabb::new(vec![0.0], vec![1.0]).unwrap();
        let r = gagliardo_energy(&f, &bx, 2.0).unwrap();
        assert!((r.value - 1.0).abs() < 5e-4, "{}", r.value);
        // the small-shift bound dominates: 2 h / (q − 1) with h = 1/80
        assert!((r.value - 1.0).abs() <= r.error_estimate && r.error_estimate < 0.03);
    }

    #[test]
    fn constant_field_is_zero() {
        let grid = Grid::uniform(&Aabb::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(), 9).unwrap();
        let f = SampledField::from_fn(grid, 2, |_| vec![3.0, -1.0]).unwrap();
        let bx = Aabb::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(gagliardo_energy(&f, &bx, 1.5).unwrap().value, 0.0);
    }

    #[test]
    fn q_must_exceed_one() {
        let f = linear_1d(4);
        let bx = Aabb::new(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(gagliardo_energy(&f, &bx, 1.0), Err(Error::QClampError(_))));
    }
}
