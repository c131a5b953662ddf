//! Gamma values at half-integers and the sphere/ball measures built on them.

use crate::scalar::Scalar;

/// Γ(m/2) for a positive integer `m`, by the exact recursion from Γ(1/2) = √π
/// and Γ(1) = 1.
pub fn gamma_half<T: Scalar>(m: usize) -> T {
    assert!(m >= 1, "Gamma(m/2) needs m >= 1");
    let (mut g, mut k) = if m.is_multiple_of(2) {
        (T::one(), 2usize)
    } else {
        (T::PI().sqrt(), 1usize)
    };
    while k < m {
        g *= T::from_count(k) / T::lit(2.0);
        k += 2;
    }
    g
}

/// Surface area of the unit sphere S^k ⊂ R^{k+1}; ω_0 = 2 counts the two
/// points of S^0.
pub fn sphere_area<T: Scalar>(k: usize) -> T {
    let n = k + 1;
    T::lit(2.0) * T::PI().powf(T::from_count(n) / T::lit(2.0)) / gamma_half::<T>(n)
}

/// Lebesgue measure of the unit ball in R^n.
pub fn ball_volume<T: Scalar>(n: usize) -> T {
    sphere_area::<T>(n - 1) / T::from_count(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn half_integer_gamma() {
        assert!((gamma_half::<f64>(1) - PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half::<f64>(2), 1.0);
        assert!((gamma_half::<f64>(5) - 0.75 * PI.sqrt()).abs() < 1e-14);
        assert_eq!(gamma_half::<f64>(8), 6.0);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area::<f64>(0) - 2.0).abs() < 1e-15);
        assert!((sphere_area::<f64>(1) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area::<f64>(2) - 4.0 * PI).abs() < 1e-13);
        assert!((ball_volume::<f64>(3) - 4.0 * PI / 3.0).abs() < 1e-13);
    }
}
