//! Gauss–Legendre rules and ordered reductions.

use crate::scalar::Scalar;

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    /// Nodes and weights by Newton iteration on the Legendre recurrence,
    /// carried out in `f64` regardless of `T`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let mut acc = T::zero();
        for (x, w) in self.mapped(a, b) {
            acc += w * f(x);
        }
        acc
    }

    /// Composite rule over consecutive breakpoints (assumed sorted).
    pub fn composite<F: FnMut(T) -> T>(&self, breaks: &[T], mut f: F) -> T {
        let mut acc = T::zero();
        for win in breaks.windows(2) {
            if win[1] > win[0] {
                acc += self.integrate(win[0], win[1], &mut f);
            }
        }
        acc
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Pairwise summation in a fixed order; the result only depends on the
/// slice contents, never on how the slice was produced.
pub fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        let mut acc = T::zero();
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sorts and removes near-duplicate breakpoints, keeping those in [lo, hi].
pub fn clean_breaks<T: Scalar>(mut pts: Vec<T>, lo: T, hi: T) -> Vec<T> {
    pts.retain(|&p| p >= lo && p <= hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    let tol = (hi - lo).abs() * T::lit(1e-13);
    let mut out: Vec<T> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().is_none_or(|&l| p - l > tol) {
            out.push(p);
        }
    }
    if let Some(last) = out.last_mut() {
        *last = hi;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::<f64>::new(5);
        // degree 9 is the highest exact degree for 5 nodes
        let v = gl.integrate(-1.0, 2.0, |x| x.powi(9) - 3.0 * x.powi(4));
        let exact = (2f64.powi(10) - 1.0) / 10.0 - 3.0 * (2f64.powi(5) + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-11, "{v} vs {exact}");
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [1, 2, 7, 16, 48] {
            let gl = GaussLegendre::<f64>::new(n);
            let s: f64 = gl.mapped(0.0, 3.0).map(|(_, w)| w).sum();
            assert!((s - 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn pairwise_sum_is_order_fixed() {
        let xs: Vec<f64> = (0..1000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let a = pairwise_sum(&xs);
        let b = pairwise_sum(&xs.clone());
        assert_eq!(a.to_bits(), b.to_bits());
        let naive: f64 = xs.iter().sum();
        assert!((a - naive).abs() < 1e-12);
    }

    #[test]
    fn clean_breaks_dedups_and_clips() {
        let b = clean_breaks(vec![0.5, 0.5 + 1e-16, -3.0, 0.2], 0.0, 1.0);
        assert_eq!(b, vec![0.0, 0.2, 0.5, 1.0]);
    }
}
