//! Shift decomposition `∬ |f(x)−f(y)|^q / |x−y|^{N+1} = ∫ |z|^{−N−1} g(z) dz`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Aabb;
use crate::mollify::SampledField;
use crate::quadrature::{pairwise_sum, GaussLegendre};
use crate::scalar::Scalar;
use crate::special::sphere_area;

/// Shift grid parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    pub radii_per_decade: usize,
    /// Number of directions in 2D.
    pub directions_2d: usize,
    /// Gauss nodes in `cos φ` (3D).
    pub polar_3d: usize,
    /// Azimuths per polar node (3D).
    pub azimuth_3d: usize,
    /// Innermost radius as a fraction of the smallest grid spacing.
    pub h_min_factor: f64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self { radii_per_decade: 64, directions_2d: 32, polar_3d: 8, azimuth_3d: 16, h_min_factor: 0.25 }
    }
}

impl ShiftConfig {
    pub fn refined(&self) -> Self {
        Self {
            radii_per_decade: self.radii_per_decade * 2,
            directions_2d: self.directions_2d * 2,
            polar_3d: self.polar_3d * 2,
            azimuth_3d: self.azimuth_3d * 2,
            h_min_factor: self.h_min_factor / 2.0,
        }
    }
}

/// Directions with weights summing to `ω_{N−1}`.
pub(crate) fn directions<T: Scalar>(dim: usize, cfg: &ShiftConfig) -> Vec<(Vec<T>, T)> {
    match dim {
        1 => vec![(vec![T::one()], T::one()), (vec![-T::one()], T::one())],
        2 => {
            let m = cfg.directions_2d;
            let w = T::TAU() / T::from_count(m);
            (0..m)
                .map(|k| {
                    let th = T::TAU() * (T::from_count(k) + T::lit(0.5)) / T::from_count(m);
                    (vec![th.cos(), th.sin()], w)
                })
                .collect()
        }
        _ => {
            let gl = GaussLegendre::<T>::new(cfg.polar_3d);
            let m = cfg.azimuth_3d;
            let mut out = Vec::new();
            for (ct, wc) in gl.mapped(-T::one(), T::one()) {
                let st = (T::one() - ct * ct).sqrt();
                for k in 0..m {
                    let ph = T::TAU() * (T::from_count(k) + T::lit(0.5)) / T::from_count(m);
                    out.push((vec![st * ph.cos(), st * ph.sin(), ct], wc * T::TAU() / T::from_count(m)));
                }
            }
            out
        }
    }
}

/// Value and error estimate of `∫_S ∫_T |f(x)−f(y)|^q / |x−y|^{N+1} dy dx`.
pub(crate) fn shift_energy<T: Scalar>(
    f: &SampledField<T>,
    s: &Aabb<T>,
    t: &Aabb<T>,
    q: T,
    cfg: &ShiftConfig,
) -> Result<(T, T)> {
    let dim = f.dim();
    let gb = f.grid.bounds();
    if !s.inside(&gb) || !t.inside(&gb) {
        return Err(Error::InvalidDomain("integration boxes must lie inside the sampled grid".into()));
    }
    if cfg.radii_per_decade < 2 || cfg.h_min_factor <= 0.0 {
        return Err(Error::InvalidInput("shift grid needs at least two radii per decade".into()));
    }
    let symmetric = s == t;
    let mut dirs = directions::<T>(dim, cfg);
    if symmetric {
        // g(z) = g(−z) when S = T: keep one direction of each ± pair
        let half = dirs.len() / 2;
        dirs = match dim {
            1 | 2 => dirs.into_iter().take(half).map(|(d, w)| (d, w + w)).collect(),
            _ => dirs
                .into_iter()
                .filter(|(d, _)| d[2] > T::zero())
                .map(|(d, w)| (d, w + w))
                .collect(),
        };
    }
    let rmax = (0..dim)
        .map(|k| {
            let a = (s.hi[k] - t.lo[k]).abs().max((t.hi[k] - s.lo[k]).abs());
            a * a
        })
        .fold(T::zero(), |x, y| x + y)
        .sqrt();
    let spacing = f.grid.min_spacing().into_iter().fold(T::infinity(), T::min);
    let h = spacing * T::lit(cfg.h_min_factor);
    let m = T::from_count(cfg.radii_per_decade);
    let nrad = ((rmax / h).log10() * m).ceil().to_usize().unwrap_or(1).max(2);
    let step = T::LN_10() / m;
    let radii: Vec<T> = (0..nrad)
        .map(|j| h * T::lit(10.0).powf((T::from_count(j) + T::lit(0.5)) / m))
        .collect();

    let tasks = dirs.len() * nrad;
    let g: Vec<T> = (0..tasks)
        .into_par_iter()
        .map(|k| {
            let (d, _) = &dirs[k / nrad];
            let r = radii[k % nrad];
            let z: Vec<T> = d.iter().map(|&c| c * r).collect();
            g_value(f, s, t, &z, q)
        })
        .collect();

    let mut per_dir = Vec::with_capacity(dirs.len());
    let mut radial_err = T::zero();
    let qm1 = q - T::one();
    for (di, (_, w)) in dirs.iter().enumerate() {
        let gd = &g[di * nrad..(di + 1) * nrad];
        let terms: Vec<T> = gd.iter().zip(&radii).map(|(&gv, &r)| step * gv / r).collect();
        // midpoint error per cell ≈ Δ³ F''/24 with F'' from second differences
        let curv: T = terms.windows(3).map(|t| (t[0] - (t[1] + t[1]) + t[2]).abs()).sum();
        radial_err += *w * curv / T::lit(12.0);
        let inner = gd[0] * radii[0].powf(-q) * h.powf(qm1) / qm1;
        per_dir.push(*w * (pairwise_sum(&terms) + inner));
    }
    let value = pairwise_sum(&per_dir);
    let angular_err = if per_dir.len() >= 4 {
        let alt: T = per_dir.iter().step_by(2).map(|&v| v + v).sum();
        (alt - value).abs()
    } else {
        T::zero()
    };
    let omega = sphere_area::<T>(dim - 1);
    let inner_bound = omega * f.lipschitz.powf(qm1) * gradient_l1(f, s) * h.powf(qm1) / qm1;
    Ok((value.max(T::zero()), radial_err + angular_err + inner_bound))
}

/// `∫_S |f(x)|^q ∫_{R^N \ A} |x−y|^{−N−1} dy dx = ∫_S |f|^q ∫_{S^{N−1}} ρ_A(x, θ)^{−1} dθ dx`,
/// `ρ_A` the exit distance from the box `A`, with a coarse-rule error.
pub(crate) fn exterior_tail<T: Scalar>(f: &SampledField<T>, s: &Aabb<T>, ambient: &Aabb<T>, q: T, cfg: &ShiftConfig) -> Result<(T, T)> {
    let w = f.integration_weights(s)?;
    let fine = directions::<T>(f.dim(), &cfg.refined());
    let coarse = directions::<T>(f.dim(), cfg);
    let exit = |x: &[T], dirs: &[(Vec<T>, T)]| -> T {
        dirs.iter()
            .map(|(e, wt)| {
                let rho = (0..x.len())
                    .filter(|&k| e[k] != T::zero())
                    .map(|k| if e[k] > T::zero() { (ambient.hi[k] - x[k]) / e[k] } else { (ambient.lo[k] - x[k]) / e[k] })
                    .fold(T::infinity(), T::min);
                *wt / rho
            })
            .sum()
    };
    let parts: Vec<(T, T)> = (0..f.grid.len())
        .into_par_iter()
        .map(|flat| {
            let idx = f.grid.multi_index(flat);
            let wt = idx.iter().enumerate().fold(T::one(), |a, (k, &i)| a * w[k][i]);
            let v = crate::scalar::norm(f.value(flat));
            if wt == T::zero() || v == T::zero() {
                return (T::zero(), T::zero());
            }
            let x = f.grid.node(flat);
            let c = wt * v.powf(q);
            (c * exit(&x, &fine), c * exit(&x, &coarse))
        })
        .collect();
    let a: Vec<T> = parts.iter().map(|p| p.0).collect();
    let b: Vec<T> = parts.iter().map(|p| p.1).collect();
    let (a, b) = (pairwise_sum(&a), pairwise_sum(&b));
    Ok((a, (a - b).abs()))
}

/// `∫_S |∇f|` for the multilinear interpolant, cell-centre gradients.
pub(crate) fn gradient_l1<T: Scalar>(f: &SampledField<T>, s: &Aabb<T>) -> T {
    let dim = f.dim();
    let shape = f.grid.shape();
    let strides = f.grid.strides();
    let cells: usize = shape.iter().map(|n| n - 1).product();
    let mut acc = Vec::with_capacity(cells);
    for c in 0..cells {
        let mut rem = c;
        let mut idx = vec![0; dim];
        for k in (0..dim).rev() {
            idx[k] = rem % (shape[k] - 1);
            rem /= shape[k] - 1;
        }
        let mut vol = T::one();
        for k in 0..dim {
            let a = f.grid.axes[k][idx[k]].max(s.lo[k]);
            let b = f.grid.axes[k][idx[k] + 1].min(s.hi[k]);
            vol *= (b - a).max(T::zero());
        }
        if vol == T::zero() {
            continue;
        }
        let base: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        let mut g2 = T::zero();
        for k in 0..dim {
            let hk = f.grid.axes[k][idx[k] + 1] - f.grid.axes[k][idx[k]];
            let edges = 1usize << (dim - 1);
            for comp in 0..f.codim {
                let mut d = T::zero();
                for e in 0..edges {
                    let mut off = base;
                    let mut bit = 0;
                    for j in 0..dim {
                        if j == k {
                            continue;
                        }
                        if e >> bit & 1 == 1 {
                            off += strides[j];
                        }
                        bit += 1;
                    }
                    d += f.value(off + strides[k])[comp] - f.value(off)[comp];
                }
                let d = d / (T::from_count(edges) * hk);
                g2 += d * d;
            }
        }
        acc.push(vol * g2.sqrt());
    }
    pairwise_sum(&acc)
}

/// Quadrature on one axis of `S ∩ (T − z)`, with interpolation data for `x` and `x + z`.
struct AxisQuad<T> {
    w: Vec<T>,
    i0: Vec<usize>,
    f0: Vec<T>,
    i1: Vec<usize>,
    f1: Vec<T>,
}

fn axis_quad<T: Scalar>(nodes: &[T], lo: T, hi: T, shift: T) -> AxisQuad<T> {
    let tol = (hi - lo) * T::lit(1e-13);
    let mut br = Vec::with_capacity(2 * nodes.len() + 2);
    br.push(lo);
    let (mut a, mut b) = (0usize, 0usize);
    // merge nodes and nodes − shift, both sorted
    while a < nodes.len() || b < nodes.len() {
        let va = nodes.get(a).copied().unwrap_or(T::infinity());
        let vb = nodes.get(b).map(|&v| v - shift).unwrap_or(T::infinity());
        let v = if va <= vb {
            a += 1;
            va
        } else {
            b += 1;
            vb
        };
        if v > lo + tol && v < hi - tol && v - *br.last().expect("nonempty") > tol {
            br.push(v);
        }
    }
    br.push(hi);
    let n = nodes.len();
    let c = T::one() / T::lit(3.0).sqrt();
    let cap = 2 * (br.len() - 1);
    let mut q = AxisQuad {
        w: Vec::with_capacity(cap),
        i0: Vec::with_capacity(cap),
        f0: Vec::with_capacity(cap),
        i1: Vec::with_capacity(cap),
        f1: Vec::with_capacity(cap),
    };
    let (mut p0, mut p1) = (0usize, 0usize);
    for win in br.windows(2) {
        let mid = (win[0] + win[1]) * T::lit(0.5);
        let half = (win[1] - win[0]) * T::lit(0.5);
        for sgn in [-c, c] {
            let x = mid + sgn * half;
            let y = x + shift;
            while p0 + 2 < n && nodes[p0 + 1] <= x {
                p0 += 1;
            }
            while p1 + 2 < n && nodes[p1 + 1] <= y {
                p1 += 1;
            }
            q.w.push(half);
            q.i0.push(p0);
            q.f0.push(((x - nodes[p0]) / (nodes[p0 + 1] - nodes[p0])).max(T::zero()).min(T::one()));
            q.i1.push(p1);
            q.f1.push(((y - nodes[p1]) / (nodes[p1 + 1] - nodes[p1])).max(T::zero()).min(T::one()));
        }
    }
    q
}

/// `g(z) = ∫_{S ∩ (T − z)} |f(x+z) − f(x)|^q dx`, exact for `q = 2` on the
/// multilinear interpolant.
pub(crate) fn g_value<T: Scalar>(f: &SampledField<T>, s: &Aabb<T>, t: &Aabb<T>, z: &[T], q: T) -> T {
    let dim = f.dim();
    let mut quads = Vec::with_capacity(dim);
    for k in 0..dim {
        let lo = s.lo[k].max(t.lo[k] - z[k]);
        let hi = s.hi[k].min(t.hi[k] - z[k]);
        if !(hi > lo) {
            return T::zero();
        }
        quads.push(axis_quad(&f.grid.axes[k], lo, hi, z[k]));
    }
    let shape = f.grid.shape();
    let pw = Power::new(q);
    let mut bufs: Vec<(Vec<T>, Vec<T>)> = (1..dim)
        .map(|l| {
            let rest = shape[l..].iter().product::<usize>() * f.codim;
            (vec![T::zero(); rest], vec![T::zero(); rest])
        })
        .collect();
    accumulate(0, &f.values, &f.values, &quads, &shape, f.codim, &pw, &mut bufs)
}

#[derive(Clone, Copy)]
enum Power<T> {
    Two,
    Three,
    General(T),
}

impl<T: Scalar> Power<T> {
    fn new(q: T) -> Self {
        if q == T::lit(2.0) {
            Power::Two
        } else if q == T::lit(3.0) {
            Power::Three
        } else {
            Power::General(q * T::lit(0.5))
        }
    }

    /// `(d²)^{q/2}`.
    #[inline]
    fn of_square(self, d2: T) -> T {
        match self {
            Power::Two => d2,
            Power::Three => d2 * d2.sqrt(),
            Power::General(h) => d2.powf(h),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn accumulate<T: Scalar>(
    level: usize,
    vx: &[T],
    vy: &[T],
    quads: &[AxisQuad<T>],
    shape: &[usize],
    codim: usize,
    pw: &Power<T>,
    bufs: &mut [(Vec<T>, Vec<T>)],
) -> T {
    let qd = &quads[level];
    let last = level + 1 == quads.len();
    let mut acc = T::zero();
    if last {
        if codim == 1 {
            for j in 0..qd.w.len() {
                let (i0, f0, i1, f1) = (qd.i0[j], qd.f0[j], qd.i1[j], qd.f1[j]);
                let a = vx[i0] + f0 * (vx[i0 + 1] - vx[i0]);
                let b = vy[i1] + f1 * (vy[i1 + 1] - vy[i1]);
                let d = b - a;
                if d != T::zero() {
                    acc += qd.w[j] * pw.of_square(d * d);
                }
            }
        } else {
            for j in 0..qd.w.len() {
                let (i0, f0, i1, f1) = (qd.i0[j], qd.f0[j], qd.i1[j], qd.f1[j]);
                let mut d2 = T::zero();
                for c in 0..codim {
                    let a = vx[i0 * codim + c] + f0 * (vx[(i0 + 1) * codim + c] - vx[i0 * codim + c]);
                    let b = vy[i1 * codim + c] + f1 * (vy[(i1 + 1) * codim + c] - vy[i1 * codim + c]);
                    d2 += (b - a) * (b - a);
                }
                if d2 != T::zero() {
                    acc += qd.w[j] * pw.of_square(d2);
                }
            }
        }
        return acc;
    }
    let rest = shape[level + 1..].iter().product::<usize>() * codim;
    let (head, tail) = bufs.split_at_mut(1);
    let (bx, by) = &mut head[0];
    for j in 0..qd.w.len() {
        let (i0, f0, i1, f1) = (qd.i0[j], qd.f0[j], qd.i1[j], qd.f1[j]);
        let (a0, a1) = (&vx[i0 * rest..(i0 + 1) * rest], &vx[(i0 + 1) * rest..(i0 + 2) * rest]);
        let (b0, b1) = (&vy[i1 * rest..(i1 + 1) * rest], &vy[(i1 + 1) * rest..(i1 + 2) * rest]);
        for k in 0..rest {
            bx[k] = a0[k] + f0 * (a1[k] - a0[k]);
            by[k] = b0[k] + f1 * (b1[k] - b0[k]);
        }
        acc += qd.w[j] * accumulate(level + 1, bx, by, quads, shape, codim, pw, tail);
    }
    acc
}
