//! Local likelihood penalty for the bivariate Gaussian approximation.
//!
//! With the Gaussian product kernel, `∫ K_b(y − v) ψ(y; θ) dy` is the density
//! of `N(μ, Σ_θ + diag(b1², b2²))` at `v`, so the whole penalty depends on the
//! data only through kernel-weighted moments of the pairs. Those moments are
//! computed once per `(pairs, v, b)` and each Newton iterate is O(1).

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::normal_pdf;
use crate::timeseries::LagPairSet;

use super::{Bandwidth, GaussianParam, Order, Point};

pub(crate) type Vec5<T> = [T; 5];
pub(crate) type Mat5<T> = [[T; 5]; 5];
type Mat2<T> = [[T; 2]; 2];

/// Kernel weight `K_b(w − v)` for the Gaussian product kernel.
pub fn kernel_weight<T: Scalar>(w: [T; 2], v: Point<T>, b: Bandwidth<T>) -> T {
    normal_pdf((w[0] - v.v1) / b.b1) * normal_pdf((w[1] - v.v2) / b.b2) / (b.b1 * b.b2)
}

/// Kernel-weighted summary of a pair set around a point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WeightedMoments<T> {
    /// Σ w
    pub weight: T,
    /// weighted mean of the pairs
    pub mean: [T; 2],
    /// Σ w (x − mean)(x − mean)ᵀ
    pub scatter: Mat2<T>,
    /// number of pairs (the `n` multiplying the integral term)
    pub count: usize,
}

impl<T: Scalar> WeightedMoments<T> {
    pub fn new(pairs: &LagPairSet<T>, v: Point<T>, b: Bandwidth<T>) -> Self {
        let weights: Vec<T> = pairs.pairs.iter().map(|&w| kernel_weight(w, v, b)).collect();
        let weight: T = weights.iter().copied().sum();
        let mut mean = [T::zero(); 2];
        if weight > T::zero() {
            for (w, x) in weights.iter().zip(&pairs.pairs) {
                mean[0] += *w * x[0];
                mean[1] += *w * x[1];
            }
            mean[0] /= weight;
            mean[1] /= weight;
        }
        let mut scatter = [[T::zero(); 2]; 2];
        for (&w, x) in weights.iter().zip(&pairs.pairs) {
            let d = [x[0] - mean[0], x[1] - mean[1]];
            scatter[0][0] += w * d[0] * d[0];
            scatter[0][1] += w * d[0] * d[1];
            scatter[1][1] += w * d[1] * d[1];
        }
        scatter[1][0] = scatter[0][1];
        Self {
            weight,
            mean,
            scatter,
            count: pairs.len(),
        }
    }

    /// Σ w, rescaled to an effective count (`b1·b2·Σ K_b`).
    pub fn effective_weight(&self, b: Bandwidth<T>) -> T {
        self.weight * b.b1 * b.b2
    }
}

/// Starting values from the unweighted moments of the pairs, correlation
/// clamped to ±0.95. Local moments around a tail point are a poor start for
/// the five-parameter fit, which then drifts along a flat ridge.
pub(crate) fn initial_param<T: Scalar>(pairs: &LagPairSet<T>, order: Order) -> GaussianParam<T> {
    let n = T::from_usize_lossy(pairs.len().max(1));
    let mut mean = [T::zero(); 2];
    for x in &pairs.pairs {
        mean[0] += x[0];
        mean[1] += x[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    let mut s = [T::zero(); 3];
    for x in &pairs.pairs {
        let d = [x[0] - mean[0], x[1] - mean[1]];
        s[0] += d[0] * d[0];
        s[1] += d[0] * d[1];
        s[2] += d[1] * d[1];
    }
    let mut rho = s[1] / (s[0] * s[2]).sqrt();
    if !rho.is_finite() {
        rho = T::zero();
    }
    let bound = T::lit(0.95);
    rho = rho.max(-bound).min(bound);
    match order {
        Order::One => GaussianParam::One { rho },
        Order::Five => {
            let floor = T::lit(1e-3);
            GaussianParam::Five {
                mu1: mean[0],
                mu2: mean[1],
                sigma1: (s[0] / n).sqrt().max(floor),
                sigma2: (s[2] / n).sqrt().max(floor),
                rho,
            }
        }
    }
}

fn mat_mul<T: Scalar>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    let mut c = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn trace_prod<T: Scalar>(a: &Mat2<T>, b: &Mat2<T>) -> T {
    a[0][0] * b[0][0] + a[0][1] * b[1][0] + a[1][0] * b[0][1] + a[1][1] * b[1][1]
}

fn mat_vec<T: Scalar>(a: &Mat2<T>, x: [T; 2]) -> [T; 2] {
    [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
}

fn sym<T: Scalar>(a: T, b: T, d: T) -> Mat2<T> {
    [[a, b], [b, d]]
}

/// Value, gradient and Hessian with respect to `(μ1, μ2, σ1, σ2, ρ)` of
///
/// `Σ_t w_t log N(x_t; μ, Σ_θ + diag(d))`
///
/// expressed through `W = Σ w`, `r = Σ w (x − μ)` and
/// `M = Σ w (x − μ)(x − μ)ᵀ`.
pub(crate) fn weighted_loglik<T: Scalar>(
    weight: T,
    r: [T; 2],
    m: &Mat2<T>,
    theta: &Vec5<T>,
    d: [T; 2],
) -> (T, Vec5<T>, Mat5<T>) {
    let [_, _, s1, s2, rho] = *theta;
    let zero = T::zero();
    let two = T::lit(2.0);
    let half = T::lit(0.5);

    let s = sym(s1 * s1 + d[0], rho * s1 * s2, s2 * s2 + d[1]);
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let p = sym(s[1][1] / det, -s[0][1] / det, s[0][0] / det);

    // first and second derivatives of the covariance, indexed by σ1, σ2, ρ
    let ds = [
        sym(two * s1, rho * s2, zero),
        sym(zero, rho * s1, two * s2),
        sym(zero, s1 * s2, zero),
    ];
    let dds = |i: usize, j: usize| -> Mat2<T> {
        match (i.min(j), i.max(j)) {
            (0, 0) => sym(two, zero, zero),
            (1, 1) => sym(zero, zero, two),
            (2, 2) => sym(zero, zero, zero),
            (0, 1) => sym(zero, rho, zero),
            (0, 2) => sym(zero, s2, zero),
            _ => sym(zero, s1, zero),
        }
    };

    let pm = mat_mul(&p, m);
    let pmp = mat_mul(&pm, &p);
    let pr = mat_vec(&p, r);
    let p_ds: [Mat2<T>; 3] = [mat_mul(&p, &ds[0]), mat_mul(&p, &ds[1]), mat_mul(&p, &ds[2])];

    let value = -weight * (T::TAU().ln() + half * det.ln()) - half * (pm[0][0] + pm[1][1]);

    let mut grad = [zero; 5];
    grad[0] = pr[0];
    grad[1] = pr[1];
    for j in 0..3 {
        grad[2 + j] = half * trace_prod(&ds[j], &pmp) - half * weight * (p_ds[j][0][0] + p_ds[j][1][1]);
    }

    let mut hess = [[zero; 5]; 5];
    hess[0][0] = -weight * p[0][0];
    hess[0][1] = -weight * p[0][1];
    hess[1][0] = -weight * p[1][0];
    hess[1][1] = -weight * p[1][1];
    for j in 0..3 {
        // −P S_j P r
        let v = mat_vec(&p_ds[j], pr);
        hess[0][2 + j] = -v[0];
        hess[1][2 + j] = -v[1];
        hess[2 + j][0] = -v[0];
        hess[2 + j][1] = -v[1];
    }
    for i in 0..3 {
        for j in i..3 {
            let sij = dds(i, j);
            let t_ij = trace_prod(&p_ds[i], &p_ds[j]);
            let t_pij = p[0][0] * sij[0][0] + p[0][1] * sij[1][0] + p[1][0] * sij[0][1] + p[1][1] * sij[1][1];
            let quad = trace_prod(&mat_mul(&mat_mul(&ds[i], &p), &ds[j]), &pmp);
            let h = weight * half * (t_ij - t_pij) - quad + half * trace_prod(&sij, &pmp);
            hess[2 + i][2 + j] = h;
            hess[2 + j][2 + i] = h;
        }
    }
    (value, grad, hess)
}

/// Penalty evaluated from precomputed moments, with gradient and Hessian in
/// the full five-parameter coordinates.
pub(crate) fn penalty_full<T: Scalar>(
    moments: &WeightedMoments<T>,
    v: Point<T>,
    b: Bandwidth<T>,
    theta: &Vec5<T>,
) -> (T, Vec5<T>, Mat5<T>) {
    let mu = [theta[0], theta[1]];
    let dm = [moments.mean[0] - mu[0], moments.mean[1] - mu[1]];
    let w = moments.weight;
    let r = [w * dm[0], w * dm[1]];
    let m = [
        [
            moments.scatter[0][0] + w * dm[0] * dm[0],
            moments.scatter[0][1] + w * dm[0] * dm[1],
        ],
        [
            moments.scatter[1][0] + w * dm[1] * dm[0],
            moments.scatter[1][1] + w * dm[1] * dm[1],
        ],
    ];
    let (ld, gd, hd) = weighted_loglik(w, r, &m, theta, [T::zero(); 2]);

    let rv = [v.v1 - mu[0], v.v2 - mu[1]];
    let mv = [[rv[0] * rv[0], rv[0] * rv[1]], [rv[1] * rv[0], rv[1] * rv[1]]];
    let (lv, gv, hv) = weighted_loglik(T::one(), rv, &mv, theta, [b.b1 * b.b1, b.b2 * b.b2]);
    let scale = T::from_usize_lossy(moments.count) * lv.exp();

    let value = -ld + scale;
    let mut grad = [T::zero(); 5];
    let mut hess = [[T::zero(); 5]; 5];
    for i in 0..5 {
        grad[i] = -gd[i] + scale * gv[i];
        for j in 0..5 {
            hess[i][j] = -hd[i][j] + scale * (gv[i] * gv[j] + hv[i][j]);
        }
    }
    (value, grad, hess)
}

/// Penalty, gradient and Hessian restricted to the free parameters of `order`.
pub(crate) fn penalty_reduced<T: Scalar>(
    moments: &WeightedMoments<T>,
    v: Point<T>,
    b: Bandwidth<T>,
    theta: &GaussianParam<T>,
) -> (T, Vec<T>, Vec<Vec<T>>) {
    let full = theta.full();
    let (q, g, h) = penalty_full(moments, v, b, &full);
    match theta.order() {
        Order::Five => (q, g.to_vec(), h.iter().map(|r| r.to_vec()).collect()),
        Order::One => (q, vec![g[4]], vec![vec![h[4][4]]]),
    }
}

fn check_param<T: Scalar>(theta: &GaussianParam<T>) -> Result<()> {
    let rho = theta.rho();
    if !(rho.abs() < T::one()) {
        return Err(Error::RhoOutOfRange(rho.as_f64()));
    }
    let f = theta.full();
    if !(f[2] > T::zero() && f[3] > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "standard deviations must be positive, got ({}, {})",
            f[2], f[3]
        )));
    }
    Ok(())
}

/// log ψ_p(w; θ) written out directly from the density formula.
pub fn log_density<T: Scalar>(w: [T; 2], theta: &GaussianParam<T>) -> T {
    let [mu1, mu2, s1, s2, rho] = theta.full();
    let (a, c) = (w[0] - mu1, w[1] - mu2);
    let one_m = T::one() - rho * rho;
    let quad = (s2 * s2 * a * a - T::lit(2.0) * s1 * s2 * rho * a * c + s1 * s1 * c * c)
        / (s1 * s1 * s2 * s2 * one_m);
    -(T::TAU() * s1 * s2 * one_m.sqrt()).ln() - quad / T::lit(2.0)
}

/// Density at `v` of `N(μ, Σ_θ + diag(b1², b2²))`, i.e. `∫ K_b(y − v) ψ(y; θ) dy`.
pub fn kernel_integral<T: Scalar>(v: Point<T>, b: Bandwidth<T>, theta: &GaussianParam<T>) -> T {
    let [mu1, mu2, s1, s2, rho] = theta.full();
    let a11 = s1 * s1 + b.b1 * b.b1;
    let a22 = s2 * s2 + b.b2 * b.b2;
    let a12 = rho * s1 * s2;
    let det = a11 * a22 - a12 * a12;
    let (x, y) = (v.v1 - mu1, v.v2 - mu2);
    let q = (a22 * x * x - T::lit(2.0) * a12 * x * y + a11 * y * y) / det;
    (-q / T::lit(2.0)).exp() / (T::TAU() * det.sqrt())
}

/// Local likelihood penalty
/// `−Σ_t K_b(X_t − v) log ψ_p(X_t; θ) + n ∫ K_b(y − v) ψ_p(y; θ) dy`,
/// summed pair by pair.
pub fn penalty<T: Scalar>(
    pairs: &LagPairSet<T>,
    v: Point<T>,
    b: Bandwidth<T>,
    theta: &GaussianParam<T>,
) -> Result<T> {
    check_param(theta)?;
    let data: T = pairs
        .pairs
        .iter()
        .map(|&w| kernel_weight(w, v, b) * log_density(w, theta))
        .sum();
    Ok(-data + T::from_usize_lossy(pairs.len()) * kernel_integral(v, b, theta))
}

/// Analytic gradient of [`penalty`] in the free parameters of `theta`.
pub fn penalty_gradient<T: Scalar>(
    pairs: &LagPairSet<T>,
    v: Point<T>,
    b: Bandwidth<T>,
    theta: &GaussianParam<T>,
) -> Result<Vec<T>> {
    check_param(theta)?;
    let moments = WeightedMoments::new(pairs, v, b);
    Ok(penalty_reduced(&moments, v, b, theta).1)
}

/// Analytic Hessian of [`penalty`] in the free parameters of `theta`.
pub fn penalty_hessian<T: Scalar>(
    pairs: &LagPairSet<T>,
    v: Point<T>,
    b: Bandwidth<T>,
    theta: &GaussianParam<T>,
) -> Result<Vec<Vec<T>>> {
    check_param(theta)?;
    let moments = WeightedMoments::new(pairs, v, b);
    Ok(penalty_reduced(&moments, v, b, theta).2)
}
