use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::timeseries::{lag_pairs, reflected_lag_pairs, LagPairSet};

use super::objective::{initial_param, penalty_reduced, WeightedMoments};
use super::{Bandwidth, FitResult, GaussianParam, LagFit, LocalCorrelationSet, Order, Point};

#[derive(Debug, Clone, Copy)]
pub struct FitOptions<T> {
    /// convergence threshold on the ∞-norm of the gradient
    pub tolerance: T,
    pub max_iterations: usize,
    /// |ρ| is clamped to this bound while iterating
    pub rho_bound: T,
    /// minimum of `b1·b2·Σ K_b` for a fit to be attempted
    pub min_effective_weight: T,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: T::lit(1e-6),
            max_iterations: 50,
            rho_bound: T::lit(0.999),
            min_effective_weight: T::lit(5.0),
        }
    }
}

fn inf_norm<T: Scalar>(g: &[T]) -> T {
    g.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// Solve `H x = g` for symmetric positive definite `H` by Cholesky.
/// Returns `None` when `H` is not numerically positive definite.
fn cholesky_solve<T: Scalar>(h: &[Vec<T>], g: &[T]) -> Option<Vec<T>> {
    let n = g.len();
    let mut l = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = h[i][j];
            for (a, b) in l[i][..j].iter().zip(&l[j][..j]) {
                s -= *a * *b;
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = g[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

/// Newton direction `−H⁻¹g`; when `H` is not positive definite a multiple of
/// the identity is added until it is. The flag is true for the pure Newton
/// step.
fn descent_direction<T: Scalar>(h: &[Vec<T>], g: &[T]) -> (Vec<T>, bool) {
    let neg_g: Vec<T> = g.iter().map(|&gi| -gi).collect();
    if let Some(d) = cholesky_solve(h, &neg_g) {
        if d.iter().zip(g).map(|(a, b)| *a * *b).sum::<T>() < T::zero() {
            return (d, true);
        }
    }
    let scale = h.iter().enumerate().fold(T::zero(), |acc, (i, row)| acc.max(row[i].abs()));
    let mut shift = (scale * T::lit(1e-3)).max(T::lit(1e-8));
    for _ in 0..30 {
        let shifted: Vec<Vec<T>> = h
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r[i] += shift;
                r
            })
            .collect();
        if let Some(d) = cholesky_solve(&shifted, &neg_g) {
            return (d, false);
        }
        shift *= T::lit(10.0);
    }
    (neg_g, false)
}

fn project<T: Scalar>(order: Order, x: &mut [T], rho_bound: T) -> bool {
    let r = order.dim() - 1;
    x[r] = x[r].max(-rho_bound).min(rho_bound);
    match order {
        Order::One => x[0].is_finite(),
        Order::Five => x.iter().all(|v| v.is_finite()) && x[2] > T::zero() && x[3] > T::zero(),
    }
}

pub fn fit_local_gaussian<T: Scalar>(
    pairs: &LagPairSet<T>,
    v: Point<T>,
    b: Bandwidth<T>,
    order: Order,
    init: Option<&GaussianParam<T>>,
) -> Result<FitResult<T>> {
    fit_local_gaussian_with(pairs, v, b, order, init, &FitOptions::default())
}

/// Damped Newton minimisation of the local penalty.
///
/// Newton directions come from the analytic Hessian; when the Hessian is not
/// positive definite it is shifted by a multiple of the identity. Step lengths
/// are halved until the Armijo condition holds.
pub fn fit_local_gaussian_with<T: Scalar>(
    pairs: &LagPairSet<T>,
    v: Point<T>,
    b: Bandwidth<T>,
    order: Order,
    init: Option<&GaussianParam<T>>,
    opts: &FitOptions<T>,
) -> Result<FitResult<T>> {
    let moments = WeightedMoments::new(pairs, v, b);
    let effective = moments.effective_weight(b);
    if !(effective > T::lit(1e-12)) {
        return Err(Error::DegenerateWeights(format!(
            "{}, {}",
            v.v1, v.v2
        )));
    }
    let start = match init {
        Some(p) if p.order() == order => *p,
        _ => initial_param(pairs, order),
    };
    let mut x = start.free();
    project(order, &mut x, opts.rho_bound);

    let eval = |x: &[T]| penalty_reduced(&moments, v, b, &GaussianParam::from_free(order, x));

    if effective < opts.min_effective_weight {
        let (_, g, _) = eval(&x);
        return Ok(FitResult {
            theta: GaussianParam::from_free(order, &x),
            converged: false,
            iterations: 0,
            score_norm: inf_norm(&g),
        });
    }

    let armijo = T::lit(1e-4);
    let (mut q, mut g, mut h) = eval(&x);
    let mut iterations = 0;
    while iterations < opts.max_iterations && !(inf_norm(&g) < opts.tolerance) {
        iterations += 1;
        let (dir, newton) = descent_direction(&h, &g);

        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let mut cand: Vec<T> = x.iter().zip(&dir).map(|(&a, &d)| a + step * d).collect();
            if project(order, &mut cand, opts.rho_bound) {
                let next = eval(&cand);
                let slope: T = g.iter().zip(cand.iter().zip(&x)).map(|(&gi, (&c, &a))| gi * (c - a)).sum();
                if next.0.is_finite() && next.0 <= q + armijo * slope {
                    accepted = Some((cand, next));
                    break;
                }
                // near the optimum the penalty change drowns in rounding; a full
                // Newton step that shrinks the gradient is still progress
                if newton && step == T::one() && next.0.is_finite() && inf_norm(&next.1) < inf_norm(&g) {
                    accepted = Some((cand, next));
                    break;
                }
            }
            step /= T::lit(2.0);
        }
        match accepted {
            Some((cand, next)) => {
                let stalled = cand == x;
                x = cand;
                (q, g, h) = next;
                if stalled {
                    break;
                }
            }
            None => break,
        }
    }
    let score_norm = inf_norm(&g);
    Ok(FitResult {
        theta: GaussianParam::from_free(order, &x),
        converged: score_norm < opts.tolerance,
        iterations,
        score_norm,
    })
}

fn fit_chain<T: Scalar>(
    pairs_for_lag: impl Fn(usize) -> Result<LagPairSet<T>>,
    lags: std::ops::RangeInclusive<usize>,
    v: Point<T>,
    b: Bandwidth<T>,
    order: Order,
    mut warm: Option<GaussianParam<T>>,
) -> Result<Vec<(LagFit<T>, FitResult<T>)>> {
    let mut out = Vec::new();
    for h in lags {
        let pairs = pairs_for_lag(h)?;
        let mut fit = fit_local_gaussian(&pairs, v, b, order, warm.as_ref())?;
        if !fit.converged && warm.is_some() {
            let cold = fit_local_gaussian(&pairs, v, b, order, None)?;
            if cold.converged || cold.score_norm < fit.score_norm {
                fit = cold;
            }
        }
        if fit.converged {
            warm = Some(fit.theta);
        }
        out.push((
            LagFit {
                lag: h,
                rho: fit.theta.rho(),
                converged: fit.converged,
                iterations: fit.iterations,
            },
            fit,
        ));
    }
    Ok(out)
}

fn check_truncation(m: usize, n: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("truncation m must be at least 1".into()));
    }
    if m >= n {
        return Err(Error::LagOutOfRange { lag: m, n });
    }
    Ok(())
}

/// Fits at `v` on `(z_k[t+h], z_l[t])`, `h = 0..=m`, and at the reflected point
/// on `(z_l[t+h], z_k[t])`, `h = 1..=m`. Each lag is warm-started from the
/// previous converged lag.
pub fn local_cross_correlations<T: Scalar>(
    zk: &[T],
    zl: &[T],
    v: Point<T>,
    b: Bandwidth<T>,
    m: usize,
    order: Order,
) -> Result<LocalCorrelationSet<T>> {
    check_truncation(m, zk.len())?;
    let forward = fit_chain(|h| lag_pairs(zk, zl, h), 0..=m, v, b, order, None)?;
    let lag0 = &forward[0].1;
    let warm = lag0.converged.then(|| lag0.theta.swapped());
    let forward = forward.into_iter().map(|(f, _)| f).collect();
    let reflected = fit_chain(
        |h| reflected_lag_pairs(zk, zl, h),
        1..=m,
        v.reflect(),
        b,
        order,
        warm,
    )?
    .into_iter()
    .map(|(f, _)| f)
    .collect();
    Ok(LocalCorrelationSet {
        point: v,
        bandwidth: b,
        order,
        forward,
        reflected,
    })
}

/// Auto-correlation counterpart with the convention `ρ̂_{kk|v}(0) ≡ 1`.
pub fn local_auto_correlations<T: Scalar>(
    z: &[T],
    v: Point<T>,
    b: Bandwidth<T>,
    m: usize,
    order: Order,
) -> Result<LocalCorrelationSet<T>> {
    check_truncation(m, z.len())?;
    let mut forward = vec![LagFit {
        lag: 0,
        rho: T::one(),
        converged: true,
        iterations: 0,
    }];
    forward.extend(
        fit_chain(|h| lag_pairs(z, z, h), 1..=m, v, b, order, None)?
            .into_iter()
            .map(|(f, _)| f),
    );
    let reflected = fit_chain(|h| lag_pairs(z, z, h), 1..=m, v.reflect(), b, order, None)?
        .into_iter()
        .map(|(f, _)| f)
        .collect();
    Ok(LocalCorrelationSet {
        point: v,
        bandwidth: b,
        order,
        forward,
        reflected,
    })
}
