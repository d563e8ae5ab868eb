//! Derivative-free maximization used by all policy objectives.
//!
//! `maximize_1d` does a log-spaced grid scan followed by golden-section
//! refinement of the best bracket; `maximize_nd` runs Nelder-Mead from a
//! set of deterministic Latin-hypercube starts. Both are deterministic
//! for fixed inputs.

use rand::Rng;

use crate::error::{Error, Result};
use crate::special::{derive_seed, rng_from_seed};

/// Tuning knobs shared by both search routines.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerConfig {
    /// Points in the initial log-spaced scan.
    pub grid_points: usize,
    /// Convergence tolerance on the argument.
    pub refine_tol: f64,
    /// Nelder-Mead restarts (Latin-hypercube starts).
    pub nd_restarts: usize,
    /// Nelder-Mead iteration cap per restart.
    pub nd_max_iters: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grid_points: 400,
            refine_tol: 1e-9,
            nd_restarts: 8,
            nd_max_iters: 2000,
        }
    }
}

/// Default 1-D threshold search domain; unit-exponential mass beyond 60
/// is negligible.
pub const THRESHOLD_DOMAIN: (f64, f64) = (1e-6, 60.0);

fn check_finite(v: f64, arg: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteObjective { arg: arg.to_vec() })
    }
}

/// Maximize a scalar function on `(lo, hi)`.
///
/// Returns `(argmax, max)`; the returned max never falls below the best
/// grid sample. Grid ties break toward the smaller argument.
pub fn maximize_1d<F>(mut objective: F, domain: (f64, f64), config: &OptimizerConfig) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let (lo, hi) = domain;
    if !(lo < hi) {
        return Err(Error::Argument(format!("empty domain ({lo}, {hi})")));
    }
    let n = config.grid_points.max(3);
    let log_spacing = lo > 0.0;
    let point = |i: usize| -> f64 {
        let t = i as f64 / (n - 1) as f64;
        if log_spacing {
            (lo.ln() + t * (hi.ln() - lo.ln())).exp()
        } else {
            lo + t * (hi - lo)
        }
    };
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..n {
        let x = point(i);
        let v = check_finite(objective(x), &[x])?;
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let bracket_lo = point(best_i.saturating_sub(1));
    let bracket_hi = point((best_i + 1).min(n - 1));
    let (mut x_star, mut v_star) =
        golden_section(&mut objective, bracket_lo, bracket_hi, config.refine_tol)?;
    if v_star < best_v {
        x_star = point(best_i);
        v_star = best_v;
    }
    Ok((x_star, v_star))
}

fn golden_section<F>(f: &mut F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = check_finite(f(x1), &[x1])?;
    let mut f2 = check_finite(f(x2), &[x2])?;
    while (b - a) > tol * (1.0 + x1.abs()) {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = check_finite(f(x1), &[x1])?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = check_finite(f(x2), &[x2])?;
        }
    }
    if f1 >= f2 {
        Ok((x1, f1))
    } else {
        Ok((x2, f2))
    }
}

/// Maximize over a box in `dim` dimensions with restarted Nelder-Mead.
///
/// Starts are Latin-hypercube samples of `init_box` drawn from a fixed
/// seed, so identical inputs give identical outputs. The returned value
/// is the best point ever evaluated across all restarts.
pub fn maximize_nd<F>(
    mut objective: F,
    dim: usize,
    init_box: &[(f64, f64)],
    config: &OptimizerConfig,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> f64,
{
    if dim == 0 || init_box.len() != dim {
        return Err(Error::Argument(format!(
            "dimension {dim} does not match init box of length {}",
            init_box.len()
        )));
    }
    let starts = latin_hypercube(init_box, config.nd_restarts.max(1));
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in &starts {
        let scale: Vec<f64> = init_box
            .iter()
            .map(|&(l, h)| 0.1 * (h - l).abs().max(1e-3))
            .collect();
        let (x, v) = nelder_mead(&mut objective, start, &scale, config)?;
        if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
            best = Some((x, v));
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Deterministic Latin-hypercube starts over the box.
fn latin_hypercube(init_box: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let dim = init_box.len();
    let mut rng = rng_from_seed(derive_seed(0x4c48_5343, &[dim as u64, n as u64]));
    let mut strata: Vec<Vec<usize>> = vec![(0..n).collect(); dim];
    for perm in strata.iter_mut() {
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
    }
    (0..n)
        .map(|s| {
            (0..dim)
                .map(|d| {
                    let (l, h) = init_box[d];
                    let u: f64 = rng.gen();
                    l + (h - l) * ((strata[d][s] as f64 + u) / n as f64)
                })
                .collect()
        })
        .collect()
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5), maximizing.
fn nelder_mead<F>(
    objective: &mut F,
    start: &[f64],
    scale: &[f64],
    config: &OptimizerConfig,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    let mut eval = |x: &[f64]| -> Result<f64> {
        let v = objective(x);
        // Maximizing: work with -v internally.
        check_finite(v, x).map(|v| -v)
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(start.to_vec());
    for d in 0..dim {
        let mut p = start.to_vec();
        p[d] += scale[d];
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect::<Result<_>>()?;
    let mut best_ever = (simplex[0].clone(), values[0]);

    for _ in 0..config.nd_max_iters {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let lo = order[0];
        let hi = order[dim];
        let second_hi = order[dim - 1];
        if values[lo] < best_ever.1 {
            best_ever = (simplex[lo].clone(), values[lo]);
        }
        let spread: f64 = (0..dim)
            .map(|d| {
                let vals: Vec<f64> = simplex.iter().map(|p| p[d]).collect();
                let mx = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mn = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                mx - mn
            })
            .fold(0.0, f64::max);
        if spread < config.refine_tol && (values[hi] - values[lo]).abs() < 1e-14 {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|d| {
                simplex
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != hi)
                    .map(|(_, p)| p[d])
                    .sum::<f64>()
                    / dim as f64
            })
            .collect();
        let reflect: Vec<f64> = (0..dim)
            .map(|d| centroid[d] + (centroid[d] - simplex[hi][d]))
            .collect();
        let f_reflect = eval(&reflect)?;
        if f_reflect < values[lo] {
            let expand: Vec<f64> = (0..dim)
                .map(|d| centroid[d] + 2.0 * (centroid[d] - simplex[hi][d]))
                .collect();
            let f_expand = eval(&expand)?;
            if f_expand < f_reflect {
                simplex[hi] = expand;
                values[hi] = f_expand;
            } else {
                simplex[hi] = reflect;
                values[hi] = f_reflect;
            }
        } else if f_reflect < values[second_hi] {
            simplex[hi] = reflect;
            values[hi] = f_reflect;
        } else {
            let contract: Vec<f64> = (0..dim)
                .map(|d| centroid[d] + 0.5 * (simplex[hi][d] - centroid[d]))
                .collect();
            let f_contract = eval(&contract)?;
            if f_contract < values[hi] {
                simplex[hi] = contract;
                values[hi] = f_contract;
            } else {
                let lo_point = simplex[lo].clone();
                for i in 0..=dim {
                    if i == lo {
                        continue;
                    }
                    for d in 0..dim {
                        simplex[i][d] = lo_point[d] + 0.5 * (simplex[i][d] - lo_point[d]);
                    }
                    values[i] = eval(&simplex[i].clone())?;
                }
            }
        }
    }
    for (i, v) in values.iter().enumerate() {
        if *v < best_ever.1 {
            best_ever = (simplex[i].clone(), *v);
        }
    }
    Ok((best_ever.0, -best_ever.1))
}
