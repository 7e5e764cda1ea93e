//! Interventional Shapley values: exact subset enumeration and permutation
//! sampling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_inputs, Estimator, ExplainError, Explanation, Predictor};
use crate::derive_seed;

pub const EXACT_MAX_ACTIVE: usize = 20;
const PERMUTATION_CHUNK: usize = 64;

/// Mean score over the background after fixing the features in `subset` to
/// their values in `x`.
pub fn value_function<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    subset: &[usize],
    background: &[Vec<f64>],
) -> Result<f64, ExplainError> {
    check_inputs(model, x, background)?;
    let mut z = vec![0.0; x.len()];
    let mut total = 0.0;
    for b in background {
        z.copy_from_slice(b);
        for &j in subset {
            z[j] = x[j];
        }
        total += model.score(&z);
    }
    Ok(total / background.len() as f64)
}

fn value_of_mask<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    fixed: &[usize],
    active: &[usize],
    mask: usize,
    background: &[Vec<f64>],
) -> f64 {
    let mut z = vec![0.0; x.len()];
    let mut total = 0.0;
    for b in background {
        z.copy_from_slice(b);
        for &j in fixed {
            z[j] = x[j];
        }
        for (bit, &j) in active.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                z[j] = x[j];
            }
        }
        total += model.score(&z);
    }
    total / background.len() as f64
}

/// Exact Shapley values by enumerating every subset of the active features.
///
/// With `active = None` every feature is a player. Otherwise only the listed
/// features are players; the rest stay at their values in `x` in every
/// coalition and receive zero attribution.
pub fn shapley_exact<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    background: &[Vec<f64>],
    active: Option<&[usize]>,
) -> Result<Explanation, ExplainError> {
    check_inputs(model, x, background)?;
    let d = x.len();
    let active: Vec<usize> = match active {
        None => (0..d).collect(),
        Some(a) => {
            let mut a = a.to_vec();
            a.sort_unstable();
            a.dedup();
            if let Some(&bad) = a.iter().find(|&&j| j >= d) {
                return Err(ExplainError::FeatureOutOfRange(bad));
            }
            a
        }
    };
    let p = active.len();
    if p > EXACT_MAX_ACTIVE {
        return Err(ExplainError::TooManyFeatures { active: p, limit: EXACT_MAX_ACTIVE });
    }
    let fixed: Vec<usize> = (0..d).filter(|j| active.binary_search(j).is_err()).collect();
    let n_sub = 1usize << p;
    let values: Vec<f64> =
        (0..n_sub).into_par_iter().map(|m| value_of_mask(model, x, &fixed, &active, m, background)).collect();

    // weight[u] = u! (p - u - 1)! / p!
    let mut weight = vec![0.0; p.max(1)];
    for (u, w) in weight.iter_mut().enumerate().take(p) {
        *w = 1.0 / (p as f64 * binomial(p - 1, u));
    }
    let mut phis = vec![0.0; d];
    for (bit, &j) in active.iter().enumerate() {
        let mut acc = 0.0;
        for m in 0..n_sub {
            if m & (1 << bit) == 0 {
                acc += weight[m.count_ones() as usize] * (values[m | (1 << bit)] - values[m]);
            }
        }
        phis[j] = acc;
    }
    Ok(Explanation {
        phis,
        base_value: values[0],
        prediction: model.score(x),
        estimator: Estimator::Exact,
        n_samples: n_sub,
        seed: None,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Monte-Carlo Shapley values: the average marginal contribution of each
/// feature over `n_permutations` uniformly random orderings, with every
/// coalition valued over the full background.
pub fn shapley_sample<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    background: &[Vec<f64>],
    n_permutations: usize,
    seed: u64,
) -> Result<Explanation, ExplainError> {
    check_inputs(model, x, background)?;
    if n_permutations == 0 {
        return Err(ExplainError::NoPermutations);
    }
    let d = x.len();
    let nb = background.len() as f64;
    let base: f64 = background.iter().map(|b| model.score(b)).sum::<f64>() / nb;
    let n_chunks = n_permutations.div_ceil(PERMUTATION_CHUNK);
    let partials: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let count = PERMUTATION_CHUNK.min(n_permutations - c * PERMUTATION_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
            let mut order: Vec<usize> = (0..d).collect();
            let mut acc = vec![0.0; d];
            let mut z: Vec<Vec<f64>> = background.to_vec();
            for _ in 0..count {
                order.shuffle(&mut rng);
                for (zr, b) in z.iter_mut().zip(background) {
                    zr.copy_from_slice(b);
                }
                let mut prev = base;
                for &j in &order {
                    let mut total = 0.0;
                    for zr in z.iter_mut() {
                        zr[j] = x[j];
                        total += model.score(zr);
                    }
                    let v = total / nb;
                    acc[j] += v - prev;
                    prev = v;
                }
            }
            acc
        })
        .collect();
    let mut phis = vec![0.0; d];
    for part in &partials {
        for (p, a) in phis.iter_mut().zip(part) {
            *p += a;
        }
    }
    for p in &mut phis {
        *p /= n_permutations as f64;
    }
    Ok(Explanation {
        phis,
        base_value: base,
        prediction: model.score(x),
        estimator: Estimator::PermutationSampling,
        n_samples: n_permutations,
        seed: Some(seed),
    })
}
