//! Posterior summaries computed from a draw archive.

use serde::{Deserialize, Serialize};

use super::DrawArchive;
use crate::eval::quantile_sorted;

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(quantile_sorted(&v, 0.5))
}

/// Share of target variation captured by the agents, ignoring the
/// intercept: per draw `Var_t((γ+β_t)'x_t) / Var_t(y_t)` clamped to
/// `[0, 1]`, summarized by the posterior median. `None` for a constant target.
pub fn incompleteness_r2(archive: &DrawArchive) -> Option<f64> {
    let vy = variance(&archive.y);
    if !(vy > 0.0) {
        return None;
    }
    let j = archive.n_agents;
    let t_len = archive.y.len();
    let per_draw: Vec<f64> = archive
        .draws
        .iter()
        .map(|d| {
            let fit: Vec<f64> = (0..t_len)
                .map(|t| (0..j).map(|a| d.weight(t, a) * d.x[t * j + a]).sum())
                .collect();
            (variance(&fit) / vy).clamp(0.0, 1.0)
        })
        .collect();
    median(per_draw)
}

/// Posterior means of the uncentered share `Σμ² / (Σμ² + Σ(w − μ)²)` of
/// coefficient variation explained by the tree prior means, for each block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageR2 {
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
}

fn share(mu: &[f64], w: &[f64]) -> Option<f64> {
    let explained: f64 = mu.iter().map(|m| m * m).sum();
    let resid: f64 = mu.iter().zip(w).map(|(m, v)| (v - m).powi(2)).sum();
    let total = explained + resid;
    (total > 0.0).then(|| (explained / total).clamp(0.0, 1.0))
}

fn mean_of(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let xs: Vec<f64> = v.flatten().collect();
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn shrinkage_r2(archive: &DrawArchive) -> ShrinkageR2 {
    let with_gamma = !archive.spec.fix_gamma_zero;
    let with_beta = archive.spec.kind == super::SynthesisKind::Rt;
    ShrinkageR2 {
        gamma: if with_gamma {
            mean_of(archive.draws.iter().map(|d| share(&d.mu_gamma, &d.gamma)))
        } else {
            None
        },
        beta: if with_beta {
            mean_of(archive.draws.iter().map(|d| share(&d.mu_beta, &d.beta)))
        } else {
            None
        },
    }
}

/// Split-R̂: every chain is halved and the halves compared by the
/// between/within variance ratio.
pub fn split_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    let n = chains.iter().map(Vec::len).min()? / 2;
    if n < 2 {
        return None;
    }
    let halves: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..n], &c[n..2 * n]]).collect();
    let m = halves.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = nf / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m;
    if !(w > 0.0) {
        return None;
    }
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Some((var_plus / w).sqrt())
}

/// Posterior `q`-quantile of each weight `γ_j + β_jt`, as `T` rows of `J`.
pub fn weight_quantiles(archive: &DrawArchive, q: f64) -> Vec<Vec<f64>> {
    let j = archive.n_agents;
    (0..archive.y.len())
        .map(|t| {
            (0..j)
                .map(|a| {
                    let mut w = archive.weight_draws(t, a);
                    w.sort_by(f64::total_cmp);
                    quantile_sorted(&w, q)
                })
                .collect()
        })
        .collect()
}

/// Change point of the weight ordering: the period `c` maximizing
/// `Σ_{t<c} d_t − Σ_{t≥c} d_t` for `d_t = w1_t − w2_t`, so that agent 1
/// leads before `c` and agent 2 from `c` on. Noisy paths cross many times;
/// this is the single best split.
pub fn regime_crossing(w1: &[f64], w2: &[f64], targets: &[i64]) -> Option<i64> {
    if w1.len() != w2.len() || w1.len() != targets.len() || w1.len() < 2 {
        return None;
    }
    let d: Vec<f64> = w1.iter().zip(w2).map(|(a, b)| a - b).collect();
    let total: f64 = d.iter().sum();
    let mut before = 0.0;
    let mut best = (f64::NEG_INFINITY, targets[0]);
    for c in 1..d.len() {
        before += d[c - 1];
        let score = before - (total - before);
        if score > best.0 {
            best = (score, targets[c]);
        }
    }
    Some(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngHandle;

    #[test]
    fn rhat_near_one_for_iid_chains() {
        let mut rng = RngHandle::new(1, 0);
        let chains: Vec<Vec<f64>> = (0..2).map(|_| (0..2000).map(|_| rng.uniform()).collect()).collect();
        let r = split_rhat(&chains).unwrap();
        assert!((r - 1.0).abs() < 0.01, "{r}");
    }

    #[test]
    fn rhat_flags_separated_chains() {
        let a: Vec<f64> = (0..100).map(|i| (i % 7) as f64 * 0.01).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 5.0).collect();
        assert!(split_rhat(&[a, b]).unwrap() > 1.5);
    }

    #[test]
    fn crossing_of_step_paths() {
        let t: Vec<i64> = (0..10).collect();
        let w1 = [1.0, 1.0, 0.2, 1.0, 1.0, 0.0, 0.0, 0.3, 0.0, 0.0];
        let w2 = [0.0, 0.0, 0.5, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
        assert_eq!(regime_crossing(&w1, &w2, &t), Some(5));
    }

    #[test]
    fn share_limits() {
        assert_eq!(share(&[0.5, 0.2], &[0.5, 0.2]), Some(1.0));
        assert_eq!(share(&[0.0, 0.0], &[0.7, -0.3]), Some(0.0));
        assert_eq!(share(&[0.0], &[0.0]), None);
    }
}
