//! PPO clipped surrogate objective and the critic's squared error.

/// `min(r A, clip(r, 1-eps, 1+eps) A)` and its derivative w.r.t. `r`.
/// The clipped branch is flat, so its derivative is zero.
pub fn clipped_term(ratio: f64, advantage: f64, eps: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActorObjective {
    /// Batch mean of the clipped surrogate (to be maximised).
    pub value: f64,
    /// `d value / d logp_new` per sample, including the `1/B` of the mean.
    pub grad_log_prob: Vec<f64>,
    pub mean_ratio: f64,
    pub max_ratio: f64,
    pub clip_fraction: f64,
    /// `mean(logp_old - logp_new)`.
    pub approx_kl: f64,
}

/// Clipped surrogate over a batch, with `r_t = exp(logp_new - logp_old)`.
pub fn actor_objective(logp_new: &[f64], logp_old: &[f64], advantages: &[f64], eps: f64) -> ActorObjective {
    let n = logp_new.len();
    assert_eq!(n, logp_old.len());
    assert_eq!(n, advantages.len());
    let inv = 1.0 / n.max(1) as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(n);
    let (mut ratio_sum, mut ratio_max, mut clipped, mut kl) = (0.0, f64::NEG_INFINITY, 0usize, 0.0);
    for i in 0..n {
        let ratio = (logp_new[i] - logp_old[i]).exp();
        let (v, d_ratio) = clipped_term(ratio, advantages[i], eps);
        value += v;
        // d r / d logp_new = r
        grad.push(d_ratio * ratio * inv);
        ratio_sum += ratio;
        ratio_max = ratio_max.max(ratio);
        if (ratio - 1.0).abs() > eps {
            clipped += 1;
        }
        kl += logp_old[i] - logp_new[i];
    }
    ActorObjective {
        value: value * inv,
        grad_log_prob: grad,
        mean_ratio: ratio_sum * inv,
        max_ratio: ratio_max,
        clip_fraction: clipped as f64 * inv,
        approx_kl: kl * inv,
    }
}

/// Mean squared error and `d loss / d prediction` per sample.
pub fn value_loss(pred: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len();
    assert_eq!(n, targets.len());
    let inv = 1.0 / n.max(1) as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d * inv
        })
        .collect();
    (loss * inv, grad)
}
