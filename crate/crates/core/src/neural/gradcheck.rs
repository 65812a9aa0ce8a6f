//! Central finite-difference checks of the hand-written backward passes.

use ndarray::{concatenate, s, Array2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{Init, Mlp, MlpGrads, Parameters};
use crate::error::Result;
use crate::rng::Rng;

/// Magnitude below which components are compared in absolute terms, per
/// unit of loss. Central-difference roundoff grows like `eps * |loss| / h`,
/// so the floor scales with `max(1, |loss|)`.
pub const REL_FLOOR: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-4;

/// Max over components of `|a - f| / max(|a|, |f|, REL_FLOOR * max(1, |loss|))`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], loss: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let floor = REL_FLOOR * loss.abs().max(1.0);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Central differences of `loss` with respect to every entry of `params`.
pub fn central_differences(params: &mut [f64], h: f64, mut loss: impl FnMut(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let x = params[i];
        params[i] = x + h;
        let up = loss(params)?;
        params[i] = x - h;
        let down = loss(params)?;
        params[i] = x;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Central differences with respect to a network's flat parameters.
pub fn net_differences(net: &Mlp, h: f64, mut loss: impl FnMut(&Mlp) -> Result<f64>) -> Result<Vec<f64>> {
    let mut probe = net.clone();
    let mut flat = net.to_flat();
    central_differences(&mut flat, h, |p| {
        probe.load_flat(p)?;
        loss(&probe)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub params: usize,
    pub max_rel_error: f64,
}

impl GradCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

impl std::fmt::Display for GradCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:<28} {:>6} params  max rel err {:.3e}", self.name, self.params, self.max_rel_error)
    }
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

fn weighted_sum(net: &Mlp, x: &Array2<f64>, w: &Array2<f64>) -> Result<f64> {
    Ok((net.forward_batch(x.view())?.output() * w).sum())
}

/// Loss `sum(W * net(X))`: checks parameter and input gradients.
pub fn check_mlp(name: &str, net: &Mlp, x: &Array2<f64>, w: &Array2<f64>, h: f64) -> Result<Vec<GradCheck>> {
    let cache = net.forward_batch(x.view())?;
    let (grads, dx) = net.backward(&cache, w.view());
    let loss = weighted_sum(net, x, w)?;
    let numeric = net_differences(net, h, |n| weighted_sum(n, x, w))?;
    let mut xs = x.as_standard_layout().into_owned();
    let numeric_x = central_differences(xs.as_slice_mut().expect("standard layout"), h, |p| {
        let xp = Array2::from_shape_vec(x.raw_dim(), p.to_vec()).expect("same shape");
        weighted_sum(net, &xp, w)
    })?;
    Ok(vec![
        GradCheck {
            name: format!("{name}/params"),
            params: numeric.len(),
            max_rel_error: max_relative_error(&grads.to_flat(), &numeric, loss),
        },
        GradCheck {
            name: format!("{name}/input"),
            params: numeric_x.len(),
            max_rel_error: max_relative_error(dx.as_standard_layout().as_slice().unwrap(), &numeric_x, loss),
        },
    ])
}

/// Squared-error value loss of `critic([obs, encoder(factors)])`, averaged over rows.
pub fn composed_value_loss(
    encoder: &Mlp,
    critic: &Mlp,
    obs: &Array2<f64>,
    factors: &Array2<f64>,
    targets: &[f64],
) -> Result<f64> {
    let z = encoder.forward_batch(factors.view())?;
    let input = concatenate(Axis(1), &[obs.view(), z.output().view()]).expect("same row count");
    let v = critic.forward_batch(input.view())?;
    let n = targets.len() as f64;
    Ok(v.output().column(0).iter().zip(targets).map(|(v, t)| (v - t).powi(2)).sum::<f64>() / n)
}

/// Analytic gradients of [`composed_value_loss`] for both networks.
pub fn composed_value_grads(
    encoder: &Mlp,
    critic: &Mlp,
    obs: &Array2<f64>,
    factors: &Array2<f64>,
    targets: &[f64],
) -> Result<(MlpGrads, MlpGrads)> {
    let z = encoder.forward_batch(factors.view())?;
    let input = concatenate(Axis(1), &[obs.view(), z.output().view()]).expect("same row count");
    let v = critic.forward_batch(input.view())?;
    let n = targets.len() as f64;
    let mut g = Array2::zeros((targets.len(), 1));
    for (i, t) in targets.iter().enumerate() {
        g[[i, 0]] = 2.0 * (v.output()[[i, 0]] - t) / n;
    }
    let (critic_grads, d_input) = critic.backward(&v, g.view());
    let d_z = d_input.slice(s![.., obs.ncols()..]).to_owned();
    let (encoder_grads, _) = encoder.backward(&z, d_z.view());
    Ok((critic_grads, encoder_grads))
}

pub fn check_composed(encoder: &Mlp, critic: &Mlp, obs: &Array2<f64>, factors: &Array2<f64>, targets: &[f64], h: f64) -> Result<Vec<GradCheck>> {
    let (gc, ge) = composed_value_grads(encoder, critic, obs, factors, targets)?;
    let loss = composed_value_loss(encoder, critic, obs, factors, targets)?;
    let nc = net_differences(critic, h, |c| composed_value_loss(encoder, c, obs, factors, targets))?;
    let ne = net_differences(encoder, h, |e| composed_value_loss(e, critic, obs, factors, targets))?;
    Ok(vec![
        GradCheck {
            name: "critic(encoder)/critic".into(),
            params: nc.len(),
            max_rel_error: max_relative_error(&gc.to_flat(), &nc, loss),
        },
        GradCheck {
            name: "critic(encoder)/encoder".into(),
            params: ne.len(),
            max_rel_error: max_relative_error(&ge.to_flat(), &ne, loss),
        },
    ])
}

/// One randomly shaped configuration: actor, critic and encoder stacks plus
/// the composed critic over encoder, with random parameters and data.
pub fn random_network_checks(rng: &mut Rng) -> Result<Vec<GradCheck>> {
    let obs_dim = rng.gen_range(2..=6);
    let factor_dim = rng.gen_range(1..=6);
    let code_dim = rng.gen_range(1..=4);
    let hidden = rng.gen_range(3..=12);
    let rows = rng.gen_range(2..=8);
    let depth = rng.gen_range(1..=2);
    let init = Init {
        hidden_gain: 1.0,
        output_gain: 1.0,
    };
    let widths = |input: usize, out: usize| {
        let mut w = vec![input];
        w.extend(std::iter::repeat(hidden).take(depth));
        w.push(out);
        w
    };
    let actor = Mlp::new(&widths(obs_dim, rng.gen_range(1..=3)), init, rng);
    let encoder = Mlp::new(&widths(factor_dim, code_dim), init, rng);
    let critic = Mlp::new(&widths(obs_dim + code_dim, 1), init, rng);
    let obs = gaussian_matrix(rows, obs_dim, rng);
    let factors = gaussian_matrix(rows, factor_dim, rng);
    let targets: Vec<f64> = (0..rows).map(|_| StandardNormal.sample(rng)).collect();

    let mut checks = Vec::new();
    let w = gaussian_matrix(rows, actor.output_dim(), rng);
    checks.extend(check_mlp("actor", &actor, &obs, &w, FD_STEP)?);
    let w = gaussian_matrix(rows, code_dim, rng);
    checks.extend(check_mlp("encoder", &encoder, &factors, &w, FD_STEP)?);
    let critic_in = concatenate(Axis(1), &[obs.view(), gaussian_matrix(rows, code_dim, rng).view()]).unwrap();
    let w = gaussian_matrix(rows, 1, rng);
    checks.extend(check_mlp("critic", &critic, &critic_in, &w, FD_STEP)?);
    checks.extend(check_composed(&encoder, &critic, &obs, &factors, &targets, FD_STEP)?);
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    #[test]
    fn differences_of_a_quadratic_are_exact_enough() {
        let mut p = vec![1.0, -2.0, 0.5];
        let g = central_differences(&mut p, 1e-4, |x| Ok(x.iter().map(|v| v * v).sum())).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        for (gi, pi) in g.iter().zip(&p) {
            assert!((gi - 2.0 * pi).abs() < 1e-9);
        }
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(max_relative_error(&[2.0], &[1.0], 0.0), 0.5);
        assert_eq!(max_relative_error(&[0.0], &[1e-8], 0.5), 1e-8 / REL_FLOOR);
        assert_eq!(max_relative_error(&[0.0], &[1e-8], -100.0), 1e-8 / (100.0 * REL_FLOOR));
    }

    #[test]
    fn random_configurations_pass() {
        let mut rng = from_seed(11);
        for _ in 0..5 {
            for c in random_network_checks(&mut rng).unwrap() {
                assert!(c.passed(1e-4), "{c}");
            }
        }
    }

    #[test]
    fn a_wrong_gradient_is_caught() {
        let mut rng = from_seed(12);
        let enc = Mlp::new(&[2, 4, 2], Init { hidden_gain: 1.0, output_gain: 1.0 }, &mut rng);
        let critic = Mlp::new(&[5, 4, 1], Init { hidden_gain: 1.0, output_gain: 1.0 }, &mut rng);
        let obs = gaussian_matrix(3, 3, &mut rng);
        let f = gaussian_matrix(3, 2, &mut rng);
        let t = [0.3, -0.2, 1.0];
        let (_, mut ge) = composed_value_grads(&enc, &critic, &obs, &f, &t).unwrap();
        ge.layers[0].weight[[0, 0]] *= 1.01;
        let ne = net_differences(&enc, FD_STEP, |e| composed_value_loss(e, &critic, &obs, &f, &t)).unwrap();
        let loss = composed_value_loss(&enc, &critic, &obs, &f, &t).unwrap();
        assert!(max_relative_error(&ge.to_flat(), &ne, loss) > 1e-4);
    }
}
