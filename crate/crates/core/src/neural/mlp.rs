//! Multilayer perceptron: tanh hidden layers, identity output.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};

use super::Parameters;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `out x in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Orthogonal initialisation gains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Init {
    pub hidden_gain: f64,
    pub output_gain: f64,
}

impl Init {
    pub const POLICY: Init = Init {
        hidden_gain: std::f64::consts::SQRT_2,
        output_gain: 0.01,
    };
    pub const VALUE: Init = Init {
        hidden_gain: std::f64::consts::SQRT_2,
        output_gain: 1.0,
    };
    pub const ENCODER: Init = Init {
        hidden_gain: std::f64::consts::SQRT_2,
        output_gain: 1.0,
    };
}

/// Semi-orthogonal `rows x cols` matrix scaled by `gain`.
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut Rng) -> Array2<f64> {
    let (r, c) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let a = DMatrix::<f64>::from_fn(r, c, |_, _| StandardNormal.sample(rng));
    let qr = a.qr();
    let mut q = qr.q();
    let rmat = qr.r();
    for j in 0..c {
        if rmat[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        gain * if rows >= cols { q[(i, j)] } else { q[(j, i)] }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations of a batched forward pass, kept for [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct MlpCache {
    /// `acts[0]` is the input; `acts[l]` the output of layer `l`.
    acts: Vec<Array2<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("non-empty cache")
    }

    pub fn input(&self) -> &Array2<f64> {
        &self.acts[0]
    }
}

/// Gradients shaped like the network's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// Orthogonally initialised network with zero biases.
    pub fn new(widths: &[usize], init: Init, rng: &mut Rng) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least input and output widths");
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let gain = if l + 1 == n {
                    init.output_gain
                } else {
                    init.hidden_gain
                };
                Layer {
                    weight: orthogonal(widths[l + 1], widths[l], gain, rng),
                    bias: Array1::zeros(widths[l + 1]),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least input and output widths");
        Mlp {
            layers: widths
                .windows(2)
                .map(|w| Layer {
                    weight: Array2::zeros((w[1], w[0])),
                    bias: Array1::zeros(w[1]),
                })
                .collect(),
        }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Usage("empty layer list".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.nrows() {
                return Err(Error::Dimension {
                    what: "layer bias",
                    expected: l.weight.nrows(),
                    got: l.bias.len(),
                });
            }
            if i > 0 && layers[i - 1].weight.nrows() != l.weight.ncols() {
                return Err(Error::Dimension {
                    what: "layer input",
                    expected: layers[i - 1].weight.nrows(),
                    got: l.weight.ncols(),
                });
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.weight.nrows()));
        w
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weight.nrows()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                what: "MLP input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut x = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y: Vec<f64> = layer.bias.to_vec();
            for (o, row) in layer.weight.outer_iter().enumerate() {
                y[o] += row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
            }
            if l < last {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            x = y;
        }
        Ok(x)
    }

    /// Batched forward pass over rows of `input`.
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<MlpCache> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                what: "MLP batch input",
                expected: self.input_dim(),
                got: input.ncols(),
            });
        }
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_owned());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = acts[l].dot(&layer.weight.t());
            z += &layer.bias;
            if l < last {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        Ok(MlpCache { acts })
    }

    /// Reverse pass: parameter gradients and the gradient w.r.t. the input rows,
    /// given `d loss / d output` for every row.
    pub fn backward(&self, cache: &MlpCache, grad_output: ArrayView2<f64>) -> (MlpGrads, Array2<f64>) {
        let mut delta = grad_output.to_owned();
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let a_prev = &cache.acts[l];
            let gw = delta.t().dot(a_prev).as_standard_layout().into_owned();
            let gb = delta.sum_axis(Axis(0));
            let mut prev = delta.dot(&layer.weight);
            if l > 0 {
                prev.zip_mut_with(a_prev, |d, &a| *d *= 1.0 - a * a);
            }
            grads.push(Layer {
                weight: gw,
                bias: gb,
            });
            delta = prev;
        }
        grads.reverse();
        (MlpGrads { layers: grads }, delta)
    }
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            layers: net
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.param_slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

fn layer_slices(layers: &[Layer]) -> Vec<&[f64]> {
    layers
        .iter()
        .flat_map(|l| {
            [
                l.weight.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
        .collect()
}

fn layer_slices_mut(layers: &mut [Layer]) -> Vec<&mut [f64]> {
    layers
        .iter_mut()
        .flat_map(|l| {
            [
                l.weight.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        })
        .collect()
}

impl Parameters for Mlp {
    fn param_slices(&self) -> Vec<&[f64]> {
        layer_slices(&self.layers)
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        layer_slices_mut(&mut self.layers)
    }
}

impl Parameters for MlpGrads {
    fn param_slices(&self) -> Vec<&[f64]> {
        layer_slices(&self.layers)
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        layer_slices_mut(&mut self.layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use ndarray::{array, Array2};
    use rand::Rng as _;

    fn random_net(widths: &[usize], seed: u64) -> Mlp {
        let mut rng = from_seed(seed);
        let mut net = Mlp::new(widths, Init::VALUE, &mut rng);
        // Non-zero biases so the check covers them.
        for s in net.param_slices_mut() {
            for v in s.iter_mut() {
                *v += rng.gen_range(-0.3..0.3);
            }
        }
        net
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[3, 5, 2]);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_layer_is_affine() {
        let layer = Layer {
            weight: array![[1.0, 2.0], [-0.5, 3.0], [0.0, 1.0]],
            bias: array![0.1, 0.2, 0.3],
        };
        let net = Mlp::from_layers(vec![layer]).unwrap();
        let x = [2.0, -1.0];
        assert_eq!(net.forward(&x).unwrap(), vec![0.0 + 0.1, -4.0 + 0.2, -1.0 + 0.3]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = Mlp::zeros(&[3, 2]);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
        assert!(net.forward_batch(Array2::zeros((4, 2)).view()).is_err());
    }

    #[test]
    fn orthogonal_init_has_orthonormal_rows_or_columns() {
        let mut rng = from_seed(1);
        let w = orthogonal(8, 3, 1.0, &mut rng);
        let g = w.t().dot(&w);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - e).abs() < 1e-12);
            }
        }
        let w = orthogonal(2, 5, 2.0, &mut rng);
        let g = w.dot(&w.t());
        assert!((g[(0, 0)] - 4.0).abs() < 1e-12 && g[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn two_hidden_layers_match_straight_line_evaluation() {
        let net = random_net(&[4, 6, 5, 3], 3);
        let x = [0.3, -1.2, 0.8, 2.0];
        // Independent evaluation of tanh(W2 tanh(W1 x + b1) + b2) ... by index loops.
        let mut h = x.to_vec();
        for (li, l) in net.layers().iter().enumerate() {
            let mut out = vec![0.0; l.weight.nrows()];
            for i in 0..l.weight.nrows() {
                let mut s = l.bias[i];
                for j in 0..l.weight.ncols() {
                    s += l.weight[(i, j)] * h[j];
                }
                out[i] = if li + 1 < net.layers().len() { s.tanh() } else { s };
            }
            h = out;
        }
        let got = net.forward(&x).unwrap();
        let batch = net.forward_batch(Array2::from_shape_vec((1, 4), x.to_vec()).unwrap().view()).unwrap();
        for i in 0..3 {
            assert!((got[i] - h[i]).abs() < 1e-14);
            assert!((batch.output()[(0, i)] - h[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_sum_gradient_is_outer_product_with_input() {
        let mut rng = from_seed(2);
        let net = Mlp::new(&[3, 2], Init::VALUE, &mut rng);
        let x = array![[0.5, -1.0, 2.0]];
        let cache = net.forward_batch(x.view()).unwrap();
        let (g, gin) = net.backward(&cache, Array2::ones((1, 2)).view());
        assert_eq!(g.layers[0].weight, array![[0.5, -1.0, 2.0], [0.5, -1.0, 2.0]]);
        assert_eq!(g.layers[0].bias, array![1.0, 1.0]);
        let col_sums = net.layers()[0].weight.sum_axis(Axis(0));
        for j in 0..3 {
            assert!((gin[(0, j)] - col_sums[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let net = random_net(&[3, 8, 8, 2], 4);
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i as f64) - (j as f64) * 0.3);
        let cache = net.forward_batch(x.view()).unwrap();
        let (g, gin) = net.backward(&cache, Array2::zeros((5, 2)).view());
        assert_eq!(g.max_abs(), 0.0);
        assert!(gin.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn flat_roundtrip() {
        let net = random_net(&[3, 4, 2], 5);
        let mut other = Mlp::zeros(&[3, 4, 2]);
        other.load_flat(&net.to_flat()).unwrap();
        assert_eq!(other, net);
        assert_eq!(other.fingerprint(), net.fingerprint());
        assert!(other.load_flat(&[0.0; 3]).is_err());
    }
}
