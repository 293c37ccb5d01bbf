use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::seed;

/// One affine layer; `weight` has shape `(fan_in, fan_out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }
}

/// Fully connected network: ReLU on hidden layers, identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    layers: Vec<Layer>,
}

/// Parameter gradients, laid out like [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub layers: Vec<Layer>,
}

/// Inputs seen by each layer during a forward pass (post-activation).
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
}

impl Mlp {
    /// Glorot-uniform weights and zero biases, deterministic in `seed`.
    pub fn init(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.len() < 2 {
            return Err(invalid("an MLP needs at least input and output widths"));
        }
        if widths.contains(&0) {
            return Err(invalid(format!("zero width in {widths:?}")));
        }
        let mut rng = seed::rng(seed);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight = Array2::from_shape_fn((fan_in, fan_out), |_| {
                    rng.random_range(-limit..=limit)
                });
                Layer {
                    weight,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            layers,
        })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("an MLP needs at least one layer"));
        }
        let mut widths = vec![layers[0].weight.nrows()];
        for l in &layers {
            if l.weight.nrows() != *widths.last().unwrap() || l.bias.len() != l.weight.ncols() {
                return Err(invalid("inconsistent layer shapes"));
            }
            widths.push(l.weight.ncols());
        }
        Ok(Self { widths, layers })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| invalid(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Batched forward pass without recording activations.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut h = self.affine(0, x);
        for i in 1..self.layers.len() {
            h.mapv_inplace(relu);
            h = self.affine(i, h.view());
        }
        Ok(h)
    }

    /// Batched forward pass that keeps what [`Mlp::backward`] needs.
    pub fn forward_train(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(x.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        inputs.push(x.to_owned());
        let mut h = self.affine(0, x);
        for i in 1..self.layers.len() {
            h.mapv_inplace(relu);
            let next = self.affine(i, h.view());
            inputs.push(h);
            h = next;
        }
        Ok((h, ForwardCache { inputs }))
    }

    /// Reverse-mode pass: `upstream` is `∂L/∂output` per batch row. Returns
    /// parameter gradients summed over the batch and `∂L/∂input`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> Result<(MlpGrad, Array2<f64>)> {
        if upstream.ncols() != self.output_dim() || upstream.nrows() != cache.inputs[0].nrows() {
            return Err(Error::DimensionMismatch {
                context: "mlp backward upstream".into(),
                expected: self.output_dim(),
                got: upstream.ncols(),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned();
        for i in (0..self.layers.len()).rev() {
            let input = &cache.inputs[i];
            let weight = input.t().dot(&delta).as_standard_layout().into_owned();
            let bias = delta.sum_axis(Axis(0));
            grads.push(Layer { weight, bias });
            let mut d_in = delta.dot(&self.layers[i].weight.t());
            if i > 0 {
                // ReLU derivative: pass where the stored activation is positive.
                ndarray::Zip::from(&mut d_in).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = d_in;
        }
        grads.reverse();
        Ok((MlpGrad { layers: grads }, delta))
    }

    fn affine(&self, i: usize, x: ArrayView2<f64>) -> Array2<f64> {
        let l = &self.layers[i];
        let mut out = x.dot(&l.weight);
        out += &l.bias;
        out
    }

    fn check_input(&self, got: usize) -> Result<()> {
        if got != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp input".into(),
                expected: self.input_dim(),
                got,
            });
        }
        Ok(())
    }

    /// Flat parameter copy: per layer, weights row-major then biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                context: "flat parameters".into(),
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = *it.next().unwrap());
        }
        Ok(())
    }

    /// Mutable parameter blocks in flat order, for optimizers.
    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Mlp) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .params_flat()
            .iter()
            .zip(other.params_flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    fn check_same_shape(&self, other: &Mlp) -> Result<()> {
        if self.widths != other.widths {
            return Err(invalid(format!(
                "network shapes differ: {:?} vs {:?}",
                self.widths, other.widths
            )));
        }
        Ok(())
    }
}

impl MlpGrad {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .widths
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
        }
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weight *= k;
            l.bias *= k;
        }
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `target ← (1−ρ)·target + ρ·online`, elementwise.
pub fn soft_update(target: &mut Mlp, online: &Mlp, rho: f64) -> Result<()> {
    target.check_same_shape(online)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(invalid(format!("soft update rho must lie in [0,1], got {rho}")));
    }
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        t.weight.zip_mut_with(&o.weight, |t, &o| *t = (1.0 - rho) * *t + rho * o);
        t.bias.zip_mut_with(&o.bias, |t, &o| *t = (1.0 - rho) * *t + rho * o);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn init_is_deterministic_and_counted() {
        let a = Mlp::init(&[2, 4, 1], 9).unwrap();
        let b = Mlp::init(&[2, 4, 1], 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.param_count(), 17);
        assert_eq!(a.params_flat().len(), 17);
        assert_ne!(a, Mlp::init(&[2, 4, 1], 10).unwrap());
        let limit = (6.0f64 / 6.0).sqrt();
        assert!(a.layers[0].weight.iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(Mlp::init(&[3], 0).is_err());
        assert!(Mlp::init(&[3, 0, 1], 0).is_err());
    }

    #[test]
    fn zero_input_gives_zero_output_at_init() {
        let m = Mlp::init(&[3, 8, 8, 2], 1).unwrap();
        assert_eq!(m.forward(&[0.0; 3]).unwrap(), vec![0.0, 0.0]);
        assert!(m.forward(&[0.0; 2]).is_err());
    }

    #[test]
    fn linear_layer_weight_gradient_is_input() {
        let m = Mlp::init(&[3, 3], 4).unwrap();
        let x = array![[0.5, -1.0, 2.0]];
        let (_, cache) = m.forward_train(x.view()).unwrap();
        // d(out_1)/dW[i][1] = x_i
        let up = array![[0.0, 1.0, 0.0]];
        let (g, dx) = m.backward(&cache, up.view()).unwrap();
        assert_eq!(g.layers[0].weight.column(1).to_vec(), vec![0.5, -1.0, 2.0]);
        assert_eq!(g.layers[0].weight.column(0).to_vec(), vec![0.0; 3]);
        assert_eq!(g.layers[0].bias.to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(dx.row(0).to_vec(), m.layers[0].weight.column(1).to_vec());
    }

    #[test]
    fn dead_relu_passes_no_gradient() {
        let layers = vec![
            Layer {
                weight: array![[1.0, -1.0]],
                bias: array![0.0, 0.0],
            },
            Layer {
                weight: array![[1.0], [1.0]],
                bias: array![0.0],
            },
        ];
        let m = Mlp::from_layers(layers).unwrap();
        let (_, cache) = m.forward_train(array![[2.0]].view()).unwrap();
        let (g, dx) = m.backward(&cache, array![[1.0]].view()).unwrap();
        // Second hidden unit has pre-activation -2.
        assert_eq!(g.layers[0].weight[[0, 1]], 0.0);
        assert_eq!(g.layers[1].weight[[1, 0]], 0.0);
        assert_eq!(dx[[0, 0]], 1.0);
    }

    #[test]
    fn soft_update_limits() {
        let online = Mlp::init(&[2, 3, 1], 1).unwrap();
        let start = Mlp::init(&[2, 3, 1], 2).unwrap();
        let mut t = start.clone();
        soft_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, start);
        soft_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t, online);
        let other = Mlp::init(&[2, 4, 1], 2).unwrap();
        assert!(soft_update(&mut t, &other, 0.5).is_err());
    }

    #[test]
    fn soft_update_converges_geometrically() {
        let online = Mlp::init(&[2, 3, 1], 1).unwrap();
        let mut t = Mlp::init(&[2, 3, 1], 2).unwrap();
        let gap0: Vec<f64> = t
            .params_flat()
            .iter()
            .zip(online.params_flat())
            .map(|(a, b)| a - b)
            .collect();
        let n = 200;
        for _ in 0..n {
            soft_update(&mut t, &online, 0.005).unwrap();
        }
        let factor = 0.995f64.powi(n);
        for ((p, o), g0) in t.params_flat().iter().zip(online.params_flat()).zip(gap0) {
            assert!(((p - o) - g0 * factor).abs() < 1e-12);
        }
    }
}
