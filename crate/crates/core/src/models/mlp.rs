use rand::Rng;

use super::linalg::{axpy, matvec, matvec_t};
use super::view::View;
use crate::params::ParamSet;
use crate::real::Real;

struct Layer {
    w: usize,
    b: usize,
    n_in: usize,
    n_out: usize,
}

/// ReLU hidden layers followed by a linear scalar output.
pub(crate) struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    /// Registers `{prefix}.w{l}` / `{prefix}.b{l}` tensors with Xavier-uniform
    /// weights and zero biases.
    pub fn build(params: &mut ParamSet, prefix: &str, n_in: usize, hidden: &[usize], rng: &mut impl Rng) -> Mlp {
        let mut layers = Vec::new();
        let mut fan_in = n_in;
        for (l, &n_out) in hidden.iter().chain(std::iter::once(&1)).enumerate() {
            let w = params.add(&format!("{prefix}.w{l}"), &[n_out, fan_in]);
            let b = params.add(&format!("{prefix}.b{l}"), &[n_out]);
            params.get_mut(w).fill_xavier(rng, fan_in, n_out);
            layers.push(Layer {
                w,
                b,
                n_in: fan_in,
                n_out,
            });
            fan_in = n_out;
        }
        Mlp { layers }
    }

    /// Returns the output and the input of every layer.
    pub fn forward<T: Real>(&self, view: &View<T>, x: &[T]) -> (T, Vec<Vec<T>>) {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut h = matvec(&view.data(layer.w), layer.n_out, layer.n_in, &acts[l]);
            for (hi, &bi) in h.iter_mut().zip(view.data(layer.b).iter()) {
                *hi += bi;
                if l < last {
                    *hi = hi.max(T::zero());
                }
            }
            acts.push(h);
        }
        let out = acts.pop().unwrap()[0];
        (out, acts)
    }

    /// Accumulates parameter gradients and returns `∂L/∂x`.
    pub fn backward(&self, params: &mut ParamSet, acts: &[Vec<f64>], d_out: f64) -> Vec<f64> {
        let mut delta = vec![d_out];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &acts[l];
            {
                let gw = params.get_mut(layer.w).grad_all();
                for (r, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, input, &mut gw[r * layer.n_in..(r + 1) * layer.n_in]);
                    }
                }
            }
            axpy(1.0, &delta, params.get_mut(layer.b).grad_all());
            let mut d_in = matvec_t(&params.get(layer.w).data, layer.n_out, layer.n_in, &delta);
            if l > 0 {
                // input was a ReLU output
                for (d, a) in d_in.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = d_in;
        }
        delta
    }
}
