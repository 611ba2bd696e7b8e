//! Named parameter tensors with paired gradient buffers.
//!
//! Values are held as `f64` so gradients and finite differences can be
//! evaluated in double precision. With [`Precision::F32`] every write
//! through [`ParamSet::quantize`] rounds values to the nearest `f32`, so a
//! checkpoint written as `f32` restores them exactly.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub grad: Vec<f64>,
    /// Rows that received gradient since the last optimizer step.
    pub touched: Vec<bool>,
    pub trainable: bool,
}

impl Tensor {
    pub fn zeros(name: &str, shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        let rows = shape.first().copied().unwrap_or(1);
        Tensor {
            name: name.to_string(),
            shape: shape.to_vec(),
            data: vec![0.0; len],
            grad: vec![0.0; len],
            touched: vec![false; rows],
            trainable: true,
        }
    }

    pub fn rows(&self) -> usize {
        self.touched.len()
    }

    pub fn row_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.row_len();
        &self.data[r * n..(r + 1) * n]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let n = self.row_len();
        &mut self.data[r * n..(r + 1) * n]
    }

    /// Gradient slice of row `r`; marks the row as touched.
    pub fn grad_row(&mut self, r: usize) -> &mut [f64] {
        self.touched[r] = true;
        let n = self.row_len();
        &mut self.grad[r * n..(r + 1) * n]
    }

    /// Whole gradient buffer; marks every row as touched.
    pub fn grad_all(&mut self) -> &mut [f64] {
        self.touched.iter_mut().for_each(|t| *t = true);
        &mut self.grad
    }

    pub fn fill_normal(&mut self, rng: &mut impl Rng, std: f64) {
        if std == 0.0 {
            self.data.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        let dist = Normal::new(0.0, std).expect("valid std");
        self.data.iter_mut().for_each(|x| *x = dist.sample(rng));
    }

    /// Xavier/Glorot uniform for a `[fan_out, fan_in]` matrix.
    pub fn fill_xavier(&mut self, rng: &mut impl Rng, fan_in: usize, fan_out: usize) {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-a, a).expect("valid bound");
        self.data.iter_mut().for_each(|x| *x = dist.sample(rng));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub tensors: Vec<Tensor>,
    pub precision: Precision,
}

impl Default for ParamSet {
    fn default() -> Self {
        ParamSet {
            tensors: Vec::new(),
            precision: Precision::F32,
        }
    }
}

impl ParamSet {
    pub fn new(precision: Precision) -> Self {
        ParamSet {
            tensors: Vec::new(),
            precision,
        }
    }

    /// Adds a zero tensor and returns its index.
    pub fn add(&mut self, name: &str, shape: &[usize]) -> usize {
        assert!(self.index_of(name).is_none(), "duplicate tensor `{name}`");
        self.tensors.push(Tensor::zeros(name, shape));
        self.tensors.len() - 1
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub fn get(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.tensors[i]
    }

    pub fn n_trainable(&self) -> usize {
        self.tensors.iter().filter(|t| t.trainable).map(Tensor::len).sum()
    }

    pub fn n_params(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn zero_grad(&mut self) {
        for t in &mut self.tensors {
            t.grad.iter_mut().for_each(|g| *g = 0.0);
            t.touched.iter_mut().for_each(|x| *x = false);
        }
    }

    pub fn quantize(&mut self) {
        if self.precision == Precision::F32 {
            for t in &mut self.tensors {
                t.data.iter_mut().for_each(|x| *x = *x as f32 as f64);
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// Copies of every tensor's values, in tensor order.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.tensors.iter().map(|t| t.data.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f64>]) {
        for (t, s) in self.tensors.iter_mut().zip(snapshot) {
            t.data.copy_from_slice(s);
        }
    }

    /// Overwrites trainable tensors with `Normal(0, std²)` draws.
    pub fn randomize(&mut self, rng: &mut impl Rng, std: f64) {
        for t in self.tensors.iter_mut().filter(|t| t.trainable) {
            t.fill_normal(rng, std);
        }
        self.quantize();
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn rows_and_touch_tracking() {
        let mut ps = ParamSet::new(Precision::F64);
        let e = ps.add("emb", &[4, 3]);
        let b = ps.add("bias", &[4]);
        assert_eq!(ps.get(e).row_len(), 3);
        assert_eq!(ps.get(b).row_len(), 1);
        ps.get_mut(e).grad_row(2)[1] = 1.0;
        assert_eq!(ps.get(e).touched, vec![false, false, true, false]);
        assert_eq!(ps.get(e).grad[7], 1.0);
        ps.zero_grad();
        assert!(ps.get(e).touched.iter().all(|t| !t));
        assert_eq!(ps.n_params(), 16);
    }

    #[test]
    fn quantize_rounds_to_f32() {
        let mut ps = ParamSet::new(Precision::F32);
        let i = ps.add("w", &[1]);
        ps.get_mut(i).data[0] = 0.1;
        ps.quantize();
        assert_eq!(ps.get(i).data[0], 0.1f32 as f64);
    }

    #[test]
    fn init_is_seeded() {
        let mk = |seed| {
            let mut t = Tensor::zeros("w", &[8, 8]);
            t.fill_normal(&mut ChaCha8Rng::seed_from_u64(seed), 0.01);
            t.data
        };
        assert_eq!(mk(3), mk(3));
        assert_ne!(mk(3), mk(4));
        let mut t = Tensor::zeros("w", &[10, 20]);
        t.fill_xavier(&mut ChaCha8Rng::seed_from_u64(0), 20, 10);
        let a = (6.0f64 / 30.0).sqrt();
        assert!(t.data.iter().all(|x| x.abs() <= a));
    }
}
