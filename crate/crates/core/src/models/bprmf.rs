use rand::Rng;

use super::linalg::{axpy, dot};
use super::view::View;
use super::{check_grad_len, check_request, ModelConfig, ModelKind, ScoreRequest, Scorer, TaskMode};
use crate::params::{ParamSet, Precision};
use crate::real::{DoubleDouble, Real};
use crate::Result;

/// Matrix factorization: `score(u, i) = ⟨p_u, q_i⟩ + b_i`.
///
/// There is no user bias; it cancels in every ranking loss.
pub struct BprMf {
    params: ParamSet,
    mode: TaskMode,
    config: ModelConfig,
    user: usize,
    item: usize,
    bias: usize,
}

impl BprMf {
    pub fn new(n_users: usize, n_items: usize, mode: TaskMode, config: &ModelConfig, rng: &mut impl Rng) -> Self {
        let d = config.emb_size;
        let mut params = ParamSet::new(Precision::F32);
        let user = params.add("user_emb", &[n_users, d]);
        let item = params.add("item_emb", &[n_items, d]);
        let bias = params.add("item_bias", &[n_items]);
        params.get_mut(user).fill_normal(rng, 0.01);
        params.get_mut(item).fill_normal(rng, 0.01);
        params.quantize();
        BprMf {
            params,
            mode,
            config: config.clone(),
            user,
            item,
            bias,
        }
    }

    fn n_users(&self) -> usize {
        self.params.get(self.user).rows()
    }

    fn n_items(&self) -> usize {
        self.params.get(self.item).rows()
    }

    fn eval<T: Real>(&self, req: &ScoreRequest, view: &View<T>) -> Result<Vec<T>> {
        check_request(req, self.n_users(), self.n_items())?;
        let p = view.row(self.user, req.user);
        Ok(req.items.iter().map(|&i| dot(&p, &view.row(self.item, i)) + view.at(self.bias, i)).collect())
    }
}

impl Scorer for BprMf {
    fn kind(&self) -> ModelKind {
        ModelKind::BprMf
    }

    fn mode(&self) -> TaskMode {
        self.mode
    }

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn forward(&self, req: &ScoreRequest) -> Result<Vec<f64>> {
        self.eval(req, &View::new(&self.params))
    }

    fn forward_shadow(&self, req: &ScoreRequest, perturb: Option<(usize, usize, f64)>) -> Result<Vec<DoubleDouble>> {
        self.eval(req, &View::shadow(&self.params, perturb))
    }

    fn backward(&mut self, req: &ScoreRequest, d_scores: &[f64]) -> Result<()> {
        check_request(req, self.n_users(), self.n_items())?;
        check_grad_len(req, d_scores)?;
        let p = self.params.get(self.user).row(req.user).to_vec();
        let mut gp = vec![0.0; p.len()];
        for (&i, &d) in req.items.iter().zip(d_scores) {
            let q = self.params.get(self.item).row(i).to_vec();
            axpy(d, &q, &mut gp);
            axpy(d, &p, self.params.get_mut(self.item).grad_row(i));
            self.params.get_mut(self.bias).grad_row(i)[0] += d;
        }
        axpy(1.0, &gp, self.params.get_mut(self.user).grad_row(req.user));
        Ok(())
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn item_embedding(&self, item: usize) -> Option<Vec<f64>> {
        (item < self.n_items()).then(|| self.params.get(self.item).row(item).to_vec())
    }
}
