use rand::Rng;

use super::linalg::{axpy, dot};
use super::view::View;
use super::{check_grad_len, check_request, ModelConfig, ModelKind, ScoreRequest, Scorer, TaskMode};
use crate::params::{ParamSet, Precision};
use crate::real::{DoubleDouble, Real};
use crate::Result;

/// Factorized personalized Markov chain over the last history item:
/// `score(u, i | l) = ⟨p_u, q_i⟩ + ⟨w_l, z_i⟩`, the second term dropped when
/// the history is empty.
pub struct Fpmc {
    params: ParamSet,
    mode: TaskMode,
    config: ModelConfig,
    user: usize,
    item_u: usize,
    last: usize,
    item_l: usize,
}

impl Fpmc {
    pub fn new(n_users: usize, n_items: usize, mode: TaskMode, config: &ModelConfig, rng: &mut impl Rng) -> Self {
        let d = config.emb_size;
        let mut params = ParamSet::new(Precision::F32);
        let user = params.add("user_emb", &[n_users, d]);
        let item_u = params.add("item_emb_ui", &[n_items, d]);
        let last = params.add("last_emb", &[n_items, d]);
        let item_l = params.add("item_emb_li", &[n_items, d]);
        for t in [user, item_u, last, item_l] {
            params.get_mut(t).fill_normal(rng, 0.01);
        }
        params.quantize();
        Fpmc {
            params,
            mode,
            config: config.clone(),
            user,
            item_u,
            last,
            item_l,
        }
    }

    fn dims(&self) -> (usize, usize) {
        (self.params.get(self.user).rows(), self.params.get(self.item_u).rows())
    }

    fn eval<T: Real>(&self, req: &ScoreRequest, view: &View<T>) -> Result<Vec<T>> {
        let (nu, ni) = self.dims();
        check_request(req, nu, ni)?;
        let p = view.row(self.user, req.user);
        let last = req.history.last().map(|&l| view.row(self.last, l));
        Ok(req
            .items
            .iter()
            .map(|&i| {
                let mut s = dot(&p, &view.row(self.item_u, i));
                if let Some(w) = &last {
                    s += dot(w, &view.row(self.item_l, i));
                }
                s
            })
            .collect())
    }
}

impl Scorer for Fpmc {
    fn kind(&self) -> ModelKind {
        ModelKind::Fpmc
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
        let (nu, ni) = self.dims();
        check_request(req, nu, ni)?;
        check_grad_len(req, d_scores)?;
        let p = self.params.get(self.user).row(req.user).to_vec();
        let last = req.history.last().copied();
        let w = last.map(|l| self.params.get(self.last).row(l).to_vec());
        let mut gp = vec![0.0; p.len()];
        let mut gw = vec![0.0; p.len()];
        for (&i, &d) in req.items.iter().zip(d_scores) {
            let q = self.params.get(self.item_u).row(i).to_vec();
            axpy(d, &q, &mut gp);
            axpy(d, &p, self.params.get_mut(self.item_u).grad_row(i));
            if let Some(w) = &w {
                let z = self.params.get(self.item_l).row(i).to_vec();
                axpy(d, &z, &mut gw);
                axpy(d, w, self.params.get_mut(self.item_l).grad_row(i));
            }
        }
        axpy(1.0, &gp, self.params.get_mut(self.user).grad_row(req.user));
        if let Some(l) = last {
            axpy(1.0, &gw, self.params.get_mut(self.last).grad_row(l));
        }
        Ok(())
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn item_embedding(&self, item: usize) -> Option<Vec<f64>> {
        (item < self.dims().1).then(|| self.params.get(self.item_u).row(item).to_vec())
    }
}
