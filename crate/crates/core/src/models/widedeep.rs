use rand::Rng;

use super::features::FeatureSpace;
use super::linalg::axpy;
use super::mlp::Mlp;
use super::view::View;
use super::{check_grad_len, check_request, ModelConfig, ModelKind, ScoreRequest, Scorer, TaskMode};
use crate::params::{ParamSet, Precision};
use crate::real::{DoubleDouble, Real};
use crate::{Error, Result};

/// A linear "wide" part plus an MLP over the concatenated field embeddings.
pub struct WideDeep {
    params: ParamSet,
    mode: TaskMode,
    config: ModelConfig,
    space: FeatureSpace,
    w0: usize,
    wide: usize,
    emb: usize,
    mlp: Mlp,
}

impl WideDeep {
    pub fn new(space: FeatureSpace, mode: TaskMode, config: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        if config.hidden.is_empty() || config.hidden.contains(&0) {
            return Err(Error::Config("WideDeep needs non-empty hidden layer sizes".into()));
        }
        let d = config.emb_size;
        let mut params = ParamSet::new(Precision::F32);
        let w0 = params.add("w0", &[1]);
        let wide = params.add("wide", &[space.n_features()]);
        let emb = params.add("emb", &[space.n_features(), d]);
        params.get_mut(emb).fill_normal(rng, 0.01);
        let mlp = Mlp::build(&mut params, "deep", space.n_fields() * d, &config.hidden, rng);
        params.quantize();
        Ok(WideDeep {
            params,
            mode,
            config: config.clone(),
            space,
            w0,
            wide,
            emb,
            mlp,
        })
    }

    fn deep_input<T: Real>(&self, view: &View<T>, feats: &[(usize, f64)]) -> Vec<T> {
        let mut x = Vec::with_capacity(feats.len() * self.config.emb_size);
        for &(j, v) in feats {
            let v = T::from_f64(v);
            x.extend(view.row(self.emb, j).iter().map(|&w| w * v));
        }
        x
    }

    fn wide_part<T: Real>(&self, view: &View<T>, feats: &[(usize, f64)]) -> T {
        feats
            .iter()
            .fold(view.at(self.w0, 0), |y, &(j, x)| y + view.at(self.wide, j) * T::from_f64(x))
    }

    fn eval<T: Real>(&self, req: &ScoreRequest, view: &View<T>) -> Result<Vec<T>> {
        check_request(req, self.space.n_users(), self.space.n_items())?;
        req.items
            .iter()
            .map(|&i| {
                let feats = self.space.active(req.user, i, &req.situation)?;
                let (deep, _) = self.mlp.forward(view, &self.deep_input(view, &feats));
                Ok(self.wide_part(view, &feats) + deep)
            })
            .collect()
    }
}

impl Scorer for WideDeep {
    fn kind(&self) -> ModelKind {
        ModelKind::WideDeep
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
        check_request(req, self.space.n_users(), self.space.n_items())?;
        check_grad_len(req, d_scores)?;
        let d = self.config.emb_size;
        for (&i, &g) in req.items.iter().zip(d_scores) {
            let feats = self.space.active(req.user, i, &req.situation)?;
            self.params.get_mut(self.w0).grad_all()[0] += g;
            for &(j, x) in &feats {
                self.params.get_mut(self.wide).grad_row(j)[0] += g * x;
            }
            let view = View::new(&self.params);
            let (_, acts) = self.mlp.forward(&view, &self.deep_input(&view, &feats));
            let d_in = self.mlp.backward(&mut self.params, &acts, g);
            for (f, &(j, x)) in feats.iter().enumerate() {
                axpy(x, &d_in[f * d..(f + 1) * d], self.params.get_mut(self.emb).grad_row(j));
            }
        }
        Ok(())
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}
