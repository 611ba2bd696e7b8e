use super::{check_grad_len, check_request, ModelConfig, ModelKind, ScoreRequest, Scorer, TaskMode};
use super::view::View;
use crate::corpus::Corpus;
use crate::params::{ParamSet, Precision};
use crate::real::{DoubleDouble, Real};
use crate::Result;

/// Scores items by their train interaction count. Not trainable.
pub struct MostPopular {
    params: ParamSet,
    mode: TaskMode,
    config: ModelConfig,
    n_users: usize,
}

impl MostPopular {
    pub fn new(corpus: &Corpus, mode: TaskMode, config: &ModelConfig) -> Self {
        let mut params = ParamSet::new(Precision::F32);
        let pop = params.add("popularity", &[corpus.n_items]);
        let t = params.get_mut(pop);
        t.trainable = false;
        for (x, c) in t.data.iter_mut().zip(corpus.item_popularity()) {
            *x = c as f64;
        }
        MostPopular {
            params,
            mode,
            config: config.clone(),
            n_users: corpus.n_users,
        }
    }

    fn eval<T: Real>(&self, req: &ScoreRequest, view: &View<T>) -> Result<Vec<T>> {
        check_request(req, self.n_users, self.params.get(0).len())?;
        let counts = view.data(0);
        Ok(req.items.iter().map(|&i| counts[i]).collect())
    }
}

impl Scorer for MostPopular {
    fn kind(&self) -> ModelKind {
        ModelKind::MostPopular
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
        check_grad_len(req, d_scores)
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}
