use rand::Rng;

use super::features::FeatureSpace;
use super::view::View;
use super::{check_grad_len, check_request, ModelConfig, ModelKind, ScoreRequest, Scorer, TaskMode};
use crate::params::{ParamSet, Precision};
use crate::real::{DoubleDouble, Real};
use crate::Result;

/// Factorization machine over the active features of each candidate:
///
/// `ŷ = w0 + Σ_j w_j x_j + ½ Σ_f [(Σ_j v_jf x_j)² − Σ_j v_jf² x_j²]`
///
/// With `emb_size = 0` only the linear part remains.
pub struct Fm {
    params: ParamSet,
    mode: TaskMode,
    config: ModelConfig,
    space: FeatureSpace,
    w0: usize,
    w: usize,
    v: usize,
}

impl Fm {
    pub fn new(space: FeatureSpace, mode: TaskMode, config: &ModelConfig, rng: &mut impl Rng) -> Self {
        let mut params = ParamSet::new(Precision::F32);
        let w0 = params.add("w0", &[1]);
        let w = params.add("linear", &[space.n_features()]);
        let v = params.add("factors", &[space.n_features(), config.emb_size]);
        params.get_mut(v).fill_normal(rng, 0.01);
        params.quantize();
        Fm {
            params,
            mode,
            config: config.clone(),
            space,
            w0,
            w,
            v,
        }
    }

    fn score_one<T: Real>(&self, view: &View<T>, feats: &[(usize, f64)]) -> T {
        let mut y = view.at(self.w0, 0);
        let rows: Vec<_> = feats.iter().map(|&(j, x)| (view.row(self.v, j), T::from_f64(x))).collect();
        for &(j, x) in feats {
            y += view.at(self.w, j) * T::from_f64(x);
        }
        let half = T::from_f64(0.5);
        for f in 0..self.config.emb_size {
            let (mut s, mut sq) = (T::zero(), T::zero());
            for (v, x) in &rows {
                let vx = v[f] * *x;
                s += vx;
                sq += vx * vx;
            }
            y += half * (s * s - sq);
        }
        y
    }

    fn eval<T: Real>(&self, req: &ScoreRequest, view: &View<T>) -> Result<Vec<T>> {
        check_request(req, self.space.n_users(), self.space.n_items())?;
        req.items
            .iter()
            .map(|&i| Ok(self.score_one(view, &self.space.active(req.user, i, &req.situation)?)))
            .collect()
    }
}

impl Scorer for Fm {
    fn kind(&self) -> ModelKind {
        ModelKind::Fm
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
        let k = self.config.emb_size;
        for (&i, &d) in req.items.iter().zip(d_scores) {
            let feats = self.space.active(req.user, i, &req.situation)?;
            self.params.get_mut(self.w0).grad_all()[0] += d;
            let mut sums = vec![0.0; k];
            {
                let v = self.params.get(self.v);
                for &(j, x) in &feats {
                    for (f, s) in sums.iter_mut().enumerate() {
                        *s += v.row(j)[f] * x;
                    }
                }
            }
            for &(j, x) in &feats {
                self.params.get_mut(self.w).grad_row(j)[0] += d * x;
                let vj = self.params.get(self.v).row(j).to_vec();
                let g = self.params.get_mut(self.v).grad_row(j);
                for f in 0..k {
                    g[f] += d * (x * sums[f] - vj[f] * x * x);
                }
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
