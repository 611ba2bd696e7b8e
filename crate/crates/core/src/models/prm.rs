use rand::Rng;

use super::linalg::{axpy, matmul, matmul_nt, matmul_tn};
use super::mlp::Mlp;
use super::view::View;
use super::{check_grad_len, ModelConfig, ModelKind, ScoreRequest, Scorer, TaskMode};
use crate::metrics::rank;
use crate::params::{ParamSet, Precision};
use crate::real::{DoubleDouble, Real};
use crate::{Error, Result};

/// List-aware re-ranker with one single-head self-attention block.
///
/// Row `i` of the input `X` is `[backbone embedding, standardized backbone
/// score, position embedding of the backbone rank]`. Then
///
/// ```text
/// A = rowsoftmax(X W_Q (X W_K)ᵀ / √n),  H = A X W_V,  Z = X + H W_O
/// score_i = w₂ᵀ ReLU(W₁ z_i + b₁) + b₂
/// ```
///
/// where `n` is the input width. Backbone inputs are constants; only the
/// position table, the attention projections and the output MLP train.
pub struct PrmLite {
    params: ParamSet,
    mode: TaskMode,
    config: ModelConfig,
    pos: usize,
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    mlp: Mlp,
}

struct Pass<T> {
    x: Vec<T>,
    ranks: Vec<usize>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    a: Vec<T>,
    h: Vec<T>,
    acts: Vec<Vec<Vec<T>>>,
    scores: Vec<T>,
}

impl PrmLite {
    pub fn new(mode: TaskMode, config: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        if config.pos_dim == 0 || config.max_list_len == 0 {
            return Err(Error::Config("PRMLite needs pos_dim >= 1 and max_list_len >= 1".into()));
        }
        let hidden = config.hidden.first().copied().unwrap_or(64);
        if hidden == 0 {
            return Err(Error::Config("PRMLite hidden size must be >= 1".into()));
        }
        let n = Self::input_dim(config);
        let mut params = ParamSet::new(Precision::F32);
        let pos = params.add("pos_emb", &[config.max_list_len, config.pos_dim]);
        params.get_mut(pos).fill_normal(rng, 0.01);
        let mut proj = |name: &str| {
            let t = params.add(name, &[n, n]);
            params.get_mut(t).fill_xavier(rng, n, n);
            t
        };
        let (wq, wk, wv, wo) = (proj("attn.wq"), proj("attn.wk"), proj("attn.wv"), proj("attn.wo"));
        let mlp = Mlp::build(&mut params, "out", n, &[hidden], rng);
        params.quantize();
        Ok(PrmLite {
            params,
            mode,
            config: config.clone(),
            pos,
            wq,
            wk,
            wv,
            wo,
            mlp,
        })
    }

    pub fn input_dim(config: &ModelConfig) -> usize {
        config.emb_size + 1 + config.pos_dim
    }

    fn build_input<T: Real>(&self, req: &ScoreRequest, view: &View<T>) -> Result<(Vec<T>, Vec<usize>)> {
        let l = req.items.len();
        if l == 0 {
            return Err(Error::Model("empty candidate list".into()));
        }
        let scores = req
            .base_scores
            .as_ref()
            .ok_or_else(|| Error::Model("PRMLite needs backbone scores".into()))?;
        let embs = req
            .base_embeddings
            .as_ref()
            .ok_or_else(|| Error::Model("PRMLite needs backbone embeddings".into()))?;
        let d = self.config.emb_size;
        if scores.len() != l || embs.len() != l || embs.iter().any(|e| e.len() != d) {
            return Err(Error::Model(format!(
                "backbone inputs do not match {l} candidates of width {d}"
            )));
        }
        let mean = scores.iter().sum::<f64>() / l as f64;
        let std = (scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / l as f64).sqrt();
        let ranked = rank(scores, &(0..l).collect::<Vec<_>>(), &vec![0; l])?;
        let mut ranks = vec![0; l];
        for (r, &i) in ranked.ids.iter().enumerate() {
            ranks[i] = r.min(self.config.max_list_len - 1);
        }
        let n = Self::input_dim(&self.config);
        let mut x = Vec::with_capacity(l * n);
        for i in 0..l {
            x.extend(embs[i].iter().map(|&e| T::from_f64(e)));
            x.push(T::from_f64(if std > 1e-12 { (scores[i] - mean) / std } else { 0.0 }));
            x.extend_from_slice(&view.row(self.pos, ranks[i]));
        }
        Ok((x, ranks))
    }

    fn run<T: Real>(&self, req: &ScoreRequest, view: &View<T>) -> Result<Pass<T>> {
        let (x, ranks) = self.build_input(req, view)?;
        let l = req.items.len();
        let n = Self::input_dim(&self.config);
        let q = matmul(&x, l, n, &view.data(self.wq), n);
        let k = matmul(&x, l, n, &view.data(self.wk), n);
        let v = matmul(&x, l, n, &view.data(self.wv), n);
        let scale = T::from_f64(1.0 / (n as f64).sqrt());
        let mut a = matmul_nt(&q, l, n, &k, l);
        for row in a.chunks_mut(l) {
            let max = row.iter().skip(1).fold(row[0], |m, &s| m.max(s));
            let mut sum = T::zero();
            for s in row.iter_mut() {
                *s = ((*s - max) * scale).exp();
                sum += *s;
            }
            row.iter_mut().for_each(|s| *s /= sum);
        }
        let h = matmul(&a, l, l, &v, n);
        let mut z = matmul(&h, l, n, &view.data(self.wo), n);
        axpy(T::one(), &x, &mut z);
        let mut acts = Vec::with_capacity(l);
        let mut scores = Vec::with_capacity(l);
        for zi in z.chunks(n) {
            let (s, act) = self.mlp.forward(view, zi);
            scores.push(s);
            acts.push(act);
        }
        Ok(Pass {
            x,
            ranks,
            q,
            k,
            v,
            a,
            h,
            acts,
            scores,
        })
    }
}

impl Scorer for PrmLite {
    fn kind(&self) -> ModelKind {
        ModelKind::PrmLite
    }

    fn mode(&self) -> TaskMode {
        self.mode
    }

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn forward(&self, req: &ScoreRequest) -> Result<Vec<f64>> {
        Ok(self.run(req, &View::new(&self.params))?.scores)
    }

    fn forward_shadow(&self, req: &ScoreRequest, perturb: Option<(usize, usize, f64)>) -> Result<Vec<DoubleDouble>> {
        Ok(self.run(req, &View::shadow(&self.params, perturb))?.scores)
    }

    fn backward(&mut self, req: &ScoreRequest, d_scores: &[f64]) -> Result<()> {
        check_grad_len(req, d_scores)?;
        let pass = self.run(req, &View::new(&self.params))?;
        let l = req.items.len();
        let n = Self::input_dim(&self.config);
        let scale = 1.0 / (n as f64).sqrt();

        let mut dz = Vec::with_capacity(l * n);
        for (acts, &dy) in pass.acts.iter().zip(d_scores) {
            dz.extend(self.mlp.backward(&mut self.params, acts, dy));
        }
        let d_wo = matmul_tn(&pass.h, l, n, &dz, n);
        let dh = matmul_nt(&dz, l, n, &self.params.get(self.wo).data, n);
        let da = matmul_nt(&dh, l, n, &pass.v, l);
        let dv = matmul_tn(&pass.a, l, l, &dh, n);
        let mut ds = vec![0.0; l * l];
        for i in 0..l {
            let a = &pass.a[i * l..(i + 1) * l];
            let g = &da[i * l..(i + 1) * l];
            let inner: f64 = a.iter().zip(g).map(|(x, y)| x * y).sum();
            for j in 0..l {
                ds[i * l + j] = a[j] * (g[j] - inner) * scale;
            }
        }
        let dq = matmul(&ds, l, l, &pass.k, n);
        let dk = matmul_tn(&ds, l, l, &pass.q, n);

        let mut dx = dz;
        for (w, dproj) in [(self.wq, &dq), (self.wk, &dk), (self.wv, &dv)] {
            let dw = matmul_tn(&pass.x, l, n, dproj, n);
            axpy(1.0, &dw, self.params.get_mut(w).grad_all());
            let back = matmul_nt(dproj, l, n, &self.params.get(w).data, n);
            axpy(1.0, &back, &mut dx);
        }
        axpy(1.0, &d_wo, self.params.get_mut(self.wo).grad_all());

        let offset = self.config.emb_size + 1;
        for (i, &r) in pass.ranks.iter().enumerate() {
            let g = &dx[i * n + offset..(i + 1) * n];
            axpy(1.0, g, self.params.get_mut(self.pos).grad_row(r));
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
