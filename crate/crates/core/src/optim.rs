//! Parameter updates and the finite-difference gradient check.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::losses::{ListLoss, LossKind};
use crate::models::{ScoreRequest, Scorer};
use crate::params::{ParamSet, Precision};
use crate::real::{DoubleDouble, Real};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "SGD")]
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn parse(s: &str) -> Option<OptimizerKind> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Some(OptimizerKind::Sgd),
            "adam" => Some(OptimizerKind::Adam),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub l2: f64,
    /// Regularize every row each step instead of only the touched ones.
    pub full_l2: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64, l2: f64) -> Self {
        OptimizerState {
            kind,
            lr,
            l2,
            full_l2: false,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn adam(lr: f64, l2: f64) -> Self {
        Self::new(OptimizerKind::Adam, lr, l2)
    }

    pub fn sgd(lr: f64, l2: f64) -> Self {
        Self::new(OptimizerKind::Sgd, lr, l2)
    }

    fn ensure_buffers(&mut self, params: &ParamSet) {
        let shapes_match = self.m.len() == params.tensors.len()
            && self.m.iter().zip(&params.tensors).all(|(m, t)| m.len() == t.len());
        if !shapes_match {
            self.m = params.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
            self.v = self.m.clone();
        }
    }
}

/// Applies one update from the accumulated gradients, then clears them.
///
/// Only rows marked touched since the last step are updated (lazy Adam);
/// the L2 term `λθ` joins the gradient of exactly those rows unless
/// `full_l2` is set. A non-finite gradient aborts before anything changes.
pub fn step(params: &mut ParamSet, state: &mut OptimizerState) -> Result<()> {
    for t in params.tensors.iter().filter(|t| t.trainable) {
        if t.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { tensor: t.name.clone() });
        }
    }
    state.ensure_buffers(params);
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powi(state.step.min(i32::MAX as u64) as i32);
    let bc2 = 1.0 - b2.powi(state.step.min(i32::MAX as u64) as i32);

    for (ti, t) in params.tensors.iter_mut().enumerate() {
        if !t.trainable {
            continue;
        }
        let n = t.row_len();
        for r in 0..t.rows() {
            if !(t.touched[r] || state.full_l2) {
                continue;
            }
            for j in r * n..(r + 1) * n {
                let g = t.grad[j] + state.l2 * t.data[j];
                match state.kind {
                    OptimizerKind::Sgd => t.data[j] -= state.lr * g,
                    OptimizerKind::Adam => {
                        let m = &mut state.m[ti][j];
                        let v = &mut state.v[ti][j];
                        *m = b1 * *m + (1.0 - b1) * g;
                        *v = b2 * *v + (1.0 - b2) * g * g;
                        let m_hat = *m / bc1;
                        let v_hat = *v / bc2;
                        t.data[j] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
                    }
                }
            }
        }
    }
    params.quantize();
    params.zero_grad();
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    pub n_trials: usize,
    /// Central-difference step.
    pub h: f64,
    pub tol: f64,
    /// Coordinates compared per trial, drawn from the rows the request touches.
    pub coords_per_trial: usize,
    /// Redraw trainable parameters from `Normal(0, std²)` before each trial.
    pub param_std: Option<f64>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            n_trials: 20,
            h: 1e-5,
            tol: 1e-6,
            coords_per_trial: 64,
            param_std: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub n_checked: usize,
    pub passed: bool,
    /// The model has nothing to differentiate.
    pub no_parameters: bool,
    /// `tensor[index]` of the worst coordinate.
    pub worst: Option<String>,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.no_parameters {
            return f.write_str("no parameters");
        }
        write!(
            f,
            "max_rel_err={:.3e} over {} coordinates ({})",
            self.max_rel_err,
            self.n_checked,
            if self.passed { "pass" } else { "FAIL" }
        )?;
        if let Some(w) = &self.worst {
            write!(f, " worst at {w}")?;
        }
        Ok(())
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn loss_of(scorer: &dyn Scorer, loss: LossKind, req: &ScoreRequest, labels: &[u8]) -> Result<ListLoss> {
    let scores = scorer.forward(req)?;
    Ok(loss.evaluate(&scores, labels))
}

/// Compares `backward` against central differences of `loss ∘ forward`.
///
/// `sampler` yields a request and its candidate labels; requests whose loss
/// is skipped (e.g. no positive) are redrawn. The analytic side runs in
/// `f64` regardless of the parameter set's storage precision, which is
/// restored afterwards. The difference quotient is evaluated in
/// double-double arithmetic through [`Scorer::forward_shadow`]: in `f64` the
/// cancellation in `L(θ+h) − L(θ−h)` leaves ~1e-11 of noise, which swamps
/// the relative error wherever the true gradient is near zero.
pub fn grad_check<R: Rng>(
    scorer: &mut dyn Scorer,
    loss: LossKind,
    mut sampler: impl FnMut(&mut R) -> (ScoreRequest, Vec<u8>),
    config: &GradCheckConfig,
    rng: &mut R,
) -> Result<GradCheckReport> {
    if scorer.params().n_trainable() == 0 {
        return Ok(GradCheckReport {
            max_rel_err: 0.0,
            n_checked: 0,
            passed: true,
            no_parameters: true,
            worst: None,
        });
    }
    let precision = scorer.params().precision;
    scorer.params_mut().precision = Precision::F64;
    let result = run_checks(scorer, loss, &mut sampler, config, rng);
    scorer.params_mut().precision = precision;
    scorer.params_mut().zero_grad();
    result
}

fn run_checks<R: Rng>(
    scorer: &mut dyn Scorer,
    loss: LossKind,
    sampler: &mut impl FnMut(&mut R) -> (ScoreRequest, Vec<u8>),
    config: &GradCheckConfig,
    rng: &mut R,
) -> Result<GradCheckReport> {
    let mut max_err = 0.0f64;
    let mut worst = None;
    let mut n_checked = 0;
    for _ in 0..config.n_trials {
        if let Some(std) = config.param_std {
            scorer.params_mut().randomize(rng, std);
        }
        let mut drawn = None;
        for _ in 0..1000 {
            let (req, labels) = sampler(rng);
            if let ListLoss::Value { grad, .. } = loss_of(scorer, loss, &req, &labels)? {
                drawn = Some((req, labels, grad));
                break;
            }
        }
        let (req, labels, d_scores) =
            drawn.ok_or_else(|| Error::Config("sampler never produced a request with a defined loss".into()))?;

        scorer.params_mut().zero_grad();
        scorer.backward(&req, &d_scores)?;

        let mut coords = Vec::new();
        for (ti, t) in scorer.params().tensors.iter().enumerate() {
            if !t.trainable {
                continue;
            }
            let n = t.row_len();
            for r in (0..t.rows()).filter(|&r| t.touched[r]) {
                coords.extend((r * n..(r + 1) * n).map(|j| (ti, j)));
            }
        }
        let picked: Vec<(usize, usize)> = if coords.len() <= config.coords_per_trial {
            coords
        } else {
            sample(rng, coords.len(), config.coords_per_trial).into_iter().map(|k| coords[k]).collect()
        };
        let analytic: Vec<f64> = picked.iter().map(|&(ti, j)| scorer.params().get(ti).grad[j]).collect();
        scorer.params_mut().zero_grad();

        for (&(ti, j), &a) in picked.iter().zip(&analytic) {
            let eval_at = |h: f64| -> Result<DoubleDouble> {
                let scores = scorer.forward_shadow(&req, Some((ti, j, h)))?;
                loss.value(&scores, &labels)
                    .ok_or_else(|| Error::Model("loss became undefined under perturbation".into()))
            };
            let diff = eval_at(config.h)? - eval_at(-config.h)?;
            let numeric = (diff / DoubleDouble::from_f64(2.0 * config.h)).to_f64();
            let err = relative_error(a, numeric);
            n_checked += 1;
            if err > max_err || worst.is_none() {
                max_err = max_err.max(err);
                let t = scorer.params().get(ti);
                worst = Some(format!("{}[{j}] analytic={a:.6e} numeric={numeric:.6e}", t.name));
            }
        }
    }
    Ok(GradCheckReport {
        max_rel_err: max_err,
        n_checked,
        passed: max_err <= config.tol,
        no_parameters: false,
        worst,
    })
}
