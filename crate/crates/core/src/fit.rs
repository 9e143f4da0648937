//! Alternating maximisation of the finite-sample bound.
//!
//! Each outer iteration runs `J` SCG iterations on the mean, then `J` on
//! the factor, then (for tunable models) `J` on the model parameters, and
//! finally sets `alpha` and `beta` to their stationary values. The latent
//! draws are generated once per fit.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::bound::{self, Want};
use crate::error::{Error, Result};
use crate::models::{Prior, TargetModel, TunableModel};
use crate::posterior::{stream_rng, Hyperparameters, SampleSet, VariationalPosterior};
use crate::scg::{scg_maximise, Objective, ScgOptions};

const STREAM_INIT: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_HOLDOUT: u64 = 2;

/// How the variational parameters are initialised.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    /// `mu ~ N(0, I)`, `L = c I`.
    #[default]
    Random,
    /// `mu` at the maximiser of the log-likelihood found by SCG from
    /// `start` (the origin when absent), `L = c I`.
    MaximumLikelihood {
        max_iters: usize,
        start: Option<DVector<f64>>,
    },
    /// Start from the given posterior; its block structure is kept.
    Given(VariationalPosterior),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Number of training draws `S`.
    pub samples: usize,
    /// Number of holdout draws `S'`; 0 disables holdout monitoring.
    pub holdout_samples: usize,
    /// SCG iterations per block and outer iteration (`J`).
    pub inner_iters: usize,
    pub max_iter: usize,
    /// Stop when successive bounds differ by less than this.
    pub tolerance: f64,
    /// Initial factor scale `c` in `L = c I`.
    pub init_scale: f64,
    pub alpha: f64,
    pub beta: f64,
    pub update_alpha: bool,
    pub update_beta: bool,
    pub init: Init,
    /// Block sizes of a factorised posterior; defaults to the model's
    /// suggestion, or a dense factor.
    pub blocks: Option<Vec<usize>>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig::with_samples(100)
    }
}

impl FitConfig {
    /// Defaults with `S` draws and `S' = 5 S` holdout draws.
    pub fn with_samples(samples: usize) -> Self {
        FitConfig {
            samples,
            holdout_samples: 5 * samples,
            inner_iters: 10,
            max_iter: 1000,
            tolerance: 1e-4,
            init_scale: 0.1,
            alpha: 0.1,
            beta: 0.1,
            update_alpha: true,
            update_beta: true,
            init: Init::Random,
            blocks: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.samples == 0 {
            return bad("samples must be at least 1");
        }
        if self.inner_iters == 0 {
            return bad("inner_iters must be at least 1");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance must be positive");
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be positive");
        }
        Hyperparameters::new(self.alpha, Some(self.beta))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub train_bound: f64,
    pub holdout_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub posterior: VariationalPosterior,
    pub hyper: Hyperparameters,
    /// Row 0 holds the initial state; row `k` the state after outer
    /// iteration `k`.
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub iterations: usize,
    /// Outer iterations after which the training bound went down.
    pub nonmonotone_steps: usize,
}

impl FitReport {
    pub fn final_bound(&self) -> f64 {
        self.trace.last().map(|r| r.train_bound).unwrap_or(f64::NAN)
    }
}

fn derived_seed(seed: u64, stream: u64) -> u64 {
    stream_rng(seed, stream).next_u64()
}

struct Fitter {
    config: FitConfig,
    post: VariationalPosterior,
    hyper: Hyperparameters,
    train: SampleSet,
    holdout: Option<SampleSet>,
    trace: Vec<TraceRow>,
    prior: Prior,
    has_noise: bool,
    nonmonotone: usize,
    iteration: usize,
    previous: f64,
}

impl Fitter {
    fn new<M: TargetModel + ?Sized>(model: &M, config: &FitConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let m = model.dim();
        if m == 0 {
            return Err(Error::Config("model has no parameters".into()));
        }
        let has_noise = model.regressor().is_some();
        let hyper = Hyperparameters::new(config.alpha, has_noise.then_some(config.beta))?;

        let blocks = config
            .blocks
            .clone()
            .or_else(|| model.posterior_blocks())
            .unwrap_or_else(|| vec![m]);
        let post = match &config.init {
            Init::Given(p) => {
                if p.dim() != m {
                    return Err(Error::dim(m, p.dim(), "initial posterior dimension"));
                }
                p.clone()
            }
            Init::Random => {
                let mut rng = stream_rng(seed, STREAM_INIT);
                let mu = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
                VariationalPosterior::isotropic(mu, config.init_scale, blocks)?
            }
            Init::MaximumLikelihood { max_iters, start } => {
                let x0 = match start {
                    Some(s) if s.len() != m => return Err(Error::dim(m, s.len(), "warm-start point")),
                    Some(s) => s.clone(),
                    None => DVector::zeros(m),
                };
                let obj = LogLikObjective { model, hyper: &hyper };
                let out = scg_maximise(&obj, x0, &ScgOptions::with_iters(*max_iters))?;
                VariationalPosterior::isotropic(out.x, config.init_scale, blocks)?
            }
        };
        let train = SampleSet::draw(config.samples, m, derived_seed(seed, STREAM_TRAIN))?;
        let holdout = if config.holdout_samples > 0 {
            Some(SampleSet::draw(config.holdout_samples, m, derived_seed(seed, STREAM_HOLDOUT))?)
        } else {
            None
        };

        let mut fitter = Fitter {
            config: config.clone(),
            post,
            hyper,
            train,
            holdout,
            trace: Vec::new(),
            prior: model.prior(),
            has_noise,
            nonmonotone: 0,
            iteration: 0,
            previous: f64::NAN,
        };
        let initial = fitter.record(model)?;
        fitter.previous = initial;
        Ok(fitter)
    }

    fn fail(&self, what: impl Into<String>) -> Error {
        Error::NumericalFailure {
            iteration: self.iteration,
            what: what.into(),
        }
    }

    fn record<M: TargetModel + ?Sized>(&mut self, model: &M) -> Result<f64> {
        let train = bound::lower_bound_fs(model, &self.post, &self.hyper, &self.train)
            .map_err(|e| self.fail(format!("training bound: {e}")))?;
        if !train.is_finite() {
            return Err(self.fail(format!("training bound is {train}")));
        }
        let holdout = match &self.holdout {
            Some(z) => Some(
                bound::lower_bound_fs(model, &self.post, &self.hyper, z)
                    .map_err(|e| self.fail(format!("holdout bound: {e}")))?,
            ),
            None => None,
        };
        self.trace.push(TraceRow {
            iteration: self.iteration,
            train_bound: train,
            holdout_bound: holdout,
        });
        Ok(train)
    }

    fn inner_opts(&self) -> ScgOptions {
        ScgOptions {
            max_iters: self.config.inner_iters,
            grad_tol: 1e-10,
            ..Default::default()
        }
    }

    fn optimise_mu<M: TargetModel + ?Sized>(&mut self, model: &M) -> Result<()> {
        let obj = MeanObjective {
            model,
            post: &self.post,
            hyper: &self.hyper,
            samples: &self.train,
        };
        let out = scg_maximise(&obj, self.post.mu().clone(), &self.inner_opts())
            .map_err(|e| self.fail(format!("mean step: {e}")))?;
        self.post.set_mu(out.x)
    }

    fn optimise_l<M: TargetModel + ?Sized>(&mut self, model: &M) -> Result<()> {
        let (_, sign) = self
            .post
            .log_abs_det_l()
            .map_err(|e| self.fail(format!("factor step: {e}")))?;
        let obj = FactorObjective {
            model,
            post: &self.post,
            hyper: &self.hyper,
            samples: &self.train,
            sign,
        };
        let out = scg_maximise(&obj, self.post.pack_l(), &self.inner_opts())
            .map_err(|e| self.fail(format!("factor step: {e}")))?;
        let l = self.post.unpack_l(&out.x)?;
        self.post.set_l(l)
    }

    fn optimise_params<M: TunableModel + ?Sized>(&mut self, model: &mut M) -> Result<()> {
        let draws: Vec<DVector<f64>> = self.train.iter().map(|z| self.post.transform(z)).collect();
        let theta = {
            let obj = ParamObjective {
                model: &*model,
                draws: &draws,
                hyper: &self.hyper,
            };
            scg_maximise(&obj, model.params(), &self.inner_opts())
                .map_err(|e| self.fail(format!("model parameter step: {e}")))?
                .x
        };
        model.set_params(&theta);
        Ok(())
    }

    fn update_hyper<M: TargetModel + ?Sized>(&mut self, model: &M) -> Result<()> {
        if self.config.update_alpha && self.prior == Prior::Gaussian {
            self.hyper.alpha = bound::update_alpha(&self.post)?;
        }
        if self.config.update_beta && self.has_noise {
            let reg = model.regressor().expect("checked at construction");
            self.hyper.beta = Some(bound::update_beta(reg, &self.post, &self.train)?);
        }
        Ok(())
    }

    /// Record the new bound; `true` when the loop should stop.
    fn finish_iteration<M: TargetModel + ?Sized>(&mut self, model: &M) -> Result<bool> {
        let current = self.record(model)?;
        let change = current - self.previous;
        if change < -1e-9 * (1.0 + self.previous.abs()) {
            self.nonmonotone += 1;
        }
        self.previous = current;
        Ok(change.abs() < self.config.tolerance)
    }

    fn report(self, converged: bool) -> FitReport {
        FitReport {
            posterior: self.post,
            hyper: self.hyper,
            trace: self.trace,
            converged,
            iterations: self.iteration,
            nonmonotone_steps: self.nonmonotone,
        }
    }
}

/// Fit `q(w) = N(mu, L L^T)` to the posterior of `model`.
pub fn fit<M: TargetModel + ?Sized>(model: &M, config: &FitConfig, seed: u64) -> Result<FitReport> {
    let mut fitter = Fitter::new(model, config, seed)?;
    while fitter.iteration < config.max_iter {
        fitter.iteration += 1;
        fitter.optimise_mu(model)?;
        fitter.optimise_l(model)?;
        fitter.update_hyper(model)?;
        if fitter.finish_iteration(model)? {
            return Ok(fitter.report(true));
        }
    }
    Ok(fitter.report(false))
}

/// As [`fit`], additionally tuning the model's own parameters by SCG on the
/// bound after each pair of variational steps. The model is left at the
/// final parameter values.
pub fn fit_tunable<M: TunableModel + ?Sized>(
    model: &mut M,
    config: &FitConfig,
    seed: u64,
) -> Result<FitReport> {
    let mut fitter = Fitter::new(&*model, config, seed)?;
    while fitter.iteration < config.max_iter {
        fitter.iteration += 1;
        fitter.optimise_mu(&*model)?;
        fitter.optimise_l(&*model)?;
        fitter.optimise_params(model)?;
        fitter.update_hyper(&*model)?;
        if fitter.finish_iteration(&*model)? {
            return Ok(fitter.report(true));
        }
    }
    Ok(fitter.report(false))
}

struct LogLikObjective<'a, M: ?Sized> {
    model: &'a M,
    hyper: &'a Hyperparameters,
}

impl<M: TargetModel + ?Sized> Objective for LogLikObjective<'_, M> {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.model.log_lik(x, self.hyper)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.model.grad_log_lik(x, self.hyper)
    }
}

struct MeanObjective<'a, M: ?Sized> {
    model: &'a M,
    post: &'a VariationalPosterior,
    hyper: &'a Hyperparameters,
    samples: &'a SampleSet,
}

impl<M: TargetModel + ?Sized> MeanObjective<'_, M> {
    fn at(&self, x: &DVector<f64>) -> VariationalPosterior {
        let mut p = self.post.clone();
        p.set_mu(x.clone()).expect("same length");
        p
    }

    fn eval(&self, x: &DVector<f64>, want: Want) -> Option<bound::BoundEval> {
        bound::evaluate(self.model, &self.at(x), self.hyper, self.samples, want).ok()
    }
}

impl<M: TargetModel + ?Sized> Objective for MeanObjective<'_, M> {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.eval(x, Want::default()).map_or(f64::NAN, |e| e.value)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.eval(x, Want { mu: true, l: false })
            .and_then(|e| e.grad_mu)
            .unwrap_or_else(|| DVector::from_element(x.len(), f64::NAN))
    }
    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        match self.eval(x, Want { mu: true, l: false }) {
            Some(e) => (e.value, e.grad_mu.expect("requested")),
            None => (f64::NAN, DVector::from_element(x.len(), f64::NAN)),
        }
    }
}

/// Bound over the packed free entries of `L`. Factors whose determinant is
/// singular or has changed sign are reported as non-finite, which the
/// optimizer rejects.
struct FactorObjective<'a, M: ?Sized> {
    model: &'a M,
    post: &'a VariationalPosterior,
    hyper: &'a Hyperparameters,
    samples: &'a SampleSet,
    sign: f64,
}

impl<M: TargetModel + ?Sized> FactorObjective<'_, M> {
    fn at(&self, x: &DVector<f64>) -> Option<VariationalPosterior> {
        let l: DMatrix<f64> = self.post.unpack_l(x).ok()?;
        let mut p = self.post.clone();
        p.set_l_unchecked(l);
        match p.log_abs_det_l() {
            Ok((_, s)) if s == self.sign => Some(p),
            _ => None,
        }
    }

    fn eval(&self, x: &DVector<f64>, want: Want) -> Option<bound::BoundEval> {
        let p = self.at(x)?;
        bound::evaluate(self.model, &p, self.hyper, self.samples, want).ok()
    }
}

impl<M: TargetModel + ?Sized> Objective for FactorObjective<'_, M> {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.eval(x, Want::default()).map_or(f64::NAN, |e| e.value)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.eval(x, Want { mu: false, l: true }).and_then(|e| e.grad_l) {
            Some(g) => crate::posterior::pack_blocks(&g, self.post.blocks()),
            None => DVector::from_element(x.len(), f64::NAN),
        }
    }
    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        match self.eval(x, Want { mu: false, l: true }) {
            Some(e) => (
                e.value,
                crate::posterior::pack_blocks(&e.grad_l.expect("requested"), self.post.blocks()),
            ),
            None => (f64::NAN, DVector::from_element(x.len(), f64::NAN)),
        }
    }
}

/// Expected log-likelihood over fixed draws as a function of the model's
/// tunable parameters; the KL term does not depend on them.
struct ParamObjective<'a, M: ?Sized> {
    model: &'a M,
    draws: &'a [DVector<f64>],
    hyper: &'a Hyperparameters,
}

impl<M: TunableModel + ?Sized> Objective for ParamObjective<'_, M> {
    fn value(&self, theta: &DVector<f64>) -> f64 {
        let s = self.draws.len() as f64;
        self.draws
            .iter()
            .map(|w| self.model.log_lik_at(theta, w, self.hyper))
            .sum::<f64>()
            / s
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let s = self.draws.len() as f64;
        let mut g = DVector::zeros(theta.len());
        for w in self.draws {
            g += self.model.grad_log_lik_params_at(theta, w, self.hyper);
        }
        g / s
    }
    fn value_and_gradient(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let s = self.draws.len() as f64;
        let mut value = 0.0;
        let mut g = DVector::zeros(theta.len());
        for w in self.draws {
            let (v, gw) = self.model.log_lik_and_grad_params_at(theta, w, self.hyper);
            value += v;
            g += gw;
        }
        (value / s, g / s)
    }
}

/// Outcome of comparing the training and holdout bound traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Overfitting,
}

/// Default fraction of the holdout bound's range that counts as a decline.
pub const DEFAULT_OVERFIT_MARGIN: f64 = 0.01;

/// Minimum number of trace rows the monitor accepts.
pub const MIN_MONITOR_ROWS: usize = 10;

/// Flags overfitting to the training draws: the holdout bound has fallen
/// from its running maximum by more than `margin` times its range over the
/// trace while the training bound kept increasing past that point.
pub fn monitor_generalisation(trace: &[TraceRow], margin: f64) -> Result<Verdict> {
    let holdout: Vec<f64> = trace.iter().filter_map(|r| r.holdout_bound).collect();
    if trace.len() < MIN_MONITOR_ROWS || holdout.len() != trace.len() {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_MONITOR_ROWS} rows with holdout bounds, have {}",
            holdout.len()
        )));
    }
    let hi = holdout.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = holdout.iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = margin * (hi - lo);

    let mut best = 0usize;
    for (t, row) in trace.iter().enumerate() {
        if holdout[t] > holdout[best] {
            best = t;
            continue;
        }
        let drop = holdout[best] - holdout[t];
        if drop > threshold && threshold > 0.0 && row.train_bound > trace[best].train_bound {
            return Ok(Verdict::Overfitting);
        }
    }
    Ok(Verdict::Ok)
}
