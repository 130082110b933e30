use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HnnError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub iterations: usize,
    /// Batches larger than the dataset use the whole dataset, in order.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            iterations: 10_000,
            batch_size: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        if !(a.lr > 0.0) || !a.lr.is_finite() {
            return Err(HnnError::InvalidArgument(format!("learning rate {} must be positive", a.lr)));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(HnnError::InvalidArgument(
                "adam needs beta1, beta2 in [0, 1) and eps > 0".into(),
            ));
        }
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(HnnError::InvalidArgument(
                "iterations and batch_size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Batch loss at every iteration, before that iteration's update.
    pub loss_history: Vec<f64>,
    /// Loss over the full dataset after the last update.
    pub final_train_loss: f64,
    pub max_batch_loss: f64,
    pub wall_time: f64,
    /// Samples skipped because the coordinate map was singular there.
    #[serde(default)]
    pub skipped_samples: usize,
}

/// A run that stopped early: the error, the parameters from before the
/// failing step, and the history up to it.
#[derive(Debug)]
pub struct TrainFailure<M> {
    pub error: HnnError,
    pub last_good: M,
    pub report: TrainReport,
}

impl<M> TrainFailure<M> {
    pub fn map<N>(self, f: impl FnOnce(M) -> N) -> TrainFailure<N> {
        TrainFailure {
            error: self.error,
            last_good: f(self.last_good),
            report: self.report,
        }
    }
}

impl<M> From<Box<TrainFailure<M>>> for HnnError {
    fn from(f: Box<TrainFailure<M>>) -> Self {
        f.error
    }
}

pub type TrainResult<M> = std::result::Result<(M, TrainReport), Box<TrainFailure<M>>>;

pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, n: usize) -> Self {
        Adam {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

/// Mini-batches drawn without replacement, reshuffled every epoch.
pub struct BatchSchedule {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    rng: ChaCha8Rng,
    epoch: usize,
    full: bool,
}

impl BatchSchedule {
    pub fn new(n: usize, batch: usize, seed: u64) -> Self {
        let full = batch >= n;
        let mut s = BatchSchedule {
            order: (0..n).collect(),
            pos: 0,
            batch: batch.min(n),
            rng: ChaCha8Rng::seed_from_u64(seed),
            epoch: 0,
            full,
        };
        if !full {
            s.order.shuffle(&mut s.rng);
        }
        s
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn next_batch(&mut self) -> &[usize] {
        if self.full {
            return &self.order;
        }
        if self.pos >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
            self.epoch += 1;
        }
        let start = self.pos;
        self.pos = (start + self.batch).min(self.order.len());
        &self.order[start..self.pos]
    }
}

/// Batch objective: parameters, sample indices, epoch → (loss, gradient).
pub(crate) fn optimize<F>(
    params: Vec<f64>,
    n_samples: usize,
    cfg: &TrainConfig,
    mut objective: F,
) -> TrainResult<Vec<f64>>
where
    F: FnMut(&[f64], &[usize], usize) -> Result<(f64, Vec<f64>)>,
{
    let start = Instant::now();
    let mut report = TrainReport {
        loss_history: Vec::with_capacity(cfg.iterations),
        final_train_loss: f64::NAN,
        max_batch_loss: 0.0,
        wall_time: 0.0,
        skipped_samples: 0,
    };
    let fail = |error: HnnError, last_good: Vec<f64>, mut report: TrainReport| {
        report.wall_time = start.elapsed().as_secs_f64();
        Box::new(TrainFailure {
            error,
            last_good,
            report,
        })
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(e, params, report));
    }
    if n_samples == 0 {
        return Err(fail(HnnError::InvalidArgument("empty dataset".into()), params, report));
    }
    let mut params = params;
    let mut adam = Adam::new(cfg.adam, params.len());
    let mut schedule = BatchSchedule::new(n_samples, cfg.batch_size, cfg.seed);
    for it in 0..cfg.iterations {
        let epoch = schedule.epoch();
        let batch = schedule.next_batch().to_vec();
        let (loss, grad) = match objective(&params, &batch, epoch) {
            Ok(v) => v,
            Err(e) => return Err(fail(at_iteration(e, it), params, report)),
        };
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            let e = HnnError::TrainingDivergence {
                iteration: it,
                reason: format!("non-finite loss or gradient (loss = {loss})"),
            };
            return Err(fail(e, params, report));
        }
        report.loss_history.push(loss);
        report.max_batch_loss = report.max_batch_loss.max(loss);
        let before = params.clone();
        adam.step(&mut params, &grad);
        if params.iter().any(|p| !p.is_finite()) {
            let e = HnnError::TrainingDivergence {
                iteration: it,
                reason: "non-finite parameters after update".into(),
            };
            return Err(fail(e, before, report));
        }
    }
    let all: Vec<usize> = (0..n_samples).collect();
    match objective(&params, &all, usize::MAX) {
        Ok((loss, _)) if loss.is_finite() => report.final_train_loss = loss,
        Ok((loss, _)) => {
            let e = HnnError::TrainingDivergence {
                iteration: cfg.iterations,
                reason: format!("non-finite final loss {loss}"),
            };
            return Err(fail(e, params, report));
        }
        Err(e) => return Err(fail(at_iteration(e, cfg.iterations), params, report)),
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((params, report))
}

fn at_iteration(e: HnnError, it: usize) -> HnnError {
    match e {
        HnnError::TrainingDivergence { reason, .. } => HnnError::TrainingDivergence { iteration: it, reason },
        other => other,
    }
}
