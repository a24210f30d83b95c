//! Orchestration: run configuration, the two pre-training stages, Pareto
//! (or fixed-weight) training with model selection, evaluation reports, and
//! the trading-simulation wiring.

mod config;
mod manifest;

pub use config::{parse_config_text, RunConfig};
pub use manifest::write_manifest;

use rand::seq::SliceRandom;

use crate::data::{compute_labels, CallRecord, LabeledExample, Split, AUDIO_DIM, HORIZONS};
use crate::encoder::{EncodedDoc, Model, Vocab};
use crate::error::{Error, Result};
use crate::metrics::{f1, mcc, mse, ConfusionMatrix};
use crate::numerals::{
    make_magnitude_instances, make_ncc_instances, ncc_bce_loss, probe_nll_loss, MagnitudeInstance,
    NccInstance, NumeralCategory,
};
use crate::pareto::{
    make_preferences, run_subproblem, InitialSearch, ParetoRun, ParetoTrainConfig,
    TrajectoryPoint, TwoTaskObjective,
};
use crate::rng::substream;
use crate::tensor::{Adam, Tape, Tensor};
use crate::trading::{baseline, sharpe, simulate, EventPrices, Strategy, TradeLedger};
use crate::text::tokenize;

// ── shared helpers ───────────────────────────────────────────────────

fn tokenized_sentences(records: &[CallRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .flat_map(|r| r.sentences.iter().map(|s| tokenize(&s.text)))
        .collect()
}

/// Per-feature mean/std of the audio vectors over a record set.
pub fn fit_audio_norm(records: &[CallRecord]) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; AUDIO_DIM];
    let mut count = 0usize;
    for r in records {
        for s in &r.sentences {
            for (m, &a) in mean.iter_mut().zip(&s.audio) {
                *m += a;
            }
            count += 1;
        }
    }
    if count == 0 {
        return (vec![0.0; AUDIO_DIM], vec![1.0; AUDIO_DIM]);
    }
    for m in mean.iter_mut() {
        *m /= count as f64;
    }
    let mut var = vec![0.0; AUDIO_DIM];
    for r in records {
        for s in &r.sentences {
            for (v, (&a, &m)) in var.iter_mut().zip(s.audio.iter().zip(&mean)) {
                *v += (a - m) * (a - m);
            }
        }
    }
    let std = var
        .into_iter()
        .map(|v| (v / count as f64).sqrt().max(1e-8))
        .collect();
    (mean, std)
}

// ── NCC pre-training ─────────────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct NccReport {
    pub train_instances: usize,
    pub valid_instances: usize,
    pub lrap_untrained: f64,
    pub roc_auc_untrained: Option<f64>,
    pub lrap: f64,
    pub roc_auc: Option<f64>,
}

impl NccReport {
    pub fn render(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or("absent".to_string(), |x| x.to_string());
        format!(
            "task=ncc\ntrain_instances={}\nvalid_instances={}\nlrap_untrained={}\nroc_auc_untrained={}\nlrap={}\nroc_auc={}\n",
            self.train_instances,
            self.valid_instances,
            self.lrap_untrained,
            fmt_opt(self.roc_auc_untrained),
            self.lrap,
            fmt_opt(self.roc_auc),
        )
    }
}

fn usable_ncc(instances: Vec<NccInstance>, model: &Model) -> Vec<NccInstance> {
    // The mask must survive truncation to the model's max sentence length.
    instances
        .into_iter()
        .filter(|i| i.mask_index + 1 < model.cfg.max_sentence_len)
        .collect()
}

fn ncc_scores(model: &Model, instances: &[NccInstance]) -> Result<(Vec<Vec<f64>>, Vec<Vec<bool>>)> {
    let mut scores = Vec::with_capacity(instances.len());
    let mut labels = Vec::with_capacity(instances.len());
    for inst in instances {
        let mut tape = Tape::new();
        let probs = model.classify_ncc(&mut tape, inst)?;
        scores.push(tape.value(probs).data.clone());
        labels.push(inst.label_bits().to_vec());
    }
    Ok((scores, labels))
}

fn eval_ncc(model: &Model, instances: &[NccInstance]) -> Result<(f64, Option<f64>)> {
    let (scores, labels) = ncc_scores(model, instances)?;
    let l = crate::metrics::lrap(&scores, &labels)?;
    let auc = crate::metrics::roc_auc_macro(&scores, &labels)?;
    Ok((l, auc))
}

/// Build a fresh model from the training split's vocabulary and train the
/// numeral-category head (and encoder) on masked instances.
pub fn pretrain_ncc(split: &Split, cfg: &RunConfig) -> Result<(Model, NccReport)> {
    cfg.validate()?;
    let train_sentences: Vec<Vec<String>> = tokenized_sentences(&split.train);
    let vocab = Vocab::build(&train_sentences);
    let mut model = Model::new(cfg.encoder_config(), vocab, cfg.seed)?;
    let (mean, std) = fit_audio_norm(&split.train);
    model.set_audio_norm(mean, std)?;

    let train_insts = usable_ncc(make_ncc_instances(&train_sentences), &model);
    let valid_insts = usable_ncc(
        make_ncc_instances(&tokenized_sentences(&split.valid)),
        &model,
    );
    if train_insts.is_empty() {
        return Err(Error::contract("no NCC instances in the training split".to_string()));
    }
    let eval_set = if valid_insts.is_empty() { &train_insts } else { &valid_insts };
    let (lrap_untrained, roc_auc_untrained) = eval_ncc(&model, eval_set)?;

    let mut order: Vec<usize> = (0..train_insts.len()).collect();
    let mut rng = substream(cfg.seed, 101);
    let mut adam = Adam::new(model.store.trainable_len());
    let mut lr = cfg.pretrain_lr;
    for _epoch in 0..cfg.pretrain_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.pretrain_batch) {
            let mut tape = Tape::new();
            let mut total: Option<crate::tensor::NodeId> = None;
            for &i in chunk {
                let inst = &train_insts[i];
                let logits = model.ncc_logits(&mut tape, inst)?;
                let loss = ncc_bce_loss(&mut tape, logits, &inst.label_bits())?;
                total = Some(match total {
                    None => loss,
                    Some(t) => tape.add(t, loss)?,
                });
            }
            let total = total.expect("nonempty chunk");
            let loss = tape.mul_scalar(total, 1.0 / chunk.len() as f64);
            tape.backward(loss)?;
            let grads = tape.grads_flat(&model.store);
            let mut params = model.store.flatten();
            adam.step(&mut params, &grads, lr)?;
            model.store.load_flat(&params)?;
        }
        lr *= cfg.lr_decay;
    }

    let (lrap, roc_auc) = eval_ncc(&model, eval_set)?;
    let report = NccReport {
        train_instances: train_insts.len(),
        valid_instances: valid_insts.len(),
        lrap_untrained,
        roc_auc_untrained,
        lrap,
        roc_auc,
    };
    Ok((model, report))
}

// ── MC pre-training ──────────────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct McReport {
    pub train_instances: usize,
    pub valid_instances: usize,
    pub monetary: Option<f64>,
    pub temporal: Option<f64>,
    pub percentage: Option<f64>,
    pub all: Option<f64>,
}

impl McReport {
    pub fn render(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("absent".to_string(), |x| x.to_string());
        format!(
            "task=mc\ntrain_instances={}\nvalid_instances={}\naccuracy_monetary={}\naccuracy_temporal={}\naccuracy_percentage={}\naccuracy_all={}\n",
            self.train_instances,
            self.valid_instances,
            fmt(self.monetary),
            fmt(self.temporal),
            fmt(self.percentage),
            fmt(self.all),
        )
    }
}

fn probe_predicts(model: &Model, inst: &MagnitudeInstance) -> Result<usize> {
    let mut tape = Tape::new();
    let logits = model.probe_logits(&mut tape, &inst.surfaces)?;
    let data = &tape.value(logits).data;
    Ok((0..5)
        .max_by(|&a, &b| data[a].partial_cmp(&data[b]).unwrap())
        .expect("five logits"))
}

/// Freeze the final token block, then train the BiLSTM probe and the token
/// embeddings on list-maximum prediction. Accuracy is reported per category
/// with `other` folded into the All column only.
pub fn pretrain_mc(model: &mut Model, split: &Split, cfg: &RunConfig) -> Result<McReport> {
    model.freeze_final_token_block();
    let train_insts = make_magnitude_instances(&tokenized_sentences(&split.train), cfg.seed);
    let valid_insts =
        make_magnitude_instances(&tokenized_sentences(&split.valid), cfg.seed.wrapping_add(1));
    if train_insts.is_empty() {
        return Err(Error::contract(
            "no magnitude-comparison instances in the training split".to_string(),
        ));
    }
    let eval_set = if valid_insts.is_empty() { &train_insts } else { &valid_insts };

    let mut order: Vec<usize> = (0..train_insts.len()).collect();
    let mut rng = substream(cfg.seed, 102);
    let mut adam = Adam::new(model.store.trainable_len());
    let mut lr = cfg.pretrain_lr;
    for _epoch in 0..cfg.pretrain_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.pretrain_batch) {
            let mut tape = Tape::new();
            let mut total: Option<crate::tensor::NodeId> = None;
            for &i in chunk {
                let inst = &train_insts[i];
                let logits = model.probe_logits(&mut tape, &inst.surfaces)?;
                let loss = probe_nll_loss(&mut tape, logits, inst.label)?;
                total = Some(match total {
                    None => loss,
                    Some(t) => tape.add(t, loss)?,
                });
            }
            let total = total.expect("nonempty chunk");
            let loss = tape.mul_scalar(total, 1.0 / chunk.len() as f64);
            tape.backward(loss)?;
            let grads = tape.grads_flat(&model.store);
            let mut params = model.store.flatten();
            adam.step(&mut params, &grads, lr)?;
            model.store.load_flat(&params)?;
        }
        lr *= cfg.lr_decay;
    }

    let mut hits = [0usize; 4];
    let mut totals = [0usize; 4];
    let mut all_hits = 0usize;
    for inst in eval_set {
        let pred = probe_predicts(model, inst)?;
        let correct = pred == inst.label;
        let c = inst.category.index();
        totals[c] += 1;
        if correct {
            hits[c] += 1;
            all_hits += 1;
        }
    }
    let acc = |c: NumeralCategory| {
        let i = c.index();
        if totals[i] == 0 {
            None
        } else {
            Some(hits[i] as f64 / totals[i] as f64)
        }
    };
    Ok(McReport {
        train_instances: train_insts.len(),
        valid_instances: valid_insts.len(),
        monetary: acc(NumeralCategory::Monetary),
        temporal: acc(NumeralCategory::Temporal),
        percentage: acc(NumeralCategory::Percentage),
        all: if eval_set.is_empty() {
            None
        } else {
            Some(all_hits as f64 / eval_set.len() as f64)
        },
    })
}

// ── main training ────────────────────────────────────────────────────

/// The two-task objective over the model: task 1 is the n-day return
/// regression, task 2 the n-day volatility regression, mean squared error
/// over the current mini-batch. `losses` evaluates a fixed probe batch so
/// feasibility tests do not jitter with the batch schedule.
struct ModelObjective<'a> {
    model: &'a mut Model,
    docs: &'a [EncodedDoc],
    targets: &'a [(f64, f64)],
    order: Vec<usize>,
    cursor: usize,
    batch: usize,
    probe: Vec<usize>,
}

impl<'a> ModelObjective<'a> {
    fn new(
        model: &'a mut Model,
        docs: &'a [EncodedDoc],
        targets: &'a [(f64, f64)],
        batch: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Self {
        let mut order: Vec<usize> = (0..docs.len()).collect();
        order.shuffle(rng);
        let probe: Vec<usize> = (0..docs.len().min(4 * batch)).collect();
        ModelObjective {
            model,
            docs,
            targets,
            order,
            cursor: 0,
            batch,
            probe,
        }
    }

    fn next_batch(&mut self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.batch);
        for _ in 0..self.batch.min(self.docs.len()) {
            out.push(self.order[self.cursor]);
            self.cursor = (self.cursor + 1) % self.order.len();
        }
        out
    }

    fn batch_losses(
        &mut self,
        theta: &[f64],
        indices: &[usize],
        with_grads: bool,
    ) -> Result<([f64; 2], [Vec<f64>; 2])> {
        self.model.store.load_flat(theta)?;
        let mut tape = Tape::new();
        let mut ret_acc: Option<crate::tensor::NodeId> = None;
        let mut vol_acc: Option<crate::tensor::NodeId> = None;
        for &i in indices {
            let (ret, vol) = self.model.forward_document(&mut tape, &self.docs[i])?;
            let (y_ret, y_vol) = self.targets[i];
            let yr = tape.constant(Tensor::from_vec(vec![1, 1], vec![y_ret])?);
            let yv = tape.constant(Tensor::from_vec(vec![1, 1], vec![y_vol])?);
            let dr = tape.sub(ret, yr)?;
            let dr2 = tape.mul(dr, dr)?;
            let dv = tape.sub(vol, yv)?;
            let dv2 = tape.mul(dv, dv)?;
            ret_acc = Some(match ret_acc {
                None => dr2,
                Some(t) => tape.add(t, dr2)?,
            });
            vol_acc = Some(match vol_acc {
                None => dv2,
                Some(t) => tape.add(t, dv2)?,
            });
        }
        let n = indices.len() as f64;
        let ra = ret_acc.expect("nonempty batch");
        let va = vol_acc.expect("nonempty batch");
        let l1_node = tape.mul_scalar(ra, 1.0 / n);
        let l1_node = tape.sum(l1_node);
        let l2_node = tape.mul_scalar(va, 1.0 / n);
        let l2_node = tape.sum(l2_node);
        let losses = [tape.value(l1_node).data[0], tape.value(l2_node).data[0]];
        if !with_grads {
            return Ok((losses, [Vec::new(), Vec::new()]));
        }
        tape.backward(l1_node)?;
        let g1 = tape.grads_flat(&self.model.store);
        tape.backward(l2_node)?;
        let g2 = tape.grads_flat(&self.model.store);
        Ok((losses, [g1, g2]))
    }
}

impl<'a> TwoTaskObjective for ModelObjective<'a> {
    fn dim(&self) -> usize {
        self.model.store.trainable_len()
    }

    fn losses(&mut self, theta: &[f64]) -> Result<[f64; 2]> {
        let probe = self.probe.clone();
        Ok(self.batch_losses(theta, &probe, false)?.0)
    }

    fn losses_and_grads(&mut self, theta: &[f64]) -> Result<([f64; 2], [Vec<f64>; 2])> {
        let batch = self.next_batch();
        self.batch_losses(theta, &batch, true)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    /// Pareto decomposition on; off means fixed alpha = (0.5, 0.5).
    pub pareto: bool,
    /// Zero the audio pathway.
    pub text_only: bool,
    /// Pre-trained model to start from; None builds a fresh one.
    pub base: Option<Model>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            pareto: true,
            text_only: false,
            base: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KRunReport {
    pub k: usize,
    pub feasible: bool,
    pub initial_iterations: usize,
    pub critical: bool,
    pub final_losses: [f64; 2],
    pub val_return_mse: f64,
    pub val_vol_mse: f64,
    pub trajectory: Vec<TrajectoryPoint>,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub runs: Vec<KRunReport>,
    pub chosen_k: usize,
}

fn labels_for(records: &[CallRecord]) -> Result<Vec<LabeledExample>> {
    records.iter().map(compute_labels).collect()
}

fn targets_at(labels: &[LabeledExample], slot: usize) -> Vec<(f64, f64)> {
    labels
        .iter()
        .map(|l| (l.returns[slot], l.vols[slot]))
        .collect()
}

/// Train on the chronological split. With Pareto enabled this runs one
/// constrained subproblem per preference vector and keeps the solution with
/// the best validation return MSE; otherwise a single run with fixed equal
/// weights.
pub fn train(split: &Split, cfg: &RunConfig, opts: TrainOptions) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    let slot = cfg.horizon_slot()?;
    if split.train.is_empty() || split.valid.is_empty() {
        return Err(Error::contract("training needs nonempty train and valid splits".to_string()));
    }

    let mut base = match opts.base {
        Some(m) => m,
        None => {
            let sentences = tokenized_sentences(&split.train);
            let vocab = Vocab::build(&sentences);
            let mut m = Model::new(cfg.encoder_config(), vocab, cfg.seed)?;
            let (mean, std) = fit_audio_norm(&split.train);
            m.set_audio_norm(mean, std)?;
            m
        }
    };
    base.audio_enabled = !opts.text_only;

    let train_labels = labels_for(&split.train)?;
    let train_targets = targets_at(&train_labels, slot);
    let ret_mean = train_targets.iter().map(|t| t.0).sum::<f64>() / train_targets.len() as f64;
    let vol_mean = train_targets.iter().map(|t| t.1).sum::<f64>() / train_targets.len() as f64;
    base.init_head_biases(ret_mean, vol_mean);

    let docs: Vec<EncodedDoc> = split.train.iter().map(|r| base.encode_record(r)).collect();
    let steps_per_epoch = split.train.len().div_ceil(cfg.batch).max(1);
    let pareto_cfg = ParetoTrainConfig {
        epochs: cfg.epochs,
        steps_per_epoch,
        lr: cfg.lr,
        lr_decay: cfg.lr_decay,
        eps_active: cfg.eps_active,
        max_active: cfg.max_active,
        ..ParetoTrainConfig::default()
    };

    let valid_labels = labels_for(&split.valid)?;

    let run_eval = |model: &Model| -> Result<(f64, f64)> {
        let preds = model_predictions(model, &split.valid)?;
        let rets: Vec<f64> = preds.iter().map(|p| p.0).collect();
        let vols: Vec<f64> = preds.iter().map(|p| p.1).collect();
        let y_ret: Vec<f64> = valid_labels.iter().map(|l| l.returns[slot]).collect();
        let y_vol: Vec<f64> = valid_labels.iter().map(|l| l.vols[slot]).collect();
        Ok((mse(&rets, &y_ret)?, mse(&vols, &y_vol)?))
    };

    let mut runs = Vec::new();
    let mut candidates: Vec<(usize, Vec<f64>)> = Vec::new();

    if opts.pareto {
        let prefs = make_preferences(cfg.k_preferences)?;
        let theta0 = base.store.flatten();
        for k in 0..prefs.len() {
            let mut model_k = base.clone();
            let mut rng = substream(cfg.seed, 200 + k as u64);
            let run: ParetoRun = {
                let mut obj = ModelObjective::new(&mut model_k, &docs, &train_targets, cfg.batch, &mut rng);
                run_subproblem(
                    &mut obj,
                    &theta0,
                    k,
                    &prefs,
                    cfg.search_eta,
                    cfg.search_iters,
                    &pareto_cfg,
                )?
            };
            model_k.store.load_flat(&run.theta)?;
            let (val_ret, val_vol) = run_eval(&model_k)?;
            runs.push(KRunReport {
                k,
                feasible: run.initial.feasible,
                initial_iterations: run.initial.iterations,
                critical: run.critical,
                final_losses: run.final_losses,
                val_return_mse: val_ret,
                val_vol_mse: val_vol,
                trajectory: run.trajectory,
            });
            candidates.push((k, run.theta));
        }
        if runs.iter().all(|r| !r.feasible) {
            let detail: Vec<String> = runs
                .iter()
                .map(|r| format!("k={}: infeasible after {} iterations", r.k, r.initial_iterations))
                .collect();
            return Err(Error::contract(format!(
                "no feasible initial solution for any sub-region ({})",
                detail.join("; ")
            )));
        }
    } else {
        // Fixed equal weights: single run, alpha pinned at (0.5, 0.5).
        let mut model_k = base.clone();
        let mut rng = substream(cfg.seed, 300);
        let run = {
            let mut obj = ModelObjective::new(&mut model_k, &docs, &train_targets, cfg.batch, &mut rng);
            fixed_weight_run(&mut obj, &base.store.flatten(), &pareto_cfg)?
        };
        model_k.store.load_flat(&run.theta)?;
        let (val_ret, val_vol) = run_eval(&model_k)?;
        runs.push(KRunReport {
            k: 0,
            feasible: true,
            initial_iterations: 0,
            critical: run.critical,
            final_losses: run.final_losses,
            val_return_mse: val_ret,
            val_vol_mse: val_vol,
            trajectory: run.trajectory,
        });
        candidates.push((0, run.theta));
    }

    // Deployed model: best validation main-task (return) MSE.
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.val_return_mse.partial_cmp(&b.1.val_return_mse).unwrap())
        .map(|(i, _)| i)
        .expect("at least one run");
    let chosen_k = runs[best].k;
    let mut final_model = base;
    final_model.store.load_flat(&candidates[best].1)?;
    Ok((final_model, TrainReport { runs, chosen_k }))
}

/// Ablation path: Adam on 0.5 L1 + 0.5 L2 with the same schedule, losses
/// still normalized by their starting values.
fn fixed_weight_run<O: TwoTaskObjective>(
    obj: &mut O,
    theta0: &[f64],
    cfg: &ParetoTrainConfig,
) -> Result<ParetoRun> {
    let l0 = obj.losses(theta0)?;
    let normalizer = [l0[0].max(1e-12), l0[1].max(1e-12)];
    let mut theta = theta0.to_vec();
    let mut adam = crate::tensor::AdamState::new(theta.len());
    let mut lr = cfg.lr;
    let mut trajectory = Vec::new();
    let mut step = 0usize;
    for _epoch in 0..cfg.epochs {
        for _ in 0..cfg.steps_per_epoch {
            let (losses, grads) = obj.losses_and_grads(&theta)?;
            if losses.iter().any(|l| !l.is_finite()) {
                return Err(Error::Numeric {
                    step,
                    detail: format!("non-finite losses {losses:?} at lr {lr}"),
                });
            }
            // Same unit-normalized gradient basis as the Pareto path, with
            // the weights pinned at one half each.
            let unit = |g: &[f64]| -> Vec<f64> {
                let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n <= 1e-300 {
                    vec![0.0; g.len()]
                } else {
                    g.iter().map(|x| x / n).collect()
                }
            };
            let (u1, u2) = (unit(&grads[0]), unit(&grads[1]));
            let combined: Vec<f64> = u1
                .iter()
                .zip(&u2)
                .map(|(&a, &b)| 0.5 * a + 0.5 * b)
                .collect();
            crate::tensor::adam_step(&mut theta, &combined, &mut adam, lr, cfg.betas, cfg.eps)?;
            trajectory.push(TrajectoryPoint {
                step,
                l1: losses[0],
                l2: losses[1],
                alpha1: 0.5,
                alpha2: 0.5,
                k: 0,
            });
            step += 1;
        }
        lr *= cfg.lr_decay;
    }
    let final_losses = obj.losses(&theta)?;
    Ok(ParetoRun {
        k: 0,
        theta,
        trajectory,
        final_losses,
        normalizer,
        initial: InitialSearch {
            theta: theta0.to_vec(),
            feasible: true,
            iterations: 0,
        },
        critical: false,
    })
}

/// Convenience wrapper running the full staged pipeline on a raw corpus.
#[derive(Clone, Copy, Debug)]
pub struct VariantOptions {
    pub pretrain: bool,
    pub pareto: bool,
    pub text_only: bool,
}

pub fn train_pipeline(
    records: Vec<CallRecord>,
    cfg: &RunConfig,
    v: VariantOptions,
) -> Result<(Model, TrainReport)> {
    let split = crate::data::split_chronological(records)?;
    let base = if v.pretrain {
        let (mut model, _ncc) = pretrain_ncc(&split, cfg)?;
        pretrain_mc(&mut model, &split, cfg)?;
        Some(model)
    } else {
        None
    };
    train(
        &split,
        cfg,
        TrainOptions {
            pareto: v.pareto,
            text_only: v.text_only,
            base,
        },
    )
}

// ── evaluation ───────────────────────────────────────────────────────

/// One (return, volatility) prediction per record.
pub fn model_predictions(model: &Model, records: &[CallRecord]) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let doc = model.encode_record(rec);
        let mut tape = Tape::new();
        let (ret, vol) = model.forward_document(&mut tape, &doc)?;
        out.push((tape.value(ret).data[0], tape.value(vol).data[0]));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HorizonMetrics {
    pub horizon: usize,
    pub mcc: f64,
    pub f1: f64,
    pub vol_mse: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub horizons: Vec<HorizonMetrics>,
}

impl EvalReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for h in &self.horizons {
            out.push_str(&format!(
                "horizon={}\nmcc_{}={}\nf1_{}={}\nvol_mse_{}={}\ncount_{}={}\n",
                h.horizon, h.horizon, h.mcc, h.horizon, h.f1, h.horizon, h.vol_mse, h.horizon, h.count
            ));
        }
        out
    }

    pub fn metric(&self, horizon: usize) -> Option<&HorizonMetrics> {
        self.horizons.iter().find(|h| h.horizon == horizon)
    }
}

/// Score prediction pairs against labels for every horizon. Movement calls
/// come from the sign of the predicted return; the volatility prediction is
/// compared to each horizon's realized value.
pub fn evaluate_predictions(
    predictions: &[(f64, f64)],
    labels: &[LabeledExample],
) -> Result<EvalReport> {
    if predictions.len() != labels.len() || predictions.is_empty() {
        return Err(Error::contract(format!(
            "{} predictions for {} labeled examples",
            predictions.len(),
            labels.len()
        )));
    }
    let mut horizons = Vec::with_capacity(HORIZONS.len());
    for (slot, &n) in HORIZONS.iter().enumerate() {
        let mut cm = ConfusionMatrix::default();
        for (p, l) in predictions.iter().zip(labels) {
            cm.observe(Model::movement(p.0), l.movements[slot]);
        }
        let vols_pred: Vec<f64> = predictions.iter().map(|p| p.1).collect();
        let vols_true: Vec<f64> = labels.iter().map(|l| l.vols[slot]).collect();
        horizons.push(HorizonMetrics {
            horizon: n,
            mcc: mcc(&cm),
            f1: f1(&cm),
            vol_mse: mse(&vols_pred, &vols_true)?,
            count: predictions.len(),
        });
    }
    Ok(EvalReport { horizons })
}

pub fn evaluate(model: &Model, records: &[CallRecord]) -> Result<EvalReport> {
    let preds = model_predictions(model, records)?;
    let labels = labels_for(records)?;
    evaluate_predictions(&preds, &labels)
}

// ── trading simulation ───────────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct SimReport {
    pub profit: f64,
    pub sharpe: Option<f64>,
    pub trades: usize,
    pub skipped: usize,
}

impl SimReport {
    pub fn render(&self) -> String {
        format!(
            "profit={}\nsharpe_ratio={}\ntrades={}\nskipped={}\n",
            self.profit,
            self.sharpe.map_or("absent".to_string(), |s| s.to_string()),
            self.trades,
            self.skipped,
        )
    }
}

/// Entry/exit prices per event: enter on the event day, exit tau days later.
pub fn build_events(records: &[CallRecord], tau: i64) -> Vec<EventPrices> {
    records
        .iter()
        .map(|r| EventPrices {
            ticker: r.ticker.clone(),
            entry: r.price_at_offset(0),
            exit: r.price_at_offset(tau),
        })
        .collect()
}

fn summarize(ledger: &TradeLedger, risk_free_rate: f64) -> SimReport {
    SimReport {
        profit: ledger.cumulative_profit(),
        sharpe: sharpe(ledger, risk_free_rate).ok(),
        trades: ledger.trades.len(),
        skipped: ledger.skipped.len(),
    }
}

pub fn simulate_with_model(
    model: &Model,
    records: &[CallRecord],
    tau: i64,
    risk_free_rate: f64,
) -> Result<(TradeLedger, SimReport)> {
    let preds = model_predictions(model, records)?;
    let calls: Vec<bool> = preds.iter().map(|p| Model::movement(p.0)).collect();
    let events = build_events(records, tau);
    let ledger = simulate(&calls, &events, tau)?;
    let report = summarize(&ledger, risk_free_rate);
    Ok((ledger, report))
}

pub fn simulate_strategy(
    strategy: Strategy,
    records: &[CallRecord],
    tau: i64,
    risk_free_rate: f64,
) -> (TradeLedger, SimReport) {
    let events = build_events(records, tau);
    let ledger = baseline(strategy, &events, tau);
    let report = summarize(&ledger, risk_free_rate);
    (ledger, report)
}

/// Serialize per-k trajectories as line-delimited JSON records.
pub fn render_trajectories(report: &TrainReport) -> Vec<(String, String)> {
    report
        .runs
        .iter()
        .map(|run| {
            let mut body = String::new();
            for p in &run.trajectory {
                body.push_str(&serde_json::to_string(p).expect("trajectory row serializes"));
                body.push('\n');
            }
            (format!("trajectory_k{}.jsonl", run.k), body)
        })
        .collect()
}

/// Corpus summary for gen-data: counts per numeral category.
pub fn corpus_summary(records: &[CallRecord]) -> String {
    let mut counts = [0usize; 4];
    let mut spans = 0usize;
    let mut sentences = 0usize;
    for r in records {
        for s in &r.sentences {
            sentences += 1;
            for span in crate::numerals::detect_numerals(&tokenize(&s.text)) {
                spans += 1;
                for c in &span.categories {
                    counts[c.index()] += 1;
                }
            }
        }
    }
    format!(
        "calls={}\nsentences={sentences}\nnumerals={spans}\nnumerals_monetary={}\nnumerals_temporal={}\nnumerals_percentage={}\nnumerals_other={}\n",
        records.len(),
        counts[0],
        counts[1],
        counts[2],
        counts[3],
    )
}
