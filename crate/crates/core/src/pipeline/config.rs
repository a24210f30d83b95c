//! Run configuration: defaults, validation, and the flat key=value config
//! file format (CLI flags override file values).

use crate::data::HORIZONS;
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub d_t: usize,
    pub d_s: usize,
    pub token_blocks: usize,
    pub sentence_blocks: usize,
    pub heads: usize,
    pub max_sentences: usize,
    pub max_sentence_len: usize,
    pub ffn_mult: usize,
    pub probe_hidden: usize,
    /// Number of preference vectors (K).
    pub k_preferences: usize,
    /// Horizon (days) whose targets drive training.
    pub train_horizon: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Multiplied into the learning rate once per epoch.
    pub lr_decay: f64,
    pub pretrain_epochs: usize,
    pub pretrain_batch: usize,
    pub pretrain_lr: f64,
    /// Step size of the initial-solution search.
    pub search_eta: f64,
    pub search_iters: usize,
    pub eps_active: f64,
    pub max_active: usize,
    pub risk_free_rate: f64,
    pub tau: i64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            d_t: 32,
            d_s: 32,
            token_blocks: 2,
            sentence_blocks: 2,
            heads: 2,
            max_sentences: 16,
            max_sentence_len: 32,
            ffn_mult: 2,
            probe_hidden: 8,
            k_preferences: 10,
            train_horizon: 3,
            epochs: 6,
            batch: 8,
            lr: 0.004,
            lr_decay: 0.95,
            pretrain_epochs: 2,
            pretrain_batch: 16,
            pretrain_lr: 0.003,
            search_eta: 0.02,
            search_iters: 150,
            eps_active: 1e-3,
            max_active: 5,
            risk_free_rate: 0.0,
            tau: 3,
        }
    }
}

impl RunConfig {
    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            d_t: self.d_t,
            d_s: self.d_s,
            token_blocks: self.token_blocks,
            sentence_blocks: self.sentence_blocks,
            heads: self.heads,
            max_sentences: self.max_sentences,
            max_sentence_len: self.max_sentence_len,
            ffn_mult: self.ffn_mult,
            probe_hidden: self.probe_hidden,
        }
    }

    pub fn horizon_slot(&self) -> Result<usize> {
        crate::data::horizon_slot(self.train_horizon).ok_or_else(|| {
            Error::config(format!(
                "train_horizon {} not in {HORIZONS:?}",
                self.train_horizon
            ))
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder_config().validate()?;
        self.horizon_slot()?;
        if self.k_preferences < 2 {
            return Err(Error::config(format!(
                "k_preferences must be >= 2, got {}",
                self.k_preferences
            )));
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("batch", self.batch),
            ("pretrain_epochs", self.pretrain_epochs),
            ("pretrain_batch", self.pretrain_batch),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if !(self.lr > 0.0) || !(self.pretrain_lr > 0.0) {
            return Err(Error::config("learning rates must be positive".to_string()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::config(format!("lr_decay must be in (0, 1], got {}", self.lr_decay)));
        }
        if self.tau <= 0 {
            return Err(Error::config(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    /// Apply one key=value setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: String| Error::config(format!("config key {key}: {e}"));
        macro_rules! parse {
            () => {
                value.trim().parse().map_err(|e| bad(format!("{e}")))?
            };
        }
        match key.trim() {
            "seed" => self.seed = parse!(),
            "d_t" => self.d_t = parse!(),
            "d_s" => self.d_s = parse!(),
            "token_blocks" => self.token_blocks = parse!(),
            "sentence_blocks" => self.sentence_blocks = parse!(),
            "heads" => self.heads = parse!(),
            "max_sentences" => self.max_sentences = parse!(),
            "max_sentence_len" => self.max_sentence_len = parse!(),
            "ffn_mult" => self.ffn_mult = parse!(),
            "probe_hidden" => self.probe_hidden = parse!(),
            "k_preferences" => self.k_preferences = parse!(),
            "train_horizon" => self.train_horizon = parse!(),
            "epochs" => self.epochs = parse!(),
            "batch" => self.batch = parse!(),
            "lr" => self.lr = parse!(),
            "lr_decay" => self.lr_decay = parse!(),
            "pretrain_epochs" => self.pretrain_epochs = parse!(),
            "pretrain_batch" => self.pretrain_batch = parse!(),
            "pretrain_lr" => self.pretrain_lr = parse!(),
            "search_eta" => self.search_eta = parse!(),
            "search_iters" => self.search_iters = parse!(),
            "eps_active" => self.eps_active = parse!(),
            "max_active" => self.max_active = parse!(),
            "risk_free_rate" => self.risk_free_rate = parse!(),
            "tau" => self.tau = parse!(),
            other => return Err(Error::config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }
}

/// Parse the flat key=value format: one setting per line, `#` comments and
/// blank lines ignored.
pub fn parse_config_text(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: i + 1,
                detail: format!("expected key=value, got `{line}`"),
            });
        };
        cfg.set(k, v)?;
    }
    Ok(cfg)
}
