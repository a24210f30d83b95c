//! Hierarchical multi-modal encoder.
//!
//! Token ids plus learned positions feed a pre-norm transformer stack; the
//! sentence text vector is the mean over tokens of the second-last block's
//! output. Text and the 27 audio features are fused by a linear projection
//! plus a trainable sentence-position embedding, a second transformer stack
//! runs over the (padded, masked) sentence rows, and masked mean pooling
//! feeds two scalar regression heads: n-day return and n-day volatility.

mod checkpoint;

use std::collections::HashMap;

use crate::data::{CallRecord, AUDIO_DIM};
use crate::error::{Error, Result};
use crate::numerals::{MagnitudeProbe, NccHead, NccInstance};
use crate::rng::seeded;
use crate::tensor::{NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::text::tokenize;

pub const LAYER_NORM_EPS: f64 = 1e-5;
/// Additive pre-softmax mask for padded positions.
pub const ATTENTION_MASK_VALUE: f64 = -1e9;

pub const UNK_ID: usize = 0;
pub const EOS_ID: usize = 1;
pub const MASK_ID: usize = 2;
const RESERVED: [&str; 3] = ["[UNK]", "[EOS]", "[MASK]"];

/// Token vocabulary with reserved unknown / end-of-sentence / mask ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Build from tokenized sentences; tokens ordered by descending count,
    /// ties lexicographic, after the reserved entries.
    pub fn build<'a, I: IntoIterator<Item = &'a Vec<String>>>(sentences: I) -> Self {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for sent in sentences {
            for tok in sent {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        for r in RESERVED {
            counts.remove(r);
        }
        let mut ordered: Vec<(&str, u64)> = counts.into_iter().collect();
        ordered.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(ordered.into_iter().map(|(t, _)| t.to_string()));
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens[..3] != RESERVED.map(String::from) {
            return Err(Error::contract("vocab must start with the reserved tokens".to_string()));
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Map tokens to ids, truncate to `max_len - 1`, append EOS.
    pub fn encode(&self, tokens: &[String], max_len: usize) -> Vec<usize> {
        let keep = tokens.len().min(max_len.saturating_sub(1));
        let mut ids: Vec<usize> = tokens[..keep].iter().map(|t| self.id(t)).collect();
        ids.push(EOS_ID);
        ids
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub d_t: usize,
    pub d_s: usize,
    pub token_blocks: usize,
    pub sentence_blocks: usize,
    pub heads: usize,
    /// Maximum sentences per document (M); extra sentences are dropped,
    /// missing rows padded and masked.
    pub max_sentences: usize,
    pub max_sentence_len: usize,
    pub ffn_mult: usize,
    pub probe_hidden: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_t: 32,
            d_s: 32,
            token_blocks: 2,
            sentence_blocks: 2,
            heads: 2,
            max_sentences: 16,
            max_sentence_len: 32,
            ffn_mult: 2,
            probe_hidden: 8,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.token_blocks < 2 {
            return Err(Error::config(format!(
                "token encoder needs >= 2 blocks so a second-last layer exists, got {}",
                self.token_blocks
            )));
        }
        if self.sentence_blocks == 0 {
            return Err(Error::config("sentence encoder needs >= 1 block".to_string()));
        }
        for (name, v) in [
            ("d_t", self.d_t),
            ("d_s", self.d_s),
            ("heads", self.heads),
            ("max_sentences", self.max_sentences),
            ("max_sentence_len", self.max_sentence_len),
            ("ffn_mult", self.ffn_mult),
            ("probe_hidden", self.probe_hidden),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.d_t % self.heads != 0 || self.d_s % self.heads != 0 {
            return Err(Error::config(format!(
                "head count {} must divide d_t {} and d_s {}",
                self.heads, self.d_t, self.d_s
            )));
        }
        if self.max_sentence_len < 2 {
            return Err(Error::config("max_sentence_len must be >= 2".to_string()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Block {
    qkv: Vec<(ParamId, ParamId, ParamId)>,
    wo: ParamId,
    ln1_g: ParamId,
    ln1_b: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

impl Block {
    fn new<R: rand::RngExt + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        d: usize,
        heads: usize,
        ffn_mult: usize,
        rng: &mut R,
    ) -> Self {
        let dh = d / heads;
        let ff = d * ffn_mult;
        let qkv = (0..heads)
            .map(|h| {
                (
                    store.add(format!("{prefix}.h{h}.wq"), Tensor::xavier(rng, d, dh)),
                    store.add(format!("{prefix}.h{h}.wk"), Tensor::xavier(rng, d, dh)),
                    store.add(format!("{prefix}.h{h}.wv"), Tensor::xavier(rng, d, dh)),
                )
            })
            .collect();
        Block {
            qkv,
            wo: store.add(format!("{prefix}.wo"), Tensor::xavier(rng, d, d)),
            ln1_g: store.add(format!("{prefix}.ln1.g"), Tensor::ones(vec![1, d])),
            ln1_b: store.add(format!("{prefix}.ln1.b"), Tensor::zeros(vec![1, d])),
            ln2_g: store.add(format!("{prefix}.ln2.g"), Tensor::ones(vec![1, d])),
            ln2_b: store.add(format!("{prefix}.ln2.b"), Tensor::zeros(vec![1, d])),
            w1: store.add(format!("{prefix}.ffn.w1"), Tensor::xavier(rng, d, ff)),
            b1: store.add(format!("{prefix}.ffn.b1"), Tensor::zeros(vec![1, ff])),
            w2: store.add(format!("{prefix}.ffn.w2"), Tensor::xavier(rng, ff, d)),
            b2: store.add(format!("{prefix}.ffn.b2"), Tensor::zeros(vec![1, d])),
        }
    }

    /// Pre-norm residual block: x + MHA(LN(x)), then x + FFN(LN(x)).
    fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: NodeId,
        attn_mask: Option<&Tensor>,
    ) -> Result<NodeId> {
        let d = tape.value(x).cols();
        let dh = d / self.qkv.len();
        let scale = 1.0 / (dh as f64).sqrt();

        let ln1_g = tape.param(store, self.ln1_g);
        let ln1_b = tape.param(store, self.ln1_b);
        let xn = tape.layer_norm(x, LAYER_NORM_EPS)?;
        let xn = tape.scale_rows(xn, ln1_g)?;
        let xn = tape.add_rows(xn, ln1_b)?;

        let mut head_outs = Vec::with_capacity(self.qkv.len());
        for &(wq, wk, wv) in &self.qkv {
            let wq = tape.param(store, wq);
            let wk = tape.param(store, wk);
            let wv = tape.param(store, wv);
            let q = tape.matmul(xn, wq)?;
            let k = tape.matmul(xn, wk)?;
            let v = tape.matmul(xn, wv)?;
            let kt = tape.transpose(k)?;
            let scores = tape.matmul(q, kt)?;
            let mut scores = tape.mul_scalar(scores, scale);
            if let Some(mask) = attn_mask {
                let m = tape.constant(mask.clone());
                scores = tape.add(scores, m)?;
            }
            let attn = tape.softmax(scores)?;
            head_outs.push(tape.matmul(attn, v)?);
        }
        let concat = tape.concat_cols(&head_outs)?;
        let wo = tape.param(store, self.wo);
        let proj = tape.matmul(concat, wo)?;
        let x = tape.add(x, proj)?;

        let ln2_g = tape.param(store, self.ln2_g);
        let ln2_b = tape.param(store, self.ln2_b);
        let yn = tape.layer_norm(x, LAYER_NORM_EPS)?;
        let yn = tape.scale_rows(yn, ln2_g)?;
        let yn = tape.add_rows(yn, ln2_b)?;
        let w1 = tape.param(store, self.w1);
        let b1 = tape.param(store, self.b1);
        let h = tape.matmul(yn, w1)?;
        let h = tape.add_rows(h, b1)?;
        let h = tape.relu(h);
        let w2 = tape.param(store, self.w2);
        let b2 = tape.param(store, self.b2);
        let f = tape.matmul(h, w2)?;
        let f = tape.add_rows(f, b2)?;
        tape.add(x, f)
    }
}

/// A document ready for the forward pass: encoded token ids plus raw audio
/// vectors, truncated to the configured maximums.
#[derive(Clone, Debug)]
pub struct EncodedDoc {
    pub sentences: Vec<Vec<usize>>,
    pub audio: Vec<Vec<f64>>,
}

/// The full model: token encoder, fusion, sentence encoder, task heads,
/// plus the two pre-training heads (NCC, magnitude probe).
#[derive(Clone, Debug)]
pub struct Model {
    pub cfg: EncoderConfig,
    pub vocab: Vocab,
    pub store: ParamStore,
    /// When false the audio pathway is zeroed (text-only ablation).
    pub audio_enabled: bool,
    pub audio_mean: Vec<f64>,
    pub audio_std: Vec<f64>,
    tok_embed: ParamId,
    tok_pos: ParamId,
    tok_blocks: Vec<Block>,
    fuse_w: ParamId,
    sent_pos: ParamId,
    sent_blocks: Vec<Block>,
    ret_w: ParamId,
    ret_b: ParamId,
    vol_w: ParamId,
    vol_b: ParamId,
    ncc_head: NccHead,
    probe: MagnitudeProbe,
}

impl Model {
    pub fn new(cfg: EncoderConfig, vocab: Vocab, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seeded(seed);
        let mut store = ParamStore::new();
        let d_t = cfg.d_t;
        let d_s = cfg.d_s;

        let tok_embed = store.add("embed.tok", Tensor::randn(&mut rng, vec![vocab.len(), d_t], 0.1));
        let tok_pos = store.add(
            "embed.pos",
            Tensor::randn(&mut rng, vec![cfg.max_sentence_len, d_t], 0.05),
        );
        let tok_blocks = (0..cfg.token_blocks)
            .map(|b| Block::new(&mut store, &format!("tok{b}"), d_t, cfg.heads, cfg.ffn_mult, &mut rng))
            .collect();
        let fuse_w = store.add("fuse.w", Tensor::xavier(&mut rng, d_t + AUDIO_DIM, d_s));
        let sent_pos = store.add(
            "sent.pos",
            Tensor::randn(&mut rng, vec![cfg.max_sentences, d_s], 0.05),
        );
        let sent_blocks = (0..cfg.sentence_blocks)
            .map(|b| Block::new(&mut store, &format!("sent{b}"), d_s, cfg.heads, cfg.ffn_mult, &mut rng))
            .collect();
        // Regression heads start at zero: predictions open at the target
        // mean (set via init_head_biases) instead of Xavier-scale noise.
        let ret_w = store.add("head.ret.w", Tensor::zeros(vec![d_s, 1]));
        let ret_b = store.add("head.ret.b", Tensor::zeros(vec![1, 1]));
        let vol_w = store.add("head.vol.w", Tensor::zeros(vec![d_s, 1]));
        let vol_b = store.add("head.vol.b", Tensor::zeros(vec![1, 1]));
        let ncc_head = NccHead::new(&mut store, "ncc", d_t, &mut rng);
        let probe = MagnitudeProbe::new(&mut store, "probe", d_t, cfg.probe_hidden, &mut rng);

        Ok(Model {
            cfg,
            vocab,
            store,
            audio_enabled: true,
            audio_mean: vec![0.0; AUDIO_DIM],
            audio_std: vec![1.0; AUDIO_DIM],
            tok_embed,
            tok_pos,
            tok_blocks,
            fuse_w,
            sent_pos,
            sent_blocks,
            ret_w,
            ret_b,
            vol_w,
            vol_b,
            ncc_head,
            probe,
        })
    }

    /// Per-feature z-scoring stats, fitted on the training split.
    pub fn set_audio_norm(&mut self, mean: Vec<f64>, std: Vec<f64>) -> Result<()> {
        if mean.len() != AUDIO_DIM || std.len() != AUDIO_DIM {
            return Err(Error::contract("audio normalizer must have 27 entries".to_string()));
        }
        self.audio_mean = mean;
        self.audio_std = std;
        Ok(())
    }

    /// Freeze the final token-level block (applied between the NCC and MC
    /// pre-training stages).
    pub fn freeze_final_token_block(&mut self) -> usize {
        self.store.freeze_prefix(&format!("tok{}.", self.cfg.token_blocks - 1))
    }

    pub fn encode_record(&self, rec: &CallRecord) -> EncodedDoc {
        let keep = rec.sentences.len().min(self.cfg.max_sentences);
        let mut sentences = Vec::with_capacity(keep);
        let mut audio = Vec::with_capacity(keep);
        for s in rec.sentences.iter().take(keep) {
            sentences.push(self.vocab.encode(&tokenize(&s.text), self.cfg.max_sentence_len));
            audio.push(s.audio.clone());
        }
        EncodedDoc { sentences, audio }
    }

    /// Token embedding + learned position rows.
    pub fn embed_tokens(&self, tape: &mut Tape, ids: &[usize]) -> Result<NodeId> {
        if ids.is_empty() {
            return Err(Error::contract("cannot embed an empty sentence".to_string()));
        }
        if ids.len() > self.cfg.max_sentence_len {
            return Err(Error::contract(format!(
                "sentence of {} tokens exceeds max length {}",
                ids.len(),
                self.cfg.max_sentence_len
            )));
        }
        let table = tape.param(&self.store, self.tok_embed);
        let tok = tape.embedding_lookup(table, ids)?;
        let pos_table = tape.param(&self.store, self.tok_pos);
        let positions: Vec<usize> = (0..ids.len()).collect();
        let pos = tape.embedding_lookup(pos_table, &positions)?;
        tape.add(tok, pos)
    }

    /// Run the token blocks; returns (second-last output, last output).
    pub fn encode_sentence(&self, tape: &mut Tape, ids: &[usize]) -> Result<(NodeId, NodeId)> {
        let mut x = self.embed_tokens(tape, ids)?;
        let mut outputs = Vec::with_capacity(self.tok_blocks.len());
        for block in &self.tok_blocks {
            x = block.forward(tape, &self.store, x, None)?;
            outputs.push(x);
        }
        let second_last = outputs[outputs.len() - 2];
        Ok((second_last, x))
    }

    /// Sentence text vector: mean over token positions of the second-last
    /// block output.
    pub fn sentence_repr(&self, tape: &mut Tape, ids: &[usize]) -> Result<NodeId> {
        let (second_last, _) = self.encode_sentence(tape, ids)?;
        tape.mean_pool(second_last)
    }

    fn normalized_audio(&self, audio: &[f64]) -> Result<Vec<f64>> {
        if audio.len() != AUDIO_DIM {
            return Err(Error::contract(format!(
                "audio vector has {} entries, expected {AUDIO_DIM}",
                audio.len()
            )));
        }
        if !self.audio_enabled {
            return Ok(vec![0.0; AUDIO_DIM]);
        }
        Ok(audio
            .iter()
            .enumerate()
            .map(|(j, &a)| (a - self.audio_mean[j]) / self.audio_std[j].max(1e-8))
            .collect())
    }

    /// Fused sentence row: projection of (T_i, A_i) plus the sentence
    /// position embedding P_i.
    pub fn fuse(
        &self,
        tape: &mut Tape,
        text_repr: NodeId,
        audio: &[f64],
        sentence_index: usize,
    ) -> Result<NodeId> {
        if sentence_index >= self.cfg.max_sentences {
            return Err(Error::contract(format!(
                "sentence index {sentence_index} >= max {}",
                self.cfg.max_sentences
            )));
        }
        let a = self.normalized_audio(audio)?;
        let a_node = tape.constant(Tensor::row(&a));
        let cat = tape.concat_cols(&[text_repr, a_node])?;
        let w = tape.param(&self.store, self.fuse_w);
        let proj = tape.matmul(cat, w)?;
        let pos_table = tape.param(&self.store, self.sent_pos);
        let p = tape.embedding_lookup(pos_table, &[sentence_index])?;
        tape.add(proj, p)
    }

    /// Additive attention mask for a document with `real` live rows.
    pub fn document_mask(&self, real: usize) -> Tensor {
        let m = self.cfg.max_sentences;
        let mut mask = Tensor::zeros(vec![m, m]);
        for i in 0..m {
            for j in real..m {
                mask.data[i * m + j] = ATTENTION_MASK_VALUE;
            }
        }
        mask
    }

    /// Run the sentence blocks over an `M x d_s` matrix whose first `real`
    /// rows are live, then masked-mean-pool the live rows.
    pub fn encode_document(&self, tape: &mut Tape, doc: NodeId, real: usize) -> Result<NodeId> {
        let m = self.cfg.max_sentences;
        {
            let t = tape.value(doc);
            if !t.is_matrix() || t.rows() != m || t.cols() != self.cfg.d_s {
                return Err(Error::contract(format!(
                    "document matrix must be {m} x {}, got {:?}",
                    self.cfg.d_s,
                    t.shape
                )));
            }
        }
        if real == 0 {
            return Err(Error::contract("document with zero live sentences".to_string()));
        }
        let real = real.min(m);
        let mask = self.document_mask(real);
        let mut x = doc;
        for block in &self.sent_blocks {
            x = block.forward(tape, &self.store, x, Some(&mask))?;
        }
        // Masked mean over the live rows only.
        let mut weights = Tensor::zeros(vec![1, m]);
        for j in 0..real {
            weights.data[j] = 1.0 / real as f64;
        }
        let w = tape.constant(weights);
        tape.matmul(w, x)
    }

    /// Assemble the padded document matrix from fused sentence rows.
    pub fn stack_document(&self, tape: &mut Tape, rows: &[NodeId]) -> Result<NodeId> {
        let m = self.cfg.max_sentences;
        if rows.is_empty() {
            return Err(Error::contract("document with no sentences".to_string()));
        }
        if rows.len() > m {
            return Err(Error::contract(format!("{} rows exceed max sentences {m}", rows.len())));
        }
        let mut parts: Vec<NodeId> = rows.to_vec();
        if rows.len() < m {
            let pad = tape.constant(Tensor::zeros(vec![m - rows.len(), self.cfg.d_s]));
            parts.push(pad);
        }
        tape.concat_rows(&parts)
    }

    /// Scalar regression heads over the pooled vector.
    pub fn predict(&self, tape: &mut Tape, pooled: NodeId) -> Result<(NodeId, NodeId)> {
        let rw = tape.param(&self.store, self.ret_w);
        let rb = tape.param(&self.store, self.ret_b);
        let ret = tape.matmul(pooled, rw)?;
        let ret = tape.add(ret, rb)?;
        let vw = tape.param(&self.store, self.vol_w);
        let vb = tape.param(&self.store, self.vol_b);
        let vol = tape.matmul(pooled, vw)?;
        let vol = tape.add(vol, vb)?;
        Ok((ret, vol))
    }

    /// Full forward pass: (return, volatility) scalar nodes.
    pub fn forward_document(&self, tape: &mut Tape, doc: &EncodedDoc) -> Result<(NodeId, NodeId)> {
        if doc.sentences.is_empty() {
            return Err(Error::contract("document with no sentences".to_string()));
        }
        if doc.sentences.len() != doc.audio.len() {
            return Err(Error::contract("sentence/audio count mismatch".to_string()));
        }
        let keep = doc.sentences.len().min(self.cfg.max_sentences);
        let mut rows = Vec::with_capacity(keep);
        for i in 0..keep {
            let t = self.sentence_repr(tape, &doc.sentences[i])?;
            rows.push(self.fuse(tape, t, &doc.audio[i], i)?);
        }
        let stacked = self.stack_document(tape, &rows)?;
        let pooled = self.encode_document(tape, stacked, keep)?;
        self.predict(tape, pooled)
    }

    /// Movement rule: rise iff the predicted return is strictly positive.
    pub fn movement(predicted_return: f64) -> bool {
        predicted_return > 0.0
    }

    /// NCC logits from the final token-block output at the mask position.
    pub fn ncc_logits(&self, tape: &mut Tape, inst: &NccInstance) -> Result<NodeId> {
        let ids = self.vocab.encode(&inst.tokens, self.cfg.max_sentence_len);
        let mask_pos = ids
            .iter()
            .position(|&id| id == MASK_ID)
            .ok_or_else(|| Error::contract("mask token truncated out of the instance".to_string()))?;
        let (_, last) = self.encode_sentence(tape, &ids)?;
        let repr = tape.select_row(last, mask_pos)?;
        self.ncc_head.logits(tape, &self.store, repr)
    }

    /// Four independent category probabilities for an NCC instance.
    pub fn classify_ncc(&self, tape: &mut Tape, inst: &NccInstance) -> Result<NodeId> {
        let z = self.ncc_logits(tape, inst)?;
        Ok(tape.sigmoid(z))
    }

    /// Magnitude-probe logits over the token embeddings of five surfaces.
    pub fn probe_logits(&self, tape: &mut Tape, surfaces: &[String; 5]) -> Result<NodeId> {
        let ids: Vec<usize> = surfaces.iter().map(|s| self.vocab.id(s)).collect();
        let table = tape.param(&self.store, self.tok_embed);
        let emb = tape.embedding_lookup(table, &ids)?;
        self.probe.logits(tape, &self.store, emb)
    }

    pub fn probe_distribution(&self, tape: &mut Tape, surfaces: &[String; 5]) -> Result<NodeId> {
        let logits = self.probe_logits(tape, surfaces)?;
        tape.softmax(logits)
    }

    /// Mean-squared-error bias init for the heads (predicting the target
    /// mean before any training).
    pub fn init_head_biases(&mut self, ret_mean: f64, vol_mean: f64) {
        self.store.get_mut(self.ret_b).value.data[0] = ret_mean;
        self.store.get_mut(self.vol_b).value.data[0] = vol_mean;
    }
}
