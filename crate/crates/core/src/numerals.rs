//! Financial numeral machinery: detection with trigger tokens and rules,
//! four-way category tagging, and the two adaptive pre-training tasks:
//! numeral category classification (NCC) over masked sentences, and
//! magnitude comparison (MC) over five-number same-category lists.

use std::sync::LazyLock;

use rand::seq::SliceRandom;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::tensor::{NodeId, ParamId, ParamStore, Tape, Tensor};

/// Mask token substituted for a numeral span in NCC instances.
pub const MASK_TOKEN: &str = "[MASK]";

/// The four numeral classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumeralCategory {
    Monetary,
    Temporal,
    Percentage,
    Other,
}

pub const CATEGORY_COUNT: usize = 4;

pub const ALL_CATEGORIES: [NumeralCategory; CATEGORY_COUNT] = [
    NumeralCategory::Monetary,
    NumeralCategory::Temporal,
    NumeralCategory::Percentage,
    NumeralCategory::Other,
];

impl NumeralCategory {
    pub fn index(self) -> usize {
        match self {
            NumeralCategory::Monetary => 0,
            NumeralCategory::Temporal => 1,
            NumeralCategory::Percentage => 2,
            NumeralCategory::Other => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NumeralCategory::Monetary => "monetary",
            NumeralCategory::Temporal => "temporal",
            NumeralCategory::Percentage => "percentage",
            NumeralCategory::Other => "other",
        }
    }
}

/// A detected numeral inside a tokenized sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumeralSpan {
    pub surface: String,
    /// Normalized value: magnitude suffixes expanded (k/m/bn), `%` kept as a
    /// numeric percent, years verbatim.
    pub value: f64,
    pub start: usize,
    pub end: usize,
    /// Nonempty, sorted, deduplicated.
    pub categories: Vec<NumeralCategory>,
}

impl NumeralSpan {
    pub fn has_category(&self, c: NumeralCategory) -> bool {
        self.categories.contains(&c)
    }
}

static NUMERAL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(\$)?(\d{1,3}(?:,\d{3})+|\d+)(\.\d+)?((?i)mm|bn|[kmb])?(%)?$").unwrap()
});

struct ParsedNumeral {
    value: f64,
    has_dollar: bool,
    has_percent: bool,
    bare_year: bool,
}

fn parse_numeral(token: &str) -> Option<ParsedNumeral> {
    let caps = NUMERAL_RE.captures(token)?;
    let has_dollar = caps.get(1).is_some();
    let int_raw = caps.get(2).unwrap().as_str();
    let int_part = int_raw.replace(',', "");
    let frac = caps.get(3).map(|m| m.as_str()).unwrap_or("");
    let suffix = caps.get(4).map(|m| m.as_str().to_ascii_lowercase());
    let has_percent = caps.get(5).is_some();
    let base: f64 = format!("{int_part}{frac}").parse().ok()?;
    let mult = match suffix.as_deref() {
        Some("k") => 1e3,
        Some("m") | Some("mm") => 1e6,
        Some("b") | Some("bn") => 1e9,
        _ => 1.0,
    };
    let bare_year = !has_dollar
        && !has_percent
        && suffix.is_none()
        && frac.is_empty()
        && !int_raw.contains(',')
        && int_part.len() == 4
        && (1900.0..=2100.0).contains(&base);
    Some(ParsedNumeral {
        value: base * mult,
        has_dollar,
        has_percent,
        bare_year,
    })
}

const MONEY_TRIGGERS: &[&str] = &["$", "usd", "dollars", "cents"];
const PCT_TRIGGERS: &[&str] = &["percent", "percentage", "bps"];
const TIME_TRIGGERS: &[&str] = &[
    "year", "quarter", "q1", "q2", "q3", "q4", "fiscal", "january", "february", "march",
    "april", "may", "june", "july", "august", "september", "october", "november", "december",
];

fn neighbor_matches(tokens: &[String], i: usize, triggers: &[&str]) -> bool {
    let check = |t: &String| triggers.contains(&t.to_ascii_lowercase().as_str());
    (i > 0 && check(&tokens[i - 1])) || (i + 1 < tokens.len() && check(&tokens[i + 1]))
}

/// Detect every numeral token and tag it with the rule table:
/// monetary on a currency mark or adjacent currency word, percentage on `%`
/// or an adjacent percent word, temporal on a bare 4-digit year in
/// [1900, 2100] or an adjacent calendar word, otherwise `other`.
pub fn detect_numerals(tokens: &[String]) -> Vec<NumeralSpan> {
    let mut spans = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        let Some(parsed) = parse_numeral(token) else {
            continue;
        };
        let mut categories = Vec::new();
        if parsed.has_dollar || neighbor_matches(tokens, i, MONEY_TRIGGERS) {
            categories.push(NumeralCategory::Monetary);
        }
        if parsed.bare_year || neighbor_matches(tokens, i, TIME_TRIGGERS) {
            categories.push(NumeralCategory::Temporal);
        }
        if parsed.has_percent || neighbor_matches(tokens, i, PCT_TRIGGERS) {
            categories.push(NumeralCategory::Percentage);
        }
        if categories.is_empty() {
            categories.push(NumeralCategory::Other);
        }
        categories.sort();
        spans.push(NumeralSpan {
            surface: token.clone(),
            value: parsed.value,
            start: i,
            end: i + 1,
            categories,
        });
    }
    spans
}

/// A masked-sentence classification instance: exactly one `[MASK]` token,
/// multi-label target over the four categories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NccInstance {
    pub tokens: Vec<String>,
    pub mask_index: usize,
    pub label: Vec<NumeralCategory>,
}

impl NccInstance {
    pub fn label_bits(&self) -> [bool; CATEGORY_COUNT] {
        let mut bits = [false; CATEGORY_COUNT];
        for c in &self.label {
            bits[c.index()] = true;
        }
        bits
    }
}

/// One instance per detected numeral span: the span replaced by `[MASK]`,
/// label = that span's category set. Other numerals stay in context.
pub fn make_ncc_instances(sentences: &[Vec<String>]) -> Vec<NccInstance> {
    let mut out = Vec::new();
    for tokens in sentences {
        for span in detect_numerals(tokens) {
            let mut masked = Vec::with_capacity(tokens.len() - (span.end - span.start) + 1);
            masked.extend_from_slice(&tokens[..span.start]);
            masked.push(MASK_TOKEN.to_string());
            masked.extend_from_slice(&tokens[span.end..]);
            out.push(NccInstance {
                tokens: masked,
                mask_index: span.start,
                label: span.categories,
            });
        }
    }
    out
}

/// A five-number same-category list with the index of its maximum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeInstance {
    pub values: [f64; 5],
    pub surfaces: [String; 5],
    pub category: NumeralCategory,
    /// Index of the maximum value, ties broken to the lowest index.
    pub label: usize,
}

impl MagnitudeInstance {
    pub fn one_hot(&self) -> [u8; 5] {
        let mut oh = [0u8; 5];
        oh[self.label] = 1;
        oh
    }
}

/// Index of the maximum, lowest index on ties.
pub fn magnitude_label(values: &[f64; 5]) -> usize {
    let mut best = 0;
    for i in 1..5 {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// Same-decade bucket of a normalized value.
fn magnitude_bucket(value: f64) -> i32 {
    if value == 0.0 {
        i32::MIN
    } else {
        value.abs().log10().floor() as i32
    }
}

/// Build magnitude-comparison instances: numerals are pooled per category
/// and per power-of-ten bucket, shuffled with the seed, and consumed in
/// groups of five without replacement. An empty result means no category
/// had five comparable values.
pub fn make_magnitude_instances(sentences: &[Vec<String>], seed: u64) -> Vec<MagnitudeInstance> {
    use std::collections::BTreeMap;

    let mut pools: BTreeMap<(NumeralCategory, i32), Vec<(f64, String)>> = BTreeMap::new();
    for tokens in sentences {
        for span in detect_numerals(tokens) {
            for &c in &span.categories {
                pools
                    .entry((c, magnitude_bucket(span.value)))
                    .or_default()
                    .push((span.value, span.surface.clone()));
            }
        }
    }

    let mut rng = seeded(seed);
    let mut out = Vec::new();
    for ((category, _bucket), mut pool) in pools {
        pool.shuffle(&mut rng);
        for chunk in pool.chunks_exact(5) {
            let values: [f64; 5] = std::array::from_fn(|i| chunk[i].0);
            let surfaces: [String; 5] = std::array::from_fn(|i| chunk[i].1.clone());
            let label = magnitude_label(&values);
            out.push(MagnitudeInstance {
                values,
                surfaces,
                category,
                label,
            });
        }
    }
    out
}

// ── trainable heads ──────────────────────────────────────────────────

/// Linear head over the mask-position representation producing four
/// independent category logits.
#[derive(Clone, Debug)]
pub struct NccHead {
    pub w: ParamId,
    pub b: ParamId,
}

impl NccHead {
    pub fn new<R: rand::RngExt + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        NccHead {
            w: store.add(format!("{prefix}.w"), Tensor::xavier(rng, dim, CATEGORY_COUNT)),
            b: store.add(format!("{prefix}.b"), Tensor::zeros(vec![1, CATEGORY_COUNT])),
        }
    }

    /// `repr` is `1 x d`; returns `1 x 4` logits.
    pub fn logits(&self, tape: &mut Tape, store: &ParamStore, repr: NodeId) -> Result<NodeId> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let z = tape.matmul(repr, w)?;
        tape.add(z, b)
    }

    /// Independent sigmoid probabilities per category.
    pub fn probabilities(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        repr: NodeId,
    ) -> Result<NodeId> {
        let z = self.logits(tape, store, repr)?;
        Ok(tape.sigmoid(z))
    }
}

/// Multi-label binary cross-entropy from logits:
/// sum(softplus(z)) - sum(z * y), numerically stable for saturated logits.
pub fn ncc_bce_loss(
    tape: &mut Tape,
    logits: NodeId,
    label: &[bool; CATEGORY_COUNT],
) -> Result<NodeId> {
    let sp = tape.softplus(logits);
    let sp_sum = tape.sum(sp);
    let y: Vec<f64> = label.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let yc = tape.constant(Tensor::row(&y));
    let zy = tape.mul(logits, yc)?;
    let zy_sum = tape.sum(zy);
    tape.sub(sp_sum, zy_sum)
}

/// Bidirectional LSTM probe scoring each of the five positions; softmax over
/// the five scores gives the predicted argmax distribution.
#[derive(Clone, Debug)]
pub struct MagnitudeProbe {
    pub input_dim: usize,
    pub hidden: usize,
    fwd: LstmCell,
    bwd: LstmCell,
    w_out: ParamId,
    b_out: ParamId,
}

#[derive(Clone, Debug)]
struct LstmCell {
    // gate order: input, forget, cell, output
    wx: [ParamId; 4],
    wh: [ParamId; 4],
    b: [ParamId; 4],
}

impl LstmCell {
    fn new<R: rand::RngExt + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
        zero: bool,
    ) -> Self {
        let gate = ["i", "f", "g", "o"];
        let mk = |store: &mut ParamStore, name: String, r: usize, c: usize, rng: &mut R| {
            if zero {
                store.add(name, Tensor::zeros(vec![r, c]))
            } else {
                store.add(name, Tensor::xavier(rng, r, c))
            }
        };
        let wx = std::array::from_fn(|k| {
            mk(store, format!("{prefix}.wx_{}", gate[k]), input_dim, hidden, rng)
        });
        let wh = std::array::from_fn(|k| {
            mk(store, format!("{prefix}.wh_{}", gate[k]), hidden, hidden, rng)
        });
        let b = std::array::from_fn(|k| {
            store.add(format!("{prefix}.b_{}", gate[k]), Tensor::zeros(vec![1, hidden]))
        });
        LstmCell { wx, wh, b }
    }

    /// One step over a `1 x d` input; returns the new `(h, c)`.
    fn step(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: NodeId,
        h: NodeId,
        c: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let gate = |tape: &mut Tape, k: usize| -> Result<NodeId> {
            let wx = tape.param(store, self.wx[k]);
            let wh = tape.param(store, self.wh[k]);
            let b = tape.param(store, self.b[k]);
            let xz = tape.matmul(x, wx)?;
            let hz = tape.matmul(h, wh)?;
            let s = tape.add(xz, hz)?;
            tape.add(s, b)
        };
        let zi = gate(tape, 0)?;
        let zf = gate(tape, 1)?;
        let zg = gate(tape, 2)?;
        let zo = gate(tape, 3)?;
        let i = tape.sigmoid(zi);
        let f = tape.sigmoid(zf);
        let g = tape.tanh(zg);
        let o = tape.sigmoid(zo);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_next = tape.add(fc, ig)?;
        let ct = tape.tanh(c_next);
        let h_next = tape.mul(o, ct)?;
        Ok((h_next, c_next))
    }
}

impl MagnitudeProbe {
    pub fn new<R: rand::RngExt + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self::build(store, prefix, input_dim, hidden, rng, false)
    }

    /// All-zero weights; useful for symmetry checks.
    pub fn new_zeroed(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
    ) -> Self {
        let mut rng = seeded(0);
        Self::build(store, prefix, input_dim, hidden, &mut rng, true)
    }

    fn build<R: rand::RngExt + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
        zero: bool,
    ) -> Self {
        let fwd = LstmCell::new(store, &format!("{prefix}.fwd"), input_dim, hidden, rng, zero);
        let bwd = LstmCell::new(store, &format!("{prefix}.bwd"), input_dim, hidden, rng, zero);
        let w_out = if zero {
            store.add(format!("{prefix}.w_out"), Tensor::zeros(vec![2 * hidden, 1]))
        } else {
            store.add(format!("{prefix}.w_out"), Tensor::xavier(rng, 2 * hidden, 1))
        };
        let b_out = store.add(format!("{prefix}.b_out"), Tensor::zeros(vec![1, 1]));
        MagnitudeProbe {
            input_dim,
            hidden,
            fwd,
            bwd,
            w_out,
            b_out,
        }
    }

    /// Score the five rows of `embeddings` (`5 x input_dim`) and return the
    /// `1 x 5` logits.
    pub fn logits(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        embeddings: NodeId,
    ) -> Result<NodeId> {
        {
            let t = tape.value(embeddings);
            if !t.is_matrix() || t.rows() != 5 || t.cols() != self.input_dim {
                return Err(Error::contract(format!(
                    "probe expects 5 x {} embeddings, got {:?}",
                    self.input_dim, t.shape
                )));
            }
        }
        let xs: Vec<NodeId> = (0..5)
            .map(|i| tape.select_row(embeddings, i))
            .collect::<Result<_>>()?;

        let zero_h = Tensor::zeros(vec![1, self.hidden]);
        let mut h = tape.constant(zero_h.clone());
        let mut c = tape.constant(zero_h.clone());
        let mut fwd_states = Vec::with_capacity(5);
        for &x in &xs {
            let (h2, c2) = self.fwd.step(tape, store, x, h, c)?;
            h = h2;
            c = c2;
            fwd_states.push(h);
        }
        let mut h = tape.constant(zero_h.clone());
        let mut c = tape.constant(zero_h);
        let mut bwd_states = vec![h; 5];
        for i in (0..5).rev() {
            let (h2, c2) = self.bwd.step(tape, store, xs[i], h, c)?;
            h = h2;
            c = c2;
            bwd_states[i] = h;
        }

        let w_out = tape.param(store, self.w_out);
        let b_out = tape.param(store, self.b_out);
        let mut scores = Vec::with_capacity(5);
        for i in 0..5 {
            let cat = tape.concat_cols(&[fwd_states[i], bwd_states[i]])?;
            let s = tape.matmul(cat, w_out)?;
            let s = tape.add(s, b_out)?;
            scores.push(s);
        }
        tape.concat_cols(&scores)
    }

    /// Softmax distribution over the five positions.
    pub fn distribution(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        embeddings: NodeId,
    ) -> Result<NodeId> {
        let logits = self.logits(tape, store, embeddings)?;
        tape.softmax(logits)
    }
}

/// Negative log-likelihood of the one-hot magnitude label.
pub fn probe_nll_loss(tape: &mut Tape, logits: NodeId, label: usize) -> Result<NodeId> {
    if label >= 5 {
        return Err(Error::contract(format!("magnitude label {label} out of range")));
    }
    let ls = tape.log_softmax(logits)?;
    let mut onehot = Tensor::zeros(vec![1, 5]);
    onehot.data[label] = 1.0;
    let oh = tape.constant(onehot);
    let picked = tape.mul(ls, oh)?;
    let s = tape.sum(picked);
    Ok(tape.mul_scalar(s, -1.0))
}
