//! Seeded synthetic corpus with planted, learnable signal.
//!
//! Each call draws three latent factors: a text polarity (word choice), a
//! headline percentage whose magnitude modulates the text signal, and an
//! independent audio polarity shifting one designated audio feature. The
//! factors drive the post-event price drift, so labels computed from prices
//! carry signal that is recoverable from text, numerals, and audio. With all
//! effect sizes at zero the drift vanishes and labels are pure noise.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::rng::{normal, substream};

use super::{CallRecord, Sentence, AUDIO_DIM, POST_EVENT_DAYS, PRE_EVENT_DAYS};

/// Audio feature index carrying the planted audio signal.
pub const SIGNAL_AUDIO_FEATURE: usize = 0;

/// Mean shift applied to the signal audio feature per unit of effect size.
const AUDIO_SHIFT: f64 = 1.4;

/// Daily drift per unit of the latent score.
const DRIFT_PER_DAY: f64 = 0.009;

/// Nonnegative effect sizes for the three planted channels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectSizes {
    pub text: f64,
    pub numeral: f64,
    pub audio: f64,
}

impl Default for EffectSizes {
    fn default() -> Self {
        EffectSizes {
            text: 1.0,
            numeral: 1.0,
            audio: 1.0,
        }
    }
}

impl EffectSizes {
    pub fn null() -> Self {
        EffectSizes {
            text: 0.0,
            numeral: 0.0,
            audio: 0.0,
        }
    }
}

/// Ground-truth latent factors per call, for oracle probes in tests.
/// These never reach the corpus file.
#[derive(Clone, Copy, Debug)]
pub struct PlantedLatents {
    pub call_index: usize,
    /// +1 or -1: polarity of the wording.
    pub text_polarity: f64,
    /// Headline percentage, the numeral-borne channel.
    pub headline_pct: f64,
    /// +1 or -1: independent audio channel.
    pub audio_polarity: f64,
    /// Latent score combining the channels with the effect sizes.
    pub drift_score: f64,
}

const POSITIVE_FILLERS: &[&str] = &[
    "demand was strong across all segments",
    "customer retention remained excellent this quarter",
    "we saw robust growth in new markets",
    "operating leverage improved throughout the period",
    "our pipeline looks healthy going forward",
];

const NEGATIVE_FILLERS: &[&str] = &[
    "demand was weak in key segments",
    "competitive pressure hurt our pricing this quarter",
    "supply costs rose sharply during the period",
    "we experienced delays across several programs",
    "the outlook remains challenging going forward",
];

const NEUTRAL_FILLERS: &[&str] = &[
    "we will provide more detail later in the call",
    "the team executed according to plan",
    "thank you for joining the call today",
    "our accounting treatment is unchanged",
    "we continue to monitor the situation",
];

fn pick<'a, R: RngExt + ?Sized>(rng: &mut R, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

// Howard Hinnant's civil-date algorithms (public domain).
fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146097 + doe - 719468
}

fn civil_from_days(z: i64) -> (i64, i64, i64) {
    let z = z + 719468;
    let era = if z >= 0 { z } else { z - 146096 } / 146097;
    let doe = z - era * 146097;
    let yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    (if m <= 2 { y + 1 } else { y }, m, d)
}

fn iso_date(serial: i64) -> String {
    let (y, m, d) = civil_from_days(serial);
    format!("{y:04}-{m:02}-{d:02}")
}

fn sign<R: RngExt + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn make_sentences(
    rng: &mut ChaCha8Rng,
    polarity: f64,
    headline_pct: f64,
    audio_polarity: f64,
    effects: &EffectSizes,
) -> Vec<Sentence> {
    let n_sent = rng.random_range(8..=14usize);
    let mut texts = Vec::with_capacity(n_sent);

    let direction = if polarity > 0.0 { "increased" } else { "decreased" };
    texts.push(format!(
        "profits {direction} by {headline_pct:.0}% compared to last year"
    ));

    for _ in 1..n_sent {
        let roll: f64 = rng.random();
        let text = if roll < 0.40 {
            let pool = if polarity > 0.0 {
                POSITIVE_FILLERS
            } else {
                NEGATIVE_FILLERS
            };
            pick(rng, pool).to_string()
        } else if roll < 0.52 {
            format!(
                "revenue reached ${}m in the quarter",
                25 * rng.random_range(4..36)
            )
        } else if roll < 0.62 {
            format!("we spent ${}k on restructuring", rng.random_range(10..90))
        } else if roll < 0.72 {
            format!(
                "in fiscal {} we opened {} locations",
                rng.random_range(2012..2025),
                rng.random_range(2..30)
            )
        } else if roll < 0.82 {
            format!("gross margins were {}% for the period", rng.random_range(1..60))
        } else if roll < 0.90 {
            format!("we shipped {} units this cycle", 10 * rng.random_range(10..90))
        } else {
            pick(rng, NEUTRAL_FILLERS).to_string()
        };
        texts.push(text);
    }

    texts
        .into_iter()
        .map(|text| {
            let mut audio = Vec::with_capacity(AUDIO_DIM);
            for j in 0..AUDIO_DIM {
                let base = j as f64 * 0.1;
                let mut v = base + normal(rng);
                if j == SIGNAL_AUDIO_FEATURE {
                    v += effects.audio.min(2.0) * AUDIO_SHIFT * audio_polarity;
                }
                audio.push(v);
            }
            Sentence { text, audio }
        })
        .collect()
}

fn make_prices(rng: &mut ChaCha8Rng, drift_score: f64, text_polarity: f64, audio_polarity: f64, effects: &EffectSizes) -> Vec<f64> {
    let p0 = (rng.random_range(40f64.ln()..150f64.ln())).exp();
    // Per-call daily volatility, linked to the latents when effects are on
    // so the auxiliary task has learnable structure too.
    let base_sigma = (rng.random_range(0.004f64.ln()..0.012f64.ln())).exp();
    let link = 0.35 * effects.text.min(1.0) * (-text_polarity) + 0.25 * effects.audio.min(1.0) * audio_polarity;
    let sigma = base_sigma * link.exp();
    let mu = DRIFT_PER_DAY * drift_score;

    let mut pre = Vec::with_capacity(PRE_EVENT_DAYS);
    let mut p = p0;
    for _ in 0..PRE_EVENT_DAYS {
        p /= 1.0 + 0.008 * normal(rng);
        pre.push(p);
    }
    pre.reverse();

    let mut prices = pre;
    prices.push(p0);
    let mut p = p0;
    for _ in 0..POST_EVENT_DAYS {
        let r = (mu + sigma * normal(rng)).max(-0.4);
        p *= 1.0 + r;
        prices.push(p);
    }
    prices
}

/// Generate `n_calls` records. Bit-deterministic in `seed`: each call draws
/// from its own ChaCha substream, so the output is independent of iteration
/// order.
pub fn generate(seed: u64, n_calls: usize, effects: &EffectSizes) -> (Vec<CallRecord>, Vec<PlantedLatents>) {
    let mut records = Vec::with_capacity(n_calls);
    let mut latents = Vec::with_capacity(n_calls);
    let base_day = days_from_civil(2018, 1, 2);
    for i in 0..n_calls {
        let mut rng = substream(seed, i as u64 + 1);
        let text_polarity = sign(&mut rng);
        let audio_polarity = sign(&mut rng);
        // Integer percent from a small alphabet so every surface form also
        // occurs in the training split of a modest corpus.
        let headline_pct = rng.random_range(2..=15u32) as f64;
        // Center the percentage channel so its sign is independent of the
        // text polarity; magnitude understanding is what pays off.
        let pct_centered = (headline_pct - 8.5) / 6.5;
        let drift_score = effects.text * text_polarity
            + effects.numeral * text_polarity * pct_centered
            + effects.audio * audio_polarity;

        let sentences = make_sentences(&mut rng, text_polarity, headline_pct, audio_polarity, effects);
        let prices = make_prices(&mut rng, drift_score, text_polarity, audio_polarity, effects);

        records.push(CallRecord {
            id: format!("call{i:05}"),
            ticker: format!("SYN{:03}", (i % 25) + 1),
            date: iso_date(base_day + (i as i64) * 2),
            event_index: PRE_EVENT_DAYS,
            prices,
            sentences,
        });
        latents.push(PlantedLatents {
            call_index: i,
            text_polarity,
            headline_pct,
            audio_polarity,
            drift_score,
        });
    }
    (records, latents)
}
