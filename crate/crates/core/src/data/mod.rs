//! Corpus schema, chronological splitting, and label computation.
//!
//! A corpus file is line-delimited JSON: a header record followed by one
//! call record per line. The header carries a schema version that is checked
//! on load.

pub mod synthetic;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{n_day_return, volatility, PriceWindow};

pub const SCHEMA_NAME: &str = "callcast-corpus";
pub const SCHEMA_VERSION: u32 = 1;

/// Audio feature vector width per sentence.
pub const AUDIO_DIM: usize = 27;

/// Evaluation horizons in trading days after the event.
pub const HORIZONS: [usize; 4] = [3, 7, 15, 30];

/// Price coverage required around the event day.
pub const PRE_EVENT_DAYS: usize = 3;
pub const POST_EVENT_DAYS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub audio: Vec<f64>,
}

/// One earnings call: aligned text/audio sentences plus the adjusted-close
/// price series around the event day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub id: String,
    pub ticker: String,
    /// ISO date (yyyy-mm-dd); lexicographic order is chronological order.
    pub date: String,
    /// Index of the event day inside `prices`.
    pub event_index: usize,
    pub prices: Vec<f64>,
    pub sentences: Vec<Sentence>,
}

impl CallRecord {
    /// Price window starting at the event day.
    pub fn event_window(&self) -> Result<PriceWindow> {
        PriceWindow::new(self.prices[self.event_index..].to_vec())
    }

    pub fn price_at_offset(&self, offset: i64) -> Option<f64> {
        let idx = self.event_index as i64 + offset;
        if idx < 0 {
            return None;
        }
        self.prices.get(idx as usize).copied()
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

fn validate_record(rec: &CallRecord, line: usize) -> Result<()> {
    let fail = |detail: String| Error::Parse { line, detail };
    if rec.sentences.is_empty() {
        return Err(fail(format!("record {}: no sentences", rec.id)));
    }
    for (i, s) in rec.sentences.iter().enumerate() {
        if s.audio.len() != AUDIO_DIM {
            return Err(fail(format!(
                "record {}: sentence {i} has {} audio features, expected {AUDIO_DIM}",
                rec.id,
                s.audio.len()
            )));
        }
    }
    if rec.prices.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(fail(format!("record {}: non-positive price", rec.id)));
    }
    if rec.event_index < PRE_EVENT_DAYS {
        return Err(fail(format!(
            "record {}: price series rejected, only {} days before event (need {PRE_EVENT_DAYS})",
            rec.id, rec.event_index
        )));
    }
    let post = rec.prices.len().saturating_sub(rec.event_index + 1);
    if post < POST_EVENT_DAYS {
        return Err(fail(format!(
            "record {}: price series rejected, only {post} days after event (need {POST_EVENT_DAYS})",
            rec.id
        )));
    }
    if rec.date.len() != 10 || rec.date.as_bytes()[4] != b'-' || rec.date.as_bytes()[7] != b'-' {
        return Err(fail(format!("record {}: date `{}` is not yyyy-mm-dd", rec.id, rec.date)));
    }
    Ok(())
}

pub fn write_corpus<W: Write>(mut w: W, records: &[CallRecord]) -> Result<()> {
    let header = Header {
        schema: SCHEMA_NAME.to_string(),
        version: SCHEMA_VERSION,
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for rec in records {
        writeln!(w, "{}", serde_json::to_string(rec).expect("record serializes"))?;
    }
    Ok(())
}

pub fn save_corpus(path: &Path, records: &[CallRecord]) -> Result<()> {
    let f = File::create(path)?;
    let mut w = BufWriter::new(f);
    write_corpus(&mut w, records)?;
    w.flush()?;
    Ok(())
}

/// Parse, validate, and sort records by (date, id). An empty file yields an
/// empty list; any present header must carry the expected schema version.
pub fn read_corpus<R: BufRead>(r: R) -> Result<Vec<CallRecord>> {
    let mut records = Vec::new();
    let mut lines = r.lines().enumerate();
    let Some((_, first)) = lines.next() else {
        return Ok(records);
    };
    let first = first?;
    if !first.trim().is_empty() {
        let header: Header = serde_json::from_str(&first).map_err(|e| Error::Parse {
            line: 1,
            detail: format!("bad header: {e}"),
        })?;
        if header.schema != SCHEMA_NAME || header.version != SCHEMA_VERSION {
            return Err(Error::Parse {
                line: 1,
                detail: format!(
                    "unsupported corpus schema {}@{} (expected {SCHEMA_NAME}@{SCHEMA_VERSION})",
                    header.schema, header.version
                ),
            });
        }
    }
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let rec: CallRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            detail: e.to_string(),
        })?;
        validate_record(&rec, lineno)?;
        records.push(rec);
    }
    records.sort_by(|a, b| (a.date.as_str(), a.id.as_str()).cmp(&(b.date.as_str(), b.id.as_str())));
    Ok(records)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CallRecord>> {
    let f = File::open(path)?;
    read_corpus(BufReader::new(f))
}

/// Chronological 7:1:2 split with floor rounding at both boundaries.
#[derive(Clone, Debug)]
pub struct Split {
    pub train: Vec<CallRecord>,
    pub valid: Vec<CallRecord>,
    pub test: Vec<CallRecord>,
}

pub fn split_chronological(mut records: Vec<CallRecord>) -> Result<Split> {
    if records.len() < 10 {
        return Err(Error::config(format!(
            "chronological split needs >= 10 records, got {}",
            records.len()
        )));
    }
    records.sort_by(|a, b| (a.date.as_str(), a.id.as_str()).cmp(&(b.date.as_str(), b.id.as_str())));
    let n = records.len();
    let train_end = n * 7 / 10;
    let valid_end = n * 8 / 10;
    let test = records.split_off(valid_end);
    let valid = records.split_off(train_end);
    Ok(Split {
        train: records,
        valid,
        test,
    })
}

/// Regression and movement targets for every horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub call_id: String,
    pub ticker: String,
    /// Simple return p_n / p_0 - 1 per horizon.
    pub returns: [f64; HORIZONS.len()],
    /// Log realized volatility over days 1..n per horizon.
    pub vols: [f64; HORIZONS.len()],
    /// Movement class: rise iff the return is strictly positive.
    pub movements: [bool; HORIZONS.len()],
}

pub fn compute_labels(record: &CallRecord) -> Result<LabeledExample> {
    let window = record.event_window()?;
    let mut returns = [0.0; HORIZONS.len()];
    let mut vols = [0.0; HORIZONS.len()];
    let mut movements = [false; HORIZONS.len()];
    for (i, &n) in HORIZONS.iter().enumerate() {
        returns[i] = n_day_return(&window, n)?;
        vols[i] = volatility(&window, n)?;
        movements[i] = returns[i] > 0.0;
    }
    Ok(LabeledExample {
        call_id: record.id.clone(),
        ticker: record.ticker.clone(),
        returns,
        vols,
        movements,
    })
}

pub fn horizon_slot(n: usize) -> Option<usize> {
    HORIZONS.iter().position(|&h| h == n)
}

#[cfg(test)]
mod tests {
    use super::synthetic::{generate, EffectSizes};
    use super::*;
    use crate::metrics::VOLATILITY_VARIANCE_FLOOR;

    fn flat_record(id: &str, date: &str, price: f64) -> CallRecord {
        CallRecord {
            id: id.to_string(),
            ticker: "SYN001".to_string(),
            date: date.to_string(),
            event_index: PRE_EVENT_DAYS,
            prices: vec![price; PRE_EVENT_DAYS + POST_EVENT_DAYS + 1],
            sentences: vec![Sentence {
                text: "hello world".to_string(),
                audio: vec![0.0; AUDIO_DIM],
            }],
        }
    }

    #[test]
    fn empty_file_gives_empty_list() {
        let records = read_corpus(std::io::Cursor::new(Vec::<u8>::new())).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn corpus_round_trip_is_bit_exact() {
        let (records, _) = generate(99, 6, &EffectSizes::default());
        let mut buf = Vec::new();
        write_corpus(&mut buf, &records).unwrap();
        let back = read_corpus(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(records, back);
        // Double round trip produces identical bytes too.
        let mut buf2 = Vec::new();
        write_corpus(&mut buf2, &back).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn missing_audio_feature_names_sentence() {
        let mut rec = flat_record("c1", "2020-01-02", 100.0);
        rec.sentences[0].audio.pop();
        let mut buf = Vec::new();
        write_corpus(&mut buf, &[rec]).unwrap();
        let err = read_corpus(std::io::Cursor::new(&buf)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sentence 0"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn short_price_series_is_rejected_with_reason() {
        let mut rec = flat_record("c1", "2020-01-02", 100.0);
        rec.prices.truncate(PRE_EVENT_DAYS + 10);
        let mut buf = Vec::new();
        write_corpus(&mut buf, &[rec]).unwrap();
        let err = read_corpus(std::io::Cursor::new(&buf)).unwrap_err();
        assert!(err.to_string().contains("rejected"), "{err}");
    }

    #[test]
    fn bad_schema_version_is_refused() {
        let buf = format!("{{\"schema\":\"{SCHEMA_NAME}\",\"version\":99}}\n");
        assert!(read_corpus(std::io::Cursor::new(buf.as_bytes())).is_err());
    }

    #[test]
    fn split_exact_tenths() {
        let records: Vec<CallRecord> = (0..10)
            .map(|i| flat_record(&format!("c{i}"), &format!("2020-01-{:02}", i + 1), 100.0))
            .collect();
        let split = split_chronological(records).unwrap();
        assert_eq!(split.train.len(), 7);
        assert_eq!(split.valid.len(), 1);
        assert_eq!(split.test.len(), 2);
    }

    #[test]
    fn split_576_floors_at_boundaries() {
        let records: Vec<CallRecord> = (0..576)
            .map(|i| {
                flat_record(
                    &format!("c{i:04}"),
                    &format!("20{:02}-{:02}-{:02}", 10 + i / 330, 1 + (i / 28) % 12, 1 + i % 28),
                    100.0,
                )
            })
            .collect();
        let split = split_chronological(records).unwrap();
        assert_eq!(split.train.len(), 403);
        assert_eq!(split.valid.len(), 57);
        assert_eq!(split.test.len(), 116);
    }

    #[test]
    fn split_resorts_shuffled_input_and_separates_dates() {
        let mut records: Vec<CallRecord> = (0..20)
            .map(|i| flat_record(&format!("c{i:02}"), &format!("2020-02-{:02}", i + 1), 100.0))
            .collect();
        records.reverse();
        let split = split_chronological(records).unwrap();
        let max_train = split.train.iter().map(|r| r.date.clone()).max().unwrap();
        let min_test = split.test.iter().map(|r| r.date.clone()).min().unwrap();
        assert!(max_train < min_test);
        // Disjoint and exhaustive.
        assert_eq!(split.train.len() + split.valid.len() + split.test.len(), 20);
    }

    #[test]
    fn split_too_small_is_config_error() {
        let records: Vec<CallRecord> = (0..9)
            .map(|i| flat_record(&format!("c{i}"), "2020-01-01", 100.0))
            .collect();
        assert!(split_chronological(records).is_err());
    }

    #[test]
    fn labels_on_flat_prices() {
        let rec = flat_record("c1", "2020-01-02", 100.0);
        let ex = compute_labels(&rec).unwrap();
        for i in 0..HORIZONS.len() {
            assert_eq!(ex.returns[i], 0.0);
            assert!(!ex.movements[i]); // zero return classified as fall
            assert!((ex.vols[i] - VOLATILITY_VARIANCE_FLOOR.sqrt().ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn labels_match_direct_recomputation() {
        // Independent oracle: recompute returns/vols straight from prices.
        let (records, _) = generate(123, 8, &EffectSizes::default());
        for rec in &records {
            let ex = compute_labels(rec).unwrap();
            for (slot, &n) in HORIZONS.iter().enumerate() {
                let p0 = rec.prices[rec.event_index];
                let pn = rec.prices[rec.event_index + n];
                let expect_ret = pn / p0 - 1.0;
                assert!((ex.returns[slot] - expect_ret).abs() < 1e-12);
                let rets: Vec<f64> = (1..=n)
                    .map(|i| {
                        rec.prices[rec.event_index + i] / rec.prices[rec.event_index + i - 1] - 1.0
                    })
                    .collect();
                let mean = rets.iter().sum::<f64>() / n as f64;
                let var = rets.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n as f64;
                let expect_vol = var.max(VOLATILITY_VARIANCE_FLOOR).sqrt().ln();
                assert!((ex.vols[slot] - expect_vol).abs() < 1e-12);
                assert_eq!(ex.movements[slot], expect_ret > 0.0);
            }
        }
    }

    #[test]
    fn three_day_return_example() {
        let mut rec = flat_record("c1", "2020-01-02", 100.0);
        rec.prices[rec.event_index + 3] = 103.0;
        let ex = compute_labels(&rec).unwrap();
        assert!((ex.returns[0] - 0.03).abs() < 1e-12);
        assert!(ex.movements[0]);
    }
}
