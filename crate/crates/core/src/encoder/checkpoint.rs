//! Model checkpoints: a versioned text manifest of config, audio normalizer,
//! vocabulary, and named parameter tensors with shapes. Floats are written
//! with Rust's shortest round-trip formatting, so save/load is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{EncoderConfig, Model, Vocab};

const MAGIC: &str = "callcast-checkpoint v1";

impl Model {
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path)?;
        let mut w = BufWriter::new(f);
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "[config]")?;
        let c = &self.cfg;
        writeln!(w, "d_t={}", c.d_t)?;
        writeln!(w, "d_s={}", c.d_s)?;
        writeln!(w, "token_blocks={}", c.token_blocks)?;
        writeln!(w, "sentence_blocks={}", c.sentence_blocks)?;
        writeln!(w, "heads={}", c.heads)?;
        writeln!(w, "max_sentences={}", c.max_sentences)?;
        writeln!(w, "max_sentence_len={}", c.max_sentence_len)?;
        writeln!(w, "ffn_mult={}", c.ffn_mult)?;
        writeln!(w, "probe_hidden={}", c.probe_hidden)?;
        writeln!(w, "audio_enabled={}", self.audio_enabled)?;
        writeln!(w, "[audio_norm]")?;
        writeln!(w, "mean={}", join_floats(&self.audio_mean))?;
        writeln!(w, "std={}", join_floats(&self.audio_std))?;
        writeln!(w, "[vocab]")?;
        writeln!(w, "count={}", self.vocab.len())?;
        for t in self.vocab.tokens() {
            writeln!(w, "{t}")?;
        }
        writeln!(w, "[tensors]")?;
        for (_, p) in self.store.iter() {
            let dims: Vec<String> = p.value.shape.iter().map(|d| d.to_string()).collect();
            let frozen = if p.frozen { " frozen" } else { "" };
            writeln!(w, "{} shape={}{}", p.name, dims.join("x"), frozen)?;
            writeln!(w, "{}", join_floats(&p.value.data))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Model> {
        let f = File::open(path)?;
        let reader = BufReader::new(f);
        let mut lines = reader.lines().enumerate();
        let mut next = || -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((_, Err(e))) => Err(Error::Io(e)),
                None => Err(Error::Parse {
                    line: 0,
                    detail: "unexpected end of checkpoint".to_string(),
                }),
            }
        };
        let bad = |line: usize, detail: String| Error::Parse { line, detail };

        let (l, magic) = next()?;
        if magic != MAGIC {
            return Err(bad(l, format!("not a checkpoint: `{magic}`")));
        }
        let (l, sec) = next()?;
        if sec != "[config]" {
            return Err(bad(l, "expected [config]".to_string()));
        }
        let mut cfg = EncoderConfig::default();
        let mut audio_enabled = true;
        loop {
            let (l, line) = next()?;
            if line == "[audio_norm]" {
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(l, format!("bad config line `{line}`")))?;
            let parse_usize =
                |v: &str| v.parse::<usize>().map_err(|e| bad(l, format!("{k}: {e}")));
            match k {
                "d_t" => cfg.d_t = parse_usize(v)?,
                "d_s" => cfg.d_s = parse_usize(v)?,
                "token_blocks" => cfg.token_blocks = parse_usize(v)?,
                "sentence_blocks" => cfg.sentence_blocks = parse_usize(v)?,
                "heads" => cfg.heads = parse_usize(v)?,
                "max_sentences" => cfg.max_sentences = parse_usize(v)?,
                "max_sentence_len" => cfg.max_sentence_len = parse_usize(v)?,
                "ffn_mult" => cfg.ffn_mult = parse_usize(v)?,
                "probe_hidden" => cfg.probe_hidden = parse_usize(v)?,
                "audio_enabled" => {
                    audio_enabled = v.parse().map_err(|_| bad(l, format!("bad bool {v}")))?
                }
                other => return Err(bad(l, format!("unknown config key {other}"))),
            }
        }
        let (l, mean_line) = next()?;
        let audio_mean = parse_floats(mean_line.strip_prefix("mean=").ok_or_else(|| {
            bad(l, "expected mean=".to_string())
        })?)
        .map_err(|e| bad(l, e))?;
        let (l, std_line) = next()?;
        let audio_std = parse_floats(std_line.strip_prefix("std=").ok_or_else(|| {
            bad(l, "expected std=".to_string())
        })?)
        .map_err(|e| bad(l, e))?;

        let (l, sec) = next()?;
        if sec != "[vocab]" {
            return Err(bad(l, "expected [vocab]".to_string()));
        }
        let (l, count_line) = next()?;
        let count: usize = count_line
            .strip_prefix("count=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(l, "expected count=".to_string()))?;
        let mut tokens = Vec::with_capacity(count);
        for _ in 0..count {
            tokens.push(next()?.1);
        }
        let vocab = Vocab::from_tokens(tokens)?;

        let (l, sec) = next()?;
        if sec != "[tensors]" {
            return Err(bad(l, "expected [tensors]".to_string()));
        }

        // Rebuild the parameter layout, then overwrite values by name.
        let mut model = Model::new(cfg, vocab, 0)?;
        model.audio_enabled = audio_enabled;
        model.set_audio_norm(audio_mean, audio_std)?;
        loop {
            let Some((i, line)) = lines.next() else {
                break;
            };
            let header = line.map_err(Error::Io)?;
            if header.trim().is_empty() {
                continue;
            }
            let lineno = i + 1;
            let mut parts = header.split_whitespace();
            let name = parts
                .next()
                .ok_or_else(|| bad(lineno, "empty tensor header".to_string()))?;
            let shape_part = parts
                .next()
                .and_then(|s| s.strip_prefix("shape="))
                .ok_or_else(|| bad(lineno, format!("tensor {name}: missing shape")))?;
            let frozen = parts.next() == Some("frozen");
            let shape: Vec<usize> = shape_part
                .split('x')
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(lineno, format!("tensor {name}: {e}")))?;
            let (dl, data_line) = match lines.next() {
                Some((j, Ok(s))) => (j + 1, s),
                Some((_, Err(e))) => return Err(Error::Io(e)),
                None => return Err(bad(lineno, format!("tensor {name}: missing data"))),
            };
            let data = parse_floats(&data_line).map_err(|e| bad(dl, e))?;
            let pid = model
                .store
                .find(name)
                .ok_or_else(|| bad(lineno, format!("unknown tensor {name}")))?;
            let param = model.store.get_mut(pid);
            if param.value.shape != shape || param.value.data.len() != data.len() {
                return Err(bad(
                    lineno,
                    format!(
                        "tensor {name}: shape {shape:?} does not match model {:?}",
                        param.value.shape
                    ),
                ));
            }
            param.value.data = data;
            param.frozen = frozen;
        }
        Ok(model)
    }
}

fn join_floats(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x}")).collect();
    parts.join(" ")
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split_whitespace()
        .map(|tok| tok.parse::<f64>().map_err(|e| format!("bad float {tok}: {e}")))
        .collect()
}
