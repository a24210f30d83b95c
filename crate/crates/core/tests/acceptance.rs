//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! The criteria are property-based and structure-reproducing: gradient
//! integrity, Pareto-front recovery on the convex toy, sub-region geometry,
//! min-norm optimality, numeral machinery, metric fidelity, trading
//! identities, learning-signal orderings on planted corpora, and report
//! shapes.

use std::time::Instant;

use rand::RngExt;

use callcast_core::data::synthetic::{generate, EffectSizes};
use callcast_core::data::{compute_labels, split_chronological, HORIZONS};
use callcast_core::encoder::{EncoderConfig, Model, Vocab};
use callcast_core::gradcheck::{finite_difference, max_relative_error};
use callcast_core::metrics::{
    f1, mcc, mse, roc_auc, volatility_from_returns, ConfusionMatrix, PriceWindow,
    VOLATILITY_VARIANCE_FLOOR,
};
use callcast_core::numerals::{
    detect_numerals, make_magnitude_instances, magnitude_label, MagnitudeInstance,
    NumeralCategory,
};
use callcast_core::pareto::{
    in_subregion, make_preferences, min_norm_direction, run_subproblem, ParetoTrainConfig,
};
use callcast_core::pareto::toy::QuadraticToy;
use callcast_core::pipeline::{
    evaluate, pretrain_mc, pretrain_ncc, simulate_strategy, train, RunConfig, TrainOptions,
};
use callcast_core::rng::{normal, seeded};
use callcast_core::tensor::{NodeId, Tape, Tensor};
use callcast_core::text::tokenize;
use callcast_core::trading::{baseline, simulate, EventPrices, Strategy};

fn pass(criterion: &str, detail: String) {
    println!("criterion {criterion}: PASS ({detail})");
}

// ── criterion 1: gradient integrity ─────────────────────────────────

#[test]
fn criterion_1_gradient_integrity() {
    let started = Instant::now();

    let cfg = EncoderConfig {
        d_t: 8,
        d_s: 8,
        token_blocks: 2,
        sentence_blocks: 2,
        heads: 2,
        max_sentences: 4,
        max_sentence_len: 8,
        ffn_mult: 2,
        probe_hidden: 4,
    };
    let sentences: Vec<Vec<String>> = vec![
        tokenize("profits increased by 9% to $120m in 2020"),
        tokenize("demand was weak across key segments"),
        tokenize("we shipped 42 units this cycle"),
    ];
    let vocab = Vocab::build(&sentences);
    let model = Model::new(cfg, vocab, 97).unwrap();

    // Batch of two documents with fixed targets; loss is the weighted
    // two-task squared error.
    let (records, _) = generate(97, 12, &EffectSizes::default());
    let docs: Vec<_> = records.iter().take(2).map(|r| model.encode_record(r)).collect();
    let targets = [(0.04, -3.2), (-0.02, -4.1)];
    let alpha = (0.6, 0.4);

    let mut work = model.clone();
    let theta0 = work.store.flatten();
    let eval = |theta: &[f64], m: &mut Model| -> (Tape, NodeId) {
        m.store.load_flat(theta).unwrap();
        let mut tape = Tape::new();
        let mut total: Option<NodeId> = None;
        for (doc, (y_ret, y_vol)) in docs.iter().zip(targets) {
            let (ret, vol) = m.forward_document(&mut tape, doc).unwrap();
            let yr = tape.constant(Tensor::from_vec(vec![1, 1], vec![y_ret]).unwrap());
            let yv = tape.constant(Tensor::from_vec(vec![1, 1], vec![y_vol]).unwrap());
            let dr = tape.sub(ret, yr).unwrap();
            let dr2 = tape.mul(dr, dr).unwrap();
            let dv = tape.sub(vol, yv).unwrap();
            let dv2 = tape.mul(dv, dv).unwrap();
            let l1 = tape.mul_scalar(dr2, alpha.0);
            let l2 = tape.mul_scalar(dv2, alpha.1);
            let s = tape.add(l1, l2).unwrap();
            total = Some(match total {
                None => s,
                Some(t) => tape.add(t, s).unwrap(),
            });
        }
        let loss = tape.sum(total.unwrap());
        (tape, loss)
    };

    let (mut tape, loss) = eval(&theta0, &mut work);
    tape.backward(loss).unwrap();
    let analytic = tape.grads_flat(&work.store);

    let mut fd_model = model.clone();
    let numeric = finite_difference(
        |theta| {
            let (t, l) = eval(theta, &mut fd_model);
            t.value(l).data[0]
        },
        &theta0,
        1e-5,
    );
    let err = max_relative_error(&analytic, &numeric, 1e-6);
    assert!(
        err < 1e-4,
        "criterion 1: FAIL (max relative gradient error {err})"
    );
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "criterion 1: FAIL (took {elapsed:.1}s)");
    pass(
        "1 gradient integrity",
        format!("{} parameters, max relative error {err:.2e}, {elapsed:.1}s", theta0.len()),
    );
}

// ── criterion 2: Pareto front recovery ───────────────────────────────

#[test]
fn criterion_2_pareto_front_recovery() {
    let started = Instant::now();
    let prefs = make_preferences(5).unwrap();
    let cfg = ParetoTrainConfig {
        epochs: 60,
        steps_per_epoch: 10,
        lr: 0.03,
        lr_decay: 0.93,
        ..ParetoTrainConfig::default()
    };
    let mut solutions: Vec<Vec<f64>> = Vec::new();
    let mut max_dist = 0.0f64;
    for k in 0..5 {
        let mut toy = QuadraticToy::standard();
        let run = run_subproblem(&mut toy, &[0.0, 0.0], k, &prefs, 0.05, 300, &cfg).unwrap();
        let dist = QuadraticToy::standard().distance_to_front(&run.theta);
        assert!(dist < 0.05, "criterion 2: FAIL (k={k} distance {dist})");
        max_dist = max_dist.max(dist);
        let v = [
            run.final_losses[0] / run.normalizer[0],
            run.final_losses[1] / run.normalizer[1],
        ];
        assert!(
            in_subregion(v, k, &prefs),
            "criterion 2: FAIL (k={k} final losses {v:?} outside its sub-region)"
        );
        solutions.push(run.theta);
    }
    for i in 0..5 {
        for j in (i + 1)..5 {
            let d: f64 = solutions[i]
                .iter()
                .zip(&solutions[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(d > 1e-3, "criterion 2: FAIL (solutions {i} and {j} coincide)");
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "criterion 2: FAIL (took {elapsed:.1}s)");
    pass(
        "2 pareto front recovery",
        format!("5 distinct feasible solutions, max distance {max_dist:.4}, {elapsed:.1}s"),
    );
}

// ── criterion 3: sub-region geometry ─────────────────────────────────

#[test]
fn criterion_3_subregion_geometry() {
    let prefs = make_preferences(10).unwrap();
    let mut checked = 0usize;
    for i in 0..100 {
        for j in 0..100 {
            let v = [i as f64 * 0.03, j as f64 * 0.03];
            // Independent brute-force scan.
            let dots: Vec<f64> = prefs
                .vectors()
                .iter()
                .map(|u| u[0] * v[0] + u[1] * v[1])
                .collect();
            let max = dots.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut member_count = 0;
            for (k, &d) in dots.iter().enumerate() {
                let expect = d >= max;
                let got = in_subregion(v, k, &prefs);
                assert_eq!(
                    got, expect,
                    "criterion 3: FAIL (membership disagrees at v={v:?}, k={k})"
                );
                if got {
                    member_count += 1;
                }
            }
            assert!(
                member_count >= 1,
                "criterion 3: FAIL (point {v:?} belongs to no region)"
            );
            checked += 1;
        }
    }
    pass(
        "3 sub-region geometry",
        format!("{checked} grid points covered, 100% brute-force agreement"),
    );
}

// ── criterion 4: min-norm optimality ─────────────────────────────────

#[test]
fn criterion_4_min_norm_optimality() {
    let mut rng = seeded(404);
    for trial in 0..100 {
        let n = rng.random_range(2..=6usize);
        let dim = rng.random_range(5..=50usize);
        let grads: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| normal(&mut rng)).collect())
            .collect();
        let mn = min_norm_direction(&grads).unwrap();
        let sum: f64 = mn.lambda.iter().sum();
        assert!(
            (sum - 1.0).abs() < 1e-9,
            "criterion 4: FAIL (trial {trial}: lambda sums to {sum})"
        );
        assert!(
            mn.lambda.iter().all(|&l| l >= -1e-9),
            "criterion 4: FAIL (trial {trial}: negative lambda)"
        );
        let norm2 = |lam: &[f64]| -> f64 {
            let mut combo = vec![0.0; dim];
            for (l, g) in lam.iter().zip(&grads) {
                for (c, &gi) in combo.iter_mut().zip(g) {
                    *c += l * gi;
                }
            }
            combo.iter().map(|c| c * c).sum()
        };
        let ours = norm2(&mn.lambda);
        for _ in 0..10_000 {
            let mut sample: Vec<f64> = (0..n)
                .map(|_| -rng.random::<f64>().max(1e-12).ln())
                .collect();
            let s: f64 = sample.iter().sum();
            sample.iter_mut().for_each(|x| *x /= s);
            let theirs = norm2(&sample);
            assert!(
                ours <= theirs + 1e-9,
                "criterion 4: FAIL (trial {trial}: {ours} beaten by random sample {theirs})"
            );
        }
    }
    pass(
        "4 min-norm optimality",
        "100 gradient sets, 10000 simplex samples each, simplex constraints within 1e-9".to_string(),
    );
}

// ── criterion 5: numeral machinery ───────────────────────────────────

#[test]
fn criterion_5_numeral_machinery() {
    // The worked sentence yields exactly {monetary, temporal, percentage}.
    let spans = detect_numerals(&tokenize("During 2020 profits increased by 13% to $205m"));
    let mut cats: Vec<NumeralCategory> = spans.iter().flat_map(|s| s.categories.clone()).collect();
    cats.sort();
    assert_eq!(
        cats,
        vec![
            NumeralCategory::Monetary,
            NumeralCategory::Temporal,
            NumeralCategory::Percentage,
        ],
        "criterion 5: FAIL (worked sentence categories {cats:?})"
    );
    assert_eq!(spans.len(), 3, "criterion 5: FAIL (span count {})", spans.len());

    // The quoted label for the five monetary values.
    let example = MagnitudeInstance {
        values: [1.2, 2.5, 5.0, 9.8, 9.9],
        surfaces: std::array::from_fn(|i| format!("${}", [1.2, 2.5, 5.0, 9.8, 9.9][i])),
        category: NumeralCategory::Monetary,
        label: magnitude_label(&[1.2, 2.5, 5.0, 9.8, 9.9]),
    };
    assert_eq!(
        example.one_hot(),
        [0, 0, 0, 0, 1],
        "criterion 5: FAIL (worked five-value example label)"
    );

    // 10,000 generated instances agree with brute-force argmax at 100%.
    let mut rng = seeded(505);
    let mut sentences = Vec::new();
    while sentences.len() * 6 < 52_000 {
        let v = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 { rng.random_range(1.0..100.0) };
        sentences.push(tokenize(&format!(
            "growth was {:.2}% then {:.2}% then {:.2}% then {:.2}% then {:.2}% then {:.2}%",
            v(&mut rng),
            v(&mut rng),
            v(&mut rng),
            v(&mut rng),
            v(&mut rng),
            v(&mut rng)
        )));
    }
    let instances = make_magnitude_instances(&sentences, 506);
    assert!(
        instances.len() >= 10_000,
        "criterion 5: FAIL (only {} instances generated)",
        instances.len()
    );
    for inst in instances.iter().take(10_000) {
        // Brute force: exhaustive scan with lowest-index tie rule.
        let mut best = 0;
        for i in 0..5 {
            if inst.values[i] > inst.values[best] {
                best = i;
            }
        }
        assert_eq!(
            inst.label, best,
            "criterion 5: FAIL (label disagrees with brute force on {inst:?})"
        );
    }
    pass(
        "5 numeral machinery",
        format!(
            "worked sentence exact, five-value label reproduced, {} labels match brute force",
            instances.len().min(10_000)
        ),
    );
}

// ── criterion 6: metric fidelity ─────────────────────────────────────

#[test]
fn criterion_6_metric_fidelity() {
    let tol = 1e-9;
    let cm = |tp, tn, fp, fn_| ConfusionMatrix { tp, tn, fp, fn_ };

    assert!((mcc(&cm(5, 5, 0, 0)) - 1.0).abs() < tol);
    assert!((mcc(&cm(0, 0, 5, 5)) + 1.0).abs() < tol);
    assert!((mcc(&cm(6, 3, 2, 1)) - 16.0 / 1120f64.sqrt()).abs() < tol);
    assert!((f1(&cm(10, 0, 0, 0)) - 1.0).abs() < tol);
    assert!(f1(&cm(0, 9, 5, 5)).abs() < tol);
    assert!((f1(&cm(6, 0, 2, 1)) - 0.8).abs() < tol);
    assert!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap().abs() < tol);
    assert!((mse(&[1.0, 2.0], &[0.0, 0.0]).unwrap() - 2.5).abs() < tol);

    let v = volatility_from_returns(&[0.1, -0.1]).unwrap();
    assert!((v - 0.1f64.ln()).abs() < tol, "criterion 6: FAIL (vol hand example)");
    let floored = volatility_from_returns(&[0.02, 0.02, 0.02]).unwrap();
    assert!(
        (floored - VOLATILITY_VARIANCE_FLOOR.sqrt().ln()).abs() < tol,
        "criterion 6: FAIL (variance floor)"
    );

    // AUC vs the O(n^2) pair-count oracle on 50 random sets.
    let mut rng = seeded(606);
    for trial in 0..50 {
        let n = rng.random_range(4..80usize);
        let scores: Vec<f64> = (0..n)
            .map(|_| (rng.random_range(0..12) as f64) / 12.0)
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        let ours = roc_auc(&scores, &labels).unwrap();
        let mut num = 0.0;
        let mut pairs = 0u64;
        for i in 0..n {
            if !labels[i] {
                continue;
            }
            for j in 0..n {
                if labels[j] {
                    continue;
                }
                pairs += 1;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
        let oracle = if pairs == 0 { None } else { Some(num / pairs as f64) };
        match (ours, oracle) {
            (None, None) => {}
            (Some(a), Some(b)) => assert!(
                (a - b).abs() < 1e-12,
                "criterion 6: FAIL (trial {trial}: auc {a} vs oracle {b})"
            ),
            other => panic!("criterion 6: FAIL (trial {trial}: {other:?})"),
        }
    }

    // Volatility identities on 100 random windows.
    for _ in 0..100 {
        let n = rng.random_range(3..30usize);
        let returns: Vec<f64> = (0..n).map(|_| 0.02 * normal(&mut rng)).collect();
        let base = volatility_from_returns(&returns).unwrap();
        let shifted: Vec<f64> = returns.iter().map(|r| r + 0.013).collect();
        assert!(
            (volatility_from_returns(&shifted).unwrap() - base).abs() < 1e-9,
            "criterion 6: FAIL (mean translation)"
        );
        let mean = returns.iter().sum::<f64>() / n as f64;
        let scaled: Vec<f64> = returns.iter().map(|r| mean + 10.0 * (r - mean)).collect();
        assert!(
            (volatility_from_returns(&scaled).unwrap() - base - 10f64.ln()).abs() < 1e-9,
            "criterion 6: FAIL (ln(10) scaling)"
        );
    }

    // The price-window path agrees with the hand example.
    let w = PriceWindow::new(vec![100.0, 110.0, 99.0]).unwrap();
    let direct = volatility_from_returns(&[0.1, -0.1]).unwrap();
    let via_window = callcast_core::metrics::volatility(&w, 2).unwrap();
    assert!((direct - via_window).abs() < tol);

    pass(
        "6 metric fidelity",
        "unit examples at 1e-9, 50 AUC sets vs pair counting, 100 volatility identity windows"
            .to_string(),
    );
}

// ── criterion 7: trading identities ──────────────────────────────────

#[test]
fn criterion_7_trading_identities() {
    let mut rng = seeded(707);

    // Short-sell-all profit is exactly minus buy-all profit on any corpus.
    for trial in 0..10 {
        let (records, _) = generate(700 + trial, 25, &EffectSizes::default());
        let (_, buy) = simulate_strategy(Strategy::BuyAll, &records, 3, 0.0);
        let (_, short) = simulate_strategy(Strategy::ShortAll, &records, 3, 0.0);
        assert_eq!(
            buy.profit, -short.profit,
            "criterion 7: FAIL (trial {trial}: buy {} vs short {})",
            buy.profit, short.profit
        );
    }

    // Perfect-foresight dominance on 20 random event corpora.
    for trial in 0..20 {
        let events: Vec<EventPrices> = (0..30)
            .map(|i| EventPrices {
                ticker: format!("T{i}"),
                entry: Some(rng.random_range(5.0..300.0)),
                exit: Some(rng.random_range(5.0..300.0)),
            })
            .collect();
        let foresight: Vec<bool> = events
            .iter()
            .map(|e| e.exit.unwrap() > e.entry.unwrap())
            .collect();
        let best = simulate(&foresight, &events, 3).unwrap().cumulative_profit();
        let oracle: f64 = events
            .iter()
            .map(|e| (e.exit.unwrap() - e.entry.unwrap()).abs())
            .sum();
        assert!(
            (best - oracle).abs() < 1e-9,
            "criterion 7: FAIL (trial {trial}: foresight {best} vs oracle {oracle})"
        );
        for strat in [
            Strategy::BuyAll,
            Strategy::ShortAll,
            Strategy::Random { seed: trial as u64 },
        ] {
            let p = baseline(strat, &events, 3).cumulative_profit();
            assert!(
                p <= best + 1e-9,
                "criterion 7: FAIL (trial {trial}: {strat:?} profit {p} beats foresight {best})"
            );
        }
    }

    // Ledgers are deterministic in the seed.
    let (records, _) = generate(711, 30, &EffectSizes::default());
    let (la, _) = simulate_strategy(Strategy::Random { seed: 42 }, &records, 3, 0.0);
    let (lb, _) = simulate_strategy(Strategy::Random { seed: 42 }, &records, 3, 0.0);
    assert_eq!(la, lb, "criterion 7: FAIL (seeded ledgers differ)");
    let (lc, _) = simulate_strategy(Strategy::Random { seed: 43 }, &records, 3, 0.0);
    assert_ne!(la, lc, "criterion 7: FAIL (different seeds gave identical actions)");

    pass(
        "7 trading identities",
        "antisymmetry on 10 corpora, foresight dominance on 20, seed-deterministic ledgers"
            .to_string(),
    );
}

// ── criterion 8: learning signal orderings ───────────────────────────

const SIGNAL_SEEDS: [u64; 5] = [101, 102, 103, 104, 105];

fn signal_config(seed: u64) -> RunConfig {
    RunConfig {
        seed,
        d_t: 16,
        d_s: 16,
        token_blocks: 2,
        sentence_blocks: 2,
        heads: 2,
        max_sentences: 10,
        max_sentence_len: 18,
        ffn_mult: 2,
        probe_hidden: 6,
        k_preferences: 4,
        epochs: 12,
        batch: 8,
        lr: 0.004,
        pretrain_epochs: 2,
        pretrain_batch: 16,
        pretrain_lr: 0.003,
        search_iters: 60,
        ..RunConfig::default()
    }
}

/// One training run; returns (test MCC at horizon 3, wall seconds).
fn run_variant(
    seed: u64,
    effects: &EffectSizes,
    pretrain: bool,
    pareto: bool,
    text_only: bool,
) -> (f64, f64) {
    let started = Instant::now();
    let (records, _) = generate(seed, 200, effects);
    let cfg = signal_config(seed);
    let split = split_chronological(records).unwrap();
    let base = if pretrain {
        let (mut model, _) = pretrain_ncc(&split, &cfg).unwrap();
        pretrain_mc(&mut model, &split, &cfg).unwrap();
        Some(model)
    } else {
        None
    };
    let (model, _) = train(
        &split,
        &cfg,
        TrainOptions {
            pareto,
            text_only,
            base,
        },
    )
    .unwrap();
    let eval = evaluate(&model, &split.test).unwrap();
    (eval.metric(3).unwrap().mcc, started.elapsed().as_secs_f64())
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

#[test]
fn criterion_8_learning_signal_orderings() {
    let effects = EffectSizes::default();
    let mut full = Vec::new();
    let mut no_pretrain = Vec::new();
    let mut no_pareto = Vec::new();
    let mut text_only = Vec::new();
    let mut max_run_seconds = 0.0f64;

    for &seed in &SIGNAL_SEEDS {
        for (bucket, pre, par, text) in [
            (&mut full, true, true, false),
            (&mut no_pretrain, false, true, false),
            (&mut no_pareto, true, false, false),
            (&mut text_only, true, true, true),
        ] {
            let (m, secs) = run_variant(seed, &effects, pre, par, text);
            assert!(
                secs < 600.0,
                "criterion 8: FAIL (run took {secs:.0}s, limit 600s)"
            );
            max_run_seconds = max_run_seconds.max(secs);
            bucket.push(m);
        }
    }

    let m_full = median(full.clone());
    let m_nopre = median(no_pretrain.clone());
    let m_nopareto = median(no_pareto.clone());
    let m_text = median(text_only.clone());
    assert!(
        m_full >= m_nopre,
        "criterion 8: FAIL (full {m_full:.3} < w/o-pretrain {m_nopre:.3}; full={full:?} nopre={no_pretrain:?})"
    );
    assert!(
        m_full >= m_nopareto,
        "criterion 8: FAIL (full {m_full:.3} < w/o-pareto {m_nopareto:.3}; full={full:?} nopareto={no_pareto:?})"
    );
    assert!(
        m_full >= m_text,
        "criterion 8: FAIL (multi-modal {m_full:.3} < text-only {m_text:.3}; full={full:?} text={text_only:?})"
    );

    // Null corpus: no planted signal, median |MCC| stays under 0.15.
    let null = EffectSizes::null();
    let mut null_mccs = Vec::new();
    for &seed in &SIGNAL_SEEDS {
        let (m, secs) = run_variant(seed, &null, true, true, false);
        assert!(secs < 600.0, "criterion 8: FAIL (null run took {secs:.0}s)");
        null_mccs.push(m);
    }
    let m_null = median(null_mccs.clone());
    assert!(
        m_null.abs() < 0.15,
        "criterion 8: FAIL (null corpus median MCC {m_null:.3}; runs {null_mccs:?})"
    );

    pass(
        "8 learning signal",
        format!(
            "medians: full {m_full:.3} >= w/o-pretrain {m_nopre:.3}, >= w/o-pareto {m_nopareto:.3}, >= text-only {m_text:.3}; null {m_null:.3}; max run {max_run_seconds:.0}s"
        ),
    );
}

// ── criterion 9: report structure ────────────────────────────────────

#[test]
fn criterion_9_report_structure() {
    let (records, _) = generate(909, 30, &EffectSizes::default());
    let split = split_chronological(records).unwrap();

    // A freshly initialized model suffices: the criterion is about shape.
    let sentences: Vec<Vec<String>> = split
        .train
        .iter()
        .flat_map(|r| r.sentences.iter().map(|s| tokenize(&s.text)))
        .collect();
    let vocab = Vocab::build(&sentences);
    let cfg = signal_config(909);
    let model = Model::new(cfg.encoder_config(), vocab, 909).unwrap();

    let report = evaluate(&model, &split.test).unwrap();
    let horizons: Vec<usize> = report.horizons.iter().map(|h| h.horizon).collect();
    assert_eq!(
        horizons,
        HORIZONS.to_vec(),
        "criterion 9: FAIL (horizon set {horizons:?})"
    );
    let text = report.render();
    for n in HORIZONS {
        for key in [format!("mcc_{n}="), format!("f1_{n}="), format!("vol_mse_{n}=")] {
            assert!(text.contains(&key), "criterion 9: FAIL (missing {key})");
        }
    }

    // Perfect-label injection: MCC 1 and zero MSE at the train horizon.
    let labels: Vec<_> = split.test.iter().map(|r| compute_labels(r).unwrap()).collect();
    let preds: Vec<(f64, f64)> = labels.iter().map(|l| (l.returns[0], l.vols[0])).collect();
    let perfect = callcast_core::pipeline::evaluate_predictions(&preds, &labels).unwrap();
    let h3 = perfect.metric(3).unwrap();
    assert_eq!(h3.vol_mse, 0.0, "criterion 9: FAIL (perfect injection MSE)");
    let both = labels.iter().any(|l| l.movements[0]) && labels.iter().any(|l| !l.movements[0]);
    if both {
        assert_eq!(h3.mcc, 1.0, "criterion 9: FAIL (perfect injection MCC)");
    }

    // Simulation report carries exactly the profit and Sharpe-ratio shape.
    let (_, sim) = simulate_strategy(Strategy::BuyAll, &split.test, 3, 0.0);
    let sim_text = sim.render();
    assert!(sim_text.contains("profit="), "criterion 9: FAIL (no profit line)");
    assert!(
        sim_text.contains("sharpe_ratio="),
        "criterion 9: FAIL (no sharpe line)"
    );

    pass(
        "9 report structure",
        "horizons {3,7,15,30} with mcc/f1/vol_mse; simulation emits profit and sharpe".to_string(),
    );
}
