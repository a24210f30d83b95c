//! Scratch harness for tuning the learning-signal configuration.

use std::time::Instant;

use callcast_core::data::split_chronological;
use callcast_core::data::synthetic::{generate, EffectSizes};
use callcast_core::pipeline::{
    evaluate, pretrain_mc, pretrain_ncc, train, RunConfig, TrainOptions,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.002);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(8);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(101);
    let variant = args.get(4).map(|s| s.as_str()).unwrap_or("full");
    let null = args.get(5).map(|s| s.as_str()) == Some("null");
    let verbose = std::env::var("VERBOSE").is_ok();

    let effects = if null { EffectSizes::null() } else { EffectSizes::default() };
    let (records, _) = generate(seed, 200, &effects);

    let cfg = RunConfig {
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
        epochs,
        batch: 8,
        lr,
        pretrain_epochs: std::env::var("PRETRAIN_EPOCHS")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(2),
        pretrain_batch: 16,
        pretrain_lr: std::env::var("PRETRAIN_LR")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(0.003),
        search_iters: 60,
        ..RunConfig::default()
    };

    let (pretrain, pareto, text_only) = match variant {
        "full" => (true, true, false),
        "nopre" => (false, true, false),
        "nopareto" => (true, false, false),
        "textonly" => (true, true, true),
        other => panic!("unknown variant {other}"),
    };

    let split = split_chronological(records).unwrap();
    let t0 = Instant::now();
    let base = if pretrain {
        let (mut model, ncc) = pretrain_ncc(&split, &cfg).unwrap();
        let mc = pretrain_mc(&mut model, &split, &cfg).unwrap();
        if verbose {
            print!("{}", ncc.render());
            print!("{}", mc.render());
        }
        Some(model)
    } else {
        None
    };
    let (model, report) = train(
        &split,
        &cfg,
        TrainOptions {
            pareto,
            text_only,
            base,
        },
    )
    .unwrap();
    let train_time = t0.elapsed();

    if verbose {
        for run in &report.runs {
            let mean_a1: f64 =
                run.trajectory.iter().map(|p| p.alpha1).sum::<f64>() / run.trajectory.len() as f64;
            let (lf, ll) = (&run.trajectory[0], run.trajectory.last().unwrap());
            println!(
                "  k={} feas={} init_iters={} mean_alpha1={:.3} l1 {:.5}->{:.5} l2 {:.4}->{:.4} val_ret={:.5}",
                run.k, run.feasible, run.initial_iterations, mean_a1, lf.l1, ll.l1, lf.l2, ll.l2, run.val_return_mse
            );
        }
    }
    let eval = evaluate(&model, &split.test).unwrap();
    let h3 = eval.metric(3).unwrap();
    let train_eval = evaluate(&model, &split.train).unwrap();
    let h3t = train_eval.metric(3).unwrap();
    let chosen = report.runs.iter().find(|r| r.k == report.chosen_k).unwrap();
    let tr = &chosen.trajectory;
    let (first, last) = (&tr[0], &tr[tr.len() - 1]);
    println!(
        "variant={variant} null={null} seed={seed} lr={lr} epochs={epochs} mcc3={:.4} train_mcc3={:.4} f1_3={:.4} vol_mse3={:.4} chosen_k={} l1 {:.5}->{:.5} l2 {:.4}->{:.4} val_ret_mse={:.5} time={:.1}s",
        h3.mcc,
        h3t.mcc,
        h3.f1,
        h3.vol_mse,
        report.chosen_k,
        first.l1,
        last.l1,
        first.l2,
        last.l2,
        chosen.val_return_mse,
        train_time.as_secs_f64()
    );
}
