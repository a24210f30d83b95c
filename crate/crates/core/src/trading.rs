//! Single-share trading simulation driven by movement predictions.
//!
//! Per event: enter on the event day, exit tau days later, long on a
//! predicted rise and short on a predicted fall. No fees, one share each.

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Action bit of the profit formula: profit = (exit - entry) * (-1)^action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    /// Predicted rise: buy at entry, sell at exit.
    Long = 0,
    /// Predicted fall: short sell at entry, buy back at exit.
    Short = 1,
}

/// One event the simulator may trade: prices may be missing, in which case
/// the event is skipped and recorded.
#[derive(Clone, Debug)]
pub struct EventPrices {
    pub ticker: String,
    pub entry: Option<f64>,
    pub exit: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub ticker: String,
    pub entry_day: i64,
    pub exit_day: i64,
    pub entry_price: f64,
    pub exit_price: f64,
    pub action: Action,
}

impl Trade {
    pub fn profit(&self) -> f64 {
        let sign = match self.action {
            Action::Long => 1.0,
            Action::Short => -1.0,
        };
        (self.exit_price - self.entry_price) * sign
    }

    /// Return rate with the entry price as the base.
    pub fn return_rate(&self) -> f64 {
        self.profit() / self.entry_price
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedEvent {
    pub ticker: String,
    pub reason: String,
}

/// Ordered record of executed trades plus skipped events.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TradeLedger {
    pub trades: Vec<Trade>,
    pub skipped: Vec<SkippedEvent>,
}

impl TradeLedger {
    pub fn cumulative_profit(&self) -> f64 {
        self.trades.iter().map(Trade::profit).sum()
    }

    pub fn return_rates(&self) -> Vec<f64> {
        self.trades.iter().map(Trade::return_rate).collect()
    }

    /// Line-delimited trade records followed by a summary block.
    pub fn render(&self, risk_free_rate: f64) -> String {
        let mut out = String::new();
        for t in &self.trades {
            out.push_str(&serde_json::to_string(t).expect("trade serializes"));
            out.push('\n');
        }
        out.push_str(&format!("profit={}\n", self.cumulative_profit()));
        match sharpe(self, risk_free_rate) {
            Ok(s) => out.push_str(&format!("sharpe_ratio={s}\n")),
            Err(_) => out.push_str("sharpe_ratio=absent\n"),
        }
        out.push_str(&format!("trades={}\n", self.trades.len()));
        out.push_str(&format!("skipped={}\n", self.skipped.len()));
        out
    }
}

/// Fixed-action and coin-flip baselines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Strategy {
    BuyAll,
    ShortAll,
    Random { seed: u64 },
}

fn run(events: &[EventPrices], actions: impl Iterator<Item = Action>, tau: i64) -> TradeLedger {
    let mut ledger = TradeLedger::default();
    for (ev, action) in events.iter().zip(actions) {
        match (ev.entry, ev.exit) {
            (Some(entry), Some(exit)) => ledger.trades.push(Trade {
                ticker: ev.ticker.clone(),
                entry_day: 0,
                exit_day: tau,
                entry_price: entry,
                exit_price: exit,
                action,
            }),
            (None, _) => ledger.skipped.push(SkippedEvent {
                ticker: ev.ticker.clone(),
                reason: "missing entry price".to_string(),
            }),
            (_, None) => ledger.skipped.push(SkippedEvent {
                ticker: ev.ticker.clone(),
                reason: "missing exit price".to_string(),
            }),
        }
    }
    ledger
}

/// Simulate model-driven trading: one trade per event, long on predicted
/// rise, short on predicted fall.
pub fn simulate(predictions: &[bool], events: &[EventPrices], tau: i64) -> Result<TradeLedger> {
    if predictions.len() != events.len() {
        return Err(Error::contract(format!(
            "{} predictions for {} events",
            predictions.len(),
            events.len()
        )));
    }
    let actions = predictions
        .iter()
        .map(|&rise| if rise { Action::Long } else { Action::Short });
    Ok(run(events, actions, tau))
}

/// Simulate one of the baseline strategies.
pub fn baseline(strategy: Strategy, events: &[EventPrices], tau: i64) -> TradeLedger {
    match strategy {
        Strategy::BuyAll => run(events, std::iter::repeat(Action::Long), tau),
        Strategy::ShortAll => run(events, std::iter::repeat(Action::Short), tau),
        Strategy::Random { seed } => {
            let mut rng = seeded(seed);
            let actions: Vec<Action> = (0..events.len())
                .map(|_| {
                    if rng.random::<bool>() {
                        Action::Long
                    } else {
                        Action::Short
                    }
                })
                .collect();
            run(events, actions.into_iter(), tau)
        }
    }
}

/// Sharpe ratio of per-trade return rates: (mean - R_f) / sample std.
/// Undefined (error) with fewer than 2 trades or zero variance.
pub fn sharpe(ledger: &TradeLedger, risk_free_rate: f64) -> Result<f64> {
    let rates = ledger.return_rates();
    if rates.len() < 2 {
        return Err(Error::contract(format!(
            "sharpe ratio needs >= 2 trades, got {}",
            rates.len()
        )));
    }
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let ss: f64 = rates.iter().map(|&r| (r - mean) * (r - mean)).sum();
    let std = (ss / (n - 1.0)).sqrt();
    if std == 0.0 {
        return Err(Error::contract("sharpe ratio undefined: zero return variance".to_string()));
    }
    Ok((mean - risk_free_rate) / std)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(ticker: &str, entry: f64, exit: f64) -> EventPrices {
        EventPrices {
            ticker: ticker.to_string(),
            entry: Some(entry),
            exit: Some(exit),
        }
    }

    #[test]
    fn long_and_short_profit_signs() {
        let events = vec![ev("A", 10.0, 12.0)];
        let up = simulate(&[true], &events, 3).unwrap();
        assert_eq!(up.cumulative_profit(), 2.0);
        let down = simulate(&[false], &events, 3).unwrap();
        assert_eq!(down.cumulative_profit(), -2.0);
    }

    #[test]
    fn short_all_negates_buy_all() {
        let events = vec![ev("A", 10.0, 12.0), ev("B", 55.0, 50.5), ev("C", 7.0, 7.0)];
        let buy = baseline(Strategy::BuyAll, &events, 3);
        let short = baseline(Strategy::ShortAll, &events, 3);
        assert_eq!(short.cumulative_profit(), -buy.cumulative_profit());
    }

    #[test]
    fn random_strategy_is_seed_deterministic() {
        let events = vec![ev("A", 10.0, 12.0), ev("B", 55.0, 50.5), ev("C", 7.0, 9.0)];
        let a = baseline(Strategy::Random { seed: 5 }, &events, 3);
        let b = baseline(Strategy::Random { seed: 5 }, &events, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn perfect_foresight_dominates() {
        use rand::RngExt;
        let mut rng = crate::rng::seeded(9);
        let events: Vec<EventPrices> = (0..40)
            .map(|i| {
                ev(
                    &format!("T{i}"),
                    rng.random_range(5.0..200.0),
                    rng.random_range(5.0..200.0),
                )
            })
            .collect();
        let foresight: Vec<bool> = events
            .iter()
            .map(|e| e.exit.unwrap() > e.entry.unwrap())
            .collect();
        let best = simulate(&foresight, &events, 3).unwrap().cumulative_profit();
        // Oracle: per event the best of both actions.
        let oracle: f64 = events
            .iter()
            .map(|e| (e.exit.unwrap() - e.entry.unwrap()).abs())
            .sum();
        assert!((best - oracle).abs() < 1e-12);
        for strat in [
            Strategy::BuyAll,
            Strategy::ShortAll,
            Strategy::Random { seed: 1 },
        ] {
            assert!(baseline(strat, &events, 3).cumulative_profit() <= best + 1e-12);
        }
    }

    #[test]
    fn missing_prices_are_skipped_with_reason() {
        let events = vec![
            ev("A", 10.0, 12.0),
            EventPrices {
                ticker: "B".to_string(),
                entry: None,
                exit: Some(5.0),
            },
        ];
        let ledger = simulate(&[true, true], &events, 3).unwrap();
        assert_eq!(ledger.trades.len(), 1);
        assert_eq!(ledger.skipped.len(), 1);
        assert!(ledger.skipped[0].reason.contains("entry"));
    }

    #[test]
    fn sharpe_hand_example() {
        // returns [0.1, 0.2, 0.3]: mean 0.2, sample std 0.1 -> sharpe 2.0
        let ledger = TradeLedger {
            trades: vec![
                Trade {
                    ticker: "A".into(),
                    entry_day: 0,
                    exit_day: 3,
                    entry_price: 100.0,
                    exit_price: 110.0,
                    action: Action::Long,
                },
                Trade {
                    ticker: "B".into(),
                    entry_day: 0,
                    exit_day: 3,
                    entry_price: 100.0,
                    exit_price: 120.0,
                    action: Action::Long,
                },
                Trade {
                    ticker: "C".into(),
                    entry_day: 0,
                    exit_day: 3,
                    entry_price: 100.0,
                    exit_price: 130.0,
                    action: Action::Long,
                },
            ],
            skipped: vec![],
        };
        assert!((sharpe(&ledger, 0.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sharpe_zero_numerator_and_antisymmetry() {
        let mk = |rets: &[f64]| TradeLedger {
            trades: rets
                .iter()
                .map(|&r| Trade {
                    ticker: "A".into(),
                    entry_day: 0,
                    exit_day: 3,
                    entry_price: 100.0,
                    exit_price: 100.0 * (1.0 + r),
                    action: Action::Long,
                })
                .collect(),
            skipped: vec![],
        };
        let s = sharpe(&mk(&[0.1, 0.3]), 0.2).unwrap();
        assert!(s.abs() < 1e-12);
        let pos = sharpe(&mk(&[0.1, 0.3, -0.05]), 0.0).unwrap();
        let neg = sharpe(&mk(&[-0.1, -0.3, 0.05]), 0.0).unwrap();
        assert!((pos + neg).abs() < 1e-9);
    }

    #[test]
    fn sharpe_undefined_cases() {
        let one = TradeLedger {
            trades: vec![Trade {
                ticker: "A".into(),
                entry_day: 0,
                exit_day: 3,
                entry_price: 10.0,
                exit_price: 11.0,
                action: Action::Long,
            }],
            skipped: vec![],
        };
        assert!(sharpe(&one, 0.0).is_err());
    }

    #[test]
    fn profit_is_order_invariant_and_flips_with_actions() {
        let events = vec![ev("A", 10.0, 12.0), ev("B", 55.0, 50.5), ev("C", 7.0, 9.0)];
        let preds = [true, false, true];
        let p = simulate(&preds, &events, 3).unwrap().cumulative_profit();
        let mut rev_events = events.clone();
        rev_events.reverse();
        let mut rev_preds = preds;
        rev_preds.reverse();
        let p_rev = simulate(&rev_preds, &rev_events, 3).unwrap().cumulative_profit();
        assert!((p - p_rev).abs() < 1e-12);
        let flipped: Vec<bool> = preds.iter().map(|b| !b).collect();
        let p_flip = simulate(&flipped, &events, 3).unwrap().cumulative_profit();
        assert_eq!(p_flip, -p);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        // `Strategy` here is the trading enum; qualify proptest's trait.
        fn arb_events() -> impl proptest::strategy::Strategy<Value = Vec<(f64, f64, bool)>> {
            proptest::collection::vec(
                (0.5f64..500.0, 0.5f64..500.0, proptest::bool::ANY),
                1..40,
            )
        }

        proptest! {
            /// Flipping every action bit negates cumulative profit exactly.
            #[test]
            fn action_flip_negates_profit(rows in arb_events()) {
                let events: Vec<EventPrices> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, &(entry, exit, _))| ev(&format!("T{i}"), entry, exit))
                    .collect();
                let preds: Vec<bool> = rows.iter().map(|r| r.2).collect();
                let flipped: Vec<bool> = preds.iter().map(|b| !b).collect();
                let p = simulate(&preds, &events, 3).unwrap().cumulative_profit();
                let q = simulate(&flipped, &events, 3).unwrap().cumulative_profit();
                prop_assert_eq!(p, -q);
            }

            /// Perfect foresight is never beaten by any prediction vector.
            #[test]
            fn foresight_dominates_any_predictions(rows in arb_events()) {
                let events: Vec<EventPrices> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, &(entry, exit, _))| ev(&format!("T{i}"), entry, exit))
                    .collect();
                let arbitrary: Vec<bool> = rows.iter().map(|r| r.2).collect();
                let foresight: Vec<bool> = events
                    .iter()
                    .map(|e| e.exit.unwrap() > e.entry.unwrap())
                    .collect();
                let best = simulate(&foresight, &events, 3).unwrap().cumulative_profit();
                let other = simulate(&arbitrary, &events, 3).unwrap().cumulative_profit();
                prop_assert!(other <= best + 1e-9);
            }
        }
    }
}
