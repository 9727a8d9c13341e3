//! Double-entry replays of money creation and destruction.

use circuitlab_core::ledger::{replay, two_bank_creation, BankLedger, LedgerEvent, LEDGER_ROWS};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::Preset;
use crate::config::RunSettings;
use crate::output::{csv_artifact, num, RunOutput};
use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerMode {
    /// Loan paid out of cash, deposited at the second bank, lent back.
    TwoBank,
    /// Each script is replayed from the initial books.
    Scripts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerScenario {
    pub figure: u32,
    pub mode: LedgerMode,
    pub banks: Vec<BankLedger<f64>>,
    /// Loan size in `two_bank` mode.
    pub amount: f64,
    /// Central-bank fallback haircut when the lender lacks cash.
    pub repo_haircut: Option<f64>,
    pub scripts: Vec<Vec<LedgerEvent<f64>>>,
}

impl Preset for LedgerScenario {
    const FIGURES: &'static [u32] = &[9, 10];
    const DEFAULT_FIGURE: u32 = 10;

    fn preset(figure: u32) -> (Self, RunSettings) {
        let run = RunSettings::new(1, 1.0, 1.0, 1);
        let s = if figure == 9 {
            let issue = LedgerEvent::issue_loan(0, 2.0);
            Self {
                figure,
                mode: LedgerMode::Scripts,
                banks: vec![BankLedger::simple(20.0, 15.0, 5.0).expect("balanced")],
                amount: 2.0,
                repo_haircut: None,
                scripts: vec![
                    vec![issue.clone(), LedgerEvent::repay(0, 2.0, 0.5)],
                    vec![issue, LedgerEvent::default_loss(0, 2.0)],
                ],
            }
        } else {
            Self {
                figure,
                mode: LedgerMode::TwoBank,
                banks: vec![
                    BankLedger::new(19.0, 6.0, 3.0, 20.0, 3.0, 5.0).expect("balanced"),
                    BankLedger::new(24.0, 9.0, 4.0, 25.0, 7.0, 5.0).expect("balanced"),
                ],
                amount: 2.0,
                repo_haircut: None,
                scripts: Vec::new(),
            }
        };
        (s, run)
    }
}

const HEADER: [&str; 11] = [
    "script",
    "step",
    "event",
    "bank",
    "external_assets",
    "interbank_assets",
    "cash",
    "external_liabilities",
    "interbank_liabilities",
    "equity",
    "money_delta",
];

fn rows_for(script: usize, step: usize, event: &str, books: &[BankLedger<f64>], delta: f64) -> Vec<Vec<String>> {
    books
        .iter()
        .enumerate()
        .map(|(b, l)| {
            let mut r = vec![script.to_string(), step.to_string(), event.to_string(), b.to_string()];
            r.extend(l.column().iter().map(|&v| num(v)));
            r.push(num(delta));
            r
        })
        .collect()
}

fn kind_name(ev: &LedgerEvent<f64>) -> String {
    serde_json::to_value(ev.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

pub(super) fn run(p: &LedgerScenario, _r: &RunSettings) -> Result<RunOutput> {
    debug_assert_eq!(HEADER[4..10], LEDGER_ROWS);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    match p.mode {
        LedgerMode::TwoBank => {
            if p.banks.len() != 2 {
                return Err(CliError::schema("parameters.banks", "two_bank mode needs exactly two banks"));
            }
            let seq = two_bank_creation(p.banks[0], p.banks[1], p.amount, p.repo_haircut)?;
            let labels = ["start", "deposit_moved", "interbank_loan"];
            for (k, step) in seq.steps.iter().enumerate() {
                rows.extend(rows_for(0, k, labels[k], step, if k == 0 { 0.0 } else { seq.money_delta }));
            }
            summary.push(json!({
                "events": seq.events.iter().map(kind_name).collect::<Vec<_>>(),
                "money_delta": seq.money_delta,
            }));
        }
        LedgerMode::Scripts => {
            if p.scripts.is_empty() {
                return Err(CliError::schema("parameters.scripts", "scripts mode needs at least one script"));
            }
            for (s, script) in p.scripts.iter().enumerate() {
                let (states, deltas) = replay(&p.banks, script)?;
                rows.extend(rows_for(s, 0, "start", &states[0], 0.0));
                for (k, ev) in script.iter().enumerate() {
                    rows.extend(rows_for(s, k + 1, &kind_name(ev), &states[k + 1], deltas[k]));
                }
                let last = states.last().expect("initial state kept");
                summary.push(json!({
                    "money_delta": deltas.iter().sum::<f64>(),
                    "final": last.iter().map(|l| [l.total_assets(), l.total_liabilities(), l.equity]).collect::<Vec<_>>(),
                }));
            }
        }
    }
    Ok(RunOutput {
        artifacts: vec![csv_artifact("ledger.csv", &HEADER, rows)],
        summary: json!({ "model": "ledger", "scripts": summary }),
    })
}
