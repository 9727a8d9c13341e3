//! Double-entry bookkeeping for commercial banks.
//!
//! Each bank holds external and interbank assets plus cash (a claim on the
//! central bank) against external liabilities (deposits), interbank
//! liabilities and equity. Events post both sides at once, so the balance
//! identity holds exactly for any exact amount type (e.g. rationals).
//!
//! The money supply is the sum of deposits; cash held at the central bank is
//! not counted.

use std::fmt::{Debug, Display};

use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::error::{CircuitError, Result};

/// Numeric type usable as a ledger amount.
pub trait Amount: Num + Copy + PartialOrd + Debug + Display {}
impl<T: Num + Copy + PartialOrd + Debug + Display> Amount for T {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankLedger<T> {
    pub external_assets: T,
    pub interbank_assets: T,
    pub cash: T,
    pub external_liabilities: T,
    pub interbank_liabilities: T,
    pub equity: T,
}

impl<T: Amount> BankLedger<T> {
    /// Builds a ledger, checking the balance identity.
    pub fn new(
        external_assets: T,
        interbank_assets: T,
        cash: T,
        external_liabilities: T,
        interbank_liabilities: T,
        equity: T,
    ) -> Result<Self> {
        let l = Self {
            external_assets,
            interbank_assets,
            cash,
            external_liabilities,
            interbank_liabilities,
            equity,
        };
        l.check()?;
        Ok(l)
    }

    /// A bank with a single asset and liability line, as in the one-bank picture.
    pub fn simple(assets: T, liabilities: T, equity: T) -> Result<Self> {
        Self::new(assets, T::zero(), T::zero(), liabilities, T::zero(), equity)
    }

    pub fn total_assets(&self) -> T {
        self.external_assets + self.interbank_assets + self.cash
    }

    pub fn total_liabilities(&self) -> T {
        self.external_liabilities + self.interbank_liabilities
    }

    /// Loan book used by the capital constraint.
    pub fn loans(&self) -> T {
        self.external_assets + self.interbank_assets
    }

    /// Assets minus liabilities and equity; zero for a consistent ledger.
    pub fn imbalance(&self) -> T {
        self.total_assets() - self.total_liabilities() - self.equity
    }

    pub fn check(&self) -> Result<()> {
        if self.imbalance() != T::zero() {
            return Err(CircuitError::Identity(format!(
                "assets {} != liabilities {} + equity {}",
                self.total_assets(),
                self.total_liabilities(),
                self.equity
            )));
        }
        for (name, v) in [
            ("external_assets", self.external_assets),
            ("interbank_assets", self.interbank_assets),
            ("cash", self.cash),
            ("external_liabilities", self.external_liabilities),
            ("interbank_liabilities", self.interbank_liabilities),
        ] {
            if v < T::zero() {
                return Err(CircuitError::Ledger(format!("{name} is negative ({v})")));
            }
        }
        Ok(())
    }

    /// The six entries in display order.
    pub fn column(&self) -> [T; 6] {
        [
            self.external_assets,
            self.interbank_assets,
            self.cash,
            self.external_liabilities,
            self.interbank_liabilities,
            self.equity,
        ]
    }
}

pub const LEDGER_ROWS: [&str; 6] = [
    "external_assets",
    "interbank_assets",
    "cash",
    "external_liabilities",
    "interbank_liabilities",
    "equity",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Loan granted by creating a matching deposit at the same bank.
    IssueLoanSingle,
    /// Borrower repays `amount` out of deposits and pays `interest` on top.
    RepayWithInterest,
    /// Loan of `amount` written off against equity.
    DefaultLoss,
    /// Loan paid out of the bank's cash reserves.
    LendFromCash,
    /// Borrower deposits `amount` at a bank, which takes it in as cash.
    DepositAtOther,
    /// `counterparties[0]` lends cash to `counterparties[1]`.
    InterbankLend,
    /// Cash borrowed from the central bank against performing assets.
    CentralBankRepo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerEvent<T> {
    pub kind: EventKind,
    pub amount: T,
    pub counterparties: Vec<usize>,
    /// Interest paid on top of principal (repayments only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interest: Option<T>,
    /// Collateral haircut for central-bank repos, in `[0, 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub haircut: Option<T>,
}

impl<T: Amount> LedgerEvent<T> {
    pub fn new(kind: EventKind, amount: T, counterparties: Vec<usize>) -> Self {
        Self {
            kind,
            amount,
            counterparties,
            interest: None,
            haircut: None,
        }
    }

    pub fn issue_loan(bank: usize, amount: T) -> Self {
        Self::new(EventKind::IssueLoanSingle, amount, vec![bank])
    }

    pub fn repay(bank: usize, principal: T, interest: T) -> Self {
        Self {
            interest: Some(interest),
            ..Self::new(EventKind::RepayWithInterest, principal, vec![bank])
        }
    }

    pub fn default_loss(bank: usize, amount: T) -> Self {
        Self::new(EventKind::DefaultLoss, amount, vec![bank])
    }

    pub fn lend_from_cash(bank: usize, amount: T) -> Self {
        Self::new(EventKind::LendFromCash, amount, vec![bank])
    }

    pub fn deposit_at(bank: usize, amount: T) -> Self {
        Self::new(EventKind::DepositAtOther, amount, vec![bank])
    }

    pub fn interbank_lend(lender: usize, borrower: usize, amount: T) -> Self {
        Self::new(EventKind::InterbankLend, amount, vec![lender, borrower])
    }

    pub fn repo(bank: usize, amount: T, haircut: T) -> Self {
        Self {
            haircut: Some(haircut),
            ..Self::new(EventKind::CentralBankRepo, amount, vec![bank])
        }
    }
}

fn need<T: Amount>(what: &str, have: T, want: T) -> Result<()> {
    if have < want {
        Err(CircuitError::Ledger(format!(
            "{what}: have {have}, need {want} (shortfall {})",
            want - have
        )))
    } else {
        Ok(())
    }
}

fn party(ev_parties: &[usize], i: usize, n: usize) -> Result<usize> {
    let b = *ev_parties
        .get(i)
        .ok_or_else(|| CircuitError::Ledger(format!("event needs counterparty #{i}")))?;
    if b >= n {
        return Err(CircuitError::Ledger(format!("unknown bank {b}")));
    }
    Ok(b)
}

/// Applies one event, returning the new ledgers and the change in money supply.
pub fn apply<T: Amount>(ledgers: &[BankLedger<T>], ev: &LedgerEvent<T>) -> Result<(Vec<BankLedger<T>>, T)> {
    if !(ev.amount > T::zero()) {
        return Err(CircuitError::Ledger(format!("amount must be positive, got {}", ev.amount)));
    }
    let n = ledgers.len();
    let a = ev.amount;
    let mut out = ledgers.to_vec();
    let b = party(&ev.counterparties, 0, n)?;
    match ev.kind {
        EventKind::IssueLoanSingle => {
            out[b].external_assets = out[b].external_assets + a;
            out[b].external_liabilities = out[b].external_liabilities + a;
        }
        EventKind::RepayWithInterest => {
            let i = ev.interest.unwrap_or(T::zero());
            if i < T::zero() {
                return Err(CircuitError::Ledger(format!("negative interest {i}")));
            }
            need("outstanding loans", out[b].external_assets, a)?;
            need("borrower deposits", out[b].external_liabilities, a)?;
            out[b].external_assets = out[b].external_assets - a;
            out[b].external_liabilities = out[b].external_liabilities - a;
            out[b].cash = out[b].cash + i;
            out[b].equity = out[b].equity + i;
        }
        EventKind::DefaultLoss => {
            need("outstanding loans", out[b].external_assets, a)?;
            out[b].external_assets = out[b].external_assets - a;
            out[b].equity = out[b].equity - a;
        }
        EventKind::LendFromCash => {
            need("cash", out[b].cash, a)?;
            out[b].cash = out[b].cash - a;
            out[b].external_assets = out[b].external_assets + a;
        }
        EventKind::DepositAtOther => {
            out[b].cash = out[b].cash + a;
            out[b].external_liabilities = out[b].external_liabilities + a;
        }
        EventKind::InterbankLend => {
            let c = party(&ev.counterparties, 1, n)?;
            if b == c {
                return Err(CircuitError::Ledger("a bank cannot lend to itself".into()));
            }
            need("lender cash", out[b].cash, a)?;
            out[b].cash = out[b].cash - a;
            out[b].interbank_assets = out[b].interbank_assets + a;
            out[c].cash = out[c].cash + a;
            out[c].interbank_liabilities = out[c].interbank_liabilities + a;
        }
        EventKind::CentralBankRepo => {
            let h = ev.haircut.unwrap_or(T::zero());
            if h < T::zero() || !(h < T::one()) {
                return Err(CircuitError::Ledger(format!("haircut {h} outside [0, 1)")));
            }
            need("collateral", out[b].external_assets, a / (T::one() - h))?;
            out[b].cash = out[b].cash + a;
            out[b].interbank_liabilities = out[b].interbank_liabilities + a;
        }
    }
    for l in &out {
        l.check()?;
    }
    let before = ledgers.iter().fold(T::zero(), |s, l| s + l.external_liabilities);
    let after = out.iter().fold(T::zero(), |s, l| s + l.external_liabilities);
    Ok((out, after - before))
}

/// Applies a script of events, returning every intermediate state
/// (starting with the input) and the per-event money deltas.
pub fn replay<T: Amount>(
    initial: &[BankLedger<T>],
    events: &[LedgerEvent<T>],
) -> Result<(Vec<Vec<BankLedger<T>>>, Vec<T>)> {
    let mut states = vec![initial.to_vec()];
    let mut deltas = Vec::with_capacity(events.len());
    for ev in events {
        let (next, d) = apply(states.last().unwrap(), ev)?;
        states.push(next);
        deltas.push(d);
    }
    Ok((states, deltas))
}

/// The three snapshots of a two-bank loan: before, after the deposit lands
/// at the second bank, and after the interbank loan restores liquidity.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBankSequence<T> {
    pub steps: [[BankLedger<T>; 2]; 3],
    pub events: Vec<LedgerEvent<T>>,
    pub money_delta: T,
}

/// Bank 0 lends `amount` out of cash, the borrower deposits it at bank 1, and
/// bank 1 lends the excess cash back to bank 0. If bank 0 lacks the cash and
/// `repo_haircut` is set, the shortfall is first borrowed from the central bank.
pub fn two_bank_creation<T: Amount>(
    bank1: BankLedger<T>,
    bank2: BankLedger<T>,
    amount: T,
    repo_haircut: Option<T>,
) -> Result<TwoBankSequence<T>> {
    bank1.check()?;
    bank2.check()?;
    let start = [bank1, bank2];
    if amount == T::zero() {
        return Ok(TwoBankSequence {
            steps: [start; 3],
            events: vec![],
            money_delta: T::zero(),
        });
    }
    let mut events = Vec::new();
    if bank1.cash < amount {
        match repo_haircut {
            Some(h) => events.push(LedgerEvent::repo(0, amount - bank1.cash, h)),
            None => {
                return Err(CircuitError::Ledger(format!(
                    "liquidity: bank 0 holds {} cash, needs {amount}, no central-bank fallback",
                    bank1.cash
                )))
            }
        }
    }
    events.push(LedgerEvent::lend_from_cash(0, amount));
    events.push(LedgerEvent::deposit_at(1, amount));
    let split = events.len();
    events.push(LedgerEvent::interbank_lend(1, 0, amount));
    let (states, deltas) = replay(&start, &events)?;
    let two = |v: &Vec<BankLedger<T>>| [v[0], v[1]];
    Ok(TwoBankSequence {
        steps: [start, two(&states[split]), two(&states[split + 1])],
        money_delta: deltas.iter().fold(T::zero(), |s, &d| s + d),
        events,
    })
}

/// Capital adequacy: `equity > nu_b * loans`. Returns the verdict and the slack.
pub fn capital_check<T: Amount>(ledger: &BankLedger<T>, nu_b: T) -> (bool, T) {
    let slack = ledger.equity - nu_b * ledger.loans();
    (slack > T::zero(), slack)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_checked_on_construction() {
        assert!(BankLedger::new(1, 1, 1, 1, 1, 2).is_err());
        assert!(BankLedger::new(1, 1, 1, 1, 1, 1).is_ok());
    }

    #[test]
    fn cash_shortfall_named() {
        let l = [BankLedger::new(0, 0, 1, 1, 0, 0).unwrap()];
        let err = apply(&l, &LedgerEvent::lend_from_cash(0, 3)).unwrap_err();
        assert!(err.to_string().contains("shortfall 2"), "{err}");
    }

    #[test]
    fn non_positive_amount_rejected() {
        let l = [BankLedger::simple(1, 1, 0).unwrap()];
        assert!(apply(&l, &LedgerEvent::issue_loan(0, 0)).is_err());
    }

    #[test]
    fn repo_respects_haircut() {
        let l = [BankLedger::new(10.0, 0.0, 0.0, 8.0, 0.0, 2.0).unwrap()];
        assert!(apply(&l, &LedgerEvent::repo(0, 6.0, 0.5)).is_err());
        let (out, d) = apply(&l, &LedgerEvent::repo(0, 5.0, 0.5)).unwrap();
        assert_eq!(out[0].cash, 5.0);
        assert_eq!(out[0].interbank_liabilities, 5.0);
        assert_eq!(d, 0.0);
    }
}
