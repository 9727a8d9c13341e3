use circuitlab_core::ledger::*;
use num_rational::Ratio;
use proptest::prelude::*;

type Q = Ratio<i64>;

fn q(n: i64, d: i64) -> Q {
    Ratio::new(n, d)
}

fn triple(l: &BankLedger<Q>) -> (Q, Q, Q) {
    (l.total_assets(), l.total_liabilities(), l.equity)
}

#[test]
fn single_bank_loan_lifecycle() {
    let start = vec![BankLedger::simple(q(20, 1), q(15, 1), q(5, 1)).unwrap()];
    let (issued, d) = apply(&start, &LedgerEvent::issue_loan(0, q(2, 1))).unwrap();
    assert_eq!(triple(&issued[0]), (q(22, 1), q(17, 1), q(5, 1)));
    assert_eq!(d, q(2, 1));

    let (repaid, d) = apply(&issued, &LedgerEvent::repay(0, q(2, 1), q(1, 2))).unwrap();
    assert_eq!(triple(&repaid[0]), (q(41, 2), q(15, 1), q(11, 2)));
    assert_eq!(d, q(-2, 1));

    let (defaulted, d) = apply(&issued, &LedgerEvent::default_loss(0, q(2, 1))).unwrap();
    assert_eq!(triple(&defaulted[0]), (q(20, 1), q(17, 1), q(3, 1)));
    assert_eq!(d, q(0, 1));
}

#[test]
fn two_bank_sequence_matches_table() {
    let b1 = BankLedger::new(19, 6, 3, 20, 3, 5).unwrap();
    let b2 = BankLedger::new(24, 9, 4, 25, 7, 5).unwrap();
    let seq = two_bank_creation(b1, b2, 2, None).unwrap();
    assert_eq!(seq.steps[0][0].column(), [19, 6, 3, 20, 3, 5]);
    assert_eq!(seq.steps[0][1].column(), [24, 9, 4, 25, 7, 5]);
    assert_eq!(seq.steps[1][0].column(), [21, 6, 1, 20, 3, 5]);
    assert_eq!(seq.steps[1][1].column(), [24, 9, 6, 27, 7, 5]);
    assert_eq!(seq.steps[2][0].column(), [21, 6, 3, 20, 5, 5]);
    assert_eq!(seq.steps[2][1].column(), [24, 11, 4, 27, 7, 5]);
    assert_eq!(seq.money_delta, 2);
    for step in &seq.steps {
        assert!(step.iter().all(|b| b.equity == 5));
    }
}

#[test]
fn zero_amount_changes_nothing() {
    let b1 = BankLedger::new(19, 6, 3, 20, 3, 5).unwrap();
    let b2 = BankLedger::new(24, 9, 4, 25, 7, 5).unwrap();
    let seq = two_bank_creation(b1, b2, 0, None).unwrap();
    assert!(seq.steps.iter().all(|s| *s == [b1, b2]));
}

#[test]
fn illiquid_lender_needs_central_bank() {
    let b1 = BankLedger::new(19, 6, 1, 20, 1, 5).unwrap();
    let b2 = BankLedger::new(24, 9, 4, 25, 7, 5).unwrap();
    let err = two_bank_creation(b1, b2, 2, None).unwrap_err();
    assert!(err.to_string().contains("liquidity"));
    let seq = two_bank_creation(b1, b2, 2, Some(0)).unwrap();
    assert_eq!(seq.events[0].kind, EventKind::CentralBankRepo);
    assert_eq!(seq.steps[1][0].interbank_liabilities, 2);
    assert_eq!(seq.steps[1][0].cash, 0);
}

#[test]
fn capital_check_examples() {
    let l = BankLedger::simple(22.0, 17.0, 5.0).unwrap();
    let (ok, slack): (bool, f64) = capital_check(&l, 0.1);
    assert!(ok);
    assert!((slack - 2.8).abs() < 1e-12);
    assert!(!capital_check(&BankLedger::simple(3.0, 3.0, 0.0).unwrap(), 0.1).0);
    assert!(capital_check(&BankLedger::new(0.0, 0.0, 4.0, 0.0, 0.0, 4.0).unwrap(), 0.5).0);
}

#[test]
fn events_round_trip_through_json() {
    let ev = LedgerEvent::repay(0, 2.0, 0.5);
    let s = serde_json::to_string(&ev).unwrap();
    assert!(s.contains("\"repay_with_interest\""));
    assert_eq!(serde_json::from_str::<LedgerEvent<f64>>(&s).unwrap(), ev);
    let bad = r#"{"kind":"issue_loan_single","amount":1.0,"counterparties":[0],"colour":1}"#;
    assert!(serde_json::from_str::<LedgerEvent<f64>>(bad).is_err());
}

fn arb_event() -> impl Strategy<Value = LedgerEvent<Q>> {
    (0..7u8, 1..20i64, 0..3usize, 0..3usize, 0..5i64).prop_map(|(k, a, i, j, r)| {
        let a = q(a, 2);
        match k {
            0 => LedgerEvent::issue_loan(i, a),
            1 => LedgerEvent::repay(i, a, q(r, 4)),
            2 => LedgerEvent::default_loss(i, a),
            3 => LedgerEvent::lend_from_cash(i, a),
            4 => LedgerEvent::deposit_at(i, a),
            5 => LedgerEvent::interbank_lend(i, (i + 1 + j % 2) % 3, a),
            _ => LedgerEvent::repo(i, a, q(r, 10)),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn every_accepted_event_balances(events in proptest::collection::vec(arb_event(), 1..40)) {
        let mut books = vec![
            BankLedger::new(q(19, 1), q(6, 1), q(3, 1), q(20, 1), q(3, 1), q(5, 1)).unwrap(),
            BankLedger::new(q(24, 1), q(9, 1), q(4, 1), q(25, 1), q(7, 1), q(5, 1)).unwrap(),
            BankLedger::simple(q(20, 1), q(15, 1), q(5, 1)).unwrap(),
        ];
        for ev in &events {
            let money_before: Q = books.iter().map(|b| b.external_liabilities).sum();
            if let Ok((next, delta)) = apply(&books, ev) {
                for b in &next {
                    prop_assert_eq!(b.imbalance(), q(0, 1));
                }
                let money_after: Q = next.iter().map(|b| b.external_liabilities).sum();
                prop_assert_eq!(money_after - money_before, delta);
                books = next;
            }
        }
    }

    #[test]
    fn issue_then_repay_destroys_created_money(a in 1..100i64) {
        let start = vec![BankLedger::simple(q(20, 1), q(15, 1), q(5, 1)).unwrap()];
        let (mid, up) = apply(&start, &LedgerEvent::issue_loan(0, q(a, 3))).unwrap();
        let (end, down) = apply(&mid, &LedgerEvent::repay(0, q(a, 3), q(0, 1))).unwrap();
        prop_assert_eq!(up + down, q(0, 1));
        prop_assert_eq!(end[0].external_liabilities, start[0].external_liabilities);
    }
}
