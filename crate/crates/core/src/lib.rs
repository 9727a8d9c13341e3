//! Numerical models of a monetary economy and its banking system.
//!
//! Three levels are covered: macro dynamics of the monetary circuit
//! ([`goodwin`], [`keen`], [`mmc`]), an interconnected banking network with
//! first-passage defaults and terminal clearing ([`banking_network`],
//! [`wedge_analytics`]), and single-bank balance-sheet management
//! ([`balance_sheet`], [`dividend_optimizer`]). [`ledger`] replays
//! money creation and destruction as double-entry postings.
//!
//! Models are generic over [`Scalar`] (`f32` or `f64`); the `*F64` aliases
//! below name the usual double-precision instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance_sheet;
pub mod banking_network;
pub mod dividend_optimizer;
pub mod error;
pub mod goodwin;
pub mod keen;
pub mod ledger;
pub mod linalg;
pub mod mmc;
pub mod roots;
pub mod scalar;
pub mod special;
pub mod stochastic_engine;
pub mod wedge_analytics;

pub use error::{CircuitError, Result};
pub use scalar::Scalar;
pub use stochastic_engine::RngStream;

pub type CorrelationMatrixF64 = stochastic_engine::CorrelationMatrix<f64>;
pub type JumpSpecF64 = stochastic_engine::JumpSpec<f64>;
pub type GoodwinParamsF64 = goodwin::GoodwinParams<f64>;
pub type GoodwinStateF64 = goodwin::GoodwinState<f64>;
pub type KeenParamsF64 = keen::KeenParams<f64>;
pub type KeenStateF64 = keen::KeenState<f64>;
pub type MmcParamsF64 = mmc::MmcParams<f64>;
pub type MmcStateF64 = mmc::MmcState<f64>;
pub type BankLedgerF64 = ledger::BankLedger<f64>;
pub type BankNetworkF64 = banking_network::BankNetwork<f64>;
pub type WedgeContextF64 = wedge_analytics::WedgeContext<f64>;
pub type FlowParamsF64 = balance_sheet::FlowParams<f64>;
pub type FlowStateF64 = balance_sheet::FlowState<f64>;
pub type EquityParamsF64 = dividend_optimizer::EquityParams<f64>;
