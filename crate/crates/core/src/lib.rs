//! Limit order book reconstruction, price-formation estimators, fundamental
//! price proxies and a generalized MRR simulator.

// Negated float comparisons double as NaN rejection in parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod book;
pub mod lobster;
pub mod proxy;
pub mod reference;
pub mod sim;
pub mod stats;
