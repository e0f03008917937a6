//! European option pricing: the closed-form call series, its special cases
//! and quadrature valuation of general payoffs.

pub mod call;
pub mod cases;
pub mod european;
pub mod series;

pub use call::{call_price, CallPricer, CallSpec, PriceBreakdown, RegimeCase, RiskNeutralRates, SeriesControls};
