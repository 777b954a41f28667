//! The yieldcast guide, embedded as documentation modules.
//!
//! The book under `book/` is the narrative companion to this crate. Each
//! chapter is included here verbatim so its code blocks compile and run as
//! doc-tests; `cargo test --doc` keeps the guide in sync with the library.
//! Rendered output comes from `mdbook build book/`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/ch01-series-and-panels.md")]
pub mod ch01_series_and_panels {}

#[doc = include_str!("../../../book/src/ch02-diagnostics.md")]
pub mod ch02_diagnostics {}

#[doc = include_str!("../../../book/src/ch03-principal-components.md")]
pub mod ch03_principal_components {}

#[doc = include_str!("../../../book/src/ch04-mean-reversion.md")]
pub mod ch04_mean_reversion {}

#[doc = include_str!("../../../book/src/ch05-arima.md")]
pub mod ch05_arima {}

#[doc = include_str!("../../../book/src/ch06-volatility.md")]
pub mod ch06_volatility {}

#[doc = include_str!("../../../book/src/ch07-var-analysis.md")]
pub mod ch07_var_analysis {}

#[doc = include_str!("../../../book/src/ch08-neural-forecasters.md")]
pub mod ch08_neural_forecasters {}

#[doc = include_str!("../../../book/src/ch09-experiments.md")]
pub mod ch09_experiments {}
