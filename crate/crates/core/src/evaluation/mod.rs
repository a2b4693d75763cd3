//! Monte Carlo verification of the chance constraints and signaling accounting.

pub mod montecarlo;
pub mod overhead;
pub mod report;
pub mod sinr;

pub use montecarlo::{
    collect_sinr, outage_statistics, quantile, verify_interference_bound, BoundCheck, MonteCarloOptions,
    OutageReport, SinrSamples, UserOutage,
};
pub use overhead::{overhead_ledger, OverheadInputs, OverheadLedger};
pub use report::{EvaluationReport, Histogram};
pub use sinr::{inner_precoders, perturb_csi, sinr, sinr_terms, SinrTerms};
