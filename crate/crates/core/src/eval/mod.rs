//! Accuracy tables, paired t-tests, the ablation runner and the ERD/ERS
//! band-power report.

mod ablation;
mod erd;
mod stats;
mod table;

pub use ablation::{run_ablation, AblationReport, Arm, RunTrace};
pub use erd::{erd_ers_report, pool, transfer_reconstruct, Agreement, ChannelContrast, ErdReport, CONTRAST_FLOOR};
pub use stats::{accuracy, incomplete_beta, ln_gamma, mean_std, paired_ttest, t_two_sided_p, TTest};
pub use table::{Aggregate, ResultRow, ResultTable};
