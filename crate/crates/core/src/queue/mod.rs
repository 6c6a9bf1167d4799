//! Positive-mortality regime: the out-degree of a node is a discouragement
//! queue with birth rates `lambda / (1 + k)` and death rates `k mu`.

mod embedded;
mod series;
mod steady;

pub use embedded::{bd_embedded_table, BdEmbeddedTable, EMBEDDED_AGREEMENT_TOL};
pub use series::{
    bd_transient_distribution, bd_transient_pmf, build_s_table, build_s_table_with_limit,
    SeriesOptions, STable, TransientSolution, S_TABLE_LIMIT,
};
pub use steady::{
    root_extra_work_mean, steady_state_conditional, steady_state_unbounded,
    steady_state_unconditional, UnconditionalValue, UNCONDITIONAL_TAIL_LIMIT,
};

use crate::error::{domain, Result};
use crate::model::ModelParams;

pub(crate) fn require_deaths(params: &ModelParams) -> Result<()> {
    if params.has_deaths() {
        Ok(())
    } else {
        Err(domain(
            "mu = 0 has no death transitions; use the growth module for this regime",
        ))
    }
}
