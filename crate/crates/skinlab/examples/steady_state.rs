//! Steady states: the closed form on the ring against the numerical null
//! vector, the bistable pair without feedback, and the boundary-localized
//! state of the open chain with its fitted localization length.
//!
//!     cargo run --release --example steady_state

use skinlab::model::Basis;
use skinlab::steady::{
    analytic_steady_feedback_pbc, analytic_steady_nofeedback, fit_localization_length,
    numeric_steady, steady_by_solve,
};
use skinlab::superop::{model_spectrum, Precision};
use skinlab::{Boundary, ModelSpec};

fn main() -> skinlab::Result<()> {
    let ring = ModelSpec::new(10, Boundary::Pbc, 0.7, true)?;
    let exact = analytic_steady_feedback_pbc(&ring)?;
    let numeric = numeric_steady(
        &model_spectrum(&ring, Precision::Double)?,
        Basis::Site { l: 10 },
    )?;
    println!(
        "ring L = 10: |analytic - numeric|_tr = {:.2e}",
        exact.trace_distance(&numeric[0])?
    );

    let bistable = ModelSpec::new(8, Boundary::Pbc, 0.7, false)?;
    let states = analytic_steady_nofeedback(&bistable)?;
    let kernel = numeric_steady(
        &model_spectrum(&bistable, Precision::Double)?,
        Basis::Site { l: 8 },
    )?;
    println!(
        "no feedback, L = 8: {} closed-form states, kernel dimension {}",
        states.len(),
        kernel.len()
    );

    println!("open chain, L = 40:");
    println!("  gamma     xi   1/ln r   fit window");
    for gamma in [0.2, 0.4, 0.6, 0.8, 1.5, 2.0] {
        let spec = ModelSpec::new(40, Boundary::Obc, gamma, true)?;
        let rho = steady_by_solve(&spec)?;
        let fit = fit_localization_length(&rho, None, &spec)?;
        println!(
            "  {gamma:5.2} {:7.4} {:8.4}   {:?}",
            fit.loc_length,
            fit.theory_length.unwrap_or(f64::NAN),
            fit.fit_range
        );
    }
    Ok(())
}
