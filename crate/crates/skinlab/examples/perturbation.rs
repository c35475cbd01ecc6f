//! Weak-monitoring perturbation theory: zeroth, first and second order
//! spectra on the ring, and the numerical first order on the open chain,
//! each matched one-to-one against exact diagonalization.
//!
//!     cargo run --release --example perturbation -- 20 0.04

use skinlab::perturb::{first_order_obc, perturbative_spectrum_pbc};
use skinlab::superop::{model_eigenvalues, Precision};
use skinlab::{Boundary, ModelSpec};

fn main() -> skinlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let l: usize = args.next().map_or(20, |s| s.parse().expect("L"));
    let gamma: f64 = args.next().map_or(0.04, |s| s.parse().expect("gamma"));

    for feedback in [true, false] {
        let spec = ModelSpec::new(l, Boundary::Pbc, gamma, feedback)?;
        let exact = model_eigenvalues(&spec, Precision::Double)?;
        for order in 0..=2 {
            match perturbative_spectrum_pbc(&spec, order) {
                Ok(ps) => {
                    let m = ps.match_exact(&exact.eigenvalues);
                    println!(
                        "{} PBC order {order}: max distance {:.3e}",
                        spec.model_name(),
                        m.max_distance
                    );
                    if order == 1 {
                        println!("    degeneracy class sizes {:?}", ps.class_sizes());
                    }
                }
                Err(e) => println!("{} PBC order {order}: {e}", spec.model_name()),
            }
        }
        let open = ModelSpec::new(l, Boundary::Obc, gamma, feedback)?;
        let ps = first_order_obc(&open, 1e-9)?;
        let m = ps.match_exact(&model_eigenvalues(&open, Precision::Double)?.eigenvalues);
        println!(
            "{} OBC order 1: max distance {:.3e}",
            open.model_name(),
            m.max_distance
        );
    }
    Ok(())
}
