//! Liouvillian spectrum of all four model/boundary combinations: gap,
//! number of steady states and the slowest few eigenvalues.
//!
//!     cargo run --release --example spectrum -- 16 0.6

use skinlab::superop::{leading, model_eigenvalues, Precision};
use skinlab::{Boundary, ModelSpec};

fn main() -> skinlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let l: usize = args.next().map_or(16, |s| s.parse().expect("L"));
    let gamma: f64 = args.next().map_or(0.6, |s| s.parse().expect("gamma"));

    for feedback in [true, false] {
        for bc in [Boundary::Pbc, Boundary::Obc] {
            let spec = ModelSpec::new(l, bc, gamma, feedback)?;
            let s = model_eigenvalues(&spec, Precision::Double)?;
            println!(
                "{:>10} {}: gap {:.6e}  zero modes {}  max Re {:.1e}",
                spec.model_name(),
                bc,
                s.gap,
                s.zero_mode_count,
                s.max_real_part()
            );
            for z in leading(&s, 4) {
                println!("    {:+.6} {:+.6}i", z.re, z.im);
            }
        }
    }

    // Small chains can be cross-checked in double-double arithmetic.
    let spec = ModelSpec::new(6, Boundary::Obc, gamma, true)?;
    let a = model_eigenvalues(&spec, Precision::Double)?.gap;
    let b = model_eigenvalues(&spec, Precision::Extended(30))?.gap;
    println!("L = 6 OBC gap: double {a:.15e}, extended {b:.15e}");
    Ok(())
}
