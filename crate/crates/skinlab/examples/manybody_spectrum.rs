//! Half-filled many-body sector: dense spectrum against restarted Arnoldi,
//! then Arnoldi gaps of the feedback ring for growing L.
//!
//!     cargo run --release --example manybody_spectrum -- 10

use skinlab::dynamics::log_log_slope;
use skinlab::manybody::{manybody_spectrum, Solver};
use skinlab::{Boundary, ModelSpec};

fn main() -> skinlab::Result<()> {
    let l_max: usize = std::env::args()
        .nth(1)
        .map_or(10, |s| s.parse().expect("L"));

    let spec = ModelSpec::new(6, Boundary::Pbc, 1.0, true)?;
    let dense = manybody_spectrum(&spec, 3, Solver::Dense)?;
    let krylov = manybody_spectrum(&spec, 3, Solver::Krylov { nev: 4 })?;
    println!(
        "L = 6, N = 3: dense gap {:.10}, Arnoldi gap {:.10}",
        dense.gap, krylov.gap
    );
    println!("  dense zero modes {}", dense.zero_mode_count);

    let mut ls = Vec::new();
    let mut gaps = Vec::new();
    for l in (6..=l_max).step_by(2) {
        let t0 = std::time::Instant::now();
        let s = manybody_spectrum(
            &ModelSpec::new(l, Boundary::Pbc, 1.0, true)?,
            l / 2,
            Solver::Krylov { nev: 4 },
        )?;
        println!(
            "L = {l:2}: gap {:.6} ({:.1} s)",
            s.gap,
            t0.elapsed().as_secs_f64()
        );
        ls.push(l as f64);
        gaps.push(s.gap);
    }
    println!("slope d ln gap / d ln L = {:.3}", log_log_slope(&ls, &gaps));
    Ok(())
}
