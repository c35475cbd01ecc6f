//! Relaxation-time scan over chain lengths for the periodic and open
//! feedback chains, with the log-log slope of tau against L.
//!
//!     cargo run --release --example scan

use skinlab::dynamics::{log_log_slope, scan, write_scan_csv, ScanOptions};
use skinlab::{Boundary, ModelSpec};

fn main() -> skinlab::Result<()> {
    let opts = ScanOptions::default();
    for (bc, ls) in [
        (Boundary::Pbc, vec![12, 16, 20, 24]),
        (Boundary::Obc, vec![16, 24, 32, 40]),
    ] {
        let specs = ls
            .iter()
            .map(|&l| ModelSpec::new(l, bc, 0.8, true))
            .collect::<skinlab::Result<Vec<_>>>()?;
        let rows = scan(&specs, &opts);
        println!("{bc}, gamma = 0.8");
        println!("   L        tau         gap   tau*gap  class");
        for r in &rows {
            match (&r.error, r.tau, r.gap, r.tau_times_gap, r.classification) {
                (None, Some(t), Some(g), Some(x), Some(c)) => {
                    println!("{:4} {t:10.2} {g:11.4e} {x:9.3}  {c}", r.l)
                }
                _ => println!("{:4} failed: {}", r.l, r.error.as_deref().unwrap_or("?")),
            }
        }
        let xs: Vec<f64> = rows.iter().map(|r| r.l as f64).collect();
        let ts: Vec<f64> = rows.iter().map(|r| r.tau.unwrap_or(f64::NAN)).collect();
        println!("slope d ln tau / d ln L = {:.3}", log_log_slope(&xs, &ts));
        let path = std::env::temp_dir().join(format!("scan_{bc}.csv"));
        write_scan_csv(&path, &rows)?;
        println!("table written to {}\n", path.display());
    }
    Ok(())
}
