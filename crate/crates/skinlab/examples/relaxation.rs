//! Relaxation of the open feedback chain from the far end versus from the
//! maximally mixed state: trace distance, plateau, relaxation time and the
//! late-time rate compared with the gap. Writes the d(t) curves as CSV.
//!
//!     cargo run --release --example relaxation -- 40 0.6

use skinlab::dynamics::{relax_one, write_evolution_csv, Cutoff, InitState, ScanOptions};
use skinlab::{Boundary, ModelSpec};

fn main() -> skinlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let l: usize = args.next().map_or(40, |s| s.parse().expect("L"));
    let gamma: f64 = args.next().map_or(0.6, |s| s.parse().expect("gamma"));
    let spec = ModelSpec::new(l, Boundary::Obc, gamma, true)?;
    let dir = std::env::temp_dir();

    for (name, init) in [
        ("lastsite", InitState::LastSite),
        ("uniform", InitState::Uniform),
    ] {
        let opts = ScanOptions {
            init,
            ..Default::default()
        };
        let (gap, res, rep, class) = relax_one(&spec, &opts)?;
        let plateau = match rep.cutoff {
            Cutoff::Plateau {
                t_start,
                plateau_level,
            } => format!("until t = {t_start:.1} at d = {plateau_level:.3}"),
            Cutoff::None => "none".into(),
        };
        println!(
            "{name}: tau = {:.2}, gap = {gap:.5}, tau*gap = {:.2}, {}",
            rep.tau, class.tau_times_gap, class.class
        );
        println!(
            "  plateau {plateau}; late rate {:.5}",
            rep.asymptotic_rate.unwrap_or(f64::NAN)
        );
        let path = dir.join(format!("relaxation_{name}_L{l}.csv"));
        write_evolution_csv(&path, &res, false)?;
        println!("  curve written to {}", path.display());
    }
    Ok(())
}
