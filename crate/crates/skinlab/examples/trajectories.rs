//! Quantum-jump trajectories from the domain wall: ensemble densities
//! against the master equation on a small chain, then the steady
//! imbalance of longer chains with the Slater-determinant backend.
//!
//!     cargo run --release --example trajectories

use ndarray::Array2;
use num_complex::Complex64 as C64;
use skinlab::linalg::ode::OdeOptions;
use skinlab::manybody::{
    build_sector_operators, evolve_sector, run_trajectories, Backend, TrajectoryOptions,
};
use skinlab::{Boundary, ModelSpec};

fn main() -> skinlab::Result<()> {
    let spec = ModelSpec::new(6, Boundary::Obc, 1.0, true)?;
    let opts = TrajectoryOptions {
        t_max: 6.0,
        n_traj: 1000,
        base_seed: 1,
        sample_dt: 1.0,
        ..Default::default()
    };
    let ens = run_trajectories(&spec, 3, &opts)?;
    let ops = build_sector_operators(&spec, 3)?;
    let d = ops.dim();
    let dw = ops
        .basis
        .index_of(ops.basis.domain_wall())
        .expect("domain wall");
    let mut rho0 = Array2::<C64>::zeros((d, d));
    rho0[[dw, dw]] = C64::new(1.0, 0.0);
    let exact = evolve_sector(&ops, rho0.view(), &ens.times, OdeOptions::default(), None)?;
    println!("L = 6, N = 3, {} trajectories: <n_1>(t)", ens.n_traj);
    for k in 0..ens.times.len() {
        println!(
            "  t = {:4.1}: {:.4} +- {:.4}   master equation {:.4}",
            ens.times[k], ens.mean[k][0], ens.stderr[k][0], exact.densities[k][0]
        );
    }

    // The wall starts on the right and has to cross the whole chain.
    println!("steady imbalance, Slater backend, gamma = 0.5:");
    for l in [12, 16, 20] {
        let spec = ModelSpec::new(l, Boundary::Obc, 0.5, true)?;
        let opts = TrajectoryOptions {
            t_max: 300.0,
            n_traj: 50,
            base_seed: 2,
            sample_dt: 1.0,
            backend: Backend::Gaussian,
            ..Default::default()
        };
        let ens = run_trajectories(&spec, l / 2, &opts)?;
        println!("  L = {l}: eta = {:.4}", ens.imbalance().steady(0.25));
    }
    Ok(())
}
