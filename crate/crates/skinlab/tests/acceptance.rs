//! End-to-end acceptance checks. Prints one PASS/FAIL line per check and
//! exits non-zero when the set of failing checks differs from the known
//! unattainable set below.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use skinlab::dynamics::{
    self, evolve, log_log_slope, relax_one, Cutoff, EvolveOptions, InitState, RelaxOptions,
    RelaxationClass, ScanOptions,
};
use skinlab::linalg::ode::OdeOptions;
use skinlab::manybody::{self, Backend, Solver, TrajectoryOptions};
use skinlab::model::{self, plane_wave, Boundary, ModelSpec};
use skinlab::perturb::{self, MomentumPair};
use skinlab::steady::{self, DensityMatrix};
use skinlab::superop::{self, Precision};

/// Checks that fail when implemented as stated; see the project notes.
const KNOWN_FAILURES: &[&str] = &[
    "gap-law-feedback-pbc-band",
    "classify-nofeedback-pbc",
    "perturb-first-order-nofeedback-pbc",
    "perturb-first-order-feedback-obc",
    "perturb-first-order-nofeedback-obc",
];

struct Suite {
    results: Vec<(String, bool)>,
}

impl Suite {
    fn check(&mut self, name: &str, pass: bool, detail: impl AsRef<str>) {
        println!(
            "{} {name}: {}",
            if pass { "PASS" } else { "FAIL" },
            detail.as_ref()
        );
        self.results.push((name.to_string(), pass));
    }

    fn run(&mut self, title: &str, f: impl FnOnce(&mut Suite)) {
        let t0 = Instant::now();
        f(self);
        println!("  ({title}: {:.1} s)", t0.elapsed().as_secs_f64());
    }
}

fn spec(l: usize, bc: Boundary, g: f64, fb: bool) -> ModelSpec {
    ModelSpec::new(l, bc, g, fb).unwrap()
}

fn gap(s: &ModelSpec) -> f64 {
    superop::model_eigenvalues(s, Precision::Double)
        .unwrap()
        .gap
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn spectral_sanity(s: &mut Suite) {
    let mut worst_re = f64::NEG_INFINITY;
    let mut worst_conj = 0.0f64;
    let mut bad = Vec::new();
    for fb in [true, false] {
        for bc in [Boundary::Pbc, Boundary::Obc] {
            for l in [8, 12, 16, 20] {
                for g in [0.04, 0.6, 1.0, 2.0] {
                    let sp =
                        superop::model_eigenvalues(&spec(l, bc, g, fb), Precision::Double).unwrap();
                    let expect = if !fb && bc == Boundary::Pbc && l % 4 == 0 {
                        2
                    } else {
                        1
                    };
                    worst_re = worst_re.max(sp.max_real_part());
                    worst_conj = worst_conj.max(sp.conjugate_closure_error());
                    if sp.zero_mode_count != expect {
                        bad.push(format!("fb={fb} {bc} L={l} g={g}: {}", sp.zero_mode_count));
                    }
                }
            }
        }
    }
    s.check("spectral-sanity", worst_re <= 1e-8 && worst_conj <= 1e-8 && bad.is_empty(), format!("max Re = {worst_re:.2e}, conjugate closure = {worst_conj:.2e}, zero-mode mismatches {bad:?}"));
}

fn gap_laws(s: &mut Suite) {
    let ls = [16usize, 20, 24, 32];
    let gs = [0.5, 1.0, 2.0];
    for fb in [true, false] {
        let table: Vec<Vec<f64>> = ls
            .iter()
            .map(|&l| {
                gs.iter()
                    .map(|&g| gap(&spec(l, Boundary::Pbc, g, fb)))
                    .collect()
            })
            .collect();
        let lf: Vec<f64> = ls.iter().map(|&l| l as f64).collect();
        let vs_l: Vec<f64> = (0..gs.len())
            .map(|j| log_log_slope(&lf, &table.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect();
        let vs_g: Vec<f64> = table.iter().map(|r| log_log_slope(&gs, r)).collect();
        let tag = if fb { "feedback" } else { "nofeedback" };
        let ok = vs_l.iter().all(|&x| within(x, -2.1, -1.9))
            && vs_g.iter().all(|&x| within(x, 0.9, 1.1));
        s.check(
            &format!("gap-law-{tag}-pbc-slopes"),
            ok,
            format!("slopes vs L {vs_l:.3?}, vs gamma {vs_g:.3?}"),
        );
        if fb {
            let ratios: Vec<f64> = ls
                .iter()
                .zip(&table)
                .flat_map(|(&l, r)| {
                    gs.iter()
                        .zip(r)
                        .map(move |(&g, &d)| d / (g * PI * PI / (l * l) as f64))
                })
                .collect();
            let ok = ratios.iter().all(|&x| within(x, 0.9, 1.1));
            let (lo, hi) = ratios
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
            s.check(
                "gap-law-feedback-pbc-band",
                ok,
                format!("gap / (gamma pi^2 / L^2) in [{lo:.3}, {hi:.3}], want [0.9, 1.1]"),
            );
        }
    }
}

fn gap_saturation(s: &mut Suite) {
    for g in [0.6, 2.0] {
        let r = gap(&spec(60, Boundary::Obc, g, true)) / gap(&spec(30, Boundary::Obc, g, true));
        s.check(
            &format!("gap-saturation-obc-g{g}"),
            within(r, 0.8, 1.25),
            format!("gap(60)/gap(30) = {r:.4}"),
        );
    }
}

fn analytic_steady(s: &mut Suite) {
    let mut worst = 0.0f64;
    for l in 6..=12 {
        let sp = spec(l, Boundary::Pbc, 0.7, true);
        let ed = steady::numeric_steady(
            &superop::model_spectrum(&sp, Precision::Double).unwrap(),
            model::Basis::Site { l },
        )
        .unwrap();
        let an = steady::analytic_steady_feedback_pbc(&sp).unwrap();
        worst = worst.max(an.trace_distance(&ed[0]).unwrap());
    }
    s.check(
        "steady-analytic-feedback-pbc",
        worst < 1e-8,
        format!("max trace distance {worst:.2e} over L = 6..12"),
    );

    let sp = spec(8, Boundary::Pbc, 0.7, false);
    let ed = steady::numeric_steady(
        &superop::model_spectrum(&sp, Precision::Double).unwrap(),
        model::Basis::Site { l: 8 },
    )
    .unwrap();
    let an = steady::analytic_steady_nofeedback(&sp).unwrap();
    let proj = steady::project_onto_span(&an, &ed).unwrap();
    let worst = proj
        .iter()
        .zip(&an)
        .map(|((p, _), a)| p.trace_distance(a).unwrap())
        .fold(0.0, f64::max);
    s.check(
        "steady-bistable-nofeedback-pbc",
        ed.len() == 2 && worst < 1e-8,
        format!("{} kernel states, max trace distance {worst:.2e}", ed.len()),
    );

    let mut dev = 0.0f64;
    for l in [8, 12] {
        let sp = spec(l, Boundary::Pbc, 0.7, true);
        let ed = steady::numeric_steady(
            &superop::model_spectrum(&sp, Precision::Double).unwrap(),
            model::Basis::Site { l },
        )
        .unwrap();
        dev = dev.max(
            ed[0]
                .entries
                .iter()
                .map(|z| (z.norm() - 1.0 / l as f64).abs())
                .fold(0.0, f64::max),
        );
    }
    s.check(
        "steady-flat-magnitudes",
        dev < 1e-10,
        format!("max ||rho_ij| - 1/L| = {dev:.2e}"),
    );
}

fn xi(l: usize, g: f64) -> f64 {
    let sp = spec(l, Boundary::Obc, g, true);
    steady::fit_localization_length(&steady::steady_by_solve(&sp).unwrap(), None, &sp)
        .unwrap()
        .loc_length
}

fn localization(s: &mut Suite) {
    for g in [0.6, 2.0] {
        let (a, b) = (xi(40, g), xi(80, g));
        let rel = (a - b).abs() / b;
        s.check(
            &format!("localization-size-independent-g{g}"),
            rel < 0.15,
            format!("xi(40) = {a:.4}, xi(80) = {b:.4}"),
        );
    }
    let grid: Vec<f64> = (1..=20)
        .map(|i| 0.1 * i as f64)
        .filter(|g| (g - 1.0).abs() > 1e-9)
        .collect();
    let xs: Vec<f64> = grid.iter().map(|&g| xi(40, g)).collect();
    let i = (0..xs.len())
        .min_by(|&a, &b| xs[a].total_cmp(&xs[b]))
        .unwrap();
    s.check(
        "localization-minimum",
        within(grid[i], 0.4, 0.8),
        format!("argmin at gamma = {:.1} (xi = {:.4})", grid[i], xs[i]),
    );
}

fn taus(specs: &[ModelSpec]) -> Vec<f64> {
    dynamics::scan(specs, &ScanOptions::default())
        .iter()
        .map(|r| r.tau.unwrap_or(f64::NAN))
        .collect()
}

fn relaxation_scaling(s: &mut Suite) {
    let ls = [16usize, 24, 32, 40, 48];
    let t = taus(&ls.map(|l| spec(l, Boundary::Pbc, 0.8, true)));
    let slope = log_log_slope(&ls.map(|l| l as f64), &t);
    s.check(
        "relaxation-feedback-pbc-vs-L",
        within(slope, 1.8, 2.2),
        format!("slope {slope:.3}, tau {t:.1?}"),
    );

    let ls = [20usize, 30, 40, 50, 60];
    let t = taus(&ls.map(|l| spec(l, Boundary::Obc, 0.8, true)));
    let slope = log_log_slope(&ls.map(|l| l as f64), &t);
    s.check(
        "relaxation-feedback-obc-vs-L",
        within(slope, 0.8, 1.2),
        format!("slope {slope:.3}, tau {t:.1?}"),
    );

    let gs = [0.5, 1.0, 2.0];
    let t = taus(&gs.map(|g| spec(24, Boundary::Pbc, g, true)));
    let slope = log_log_slope(&gs, &t);
    s.check(
        "relaxation-feedback-pbc-vs-gamma",
        within(slope, -1.15, -0.85),
        format!("slope {slope:.3}, tau {t:.1?}"),
    );
}

fn first_peaks(s: &mut Suite) {
    let want = [20.0, 42.0, 62.0, 83.0, 103.0];
    let mut got = Vec::new();
    for (i, l) in [10usize, 20, 30, 40, 50].into_iter().enumerate() {
        let sp = spec(l, Boundary::Pbc, 2.0, true);
        let times: Vec<f64> = (0..=(want[i] * 1.3 / 0.05) as usize)
            .map(|k| 0.05 * k as f64)
            .collect();
        let res = evolve(
            &sp,
            &DensityMatrix::site(l, l - 1),
            &times,
            &EvolveOptions::default(),
        )
        .unwrap();
        got.push(
            dynamics::local_maxima(&res.times, &res.site_series(l - 1))
                .first()
                .copied()
                .unwrap_or(f64::NAN),
        );
    }
    let ok = got.iter().zip(&want).all(|(g, w)| (g - w).abs() <= 0.1 * w);
    s.check("first-peak-times", ok, format!("{got:.2?} vs {want:?}"));
}

/// Duration of the initial stretch with d ≥ level.
fn time_above(res: &dynamics::EvolutionResult, level: f64) -> f64 {
    let i = res
        .distances
        .iter()
        .position(|&d| d < level)
        .unwrap_or(res.distances.len() - 1);
    res.times[i]
}

fn cutoff(s: &mut Suite) {
    let mut durations = Vec::new();
    let mut ok = true;
    let mut detail = Vec::new();
    for l in [40usize, 60] {
        let sp = spec(l, Boundary::Obc, 0.6, true);
        let (g, res, rep, _) = relax_one(&sp, &ScanOptions::default()).unwrap();
        let dur = time_above(&res, 1.9);
        let rate = rep.asymptotic_rate.unwrap_or(f64::NAN);
        ok &= res.distances[0] >= 1.9
            && dur > 0.0
            && matches!(rep.cutoff, Cutoff::Plateau { .. })
            && (rate - g).abs() <= 0.2 * g;
        durations.push(dur);
        detail.push(format!(
            "L={l}: d >= 1.9 until t = {dur:.1}, rate {rate:.4} vs gap {g:.4}"
        ));

        let uni = ScanOptions {
            init: InitState::Uniform,
            ..Default::default()
        };
        let (_, _, rep, _) = relax_one(&sp, &uni).unwrap();
        ok &= rep.cutoff == Cutoff::None;
        detail.push(format!("uniform cutoff {:?}", rep.cutoff));
    }
    ok &= durations[1] > durations[0];
    s.check("cutoff-feedback-obc", ok, detail.join("; "));
}

fn classifications(s: &mut Suite) {
    let (_, _, _, c) = relax_one(
        &spec(30, Boundary::Pbc, 0.6, false),
        &ScanOptions::default(),
    )
    .unwrap();
    s.check(
        "classify-nofeedback-pbc",
        c.class == RelaxationClass::Accelerated && c.tau_times_gap < 1.0,
        format!("{} with tau*gap = {:.3}", c.class, c.tau_times_gap),
    );

    let ls = [16usize, 24, 32, 40];
    let rows = dynamics::scan(
        &ls.map(|l| spec(l, Boundary::Obc, 0.6, false)),
        &ScanOptions::default(),
    );
    let lf = ls.map(|l| l as f64);
    let st = log_log_slope(
        &lf,
        &rows
            .iter()
            .map(|r| r.tau.unwrap_or(f64::NAN))
            .collect::<Vec<_>>(),
    );
    let sg = log_log_slope(
        &lf,
        &rows
            .iter()
            .map(|r| 1.0 / r.gap.unwrap_or(f64::NAN))
            .collect::<Vec<_>>(),
    );
    let all_std = rows
        .iter()
        .all(|r| r.classification == Some(RelaxationClass::Standard));
    s.check(
        "classify-nofeedback-obc",
        all_std && (st - sg).abs() <= 0.2,
        format!("all Standard: {all_std}, slopes tau {st:.3} vs 1/gap {sg:.3}"),
    );

    let (_, _, _, c) =
        relax_one(&spec(40, Boundary::Obc, 0.6, true), &ScanOptions::default()).unwrap();
    s.check(
        "classify-feedback-obc",
        c.class == RelaxationClass::SkinDelayed,
        format!("{} with tau*gap = {:.3}", c.class, c.tau_times_gap),
    );
}

/// Second order by direct summation over every pair, with 𝓛₁ elements taken
/// from the explicit jump matrices in the plane-wave basis.
fn second_order_oracle(sp: &ModelSpec) -> impl Fn(MomentumPair) -> C64 {
    let l = sp.l;
    let pw = Array2::from_shape_fn((l, l), |(i, j)| plane_wave(l, j as i64 + 1)[i]);
    let t: Vec<Array2<C64>> = model::build_jump_operators(sp)
        .unwrap()
        .iter()
        .map(|m| pw.t().mapv(|z| z.conj()).dot(&m.entries).dot(&pw))
        .collect();
    let g = sp.gamma;
    move |p: MomentumPair| {
        let el = |a: MomentumPair, b: MomentumPair| -> C64 {
            let (aj, ajp, bj, bjp) = (
                (a.j - 1) as usize,
                (a.jp - 1) as usize,
                (b.j - 1) as usize,
                (b.jp - 1) as usize,
            );
            t.iter()
                .map(|tj| tj[[aj, bj]] * tj[[ajp, bjp]].conj())
                .sum()
        };
        let lam = perturb::zeroth_order_pbc(p, g);
        MomentumPair::all(l)
            .into_iter()
            .filter(|&q| q != p)
            .map(|q| el(p, q) * el(q, p) / (lam - perturb::zeroth_order_pbc(q, g)))
            .sum::<C64>()
            * g
            * g
    }
}

fn perturbation(s: &mut Suite) {
    for fb in [true, false] {
        for bc in [Boundary::Pbc, Boundary::Obc] {
            let sp = spec(20, bc, 0.04, fb);
            let ps = perturb::first_order_spectrum(&sp).unwrap();
            let exact = superop::model_eigenvalues(&sp, Precision::Double).unwrap();
            let m = ps.match_exact(&exact.eigenvalues).max_distance;
            let name = format!(
                "perturb-first-order-{}-{}",
                if fb { "feedback" } else { "nofeedback" },
                bc.to_string().to_lowercase()
            );
            s.check(&name, m <= 5e-3, format!("max matched distance {m:.3e}"));
        }
    }
    let mut worst = 0.0f64;
    let mut n = 0;
    for fb in [true, false] {
        let sp = spec(20, Boundary::Pbc, 0.04, fb);
        let oracle = second_order_oracle(&sp);
        for c in perturb::degeneracy_classes_pbc(20)
            .into_iter()
            .filter(|c| c.len() == 1)
        {
            let p = c[0];
            let o = oracle(p);
            worst = worst.max((perturb::second_order_pbc(p, &sp).unwrap() - o).norm());
            if fb {
                worst = worst
                    .max((perturb::second_order_feedback_pbc(p, sp.gamma).unwrap() - o).norm());
            }
            n += 1;
        }
    }
    s.check(
        "perturb-second-order-oracle",
        worst <= 1e-12,
        format!("max deviation {worst:.2e} over {n} pairs"),
    );
}

fn trajectories_vs_master_equation(s: &mut Suite) {
    let mut worst = 0.0f64;
    let mut outside = 0;
    let mut count = 0;
    for (bc, fb, g) in [
        (Boundary::Obc, true, 1.0),
        (Boundary::Pbc, true, 1.0),
        (Boundary::Obc, false, 1.0),
        (Boundary::Obc, true, 2.0),
    ] {
        let sp = spec(6, bc, g, fb);
        let opts = TrajectoryOptions {
            t_max: 10.0,
            n_traj: 2000,
            base_seed: 12,
            sample_dt: 1.0,
            ..Default::default()
        };
        let ens = manybody::run_trajectories(&sp, 3, &opts).unwrap();
        let ops = manybody::build_sector_operators(&sp, 3).unwrap();
        let d = ops.dim();
        let dw = ops.basis.index_of(ops.basis.domain_wall()).unwrap();
        let mut r0 = Array2::<C64>::zeros((d, d));
        r0[[dw, dw]] = C64::new(1.0, 0.0);
        let ev = manybody::evolve_sector(&ops, r0.view(), &ens.times, OdeOptions::default(), None)
            .unwrap();
        for k in 0..ens.times.len() {
            for i in 0..6 {
                let diff = (ens.mean[k][i] - ev.densities[k][i]).abs();
                let se = ens.stderr[k][i];
                let z = if se > 0.0 {
                    diff / se
                } else if diff < 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst = worst.max(z);
                outside += usize::from(z > 3.0);
                count += 1;
            }
        }
    }
    s.check(
        "trajectories-match-master-equation",
        outside == 0,
        format!("{outside}/{count} samples beyond 3 sigma, max |z| = {worst:.2}"),
    );
}

fn manybody_gap_scaling(s: &mut Suite) {
    let ls = [8usize, 10, 12];
    let gaps: Vec<f64> = ls
        .iter()
        .map(|&l| {
            manybody::manybody_spectrum(
                &spec(l, Boundary::Pbc, 1.0, true),
                l / 2,
                Solver::Krylov { nev: 4 },
            )
            .unwrap()
            .gap
        })
        .collect();
    let slope = log_log_slope(&ls.map(|l| l as f64), &gaps);
    s.check(
        "manybody-gap-slope",
        within(slope, -2.2, -1.6),
        format!("slope {slope:.3}, gaps {gaps:.5?}"),
    );
}

/// Late-time imbalance from the domain wall, which starts on the far side
/// and needs a transit time of several hundred hopping times at weak γ.
fn eta(l: usize, g: f64, dt: f64) -> f64 {
    let opts = TrajectoryOptions {
        t_max: 400.0,
        dt,
        n_traj: 50,
        base_seed: 5,
        sample_dt: 1.0,
        backend: Backend::Gaussian,
        ..Default::default()
    };
    manybody::run_trajectories(&spec(l, Boundary::Obc, g, true), l / 2, &opts)
        .unwrap()
        .imbalance()
        .steady(0.25)
}

fn imbalance_orderings(s: &mut Suite) {
    let e05 = eta(16, 0.5, 0.01);
    let e01 = eta(16, 0.1, 0.01);
    let e3 = eta(16, 3.0, 0.003);
    s.check(
        "imbalance-gamma-ordering",
        e05 > e01 && e05 > e3,
        format!("eta(0.5) = {e05:.4}, eta(0.1) = {e01:.4}, eta(3) = {e3:.4}"),
    );
    let es = [e05, eta(24, 0.5, 0.01), eta(30, 0.5, 0.01)];
    s.check(
        "imbalance-grows-with-L",
        es[0] < es[1] && es[1] < es[2],
        format!("eta at L = 16, 24, 30: {es:.4?}"),
    );
}

fn manybody_cutoff(s: &mut Suite) {
    let sp = spec(12, Boundary::Obc, 0.8, true);
    let times: Vec<f64> = (0..=40).map(|t| t as f64).collect();
    let res = manybody::sector_relaxation(
        &sp,
        6,
        &times,
        OdeOptions {
            rtol: 1e-8,
            atol: 1e-11,
            ..Default::default()
        },
    )
    .unwrap();
    // The horizon only resolves the plateau and the onset of decay.
    let opts = RelaxOptions::default();
    let plateau = {
        let d = &res.distances;
        let level = d[0];
        let end = d
            .iter()
            .position(|&x| (x - level).abs() > opts.plateau_band * level)
            .unwrap_or(d.len() - 1);
        res.times[end]
    };
    let d0 = res.distances[0];
    let dl = *res.distances.last().unwrap();
    s.check(
        "manybody-cutoff",
        plateau > 10.0 && dl < 0.75 * d0,
        format!("d(0) = {d0:.4} held within 5% until t = {plateau:.0}, d(40) = {dl:.4}"),
    );
}

fn determinism(s: &mut Suite) {
    let dir = tempfile::tempdir().unwrap();
    let write_all = |tag: &str| -> Vec<Vec<u8>> {
        let p = |n: &str| dir.path().join(format!("{tag}_{n}"));
        let sp = spec(10, Boundary::Obc, 0.6, true);
        let s = superop::model_eigenvalues(&sp, Precision::Double).unwrap();
        skinlab::io::write_json(&p("spec.json"), &superop::SpectrumDump::new(&sp, &s)).unwrap();
        let rows = dynamics::scan(
            &[
                spec(8, Boundary::Pbc, 0.8, true),
                spec(10, Boundary::Obc, 0.8, true),
            ],
            &ScanOptions::default(),
        );
        dynamics::write_scan_csv(&p("scan.csv"), &rows).unwrap();
        for (name, backend) in [
            ("sv.csv", Backend::StateVector),
            ("gs.csv", Backend::Gaussian),
        ] {
            let o = TrajectoryOptions {
                t_max: 3.0,
                n_traj: 40,
                base_seed: 9,
                backend,
                ..Default::default()
            };
            let e = manybody::run_trajectories(&spec(8, Boundary::Obc, 1.0, true), 4, &o).unwrap();
            manybody::write_trajectory_csv(&p(name), &e).unwrap();
        }
        ["spec.json", "scan.csv", "sv.csv", "gs.csv"]
            .iter()
            .map(|n| std::fs::read(p(n)).unwrap())
            .collect()
    };
    let a = write_all("a");
    let b = write_all("b");
    s.check("determinism", a == b, format!("{} files compared", a.len()));
}

fn main() -> ExitCode {
    let mut s = Suite {
        results: Vec::new(),
    };
    let t0 = Instant::now();
    s.run("spectral sanity", spectral_sanity);
    s.run("gap laws", gap_laws);
    s.run("gap saturation", gap_saturation);
    s.run("analytic steady states", analytic_steady);
    s.run("localization", localization);
    s.run("relaxation scaling", relaxation_scaling);
    s.run("first peaks", first_peaks);
    s.run("cutoff", cutoff);
    s.run("classifications", classifications);
    s.run("perturbation", perturbation);
    s.run("trajectories", trajectories_vs_master_equation);
    s.run("many-body gaps", manybody_gap_scaling);
    s.run("imbalance", imbalance_orderings);
    s.run("many-body cutoff", manybody_cutoff);
    s.run("determinism", determinism);

    let failed: BTreeSet<&str> = s
        .results
        .iter()
        .filter(|(_, p)| !p)
        .map(|(n, _)| n.as_str())
        .collect();
    let known: BTreeSet<&str> = KNOWN_FAILURES.iter().copied().collect();
    let passed = s.results.len() - failed.len();
    println!(
        "{passed}/{} checks passed in {:.0} s",
        s.results.len(),
        t0.elapsed().as_secs_f64()
    );
    if failed == known {
        println!("failing checks match the known unattainable set");
        ExitCode::SUCCESS
    } else {
        let unexpected: Vec<_> = failed.difference(&known).collect();
        let fixed: Vec<_> = known.difference(&failed).collect();
        println!("unexpected failures {unexpected:?}; known failures now passing {fixed:?}");
        ExitCode::FAILURE
    }
}
