//! One function per subcommand. Each returns the files it wrote, primary
//! output first.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skinlab::dynamics::{
    self, detect_anomalous_relaxation, hybrid_grid, relax_one, relaxation_time, Classification,
    InitState, RelaxOptions, RelaxationReport, ScanOptions,
};
use skinlab::io::{self, Cell};
use skinlab::linalg::ode::OdeOptions;
use skinlab::manybody::{self, Backend, ManyBodyInit, Solver, TrajectoryOptions};
use skinlab::model::{Basis, Boundary};
use skinlab::perturb;
use skinlab::steady::{self, DensityMatrix, LocalizationFit};
use skinlab::superop::{self, Precision, SpectrumDump};
use skinlab::ModelSpec;

use crate::config::{BackendKind, Format, RunConfig, SolverKind};
use crate::CliError;

type Res<T> = Result<T, CliError>;

/// `foo.json` → `foo.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn solver(cfg: &RunConfig) -> Solver {
    match cfg.solver {
        SolverKind::Dense => Solver::Dense,
        SolverKind::Krylov => Solver::Krylov { nev: cfg.nev },
    }
}

fn single_particle_init(cfg: &RunConfig, l: usize) -> Res<InitState> {
    match cfg.init.as_deref().unwrap_or("lastsite") {
        "lastsite" => Ok(InitState::LastSite),
        "uniform" => Ok(InitState::Uniform),
        s if s.starts_with("file:") => {
            let m = steady::read_density_csv(Path::new(&s[5..]))?;
            Ok(InitState::Custom(DensityMatrix::new(m, Basis::Site { l })?))
        }
        other => Err(CliError::Config(format!(
            "unknown single-particle init `{other}`"
        ))),
    }
}

fn many_body_init(cfg: &RunConfig) -> Res<ManyBodyInit> {
    match cfg.init.as_deref().unwrap_or("domainwall") {
        "domainwall" => Ok(ManyBodyInit::DomainWall),
        s if s.starts_with("sites:") => {
            let sites = crate::config::parse_list(&s[6..])?
                .into_iter()
                .map(|x| x as usize)
                .collect();
            Ok(ManyBodyInit::Sites(sites))
        }
        other => Err(CliError::Config(format!(
            "unknown many-body init `{other}`"
        ))),
    }
}

fn scan_options(cfg: &RunConfig, l: usize) -> Res<ScanOptions> {
    Ok(ScanOptions {
        init: single_particle_init(cfg, l)?,
        relax: RelaxOptions {
            threshold: cfg.threshold,
            ..Default::default()
        },
        grid_points: cfg.grid_points,
        t_max: cfg.t_max,
        ode: OdeOptions::default(),
    })
}

// ---------------------------------------------------------------------------

pub fn spectrum(cfg: &RunConfig) -> Res<Vec<PathBuf>> {
    let spec = cfg.spec()?;
    let format = cfg.format.unwrap_or(Format::Json);
    let path = cfg.output_path("spectrum", format);
    let precision: Precision = cfg.precision.parse()?;
    let (dump, full) = match cfg.n {
        Some(n) => {
            let s = manybody::manybody_spectrum(&spec, n, solver(cfg))?;
            let mut d = SpectrumDump::new(&spec, &s);
            d.n = Some(n);
            (d, None)
        }
        None if cfg.modes > 0 => {
            let s = superop::model_spectrum(&spec, precision)?;
            (SpectrumDump::new(&spec, &s), Some(s))
        }
        None => {
            let s = superop::model_eigenvalues(&spec, precision)?;
            (SpectrumDump::new(&spec, &s), None)
        }
    };
    match format {
        Format::Json => io::write_json(&path, &dump)?,
        Format::Csv => write_eigenvalue_csv(&path, &dump.eigenvalues)?,
    }
    let mut out = vec![path.clone()];
    if let Some(s) = full {
        let k = cfg.modes.min(s.len());
        let mp = sibling(&path, "modes.csv");
        let header: Vec<String> = ["mode", "re", "im", "row", "col", "magnitude"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mags = superop::mode_magnitudes(&s, &(0..k).collect::<Vec<_>>());
        let mut rows = Vec::new();
        for (m, mag) in mags.iter().enumerate() {
            let lam = s.eigenvalues[m];
            for ((i, j), &v) in mag.indexed_iter() {
                rows.push(vec![
                    Cell::from(m),
                    Cell::from(lam.re),
                    Cell::from(lam.im),
                    Cell::from(i + 1),
                    Cell::from(j + 1),
                    Cell::from(v),
                ]);
            }
        }
        io::write_csv(&mp, &header, &rows)?;
        out.push(mp);
    }
    Ok(out)
}

fn write_eigenvalue_csv(path: &Path, ev: &[[f64; 2]]) -> Res<()> {
    let header: Vec<String> = ["index", "re", "im"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    io::write_csv(
        path,
        &header,
        ev.iter()
            .enumerate()
            .map(|(i, z)| vec![Cell::from(i), Cell::from(z[0]), Cell::from(z[1])]),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RelaxOutput {
    pub spec: ModelSpec,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    pub init: String,
    pub gap: f64,
    pub t_max: f64,
    pub report: RelaxationReport,
    pub classification: Classification,
    pub max_trace_error: f64,
}

pub fn relax(cfg: &RunConfig) -> Res<Vec<PathBuf>> {
    let spec = cfg.spec()?;
    let format = cfg.format.unwrap_or(Format::Json);
    let path = cfg.output_path("relax", format);
    let (init, gap, res, report, classification) = match cfg.n {
        None => {
            let opts = scan_options(cfg, spec.l)?;
            let (gap, res, rep, cls) = relax_one(&spec, &opts)?;
            (
                cfg.init.clone().unwrap_or_else(|| "lastsite".into()),
                gap,
                res,
                rep,
                cls,
            )
        }
        Some(n) => {
            if !matches!(many_body_init(cfg)?, ManyBodyInit::DomainWall) {
                return Err(CliError::Config(
                    "many-body relaxation starts from the domain wall".into(),
                ));
            }
            let gap = manybody::manybody_spectrum(&spec, n, solver(cfg))?.gap;
            let t_max = cfg
                .t_max
                .unwrap_or_else(|| manybody::default_sector_t_max(gap, spec.l));
            let times = hybrid_grid(t_max, cfg.grid_points);
            let res = manybody::sector_relaxation(&spec, n, &times, OdeOptions::default())?;
            let rep = relaxation_time(
                &res,
                &RelaxOptions {
                    threshold: cfg.threshold,
                    ..Default::default()
                },
            )?;
            let cls = detect_anomalous_relaxation(&rep, gap, &spec, None);
            ("domainwall".into(), gap, res, rep, cls)
        }
    };
    let t_max = *res.times.last().expect("non-empty grid");
    let out = RelaxOutput {
        spec,
        n: cfg.n,
        init,
        gap,
        t_max,
        report,
        classification,
        max_trace_error: res.max_trace_error,
    };
    let (report_path, evo_path) = match format {
        Format::Json => (path.clone(), sibling(&path, "evolution.csv")),
        Format::Csv => (sibling(&path, "report.json"), path.clone()),
    };
    io::write_json(&report_path, &out)?;
    dynamics::write_evolution_csv(&evo_path, &res, cfg.n.is_some())?;
    Ok(match format {
        Format::Json => vec![report_path, evo_path],
        Format::Csv => vec![evo_path, report_path],
    })
}

// ---------------------------------------------------------------------------

pub fn scan(cfg: &RunConfig) -> Res<Vec<PathBuf>> {
    let specs = cfg.specs()?;
    let format = cfg.format.unwrap_or(Format::Csv);
    let path = cfg.output_path("scan", format);
    // The initial state is rebuilt per size inside the scan for the
    // built-in states; a custom file fixes L.
    let l0 = specs.first().map_or(0, |s| s.l);
    let opts = scan_options(cfg, l0)?;
    let rows = dynamics::scan(&specs, &opts);
    match format {
        Format::Csv => dynamics::write_scan_csv(&path, &rows)?,
        Format::Json => io::write_json(&path, &rows)?,
    }
    let failed: Vec<String> = rows.iter().filter_map(|r| r.error.clone()).collect();
    if !rows.is_empty() && failed.len() == rows.len() {
        return Err(CliError::AllFailed {
            path,
            first: failed[0].clone(),
        });
    }
    for (r, e) in rows.iter().filter_map(|r| r.error.as_ref().map(|e| (r, e))) {
        eprintln!("scan row L={} gamma={} failed: {e}", r.l, r.gamma);
    }
    Ok(vec![path])
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SteadyEntry {
    /// Site occupations (diagonal of ρ in the single-particle case).
    pub diagonal: Vec<f64>,
    /// Max-norm of 𝓛ρ.
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub localization: Option<LocalizationFit>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub analytic_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub imbalance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SteadyOutput {
    pub spec: ModelSpec,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    pub states: Vec<SteadyEntry>,
}

pub fn steady(cfg: &RunConfig) -> Res<Vec<PathBuf>> {
    let spec = cfg.spec()?;
    let format = cfg.format.unwrap_or(Format::Json);
    let path = cfg.output_path("steady", format);
    let mut files = Vec::new();
    let states = match cfg.n {
        Some(n) => {
            let ops = manybody::build_sector_operators(&spec, n)?;
            let rho = manybody::sector_steady_state(&ops)?;
            let r = ops.lindbladian().apply(rho.view());
            let dens = ops.densities(rho.view());
            vec![SteadyEntry {
                residual: r.iter().map(|z| z.norm()).fold(0.0, f64::max),
                imbalance: Some(manybody::imbalance_of_profile(&dens)),
                diagonal: dens,
                localization: None,
                analytic_distance: None,
            }]
        }
        None => {
            let rhos = if !spec.feedback && spec.bc == Boundary::Pbc {
                let precision: Precision = cfg.precision.parse()?;
                steady::numeric_steady(
                    &superop::model_spectrum(&spec, precision)?,
                    Basis::Site { l: spec.l },
                )?
            } else {
                vec![steady::steady_by_solve(&spec)?]
            };
            let analytic = if spec.feedback && spec.bc == Boundary::Pbc {
                Some(steady::analytic_steady_feedback_pbc(&spec)?)
            } else {
                None
            };
            let mut v = Vec::new();
            for (k, rho) in rhos.iter().enumerate() {
                let rp = sibling(&path, &format!("rho{}.csv", k + 1));
                steady::write_density_csv(&rp, rho)?;
                files.push(rp);
                v.push(SteadyEntry {
                    diagonal: rho.diagonal(),
                    residual: steady::steady_residual(&spec, rho)?,
                    localization: if spec.bc == Boundary::Obc {
                        steady::fit_localization_length(rho, None, &spec).ok()
                    } else {
                        None
                    },
                    analytic_distance: analytic
                        .as_ref()
                        .map(|a| rho.trace_distance(a))
                        .transpose()?,
                    imbalance: None,
                });
            }
            v
        }
    };
    let out = SteadyOutput {
        spec,
        n: cfg.n,
        states,
    };
    match format {
        Format::Json => io::write_json(&path, &out)?,
        Format::Csv => {
            let mut header = vec!["site".to_string()];
            header.extend((1..=out.states.len()).map(|k| format!("state_{k}")));
            let rows = (0..spec.l).map(|i| {
                let mut r = vec![Cell::from(i + 1)];
                r.extend(out.states.iter().map(|s| Cell::from(s.diagonal[i])));
                r
            });
            io::write_csv(&path, &header, rows)?;
        }
    }
    files.insert(0, path);
    Ok(files)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PerturbOutput {
    #[serde(flatten)]
    pub spectrum: SpectrumDump,
    /// Degeneracy-class size → number of classes.
    pub class_sizes: BTreeMap<usize, usize>,
    /// Largest distance of a one-to-one matching against the exact spectrum.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_match_distance: Option<f64>,
}

pub fn perturb(cfg: &RunConfig) -> Res<Vec<PathBuf>> {
    let spec = cfg.spec()?;
    let format = cfg.format.unwrap_or(Format::Json);
    let path = cfg.output_path("perturb", format);
    let ps = match (spec.bc, cfg.order) {
        (Boundary::Pbc, o) => perturb::perturbative_spectrum_pbc(&spec, o)?,
        (Boundary::Obc, 0) => perturb::zeroth_order_obc_spectrum(&spec),
        (Boundary::Obc, 1) => perturb::first_order_obc(&spec, 1e-9)?,
        (Boundary::Obc, o) => {
            return Err(CliError::Config(format!(
                "order {o} is not available under open boundaries (use 0 or 1)"
            )))
        }
    };
    let max_match_distance = if cfg.compare {
        let exact = superop::model_eigenvalues(&spec, Precision::Double)?;
        Some(ps.match_exact(&exact.eigenvalues).max_distance)
    } else {
        None
    };
    let out = PerturbOutput {
        spectrum: ps.dump(&spec),
        class_sizes: ps.class_sizes(),
        max_match_distance,
    };
    match format {
        Format::Json => io::write_json(&path, &out)?,
        Format::Csv => write_eigenvalue_csv(&path, &out.spectrum.eigenvalues)?,
    }
    Ok(vec![path])
}

// ---------------------------------------------------------------------------

pub fn traj(cfg: &RunConfig) -> Res<Vec<PathBuf>> {
    let spec = cfg.spec()?;
    let n = cfg.n.unwrap_or(spec.l / 2);
    let format = cfg.format.unwrap_or(Format::Csv);
    let path = cfg.output_path("traj", format);
    let opts = TrajectoryOptions {
        t_max: cfg.t_max.unwrap_or(10.0),
        dt: cfg.dt,
        n_traj: cfg.ntraj,
        base_seed: cfg.seed,
        sample_dt: cfg.sample_dt,
        backend: match cfg.backend {
            BackendKind::Statevector => Backend::StateVector,
            BackendKind::Gaussian => Backend::Gaussian,
        },
        init: many_body_init(cfg)?,
    };
    let ens = manybody::run_trajectories(&spec, n, &opts)?;
    for w in &ens.warnings {
        eprintln!("warning: {w}");
    }
    match format {
        Format::Csv => {
            manybody::write_trajectory_csv(&path, &ens)?;
            let jp = sibling(&path, "ensemble.json");
            io::write_json(&jp, &ens)?;
            Ok(vec![path, jp])
        }
        Format::Json => {
            io::write_json(&path, &ens)?;
            Ok(vec![path])
        }
    }
}
