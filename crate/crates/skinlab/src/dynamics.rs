//! Density-matrix evolution, trace-distance curves, relaxation times,
//! cutoff plateaus and relaxation classification.

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, Cell};
use crate::linalg::ode::{self, OdeOptions};
use crate::linalg::{hs_inner, trace, trace_norm_hermitian};
use crate::model::{plane_wave, Basis, Boundary, ModelSpec};
use crate::steady::{self, linear_fit, DensityMatrix};
use crate::superop::{self, expansion_coefficients, Lindbladian, LiouvillianSpectrum, Precision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    SpectralDecomposition,
    Integrator,
}

/// Initial single-particle states.
#[derive(Debug, Clone, PartialEq)]
pub enum InitState {
    /// |L⟩⟨L|, the last site.
    LastSite,
    /// I/L.
    Uniform,
    Custom(DensityMatrix),
}

impl InitState {
    pub fn density(&self, l: usize) -> Result<DensityMatrix> {
        match self {
            InitState::LastSite => Ok(DensityMatrix::site(l, l - 1)),
            InitState::Uniform => Ok(DensityMatrix::maximally_mixed(Basis::Site { l })),
            InitState::Custom(r) if r.dim() == l => Ok(r.clone()),
            InitState::Custom(r) => Err(Error::DimensionMismatch {
                expected: l,
                got: r.dim(),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    /// Trace distance to the reference state at each time.
    pub distances: Vec<f64>,
    /// Site densities ⟨n_i(t)⟩, one row per time.
    pub observables: Vec<Vec<f64>>,
    pub method: Method,
    /// Largest |tr ρ(t) − 1| seen.
    pub max_trace_error: f64,
    /// Largest max-norm of ρ(t) − ρ(t)† seen.
    pub max_hermiticity_error: f64,
    pub ill_conditioned: bool,
}

impl EvolutionResult {
    pub fn site_series(&self, site: usize) -> Vec<f64> {
        self.observables.iter().map(|o| o[site]).collect()
    }
}

/// Geometric-then-linear grid on [0, t_max]: the first quarter of the
/// points spaced geometrically from 0.01 up to t_max/10, the rest uniform.
pub fn hybrid_grid(t_max: f64, n: usize) -> Vec<f64> {
    assert!(n >= 8 && t_max > 0.0);
    let n_geo = n / 4;
    let n_lin = n - n_geo - 1;
    let t_sw = t_max / 10.0;
    let t0 = 0.01f64.min(t_sw / 10.0);
    let mut g = vec![0.0];
    let q = (t_sw / t0).powf(1.0 / (n_geo as f64 - 1.0));
    g.extend((0..n_geo).map(|i| t0 * q.powi(i as i32)));
    g.extend((1..=n_lin).map(|i| t_sw + (t_max - t_sw) * i as f64 / n_lin as f64));
    g
}

pub const DEFAULT_GRID_POINTS: usize = 2000;

/// max(50/Δ, 10·L).
pub fn default_t_max(gap: f64, l: usize) -> f64 {
    let a = if gap > 0.0 { 50.0 / gap } else { 0.0 };
    a.max(10.0 * l as f64)
}

/// Attractor reached from `rho0` when the steady manifold is degenerate:
/// the conserved overlaps (left zero modes) fix the weights of the right
/// zero modes.
pub fn projected_attractor(
    rho0: ArrayView2<C64>,
    right: &[Array2<C64>],
    left: &[Array2<C64>],
) -> Result<Array2<C64>> {
    use ndarray_linalg::Solve;
    let z = right.len();
    let g = Array2::from_shape_fn((z, z), |(a, b)| hs_inner(left[a].view(), right[b].view()));
    let rhs = ndarray::Array1::from_iter(left.iter().map(|l| hs_inner(l.view(), rho0)));
    let c = g.solve_into(rhs)?;
    let mut out = Array2::zeros(rho0.dim());
    for (ci, r) in c.iter().zip(right) {
        out.scaled_add(*ci, r);
    }
    Ok(out)
}

/// The state ρ0 relaxes to. Closed forms where known, the bistable
/// projection for periodic chains without feedback at L = 4N, otherwise a
/// null-space solve.
pub fn reference_steady(spec: &ModelSpec, rho0: &DensityMatrix) -> Result<DensityMatrix> {
    let l = spec.l;
    let basis = Basis::Site { l };
    match (spec.feedback, spec.bc) {
        (true, Boundary::Pbc) => steady::analytic_steady_feedback_pbc(spec),
        (false, _) => {
            let set = steady::analytic_steady_nofeedback(spec)?;
            if set.len() == 1 {
                return Ok(set.into_iter().next().expect("one state"));
            }
            // Conserved quantities: the identity and the k = −π/2 projector.
            let k = plane_wave(l, (3 * l / 4) as i64);
            let p = Array2::from_shape_fn((l, l), |(a, b)| k[a] * k[b].conj());
            let left = vec![
                Array2::from_diag(&ndarray::Array1::from_elem(l, C64::new(1.0, 0.0))),
                p,
            ];
            let right: Vec<Array2<C64>> = set.iter().map(|r| r.entries.clone()).collect();
            DensityMatrix::normalized(
                projected_attractor(rho0.entries.view(), &right, &left)?.view(),
                basis,
            )
        }
        (true, Boundary::Obc) => steady::steady_by_solve(spec),
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub method: Method,
    /// Reference for d(t); computed with [`reference_steady`] when `None`.
    pub reference: Option<DensityMatrix>,
    pub ode: OdeOptions,
    /// Spectrum for the spectral path; computed when `None`.
    pub spectrum: Option<LiouvillianSpectrum>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            method: Method::Integrator,
            reference: None,
            ode: OdeOptions::default(),
            spectrum: None,
        }
    }
}

struct Recorder<'a> {
    reference: &'a Array2<C64>,
    distances: Vec<f64>,
    observables: Vec<Vec<f64>>,
    max_trace_error: f64,
    max_herm: f64,
    err: Option<Error>,
}

impl Recorder<'_> {
    fn record(&mut self, rho: ArrayView2<C64>) {
        let tr = trace(rho);
        self.max_trace_error = self.max_trace_error.max((tr - C64::new(1.0, 0.0)).norm());
        let d = rho.nrows();
        let mut herm: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                herm = herm.max((rho[[i, j]] - rho[[j, i]].conj()).norm());
            }
        }
        self.max_herm = self.max_herm.max(herm);
        self.observables
            .push(rho.diag().iter().map(|z| z.re).collect());
        match trace_norm_hermitian((&rho - self.reference).view()) {
            Ok(v) => self.distances.push(v),
            Err(e) => {
                self.distances.push(f64::NAN);
                self.err.get_or_insert(e);
            }
        }
    }
}

/// Evolves ρ0 under the model's master equation and records d(t) and site
/// densities at each requested time (non-decreasing, starting at ≥ 0).
pub fn evolve(
    spec: &ModelSpec,
    rho0: &DensityMatrix,
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    let l = spec.l;
    if rho0.dim() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            got: rho0.dim(),
        });
    }
    let reference = match &opts.reference {
        Some(r) => r.clone(),
        None => reference_steady(spec, rho0)?,
    };
    let mut rec = Recorder {
        reference: &reference.entries,
        distances: Vec::with_capacity(times.len()),
        observables: Vec::with_capacity(times.len()),
        max_trace_error: 0.0,
        max_herm: 0.0,
        err: None,
    };
    let mut ill = false;
    match opts.method {
        Method::Integrator => {
            let lv = Lindbladian::from_spec(spec)?;
            let y0: Vec<C64> = rho0.entries.iter().copied().collect();
            let mut out = Array2::<C64>::zeros((l, l));
            ode::integrate(
                |_, y, dy| {
                    let rho = ArrayView2::from_shape((l, l), y).expect("l²");
                    lv.apply_into(rho, &mut out);
                    dy.copy_from_slice(out.as_slice().expect("contiguous"));
                },
                0.0,
                &y0,
                times,
                opts.ode,
                |_, _, y| rec.record(ArrayView2::from_shape((l, l), y).expect("l²")),
            )?;
        }
        Method::SpectralDecomposition => {
            let owned;
            let sp = match &opts.spectrum {
                Some(s) => s,
                None => {
                    owned = superop::model_spectrum(spec, Precision::Double)?;
                    &owned
                }
            };
            ill = sp.ill_conditioned();
            let c = expansion_coefficients(sp, rho0.entries.view())?;
            for &t in times {
                let rho = c.evolve(sp, t);
                rec.record(rho.view());
            }
        }
    }
    if let Some(e) = rec.err {
        return Err(e);
    }
    Ok(EvolutionResult {
        times: times.to_vec(),
        distances: rec.distances,
        observables: rec.observables,
        method: opts.method,
        max_trace_error: rec.max_trace_error,
        max_hermiticity_error: rec.max_herm,
        ill_conditioned: ill,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Cutoff {
    None,
    #[serde(rename_all = "camelCase")]
    Plateau {
        t_start: f64,
        plateau_level: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RelaxationReport {
    pub tau: f64,
    pub threshold: f64,
    pub cutoff: Cutoff,
    /// Positive decay rate from the last decade of d(t) above the noise floor.
    pub asymptotic_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxOptions {
    pub threshold: f64,
    /// Relative band around the initial distance that counts as plateau.
    pub plateau_band: f64,
    /// Minimal plateau duration.
    pub plateau_min: f64,
    /// Distances below this are treated as numerical noise in the rate fit.
    pub noise_floor: f64,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions {
            threshold: 0.01,
            plateau_band: 0.05,
            plateau_min: 10.0,
            noise_floor: 1e-8,
        }
    }
}

/// Relaxation time by the stays-below rule, plateau detection and the late
/// exponential rate.
pub fn relaxation_time(res: &EvolutionResult, opts: &RelaxOptions) -> Result<RelaxationReport> {
    let d = &res.distances;
    let t = &res.times;
    if d.is_empty() {
        return Err(Error::InvalidState("empty evolution".into()));
    }
    let last_above = d.iter().rposition(|&x| x >= opts.threshold);
    let tau = match last_above {
        None => t[0],
        Some(i) if i + 1 == d.len() => {
            return Err(Error::NotRelaxed {
                final_distance: d[i],
                threshold: opts.threshold,
            });
        }
        Some(i) => t[i + 1],
    };

    let level = d[0];
    let end = d
        .iter()
        .position(|&x| (x - level).abs() > opts.plateau_band * level)
        .unwrap_or(d.len() - 1);
    let cutoff = if t[end] - t[0] > opts.plateau_min && level > opts.threshold {
        Cutoff::Plateau {
            t_start: t[end],
            plateau_level: level,
        }
    } else {
        Cutoff::None
    };

    Ok(RelaxationReport {
        tau,
        threshold: opts.threshold,
        cutoff,
        asymptotic_rate: asymptotic_rate(t, d, opts.noise_floor),
    })
}

/// Fit ln d = a − κt over the last decade above the floor, after d has
/// entered that decade for good.
pub fn asymptotic_rate(t: &[f64], d: &[f64], floor: f64) -> Option<f64> {
    let lo = d
        .iter()
        .cloned()
        .filter(|x| x.is_finite() && *x > 0.0)
        .fold(f64::INFINITY, f64::min)
        .max(floor);
    let hi = 10.0 * lo;
    let start = d.iter().rposition(|&x| x >= hi)? + 1;
    let idx: Vec<usize> = (start..d.len()).filter(|&i| d[i] >= lo).collect();
    if idx.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| d[i].ln()).collect();
    let (slope, _) = linear_fit(&xs, &ys);
    Some(-slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelaxationClass {
    Standard,
    Accelerated,
    SkinDelayed,
}

impl std::fmt::Display for RelaxationClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RelaxationClass::Standard => "Standard",
            RelaxationClass::Accelerated => "Accelerated",
            RelaxationClass::SkinDelayed => "SkinDelayed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Classification {
    pub class: RelaxationClass,
    pub tau_times_gap: f64,
    /// τ / [(1/Δ)(1 + L/ξ)] for skin-delayed runs with ξ supplied.
    pub skin_coefficient: Option<f64>,
}

pub const ACCELERATED_BELOW: f64 = 0.5;
pub const DELAYED_ABOVE: f64 = 3.0;

/// τΔ < 0.5 → Accelerated; τΔ > 3 with a plateau → SkinDelayed; anything
/// else (including τΔ > 3 without a plateau) → Standard.
pub fn detect_anomalous_relaxation(
    report: &RelaxationReport,
    gap: f64,
    spec: &ModelSpec,
    xi: Option<f64>,
) -> Classification {
    let x = report.tau * gap;
    let plateau = matches!(report.cutoff, Cutoff::Plateau { .. });
    let class = if x < ACCELERATED_BELOW {
        RelaxationClass::Accelerated
    } else if x > DELAYED_ABOVE && plateau {
        RelaxationClass::SkinDelayed
    } else {
        RelaxationClass::Standard
    };
    let skin_coefficient = match (class, xi) {
        (RelaxationClass::SkinDelayed, Some(xi)) if xi > 0.0 => {
            Some(report.tau * gap / (1.0 + spec.l as f64 / xi))
        }
        _ => None,
    };
    Classification {
        class,
        tau_times_gap: x,
        skin_coefficient,
    }
}

/// One row of a relaxation scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub gamma: f64,
    pub tau: Option<f64>,
    pub gap: Option<f64>,
    pub tau_times_gap: Option<f64>,
    pub classification: Option<RelaxationClass>,
    pub cutoff: Option<Cutoff>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub init: InitState,
    pub relax: RelaxOptions,
    pub grid_points: usize,
    /// Overrides the default t_max.
    pub t_max: Option<f64>,
    pub ode: OdeOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            init: InitState::LastSite,
            relax: RelaxOptions::default(),
            grid_points: DEFAULT_GRID_POINTS,
            t_max: None,
            ode: OdeOptions::default(),
        }
    }
}

/// Gap, evolution, relaxation time and classification for one spec.
pub fn relax_one(
    spec: &ModelSpec,
    opts: &ScanOptions,
) -> Result<(f64, EvolutionResult, RelaxationReport, Classification)> {
    let gap = superop::model_eigenvalues(spec, Precision::Double)?.gap;
    let t_max = opts.t_max.unwrap_or_else(|| default_t_max(gap, spec.l));
    let times = hybrid_grid(t_max, opts.grid_points);
    let rho0 = opts.init.density(spec.l)?;
    let eo = EvolveOptions {
        ode: opts.ode,
        ..Default::default()
    };
    let res = evolve(spec, &rho0, &times, &eo)?;
    let rep = relaxation_time(&res, &opts.relax)?;
    let xi = if spec.bc == Boundary::Obc && spec.feedback {
        steady::steady_by_solve(spec)
            .ok()
            .and_then(|r| steady::fit_localization_length(&r, None, spec).ok())
            .map(|f| f.loc_length)
    } else {
        None
    };
    let cls = detect_anomalous_relaxation(&rep, gap, spec, xi);
    Ok((gap, res, rep, cls))
}

/// Runs every spec independently in parallel; rows come back in input
/// order, failures recorded per row.
pub fn scan(specs: &[ModelSpec], opts: &ScanOptions) -> Vec<ScanRow> {
    specs
        .par_iter()
        .map(|s| match relax_one(s, opts) {
            Ok((gap, _, rep, cls)) => ScanRow {
                l: s.l,
                gamma: s.gamma,
                tau: Some(rep.tau),
                gap: Some(gap),
                tau_times_gap: Some(cls.tau_times_gap),
                classification: Some(cls.class),
                cutoff: Some(rep.cutoff),
                error: None,
            },
            Err(e) => ScanRow {
                l: s.l,
                gamma: s.gamma,
                tau: None,
                gap: None,
                tau_times_gap: None,
                classification: None,
                cutoff: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

pub fn tau_vs_gamma_scan(
    template: &ModelSpec,
    gammas: &[f64],
    opts: &ScanOptions,
) -> Result<Vec<ScanRow>> {
    let specs = gammas
        .iter()
        .map(|&g| {
            ModelSpec {
                gamma: g,
                ..*template
            }
            .validated()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scan(&specs, opts))
}

/// Least-squares slope of ln y against ln x.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Times of local maxima of a sampled series (strictly above both
/// neighbours, plateaus take their first point).
pub fn local_maxima(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < y.len() {
        if y[i] > y[i - 1] {
            let mut j = i;
            while j + 1 < y.len() && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < y.len() && y[j + 1] < y[i] {
                out.push(t[i]);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// t, d, n_1, n_L and optionally every n_i.
pub fn write_evolution_csv(path: &Path, res: &EvolutionResult, all_sites: bool) -> Result<()> {
    let l = res.observables.first().map_or(0, Vec::len);
    let mut header = vec![
        "t".to_string(),
        "d".to_string(),
        "n_1".to_string(),
        format!("n_{l}"),
    ];
    if all_sites {
        header.extend((1..=l).map(|i| format!("site_{i}")));
    }
    let rows = (0..res.times.len()).map(|k| {
        let o = &res.observables[k];
        let mut r = vec![
            Cell::from(res.times[k]),
            Cell::from(res.distances[k]),
            Cell::from(o[0]),
            Cell::from(o[l - 1]),
        ];
        if all_sites {
            r.extend(o.iter().map(|&v| Cell::from(v)));
        }
        r
    });
    io::write_csv(path, &header, rows)
}

pub fn write_scan_csv(path: &Path, rows: &[ScanRow]) -> Result<()> {
    let header: Vec<String> = [
        "L",
        "gamma",
        "tau",
        "gap",
        "tau_times_gap",
        "classification",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let opt = |x: Option<f64>| Cell::from(x.unwrap_or(f64::NAN));
    io::write_csv(
        path,
        &header,
        rows.iter().map(|r| {
            vec![
                Cell::from(r.l),
                Cell::from(r.gamma),
                opt(r.tau),
                opt(r.gap),
                opt(r.tau_times_gap),
                Cell::from(r.classification.map_or_else(
                    || format!("error: {}", r.error.clone().unwrap_or_default()),
                    |c| c.to_string(),
                )),
            ]
        }),
    )
}
