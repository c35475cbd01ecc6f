//! Perturbation theory of the Liouvillian around the no-jump generator
//! 𝓛₀ = −i(H_eff ⊗ I − I ⊗ H_eff*), with perturbation γ𝓛₁ = γ Σ_j L_j ⊗ L_j*.
//!
//! Under periodic boundaries the zeroth-order modes are plane-wave pairs
//! |k⟩⊗|k′⟩* and everything has closed forms; under open boundaries an
//! approximate closed form exists at zeroth order and a numeric first order
//! is built on the exact H_eff eigenbasis.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::Array2;
use ndarray_linalg::{Eig, EigVals, Inverse};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::hungarian::{match_points, Matching};
use crate::model::{self, Boundary, ModelSpec};
use crate::superop::SpectrumDump;

const I: C64 = C64::new(0.0, 1.0);

/// Momenta k = 2πj/L, k′ = 2πj′/L with j, j′ reduced to 1..=L.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MomentumPair {
    pub j: i64,
    pub jp: i64,
    pub l: usize,
}

fn reduce(j: i64, l: usize) -> i64 {
    let r = j.rem_euclid(l as i64);
    if r == 0 {
        l as i64
    } else {
        r
    }
}

impl MomentumPair {
    pub fn new(j: i64, jp: i64, l: usize) -> Self {
        MomentumPair {
            j: reduce(j, l),
            jp: reduce(jp, l),
            l,
        }
    }

    pub fn k(&self) -> f64 {
        2.0 * PI * self.j as f64 / self.l as f64
    }

    pub fn kp(&self) -> f64 {
        2.0 * PI * self.jp as f64 / self.l as f64
    }

    pub fn all(l: usize) -> Vec<MomentumPair> {
        (1..=l as i64)
            .flat_map(|j| (1..=l as i64).map(move |jp| MomentumPair::new(j, jp, l)))
            .collect()
    }
}

/// λ⁽⁰⁾ = −(i/2)(cos k − cos k′) − (γ/2)(2 + sin k + sin k′).
pub fn zeroth_order_pbc(p: MomentumPair, gamma: f64) -> C64 {
    let (k, kp) = (p.k(), p.kp());
    C64::new(
        -0.5 * gamma * (2.0 + k.sin() + kp.sin()),
        -0.5 * (k.cos() - kp.cos()),
    )
}

/// γ times the diagonal element of 𝓛₁: γ cos k cos k′/L with feedback,
/// γ(1 + sin k)(1 + sin k′)/L without.
pub fn first_order_pbc(p: MomentumPair, gamma: f64, feedback: bool) -> C64 {
    let (k, kp) = (p.k(), p.kp());
    let l = p.l as f64;
    let v = if feedback {
        k.cos() * kp.cos() / l
    } else {
        (1.0 + k.sin()) * (1.0 + kp.sin()) / l
    };
    C64::new(gamma * v, 0.0)
}

/// Site-independent factor of ⟨k₂|L_j|k⟩ = e^{i(k₂−k)j} f(k₂, k)/(2L).
fn jump_factor(k2: f64, k: f64, feedback: bool) -> C64 {
    let e = |x: f64| C64::from_polar(1.0, x);
    if feedback {
        C64::new(1.0, 0.0) - e(k2 - k) + I * e(-k) + I * e(k2)
    } else {
        C64::new(1.0, 0.0) + I * e(-k) - I * e(k2) + e(k2 - k)
    }
}

/// ⟨k_a|⊗⟨k′_a|* 𝓛₁ |k_b⟩⊗|k′_b⟩*. Vanishes unless the momentum transfer
/// is the same on both sides.
pub fn l1_element_pbc(a: MomentumPair, b: MomentumPair, feedback: bool) -> C64 {
    let l = a.l as i64;
    if (a.j - b.j - a.jp + b.jp).rem_euclid(l) != 0 {
        return C64::new(0.0, 0.0);
    }
    let f = jump_factor(a.k(), b.k(), feedback);
    let g = jump_factor(a.kp(), b.kp(), feedback);
    f * g.conj() / (4.0 * l as f64)
}

/// Closed-form γ² correction for the feedback model:
/// (γ²/L²) Σ_{k₂≠k} cos k cos k₂ cos k′ cos(k₂+k′−k) / (λ⁽⁰⁾_{k,k′} − λ⁽⁰⁾_{k₂,k₂+k′−k}).
pub fn second_order_feedback_pbc(p: MomentumPair, gamma: f64) -> Result<C64> {
    let l = p.l;
    let lam = zeroth_order_pbc(p, gamma);
    let (k, kp) = (p.k(), p.kp());
    let mut s = C64::new(0.0, 0.0);
    for j2 in 1..=l as i64 {
        if j2 == p.j {
            continue;
        }
        let q = MomentumPair::new(j2, j2 + p.jp - p.j, l);
        let num = k.cos() * q.k().cos() * kp.cos() * q.kp().cos();
        let den = lam - zeroth_order_pbc(q, gamma);
        if den.norm() < 1e-12 {
            if num.abs() < 1e-14 {
                continue;
            }
            return Err(Error::Degenerate {
                j: p.j as usize,
                jp: p.jp as usize,
            });
        }
        s += num / den;
    }
    Ok(s * (gamma * gamma / (l * l) as f64))
}

/// Second-order correction for either model from the generic 𝓛₁ elements
/// (sum over momentum-conserving pairs outside the degeneracy class).
pub fn second_order_pbc(p: MomentumPair, spec: &ModelSpec) -> Result<C64> {
    let l = p.l;
    let lam = zeroth_order_pbc(p, spec.gamma);
    let mut s = C64::new(0.0, 0.0);
    for j2 in 1..=l as i64 {
        if j2 == p.j {
            continue;
        }
        let q = MomentumPair::new(j2, j2 + p.jp - p.j, l);
        let num = l1_element_pbc(q, p, spec.feedback) * l1_element_pbc(p, q, spec.feedback);
        let den = lam - zeroth_order_pbc(q, spec.gamma);
        if den.norm() < 1e-12 {
            if num.norm() < 1e-14 {
                continue;
            }
            return Err(Error::Degenerate {
                j: p.j as usize,
                jp: p.jp as usize,
            });
        }
        s += num / den;
    }
    Ok(s * spec.gamma * spec.gamma)
}

/// Canonical key of a pair's zeroth-order degeneracy class, by integer
/// arithmetic. λ⁽⁰⁾ depends on the pair only through e^{−ik} − e^{ik′};
/// two such differences of L-th roots of unity coincide iff the pairs are
/// equal, both differences vanish (k′ = −k), or both pairs are
/// antipodal-swapped partners (even L).
fn class_key(p: MomentumPair) -> (i64, i64) {
    let l = p.l as i64;
    let a = (-p.j).rem_euclid(l);
    let b = p.jp.rem_euclid(l);
    if a == b {
        return (-1, -1);
    }
    if l % 2 == 0 {
        let partner = ((b + l / 2).rem_euclid(l), (a + l / 2).rem_euclid(l));
        return (a, b).min(partner);
    }
    (a, b)
}

/// Exact partition of all L² pairs by equal zeroth-order eigenvalue.
pub fn degeneracy_classes_pbc(l: usize) -> Vec<Vec<MomentumPair>> {
    let mut map: BTreeMap<(i64, i64), Vec<MomentumPair>> = BTreeMap::new();
    for p in MomentumPair::all(l) {
        map.entry(class_key(p)).or_default().push(p);
    }
    map.into_values().collect()
}

/// First-order corrections (γ × eigenvalues of 𝓛₁ restricted to the class).
/// Two-member classes use the quadratic formula; larger ones a dense solve.
pub fn degenerate_first_order(class: &[MomentumPair], spec: &ModelSpec) -> Result<Vec<C64>> {
    if spec.bc != Boundary::Pbc {
        return Err(Error::InvalidModel(
            "closed-form classes exist for periodic chains only".into(),
        ));
    }
    let m = Array2::from_shape_fn((class.len(), class.len()), |(a, b)| {
        l1_element_pbc(class[a], class[b], spec.feedback)
    });
    block_eigenvalues(&m, spec.gamma)
}

fn block_eigenvalues(m: &Array2<C64>, gamma: f64) -> Result<Vec<C64>> {
    let n = m.nrows();
    let vals: Vec<C64> = match n {
        1 => vec![m[[0, 0]]],
        2 => {
            let tr = m[[0, 0]] + m[[1, 1]];
            let disc = ((m[[0, 0]] - m[[1, 1]]).powi(2) + m[[0, 1]] * m[[1, 0]] * 4.0).sqrt();
            vec![(tr + disc) * 0.5, (tr - disc) * 0.5]
        }
        _ => m.eigvals()?.to_vec(),
    };
    Ok(vals.into_iter().map(|v| v * gamma).collect())
}

/// First-order eigenvector correction of a non-degenerate pair, returned as
/// the d×d matrix Σ c |k₂⟩⟨k′₂| (the vectorized |k₂⟩⊗|k′₂⟩*). Multiply by γ
/// for the actual shift of the mode.
pub fn first_order_eigenvector_pbc(p: MomentumPair, spec: &ModelSpec) -> Result<Array2<C64>> {
    let l = p.l;
    let lam = zeroth_order_pbc(p, spec.gamma);
    let mut out = Array2::<C64>::zeros((l, l));
    for j2 in 1..=l as i64 {
        if j2 == p.j {
            continue;
        }
        let q = MomentumPair::new(j2, j2 + p.jp - p.j, l);
        let num = l1_element_pbc(q, p, spec.feedback);
        let den = lam - zeroth_order_pbc(q, spec.gamma);
        if den.norm() < 1e-12 {
            if num.norm() < 1e-14 {
                continue;
            }
            return Err(Error::Degenerate {
                j: p.j as usize,
                jp: p.jp as usize,
            });
        }
        let c = num / den;
        let u = model::plane_wave(l, q.j);
        let v = model::plane_wave(l, q.jp);
        for a in 0..l {
            for b in 0..l {
                out[[a, b]] += c * u[a] * v[b].conj();
            }
        }
    }
    Ok(out)
}

/// Approximate open-chain spectrum at zeroth order, boundary dissipation
/// neglected: γ<1 gives −(i/2)√(1−γ²)(cos k − cos k′) − γ, γ>1 gives
/// −(1/2)√(γ²−1)(sin k + sin k′) − γ, γ=1 gives −1.
pub fn zeroth_order_obc(k: f64, kp: f64, gamma: f64) -> C64 {
    if gamma < 1.0 {
        C64::new(
            -gamma,
            -0.5 * (1.0 - gamma * gamma).sqrt() * (k.cos() - kp.cos()),
        )
    } else if gamma > 1.0 {
        C64::new(
            -0.5 * (gamma * gamma - 1.0).sqrt() * (k.sin() + kp.sin()) - gamma,
            0.0,
        )
    } else {
        C64::new(-1.0, 0.0)
    }
}

/// Standing-wave momenta πm/(L+1), m = 1..L, of the open chain.
pub fn obc_momenta(l: usize) -> Vec<f64> {
    (1..=l).map(|m| PI * m as f64 / (l + 1) as f64).collect()
}

/// Approximate right and left H_eff eigenvectors on the open chain:
/// right ∝ ρ⁻ⁿ e^{−ikn}, left ∝ ρⁿ e^{ikn} with ρ = √((t+γ)/|t−γ|), scaled
/// so that ⟨left|right⟩ = 1 (and biorthogonal across the 2πj/L grid).
pub fn approximate_obc_eigenvectors(k: f64, spec: &ModelSpec) -> Result<(Vec<C64>, Vec<C64>)> {
    let r = spec
        .skin_ratio()
        .ok_or_else(|| Error::InvalidModel("γ = t: skin ratio diverges".into()))?;
    let l = spec.l as f64;
    let right: Vec<C64> = (1..=spec.l)
        .map(|n| C64::from_polar(r.powi(-(n as i32)) / l.sqrt(), -k * n as f64))
        .collect();
    // Stored as the ket whose bra is the left vector: components ρⁿe^{ikn} conjugated.
    let left: Vec<C64> = (1..=spec.l)
        .map(|n| C64::from_polar(r.powi(n as i32) / l.sqrt(), -k * n as f64))
        .collect();
    Ok((right, left))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PerturbativeSpectrum {
    pub order: u8,
    pub eigenvalues: Vec<C64>,
    /// Pair labels per class: momentum indices (j, j′) under periodic
    /// boundaries, H_eff eigen-indices (a, b) under open ones.
    pub degeneracy_classes: Vec<Vec<(i64, i64)>>,
}

impl PerturbativeSpectrum {
    pub fn class_sizes(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for c in &self.degeneracy_classes {
            *m.entry(c.len()).or_insert(0) += 1;
        }
        m
    }

    pub fn dump(&self, spec: &ModelSpec) -> SpectrumDump {
        let mut ev = self.eigenvalues.clone();
        sort_desc(&mut ev);
        SpectrumDump {
            l: spec.l,
            gamma: spec.gamma,
            t: spec.t,
            bc: spec.bc.to_string(),
            model: spec.model_name().into(),
            precision: "double".into(),
            eigenvalues: ev.iter().map(|z| [z.re, z.im]).collect(),
            gap: f64::NAN,
            zero_mode_count: 0,
            n: None,
            order: Some(self.order),
        }
    }

    /// One-to-one matching against an exact spectrum of the same size.
    pub fn match_exact(&self, exact: &[C64]) -> Matching {
        match_points(&self.eigenvalues, exact)
    }
}

fn sort_desc(v: &mut [C64]) {
    v.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
}

/// Periodic-chain spectrum to the given order. Degenerate classes get the
/// first-order block treatment at any order ≥ 1; singletons add γλ⁽¹⁾ and,
/// at order 2, the second-order term.
pub fn perturbative_spectrum_pbc(spec: &ModelSpec, order: u8) -> Result<PerturbativeSpectrum> {
    if spec.bc != Boundary::Pbc {
        return Err(Error::InvalidModel("expects periodic boundaries".into()));
    }
    if spec.t != 1.0 {
        return Err(Error::InvalidModel("closed forms assume t = 1".into()));
    }
    if order > 2 {
        return Err(Error::InvalidModel(format!(
            "order {order} not implemented"
        )));
    }
    let classes = degeneracy_classes_pbc(spec.l);
    let mut eigenvalues = Vec::with_capacity(spec.l * spec.l);
    for c in &classes {
        let lam0 = zeroth_order_pbc(c[0], spec.gamma);
        if order == 0 {
            eigenvalues.extend(std::iter::repeat_n(lam0, c.len()));
        } else if c.len() == 1 {
            let mut v = lam0 + first_order_pbc(c[0], spec.gamma, spec.feedback);
            if order == 2 {
                v += second_order_pbc(c[0], spec)?;
            }
            eigenvalues.push(v);
        } else {
            eigenvalues.extend(
                degenerate_first_order(c, spec)?
                    .into_iter()
                    .map(|d| lam0 + d),
            );
        }
    }
    let degeneracy_classes = classes
        .iter()
        .map(|c| c.iter().map(|p| (p.j, p.jp)).collect())
        .collect();
    Ok(PerturbativeSpectrum {
        order,
        eigenvalues,
        degeneracy_classes,
    })
}

/// Open-chain zeroth order from the approximate closed form on the
/// standing-wave momenta.
pub fn zeroth_order_obc_spectrum(spec: &ModelSpec) -> PerturbativeSpectrum {
    let ks = obc_momenta(spec.l);
    let eigenvalues = ks
        .iter()
        .flat_map(|&k| ks.iter().map(move |&kp| (k, kp)))
        .map(|(k, kp)| zeroth_order_obc(k, kp, spec.gamma))
        .collect();
    PerturbativeSpectrum {
        order: 0,
        eigenvalues,
        degeneracy_classes: Vec::new(),
    }
}

/// Exact H_eff eigenbasis of the open chain: eigenvalues, right vectors
/// (columns) and left vectors (rows, biorthonormal). Everything, jump
/// operators included, lives in the gauge S = diag(r^{−n}) that makes the
/// hopping symmetric; matrix elements ⟨a^L|X|b^R⟩ are gauge invariant.
struct ObcBasis {
    energies: Vec<C64>,
    right: Array2<C64>,
    left: Array2<C64>,
    jumps: Vec<Array2<C64>>,
}

fn obc_basis(spec: &ModelSpec) -> Result<ObcBasis> {
    let mut h = model::build_effective_hamiltonian(spec)?.entries;
    let mut jumps: Vec<Array2<C64>> = model::build_jump_operators(spec)?
        .into_iter()
        .map(|o| o.entries)
        .collect();
    if let Some(r) = spec
        .skin_ratio()
        .filter(|r| spec.l as f64 * r.log10() < 150.0)
    {
        let s: Vec<f64> = (0..spec.l).map(|n| r.powi(-(n as i32))).collect();
        let g = |m: &mut Array2<C64>| {
            for ((i, j), v) in m.indexed_iter_mut() {
                *v *= s[j] / s[i];
            }
        };
        g(&mut h);
        jumps.iter_mut().for_each(g);
    }
    let (e, r) = h.eig()?;
    let left = r.inv()?;
    Ok(ObcBasis {
        energies: e.to_vec(),
        right: r,
        left,
        jumps,
    })
}

/// Open-chain spectrum to first order, numerically, on the exact H_eff
/// eigenbasis: λ⁽⁰⁾_{ab} = −i(E_a − E_b*), and 𝓛₁ blocks over clusters of
/// numerically equal λ⁽⁰⁾ (|Δλ| < `degeneracy_tol`).
pub fn first_order_obc(spec: &ModelSpec, degeneracy_tol: f64) -> Result<PerturbativeSpectrum> {
    if spec.bc != Boundary::Obc {
        return Err(Error::InvalidModel("expects open boundaries".into()));
    }
    let l = spec.l;
    let b = obc_basis(spec)?;
    // t[j][a][c] = ⟨a^L|L_j|c^R⟩.
    let t: Vec<Array2<C64>> = b
        .jumps
        .iter()
        .map(|lj| b.left.dot(lj).dot(&b.right))
        .collect();
    let lam0 = |a: usize, c: usize| -I * (b.energies[a] - b.energies[c].conj());
    let pairs: Vec<(usize, usize)> = (0..l).flat_map(|a| (0..l).map(move |c| (a, c))).collect();
    let m = |p: (usize, usize), q: (usize, usize)| -> C64 {
        t.iter()
            .map(|tj| tj[[p.0, q.0]] * tj[[p.1, q.1]].conj())
            .sum()
    };

    // Cluster by sorting on real then imaginary part and merging neighbours
    // within tolerance (transitively).
    let mut idx: Vec<usize> = (0..pairs.len()).collect();
    let vals: Vec<C64> = pairs.iter().map(|&(a, c)| lam0(a, c)).collect();
    idx.sort_by(|&x, &y| {
        vals[x]
            .re
            .total_cmp(&vals[y].re)
            .then(vals[x].im.total_cmp(&vals[y].im))
    });
    let mut parent: Vec<usize> = (0..pairs.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let n = p[y];
            p[y] = r;
            y = n;
        }
        r
    }
    for w in 0..idx.len() {
        for v in w + 1..idx.len() {
            if vals[idx[v]].re - vals[idx[w]].re > degeneracy_tol {
                break;
            }
            if (vals[idx[v]] - vals[idx[w]]).norm() < degeneracy_tol {
                let (ra, rb) = (find(&mut parent, idx[v]), find(&mut parent, idx[w]));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..pairs.len() {
        let r = find(&mut parent, i);
        classes.entry(r).or_default().push(i);
    }
    let mut eigenvalues = Vec::with_capacity(pairs.len());
    let mut out_classes = Vec::with_capacity(classes.len());
    for members in classes.values() {
        let blk = Array2::from_shape_fn((members.len(), members.len()), |(x, y)| {
            m(pairs[members[x]], pairs[members[y]])
        });
        let mean: C64 = members.iter().map(|&i| vals[i]).sum::<C64>() / members.len() as f64;
        eigenvalues.extend(
            block_eigenvalues(&blk, spec.gamma)?
                .into_iter()
                .map(|d| mean + d),
        );
        out_classes.push(
            members
                .iter()
                .map(|&i| (pairs[i].0 as i64, pairs[i].1 as i64))
                .collect(),
        );
    }
    Ok(PerturbativeSpectrum {
        order: 1,
        eigenvalues,
        degeneracy_classes: out_classes,
    })
}

/// First-order spectrum for either boundary condition.
pub fn first_order_spectrum(spec: &ModelSpec) -> Result<PerturbativeSpectrum> {
    match spec.bc {
        Boundary::Pbc => perturbative_spectrum_pbc(spec, 1),
        Boundary::Obc => first_order_obc(spec, 1e-9),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::plane_wave;

    fn ring(l: usize, g: f64, fb: bool) -> ModelSpec {
        ModelSpec::new(l, Boundary::Pbc, g, fb).unwrap()
    }

    /// ⟨k_a|⊗⟨k′_a|* 𝓛₁ |k_b⟩⊗|k′_b⟩* from explicit matrices.
    fn l1_dense(spec: &ModelSpec, a: MomentumPair, b: MomentumPair) -> C64 {
        let l = spec.l;
        let js = model::build_jump_operators(spec).unwrap();
        let el = |x: i64, m: &Array2<C64>, y: i64| -> C64 {
            let (u, v) = (plane_wave(l, x), plane_wave(l, y));
            (0..l)
                .flat_map(|i| (0..l).map(move |j| (i, j)))
                .map(|(i, j)| u[i].conj() * m[[i, j]] * v[j])
                .sum()
        };
        js.iter()
            .map(|o| el(a.j, &o.entries, b.j) * el(a.jp, &o.entries, b.jp).conj())
            .sum()
    }

    #[test]
    fn zeroth_order_examples() {
        let g = 0.7;
        let l = 8;
        let z = |j, jp| zeroth_order_pbc(MomentumPair::new(j, jp, l), g);
        assert!(z(6, 6).norm() < 1e-15); // k = k′ = −π/2
        assert!((z(2, 2) - C64::new(-2.0 * g, 0.0)).norm() < 1e-15);
        assert!((z(8, 4) - C64::new(-g, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn first_order_examples() {
        let p = MomentumPair::new(10, 10, 10);
        assert!((first_order_pbc(p, 1.0, true) - C64::new(0.1, 0.0)).norm() < 1e-15);
        let q = MomentumPair::new(6, 3, 8);
        assert!(first_order_pbc(q, 0.9, true).norm() < 1e-15);
        assert!(first_order_pbc(MomentumPair::new(6, 6, 8), 0.9, false).norm() < 1e-15);
    }

    #[test]
    fn closed_form_elements_match_dense() {
        for fb in [true, false] {
            let s = ring(6, 0.3, fb);
            for a in MomentumPair::all(6) {
                for b in MomentumPair::all(6) {
                    assert!((l1_element_pbc(a, b, fb) - l1_dense(&s, a, b)).norm() < 1e-13);
                }
                assert!(
                    (l1_element_pbc(a, a, fb) * s.gamma - first_order_pbc(a, s.gamma, fb)).norm()
                        < 1e-13
                );
            }
        }
    }

    #[test]
    fn classes_partition_with_expected_sizes() {
        for l in [6, 7, 8, 12] {
            let classes = degeneracy_classes_pbc(l);
            assert_eq!(classes.iter().map(Vec::len).sum::<usize>(), l * l);
            for c in &classes {
                let z = zeroth_order_pbc(c[0], 0.37);
                assert!(c
                    .iter()
                    .all(|p| (zeroth_order_pbc(*p, 0.37) - z).norm() < 1e-12));
            }
            // Distinct classes have distinct values.
            for (x, cx) in classes.iter().enumerate() {
                for cy in &classes[x + 1..] {
                    assert!(
                        (zeroth_order_pbc(cx[0], 0.37) - zeroth_order_pbc(cy[0], 0.37)).norm()
                            > 1e-9
                    );
                }
            }
            let sizes = PerturbativeSpectrum {
                order: 0,
                eigenvalues: vec![],
                degeneracy_classes: classes
                    .iter()
                    .map(|c| c.iter().map(|p| (p.j, p.jp)).collect())
                    .collect(),
            }
            .class_sizes();
            if l % 2 == 0 {
                assert_eq!(sizes.get(&1), Some(&l));
                assert_eq!(sizes.get(&2), Some(&((l * l - 2 * l) / 2)));
            } else {
                assert_eq!(sizes.get(&1), Some(&(l * l - l)));
            }
            assert_eq!(sizes.get(&l), Some(&1));
        }
    }

    #[test]
    fn second_order_matches_direct_sum() {
        // Direct summation over every pair outside the class, with
        // explicit matrices.
        let s = ring(6, 0.1, true);
        let p = MomentumPair::new(1, 2, 6);
        let lam = zeroth_order_pbc(p, 0.1);
        let mut direct = C64::new(0.0, 0.0);
        for q in MomentumPair::all(6) {
            if q == p {
                continue;
            }
            let num = l1_dense(&s, q, p) * l1_dense(&s, p, q);
            if num.norm() < 1e-15 {
                continue;
            }
            direct += num / (lam - zeroth_order_pbc(q, 0.1));
        }
        direct *= 0.01;
        let closed = second_order_feedback_pbc(p, 0.1).unwrap();
        assert!((closed - direct).norm() < 1e-12);
        assert!((second_order_pbc(p, &s).unwrap() - direct).norm() < 1e-12);
        assert!(
            second_order_feedback_pbc(MomentumPair::new(6, 6, 8), 0.4)
                .unwrap()
                .norm()
                < 1e-15
        );
    }

    #[test]
    fn conjugation_symmetry() {
        for fb in [true, false] {
            let s = ring(8, 0.5, fb);
            for p in MomentumPair::all(8) {
                let q = MomentumPair::new(p.jp, p.j, 8);
                assert!(
                    (zeroth_order_pbc(p, 0.5) - zeroth_order_pbc(q, 0.5).conj()).norm() < 1e-14
                );
                assert!(
                    (first_order_pbc(p, 0.5, fb) - first_order_pbc(q, 0.5, fb).conj()).norm()
                        < 1e-14
                );
                if let (Ok(a), Ok(b)) = (second_order_pbc(p, &s), second_order_pbc(q, &s)) {
                    assert!((a - b.conj()).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn trace_sum_rule() {
        // Σ_pairs λ⁽¹⁾ equals tr(γ Σ_j L_j ⊗ L_j*) = γ Σ_j |tr L_j|².
        for fb in [true, false] {
            let s = ring(10, 0.3, fb);
            let sum: C64 = MomentumPair::all(10)
                .into_iter()
                .map(|p| first_order_pbc(p, 0.3, fb))
                .sum();
            let tr: f64 = model::build_jump_operators(&s)
                .unwrap()
                .iter()
                .map(|o| o.entries.diag().sum().norm_sqr())
                .sum();
            assert!((sum - C64::new(0.3 * tr, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn two_fold_quadratic_matches_dense() {
        let s = ring(8, 0.4, true);
        for c in degeneracy_classes_pbc(8)
            .into_iter()
            .filter(|c| c.len() == 2)
        {
            let q = degenerate_first_order(&c, &s).unwrap();
            let m = Array2::from_shape_fn((2, 2), |(a, b)| l1_element_pbc(c[a], c[b], true) * 0.4);
            let d = m.eigvals().unwrap();
            for x in &q {
                assert!(d.iter().any(|y| (x - y).norm() < 1e-12));
            }
        }
    }

    #[test]
    fn eigenvector_correction() {
        let s = ring(8, 0.5, true);
        assert!(first_order_eigenvector_pbc(MomentumPair::new(6, 6, 8), &s)
            .unwrap()
            .iter()
            .all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn obc_zeroth_order_branches() {
        for &(k, kp) in &[(0.3, 1.2), (2.0, 0.1)] {
            assert_eq!(zeroth_order_obc(k, kp, 1.0), C64::new(-1.0, 0.0));
            assert!((zeroth_order_obc(k, kp, 0.6).re + 0.6).abs() < 1e-15);
            let z = zeroth_order_obc(k, kp, 2.0);
            assert!(z.im == 0.0 && z.re >= -2.0 - 3f64.sqrt() && z.re <= -2.0 + 3f64.sqrt());
        }
    }

    #[test]
    fn approximate_obc_vectors() {
        let s = ModelSpec::new(12, Boundary::Obc, 0.6, true).unwrap();
        let (r, _) = approximate_obc_eigenvectors(0.4, &s).unwrap();
        // Amplitude ratio 1/2 per site: decay length 1/ln 2.
        assert!((r[1].norm() / r[0].norm() - 0.5).abs() < 1e-14);
        for j in 1..=12 {
            for jp in 1..=12 {
                let (_, lv) = approximate_obc_eigenvectors(2.0 * PI * j as f64 / 12.0, &s).unwrap();
                let (rv, _) =
                    approximate_obc_eigenvectors(2.0 * PI * jp as f64 / 12.0, &s).unwrap();
                let ip: C64 = lv.iter().zip(&rv).map(|(a, b)| a.conj() * b).sum();
                let want = if j == jp { 1.0 } else { 0.0 };
                assert!((ip - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
        let flat = ModelSpec::new(6, Boundary::Obc, 0.0, true).unwrap();
        let (r, _) = approximate_obc_eigenvectors(0.4, &flat).unwrap();
        assert!(r
            .iter()
            .all(|z| (z.norm() - 1.0 / 6f64.sqrt()).abs() < 1e-15));
        assert!(approximate_obc_eigenvectors(
            0.4,
            &ModelSpec::new(6, Boundary::Obc, 1.0, true).unwrap()
        )
        .is_err());
    }
}
