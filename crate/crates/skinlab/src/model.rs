//! Single-particle operators of the monitored hopping chain.
//!
//! Sites are labelled `1..=L` in prose and `0..L` in code; site `j` of the
//! documentation is index `j - 1` everywhere below. Bond `j` couples site
//! `j` to `j + 1` (and, under periodic boundaries, site `L` to site `1`).

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Obc,
    Pbc,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Obc => "obc",
            Boundary::Pbc => "pbc",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obc" | "open" => Ok(Boundary::Obc),
            "pbc" | "periodic" => Ok(Boundary::Pbc),
            other => Err(Error::Parse(format!(
                "unknown boundary condition `{other}`"
            ))),
        }
    }
}

/// Lattice size, boundary condition, monitoring rate, hopping and
/// whether the measurement is followed by the unitary feedback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(rename = "L")]
    pub l: usize,
    pub bc: Boundary,
    pub gamma: f64,
    pub t: f64,
    pub feedback: bool,
}

impl ModelSpec {
    pub fn new(l: usize, bc: Boundary, gamma: f64, feedback: bool) -> Result<Self> {
        let spec = ModelSpec {
            l,
            bc,
            gamma,
            t: 1.0,
            feedback,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_hopping(mut self, t: f64) -> Result<Self> {
        self.t = t;
        self.validate()?;
        Ok(self)
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::InvalidModel(format!(
                "L must be at least 2, got {}",
                self.l
            )));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidModel(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::InvalidModel(format!(
                "t must be > 0, got {}",
                self.t
            )));
        }
        Ok(())
    }

    /// Name used in dumps: `feedback` or `measure`.
    pub fn model_name(&self) -> &'static str {
        if self.feedback {
            "feedback"
        } else {
            "measure"
        }
    }

    /// Bonds `(j, j+1)` as zero-based site pairs.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut b: Vec<(usize, usize)> = (0..self.l - 1).map(|j| (j, j + 1)).collect();
        if self.bc == Boundary::Pbc {
            b.push((self.l - 1, 0));
        }
        b
    }

    /// Hatano-Nelson amplification ratio r = sqrt(|t+γ|/|t−γ|); `None` at γ = t.
    pub fn skin_ratio(&self) -> Option<f64> {
        let den = (self.t - self.gamma).abs();
        if den == 0.0 {
            None
        } else {
            Some(((self.t + self.gamma).abs() / den).sqrt())
        }
    }
}

/// Basis in which an operator's matrix is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Site {
        l: usize,
    },
    Sector {
        l: usize,
        n: usize,
    },
    /// Pair basis of a `d`-dimensional space; the matrix is `d² × d²`.
    Vectorized {
        d: usize,
    },
}

impl Basis {
    pub fn dim(&self) -> usize {
        match *self {
            Basis::Site { l } => l,
            Basis::Sector { l, n } => binomial(l, n),
            Basis::Vectorized { d } => d * d,
        }
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Dense complex matrix tagged with its basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexOperator {
    pub dim: usize,
    pub entries: Array2<C64>,
    pub basis: Basis,
}

impl ComplexOperator {
    pub fn new(entries: Array2<C64>, basis: Basis) -> Result<Self> {
        let dim = basis.dim();
        let (r, c) = entries.dim();
        if r != dim || c != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.max(c),
            });
        }
        Ok(ComplexOperator {
            dim,
            entries,
            basis,
        })
    }

    pub fn adjoint(&self) -> Self {
        ComplexOperator {
            dim: self.dim,
            entries: self.entries.t().mapv(|z| z.conj()),
            basis: self.basis,
        }
    }
}

const I: C64 = C64::new(0.0, 1.0);

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn build_hamiltonian(spec: &ModelSpec) -> Result<ComplexOperator> {
    spec.validate()?;
    let l = spec.l;
    let mut h = Array2::<C64>::zeros((l, l));
    let hop = c(spec.t / 4.0);
    for (a, b) in spec.bonds() {
        h[[a, b]] += hop;
        h[[b, a]] += hop;
    }
    ComplexOperator::new(h, Basis::Site { l })
}

/// The 2×2 block of jump operator on bond `(a, b)`, rows/cols ordered `[a, b]`.
pub fn jump_block(feedback: bool) -> [[C64; 2]; 2] {
    let h = c(0.5);
    let ih = I * 0.5;
    if feedback {
        [[h, ih], [ih, -h]]
    } else {
        [[h, ih], [-ih, h]]
    }
}

pub fn build_jump_operators(spec: &ModelSpec) -> Result<Vec<ComplexOperator>> {
    spec.validate()?;
    let l = spec.l;
    let blk = jump_block(spec.feedback);
    spec.bonds()
        .into_iter()
        .map(|(a, b)| {
            let mut m = Array2::<C64>::zeros((l, l));
            let idx = [a, b];
            for (p, &ip) in idx.iter().enumerate() {
                for (q, &iq) in idx.iter().enumerate() {
                    m[[ip, iq]] += blk[p][q];
                }
            }
            ComplexOperator::new(m, Basis::Site { l })
        })
        .collect()
}

/// H_eff = H − i(γ/2) Σ_j L_j† L_j.
pub fn build_effective_hamiltonian(spec: &ModelSpec) -> Result<ComplexOperator> {
    let mut heff = build_hamiltonian(spec)?;
    // L†L is the measurement projector for both models, with entries ±1/2, ±i/2.
    let p = jump_block(false);
    let g = spec.gamma / 2.0;
    for (a, b) in spec.bonds() {
        let idx = [a, b];
        for (x, &ix) in idx.iter().enumerate() {
            for (y, &iy) in idx.iter().enumerate() {
                heff.entries[[ix, iy]] -= I * g * p[x][y];
            }
        }
    }
    Ok(heff)
}

/// Projector onto a single site, `|j⟩⟨j|`.
pub fn site_projector(l: usize, j: usize) -> Array2<C64> {
    let mut m = Array2::zeros((l, l));
    m[[j, j]] = c(1.0);
    m
}

/// Plane wave `|k⟩ = Σ_n e^{−ikn}|n⟩/√L`, n = 1..L, k = 2πj/L. With this
/// sign the ring H_eff eigenvalue of `|k⟩` is ½(cos k − iγ sin k) − iγ/2.
pub fn plane_wave(l: usize, j: i64) -> Vec<C64> {
    let k = 2.0 * std::f64::consts::PI * j as f64 / l as f64;
    let norm = 1.0 / (l as f64).sqrt();
    (1..=l)
        .map(|n| C64::from_polar(norm, -k * n as f64))
        .collect()
}
