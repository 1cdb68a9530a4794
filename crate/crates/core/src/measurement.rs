//! Measurement operators: Alice's projective polarization measurements and
//! Bob's lossy time-bin POVM on `{∅, E, L}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::quantum::{c, real_matrix, CMatrix, HermitianOperator};
use crate::{Error, Result};

/// Transmission of the long and the short path of the analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerEfficiencies {
    pub eta_l: f64,
    pub eta_s: f64,
}

impl AnalyzerEfficiencies {
    pub fn new(eta_l: f64, eta_s: f64) -> Result<Self> {
        for (name, v) in [("eta_l", eta_l), ("eta_s", eta_s)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, v, "transmission must lie in [0, 1]"));
            }
        }
        Ok(Self { eta_l, eta_s })
    }

    pub fn ideal() -> Self {
        Self {
            eta_l: 1.0,
            eta_s: 1.0,
        }
    }

    pub fn swapped(self) -> Self {
        Self {
            eta_l: self.eta_s,
            eta_s: self.eta_l,
        }
    }
}

impl Default for AnalyzerEfficiencies {
    /// Both paths at 0.9; the two transmissions are close in practice.
    fn default() -> Self {
        Self {
            eta_l: 0.9,
            eta_s: 0.9,
        }
    }
}

/// Alice's outcomes in the H/V and D/A bases.
#[derive(Debug, Clone)]
pub struct AlicePovm {
    pub h: HermitianOperator,
    pub v: HermitianOperator,
    pub d: HermitianOperator,
    pub a: HermitianOperator,
}

pub fn alice_povm() -> AlicePovm {
    let op = |rows: &[f64]| HermitianOperator::single(real_matrix(2, rows)).unwrap();
    AlicePovm {
        h: op(&[1.0, 0.0, 0.0, 0.0]),
        v: op(&[0.0, 0.0, 0.0, 1.0]),
        d: op(&[0.5, 0.5, 0.5, 0.5]),
        a: op(&[0.5, -0.5, -0.5, 0.5]),
    }
}

/// Projectors `(1 ± n·σ)/2` for the Bloch direction `cos θ ẑ + sin θ x̂`.
/// `θ = π/4` is the `σ_{z+x}` setting, `θ = -π/4` the `σ_{z-x}` setting.
pub fn alice_projectors_xz(theta: f64) -> (HermitianOperator, HermitianOperator) {
    let (s, co) = theta.sin_cos();
    let plus = real_matrix(2, &[0.5 * (1.0 + co), 0.5 * s, 0.5 * s, 0.5 * (1.0 - co)]);
    let minus = real_matrix(2, &[0.5 * (1.0 - co), -0.5 * s, -0.5 * s, 0.5 * (1.0 + co)]);
    (
        HermitianOperator::single(plus).unwrap(),
        HermitianOperator::single(minus).unwrap(),
    )
}

/// Projectors onto `(|H> ± e^{iφ}|V>)/√2`. `φ = 0` gives `(M_D, M_A)`.
pub fn alice_projectors_xy(phi: f64) -> (HermitianOperator, HermitianOperator) {
    let e = Complex64::from_polar(0.5, phi);
    let build = |sign: f64| {
        CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), e.conj() * sign, e * sign, c(0.5, 0.0)])
    };
    (
        HermitianOperator::single(build(1.0)).unwrap(),
        HermitianOperator::single(build(-1.0)).unwrap(),
    )
}

/// Bob's outcomes: early bin, late bin, middle (superposition) bin, nothing.
#[derive(Debug, Clone)]
pub struct BobPovm {
    pub early: HermitianOperator,
    pub late: HermitianOperator,
    pub middle: HermitianOperator,
    pub none: HermitianOperator,
}

impl BobPovm {
    pub fn elements(&self) -> [(&'static str, &HermitianOperator); 4] {
        [
            ("M_E", &self.early),
            ("M_L", &self.late),
            ("M_X", &self.middle),
            ("M_0", &self.none),
        ]
    }
}

pub fn bob_povm(eff: AnalyzerEfficiencies) -> Result<BobPovm> {
    bob_povm_with_phase(eff, 0.0)
}

/// Bob's POVM with analyzer phase `phase` in the middle bin:
/// `M_X = ¼ |x><x|`, `|x> = √η_l |E> + e^{i phase} √η_s |L>`.
pub fn bob_povm_with_phase(eff: AnalyzerEfficiencies, phase: f64) -> Result<BobPovm> {
    let eff = AnalyzerEfficiencies::new(eff.eta_l, eff.eta_s)?;
    let (el, es) = (eff.eta_l, eff.eta_s);
    let mut early = CMatrix::zeros(3, 3);
    early[(1, 1)] = c(0.25 * es, 0.0);
    let mut late = CMatrix::zeros(3, 3);
    late[(2, 2)] = c(0.25 * el, 0.0);
    let mut middle = CMatrix::zeros(3, 3);
    let cross = Complex64::from_polar(0.25 * (el * es).sqrt(), -phase);
    middle[(1, 1)] = c(0.25 * el, 0.0);
    middle[(1, 2)] = cross;
    middle[(2, 1)] = cross.conj();
    middle[(2, 2)] = c(0.25 * es, 0.0);
    let none = CMatrix::identity(3, 3) - &early - &late - &middle;

    let op = |m| HermitianOperator::single(m).expect("constructed Hermitian");
    Ok(BobPovm {
        early: op(early),
        late: op(late),
        middle: op(middle),
        none: op(none),
    })
}

/// Spectral margins of one POVM element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMargin {
    pub name: String,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PovmDiagnostics {
    pub elements: Vec<ElementMargin>,
    /// Largest entry of `|Σ M_k - 1|`.
    pub completeness_residual: f64,
    pub violations: Vec<String>,
}

impl PovmDiagnostics {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(Error::InvalidPovm(self.violations.join("; ")))
        }
    }
}

pub const POVM_TOL: f64 = 1e-12;

/// Check positivity, `M ≤ 1` and completeness of a set of POVM elements.
pub fn validate_povm(elements: &[(&str, &HermitianOperator)]) -> Result<PovmDiagnostics> {
    let first = elements
        .first()
        .ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
    let n = first.1.dim();
    let mut sum = CMatrix::zeros(n, n);
    let mut margins = Vec::with_capacity(elements.len());
    let mut violations = Vec::new();
    for (name, m) in elements {
        if m.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.dim(),
            });
        }
        let ev = m.eig()?.values;
        let (lo, hi) = (ev[0], ev[n - 1]);
        if lo < -POVM_TOL {
            violations.push(format!("{name} not positive: min eigenvalue {lo:e}"));
        }
        if hi > 1.0 + POVM_TOL {
            violations.push(format!("{name} exceeds identity: max eigenvalue {hi}"));
        }
        margins.push(ElementMargin {
            name: name.to_string(),
            min_eigenvalue: lo,
            max_eigenvalue: hi,
        });
        sum += m.matrix();
    }
    let residual = (sum - CMatrix::identity(n, n))
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.norm()));
    if residual > POVM_TOL {
        violations.push(format!("elements do not sum to identity: residual {residual:e}"));
    }
    Ok(PovmDiagnostics {
        elements: margins,
        completeness_residual: residual,
        violations,
    })
}
