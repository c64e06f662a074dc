use num_complex::Complex64;

use super::eig::hermitian_eig;
use super::matrix::CMatrix;
use super::{tol, QcoreError};

/// Which subsystem of a bipartite state to keep or act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// Normalized pure state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self, QcoreError> {
        for (k, z) in amplitudes.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(QcoreError::NonFinite(k, 0));
            }
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > tol::NORM {
            return Err(QcoreError::NotNormalized(norm));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes a nonzero vector.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self, QcoreError> {
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(QcoreError::NotNormalized(norm));
        }
        Self::new(amplitudes.iter().map(|z| z / norm).collect())
    }

    /// Computational basis state |index⟩ of the given dimension.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim);
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Tensor product |self⟩⊗|other⟩.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut amplitudes = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        Self { amplitudes }
    }

    /// Projector |ψ⟩⟨ψ| as a matrix.
    pub fn projector(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, self.amplitudes[i] * self.amplitudes[j].conj());
            }
        }
        m
    }
}

/// Hermitian, unit-trace, positive-semidefinite matrix.
///
/// Every constructor validates the three invariants; eigenvalues inside
/// the dust window `[EIGENVALUE_FLOOR, 0)` are accepted as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self, QcoreError> {
        assert!(matrix.is_square(), "density matrix must be square");
        let defect = matrix.hermiticity_defect();
        if defect > tol::HERMITICITY {
            return Err(QcoreError::NotHermitian(defect));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > tol::TRACE || tr.im.abs() > tol::TRACE {
            return Err(QcoreError::BadTrace(tr.re));
        }
        let eig = hermitian_eig(&matrix)?;
        if let Some(&worst) = eig
            .values
            .iter()
            .filter(|&&x| x < tol::EIGENVALUE_FLOOR)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
        {
            return Err(QcoreError::NotPsd(worst));
        }
        Ok(Self { matrix })
    }

    /// Hermitizes and renormalizes the trace before validating, for
    /// matrices assembled by chains of floating-point updates.
    pub fn from_unnormalized(matrix: CMatrix) -> Result<Self, QcoreError> {
        let h = matrix.hermitized();
        let tr = h.trace().re;
        if tr.abs() < 1e-300 {
            return Err(QcoreError::BadTrace(tr));
        }
        Self::new(h.scale_real(1.0 / tr))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eig(&self.matrix).expect("validated Hermitian").values
    }

    /// Maximally mixed state I/d.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }
}

/// |ψ⟩⟨ψ| as a density matrix.
pub fn density_from_pure(psi: &PureState) -> DensityMatrix {
    DensityMatrix::new(psi.projector()).expect("projector of a normalized state")
}

/// Convex mixture Σ wᵢ ρᵢ. Weights must be nonnegative and sum to 1.
pub fn mix(pairs: &[(f64, DensityMatrix)]) -> Result<DensityMatrix, QcoreError> {
    if pairs.is_empty() {
        return Err(QcoreError::BadWeights("empty mixture".into()));
    }
    let dim = pairs[0].1.dim();
    let mut sum = 0.0;
    for (w, rho) in pairs {
        if *w < 0.0 || !w.is_finite() {
            return Err(QcoreError::BadWeights(format!("weight {w} out of range")));
        }
        if rho.dim() != dim {
            return Err(QcoreError::DimensionMismatch(format!(
                "mixture component dim {} != {}",
                rho.dim(),
                dim
            )));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > tol::WEIGHT_SUM {
        return Err(QcoreError::BadWeights(format!("weights sum to {sum}")));
    }
    let mut acc = CMatrix::zeros(dim, dim);
    for (w, rho) in pairs {
        acc = &acc + &rho.matrix().scale_real(*w);
    }
    DensityMatrix::new(acc.hermitized())
}

/// Partial trace of a bipartite state with local dimensions `dims`.
pub fn partial_trace(
    rho: &DensityMatrix,
    keep: Side,
    dims: (usize, usize),
) -> Result<DensityMatrix, QcoreError> {
    let (da, db) = dims;
    if rho.dim() != da * db {
        return Err(QcoreError::DimensionMismatch(format!(
            "state dim {} != {da}*{db}",
            rho.dim()
        )));
    }
    let m = rho.matrix();
    let out = match keep {
        Side::A => {
            let mut out = CMatrix::zeros(da, da);
            for i in 0..da {
                for j in 0..da {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..db {
                        acc += m.get(i * db + k, j * db + k);
                    }
                    out.set(i, j, acc);
                }
            }
            out
        }
        Side::B => {
            let mut out = CMatrix::zeros(db, db);
            for k in 0..db {
                for l in 0..db {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..da {
                        acc += m.get(i * db + k, i * db + l);
                    }
                    out.set(k, l, acc);
                }
            }
            out
        }
    };
    DensityMatrix::new(out.hermitized())
}
