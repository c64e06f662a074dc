use num_complex::Complex64;

use super::matrix::CMatrix;
use super::{tol, QcoreError};

/// Eigendecomposition of a Hermitian matrix: real eigenvalues in
/// descending order, eigenvectors as the corresponding columns.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEig {
    /// Column `k` as a vector.
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        (0..self.vectors.rows()).map(|i| self.vectors.get(i, k)).collect()
    }

    /// Rebuilds V f(Λ) V† for a real function of the eigenvalues.
    pub fn assemble(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut out = CMatrix::zeros(n, n);
        for k in 0..n {
            let fk = f(self.values[k]);
            if fk == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors.get(i, k);
                for j in 0..n {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + vik * self.vectors.get(j, k).conj() * fk);
                }
            }
        }
        out
    }
}

fn off_diagonal_mass(m: &CMatrix) -> f64 {
    let n = m.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += m.get(i, j).norm_sqr();
            }
        }
    }
    sum.sqrt()
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// Each rotation annihilates one off-diagonal pair; sweeps repeat until
/// the off-diagonal Frobenius mass drops below [`tol::JACOBI_OFF`].
/// Intended for the small dimensions this crate works with (≤ ~16),
/// where determinism and simplicity matter more than asymptotics.
pub fn hermitian_eig(m: &CMatrix) -> Result<HermitianEig, QcoreError> {
    assert!(m.is_square(), "eigendecomposition of non-square matrix");
    let defect = m.hermiticity_defect();
    if defect > tol::EIG_INPUT {
        return Err(QcoreError::NotHermitian(defect));
    }
    let n = m.rows();
    let mut a = m.hermitized();
    let mut v = CMatrix::identity(n);

    let mut converged = false;
    for _ in 0..tol::JACOBI_MAX_SWEEPS {
        if off_diagonal_mass(&a) < tol::JACOBI_OFF {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let mag = apq.norm();
                if mag < 1e-300 {
                    continue;
                }
                // Unitary 2x2 rotation in the (p,q) plane that zeroes a[p][q].
                let u = apq / mag;
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let tau = (aqq - app) / (2.0 * mag);
                let sign = if tau < 0.0 { -1.0 } else { 1.0 };
                let t = sign / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Columns: col_p' = c*col_p - s*conj(u)*col_q,
                //          col_q' = s*u*col_p + c*col_q; rows follow by symmetry.
                let su = Complex64::new(s, 0.0) * u;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * c - akq * su.conj());
                    a.set(k, q, akp * su + akq * c);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, apk * c - aqk * su);
                    a.set(q, k, apk * su.conj() + aqk * c);
                }
                // Clean the pivot pair and keep the diagonal real.
                a.set(p, q, Complex64::new(0.0, 0.0));
                a.set(q, p, Complex64::new(0.0, 0.0));
                a.set(p, p, Complex64::new(a.get(p, p).re, 0.0));
                a.set(q, q, Complex64::new(a.get(q, q).re, 0.0));

                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * c - vkq * su.conj());
                    v.set(k, q, vkp * su + vkq * c);
                }
            }
        }
    }
    if !converged && off_diagonal_mass(&a) >= tol::JACOBI_OFF {
        return Err(QcoreError::EigNoConvergence(
            tol::JACOBI_MAX_SWEEPS,
            off_diagonal_mass(&a),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());

    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, new_col, v.get(i, old_col));
        }
    }
    Ok(HermitianEig { values, vectors })
}

/// Hermitian PSD square root via eigendecomposition.
///
/// Eigenvalues in `[EIGENVALUE_FLOOR, 0)` are clamped to zero; anything
/// more negative is rejected as a genuine positivity violation.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix, QcoreError> {
    let eig = hermitian_eig(m)?;
    if let Some(&worst) = eig
        .values
        .iter()
        .filter(|&&x| x < tol::EIGENVALUE_FLOOR)
        .min_by(|a, b| a.partial_cmp(b).unwrap())
    {
        return Err(QcoreError::NotPsd(worst));
    }
    Ok(eig.assemble(|x| if x > 0.0 { x.sqrt() } else { 0.0 }))
}

/// Operator norm: largest singular value, computed as sqrt(λmax(m†m)).
pub fn operator_norm(m: &CMatrix) -> f64 {
    let gram = m.dagger().matmul(m);
    // m†m is Hermitian by construction; symmetrize away rounding dust.
    let eig = hermitian_eig(&gram.hermitized()).expect("gram matrix is Hermitian");
    eig.values.first().map_or(0.0, |&x| x.max(0.0)).sqrt()
}
