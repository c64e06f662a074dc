//! CHSH expectation values, two-qubit correlation matrices, and the
//! maximal CHSH value with explicit optimal settings.
//!
//! Basis convention, fixed project-wide: mode |1⟩ maps to index 0 and
//! mode |2⟩ to index 1 on each side.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::qcore::{
    hermitian_eig, pauli_x, pauli_y, pauli_z, tol, CMatrix, DensityMatrix, QcoreError,
};

#[derive(Debug, Error)]
pub enum BellError {
    #[error("expected a two-qubit state (dim 4), got dim {0}")]
    DimensionMismatch(usize),
    #[error("Bloch direction has norm {0} (expected 1)")]
    NotUnit(f64),
    #[error(transparent)]
    Kernel(#[from] QcoreError),
}

/// Dichotomic qubit observable n·σ given by a unit Bloch vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochObservable {
    direction: [f64; 3],
}

impl BlochObservable {
    pub fn new(direction: [f64; 3]) -> Result<Self, BellError> {
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > tol::NORM {
            return Err(BellError::NotUnit(norm));
        }
        Ok(Self { direction })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn from_direction(direction: [f64; 3]) -> Result<Self, BellError> {
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(BellError::NotUnit(norm));
        }
        Ok(Self {
            direction: [direction[0] / norm, direction[1] / norm, direction[2] / norm],
        })
    }

    pub fn x() -> Self {
        Self { direction: [1.0, 0.0, 0.0] }
    }

    pub fn y() -> Self {
        Self { direction: [0.0, 1.0, 0.0] }
    }

    pub fn z() -> Self {
        Self { direction: [0.0, 0.0, 1.0] }
    }

    pub fn direction(&self) -> [f64; 3] {
        self.direction
    }

    /// The observable matrix n·σ.
    pub fn operator(&self) -> CMatrix {
        let [nx, ny, nz] = self.direction;
        let mut m = pauli_x().scale_real(nx);
        m = &m + &pauli_y().scale_real(ny);
        m = &m + &pauli_z().scale_real(nz);
        m
    }
}

/// The four measurement directions of a CHSH experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshSettings {
    pub a: BlochObservable,
    pub a_prime: BlochObservable,
    pub b: BlochObservable,
    pub b_prime: BlochObservable,
}

/// Two-qubit correlation matrix t[i][j] = Tr(ρ σi⊗σj).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationMatrix {
    pub t: [[f64; 3]; 3],
}

impl CorrelationMatrix {
    /// t acting on a Bloch vector.
    fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i] += self.t[i][j] * v[j];
            }
        }
        out
    }

    /// tᵀ t as a symmetric 3x3 matrix.
    fn gram(&self) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    g[i][j] += self.t[k][i] * self.t[k][j];
                }
            }
        }
        g
    }
}

fn require_two_qubits(rho: &DensityMatrix) -> Result<(), BellError> {
    if rho.dim() != 4 {
        return Err(BellError::DimensionMismatch(rho.dim()));
    }
    Ok(())
}

/// Correlator E(a,b) = Tr(ρ (a·σ)⊗(b·σ)).
pub fn expectation(
    rho: &DensityMatrix,
    a: &BlochObservable,
    b: &BlochObservable,
) -> Result<f64, BellError> {
    require_two_qubits(rho)?;
    let op = a.operator().kron(&b.operator());
    Ok(rho.matrix().matmul(&op).trace().re)
}

/// Full correlation matrix of a two-qubit state.
pub fn correlation_matrix(rho: &DensityMatrix) -> Result<CorrelationMatrix, BellError> {
    require_two_qubits(rho)?;
    let paulis = [pauli_x(), pauli_y(), pauli_z()];
    let mut t = [[0.0; 3]; 3];
    for (i, si) in paulis.iter().enumerate() {
        for (j, sj) in paulis.iter().enumerate() {
            t[i][j] = rho.matrix().matmul(&si.kron(sj)).trace().re;
        }
    }
    Ok(CorrelationMatrix { t })
}

/// CHSH combination E(a,b) + E(a,b') + E(a',b) − E(a',b').
pub fn chsh_value(rho: &DensityMatrix, s: &ChshSettings) -> Result<f64, BellError> {
    require_two_qubits(rho)?;
    let t = correlation_matrix(rho)?;
    Ok(chsh_from_correlations(&t, s))
}

fn dot(u: [f64; 3], v: [f64; 3]) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

fn chsh_from_correlations(t: &CorrelationMatrix, s: &ChshSettings) -> f64 {
    let e = |a: &BlochObservable, b: &BlochObservable| dot(a.direction(), t.apply(b.direction()));
    e(&s.a, &s.b) + e(&s.a, &s.b_prime) + e(&s.a_prime, &s.b) - e(&s.a_prime, &s.b_prime)
}

fn normalized_or(v: [f64; 3], fallback: [f64; 3]) -> [f64; 3] {
    let n = dot(v, v).sqrt();
    if n < 1e-12 {
        fallback
    } else {
        [v[0] / n, v[1] / n, v[2] / n]
    }
}

/// Eigendecomposition of the symmetric 3x3 matrix tᵀt, descending.
fn gram_eigenpairs(t: &CorrelationMatrix) -> Result<(Vec<f64>, Vec<[f64; 3]>), BellError> {
    let g = t.gram();
    let flat: Vec<f64> = g.iter().flatten().copied().collect();
    let m = CMatrix::from_real(3, 3, &flat)?;
    let eig = hermitian_eig(&m)?;
    let mut vectors = Vec::with_capacity(3);
    for k in 0..3 {
        let col = eig.vector(k);
        // Real symmetric input keeps the Jacobi iteration real.
        vectors.push(normalized_or([col[0].re, col[1].re, col[2].re], [0.0, 0.0, 1.0]));
    }
    Ok((eig.values, vectors))
}

/// Maximal CHSH value of a two-qubit state together with settings that
/// achieve it.
///
/// The value is 2√(t1² + t2²) where t1² ≥ t2² are the two largest
/// eigenvalues of tᵀt. Settings are built from the corresponding
/// eigenvectors: b, b' are rotated combinations with tan θ = t2/t1 and
/// a, a' point along t(b+b') and t(b−b'). Achievement is verified
/// numerically; if the construction misses (degenerate spectra), a
/// seeded random-restart coordinate ascent over the four directions
/// takes over.
pub fn max_chsh(rho: &DensityMatrix) -> Result<(f64, ChshSettings), BellError> {
    require_two_qubits(rho)?;
    let t = correlation_matrix(rho)?;
    let (values, vectors) = gram_eigenpairs(&t)?;
    let t1 = values[0].max(0.0).sqrt();
    let t2 = values[1].max(0.0).sqrt();
    let analytic = 2.0 * (t1 * t1 + t2 * t2).sqrt();

    let theta = t2.atan2(t1);
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    let e1 = vectors[0];
    let e2 = vectors[1];
    let b = [
        cos_t * e1[0] + sin_t * e2[0],
        cos_t * e1[1] + sin_t * e2[1],
        cos_t * e1[2] + sin_t * e2[2],
    ];
    let b_prime = [
        cos_t * e1[0] - sin_t * e2[0],
        cos_t * e1[1] - sin_t * e2[1],
        cos_t * e1[2] - sin_t * e2[2],
    ];
    let sum = [b[0] + b_prime[0], b[1] + b_prime[1], b[2] + b_prime[2]];
    let diff = [b[0] - b_prime[0], b[1] - b_prime[1], b[2] - b_prime[2]];
    let a_dir = normalized_or(t.apply(sum), [0.0, 0.0, 1.0]);
    // When t2 = 0 the a' term vanishes and any unit vector will do.
    let a_prime_dir = normalized_or(t.apply(diff), orthogonal_unit(a_dir));

    let settings = ChshSettings {
        a: BlochObservable::new(normalized_or(a_dir, [0.0, 0.0, 1.0]))?,
        a_prime: BlochObservable::new(a_prime_dir)?,
        b: BlochObservable::new(normalized_or(b, [1.0, 0.0, 0.0]))?,
        b_prime: BlochObservable::new(normalized_or(b_prime, [0.0, 1.0, 0.0]))?,
    };

    let achieved = chsh_from_correlations(&t, &settings);
    if (achieved - analytic).abs() <= 1e-6 {
        return Ok((analytic, settings));
    }

    // Fallback: coordinate ascent over the four Bloch directions with
    // deterministic restarts, keeping the best verified settings.
    let (value, settings) = coordinate_ascent(&t, achieved, settings);
    Ok((value, settings))
}

fn orthogonal_unit(v: [f64; 3]) -> [f64; 3] {
    let candidate = if v[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let proj = dot(candidate, v);
    normalized_or(
        [
            candidate[0] - proj * v[0],
            candidate[1] - proj * v[1],
            candidate[2] - proj * v[2],
        ],
        [0.0, 0.0, 1.0],
    )
}

fn coordinate_ascent(
    t: &CorrelationMatrix,
    mut best_value: f64,
    mut best_settings: ChshSettings,
) -> (f64, ChshSettings) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05e9_be11);
    for _ in 0..64 {
        let mut b = random_unit(&mut rng);
        let mut b_prime = random_unit(&mut rng);
        let mut value = f64::NEG_INFINITY;
        for _ in 0..200 {
            // Best response for the a-side given (b, b'), then for the
            // b-side given (a, a').
            let sum = [
                b[0] + b_prime[0],
                b[1] + b_prime[1],
                b[2] + b_prime[2],
            ];
            let diff = [
                b[0] - b_prime[0],
                b[1] - b_prime[1],
                b[2] - b_prime[2],
            ];
            let a = normalized_or(t.apply(sum), [0.0, 0.0, 1.0]);
            let a_prime = normalized_or(t.apply(diff), orthogonal_unit(a));
            let ta = t_transpose_apply(t, a);
            let ta_p = t_transpose_apply(t, a_prime);
            b = normalized_or(
                [ta[0] + ta_p[0], ta[1] + ta_p[1], ta[2] + ta_p[2]],
                [1.0, 0.0, 0.0],
            );
            b_prime = normalized_or(
                [ta[0] - ta_p[0], ta[1] - ta_p[1], ta[2] - ta_p[2]],
                [0.0, 1.0, 0.0],
            );
            let settings = ChshSettings {
                a: BlochObservable { direction: a },
                a_prime: BlochObservable { direction: a_prime },
                b: BlochObservable { direction: b },
                b_prime: BlochObservable { direction: b_prime },
            };
            let new_value = chsh_from_correlations(t, &settings);
            if new_value > best_value {
                best_value = new_value;
                best_settings = settings;
            }
            if (new_value - value).abs() < 1e-8 {
                break;
            }
            value = new_value;
        }
    }
    (best_value, best_settings)
}

fn t_transpose_apply(t: &CorrelationMatrix, v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for j in 0..3 {
        for i in 0..3 {
            out[j] += t.t[i][j] * v[i];
        }
    }
    out
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n = dot(v, v);
        if n > 1e-4 && n <= 1.0 {
            return normalized_or(v, [0.0, 0.0, 1.0]);
        }
    }
}
