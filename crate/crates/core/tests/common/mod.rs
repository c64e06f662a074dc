//! Shared generators and independent oracles for the integration
//! suites. Everything is seeded; reruns are bit-identical.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqbell_core::bell::{expectation, BlochObservable};
use seqbell_core::measurement::GeneralizedMeasurement;
use seqbell_core::qcore::{
    hermitian_eig, partial_trace, CMatrix, Complex64, DensityMatrix, PureState, Side,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let entries = (0..n * n).map(|_| random_complex(rng)).collect();
    CMatrix::new(n, n, entries).expect("finite entries")
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = random_matrix(rng, n);
    (&g + &g.dagger()).scale_real(0.5)
}

/// Ginibre-style random full-rank density matrix G·G†/Tr.
pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
    let g = random_matrix(rng, n);
    let gram = g.matmul(&g.dagger());
    DensityMatrix::from_unnormalized(gram).expect("Gram matrix is PSD")
}

pub fn random_pure(rng: &mut ChaCha8Rng, n: usize) -> PureState {
    loop {
        let amplitudes: Vec<Complex64> = (0..n).map(|_| random_complex(rng)).collect();
        if amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3 {
            return PureState::normalized(amplitudes).expect("nonzero vector");
        }
    }
}

/// Random entangled two-qubit pure state with both Schmidt coefficients
/// above `min_schmidt`.
pub fn random_entangled_pure(rng: &mut ChaCha8Rng, min_schmidt: f64) -> PureState {
    loop {
        let psi = random_pure(rng, 4);
        let reduced = partial_trace(
            &seqbell_core::qcore::density_from_pure(&psi),
            Side::A,
            (2, 2),
        )
        .expect("two-qubit state");
        let smallest = reduced
            .eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
            .sqrt();
        if smallest > min_schmidt {
            return psi;
        }
    }
}

pub fn random_bloch(rng: &mut ChaCha8Rng) -> BlochObservable {
    loop {
        let v = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n: f64 = v.iter().map(|x| x * x).sum();
        if n > 1e-2 && n <= 1.0 {
            return BlochObservable::from_direction(v).expect("nonzero");
        }
    }
}

/// Random partition of unity with `outcomes` Kraus elements:
/// V_i = G_i·S^{-1/2} with S = Σ G_i†G_i.
pub fn random_partition(
    rng: &mut ChaCha8Rng,
    dim: usize,
    outcomes: usize,
) -> GeneralizedMeasurement {
    loop {
        let gs: Vec<CMatrix> = (0..outcomes).map(|_| random_matrix(rng, dim)).collect();
        let mut s = CMatrix::zeros(dim, dim);
        for g in &gs {
            s = &s + &g.dagger().matmul(g);
        }
        let eig = hermitian_eig(&s.hermitized()).expect("Gram sum is Hermitian");
        if eig.values.iter().any(|&v| v < 1e-6) {
            continue; // nearly singular; resample
        }
        let inv_sqrt = eig.assemble(|x| 1.0 / x.sqrt());
        let operators: Vec<CMatrix> = gs.iter().map(|g| g.matmul(&inv_sqrt)).collect();
        let labels: Vec<String> = (0..outcomes).map(|i| format!("o{i}")).collect();
        if let Ok(m) = GeneralizedMeasurement::new(labels, operators) {
            return m;
        }
    }
}

/// Independent maximizer of the CHSH combination over the eight
/// measurement angles, by seeded random-restart cyclic coordinate
/// ascent on explicitly parametrized directions. It touches the state
/// only through single correlators along the coordinate axes.
pub fn chsh_search_oracle(rho: &DensityMatrix, restarts: usize, seed: u64) -> f64 {
    let axes = [
        BlochObservable::x(),
        BlochObservable::y(),
        BlochObservable::z(),
    ];
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = expectation(rho, &axes[i], &axes[j]).expect("two-qubit state");
        }
    }
    let unit = |theta: f64, phi: f64| {
        [
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        ]
    };
    let correl = |u: [f64; 3], v: [f64; 3]| {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += u[i] * t[i][j] * v[j];
            }
        }
        acc
    };
    let value = |ang: &[f64; 8]| {
        let a = unit(ang[0], ang[1]);
        let ap = unit(ang[2], ang[3]);
        let b = unit(ang[4], ang[5]);
        let bp = unit(ang[6], ang[7]);
        correl(a, b) + correl(a, bp) + correl(ap, b) - correl(ap, bp)
    };

    let tau = std::f64::consts::TAU;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..restarts {
        let mut ang = [0.0_f64; 8];
        for a in &mut ang {
            *a = rng.gen_range(0.0..tau);
        }
        let mut current = value(&ang);
        loop {
            let before = current;
            for k in 0..8 {
                // Coarse scan of the full circle, then shrink around the
                // best angle found.
                let mut best_angle = ang[k];
                let mut best_local = current;
                for step in 0..24 {
                    ang[k] = step as f64 * tau / 24.0;
                    let v = value(&ang);
                    if v > best_local {
                        best_local = v;
                        best_angle = ang[k];
                    }
                }
                let mut width = tau / 24.0;
                for _ in 0..45 {
                    let mut improved = false;
                    for candidate in [best_angle - width, best_angle + width] {
                        ang[k] = candidate;
                        let v = value(&ang);
                        if v > best_local {
                            best_local = v;
                            best_angle = candidate;
                            improved = true;
                        }
                    }
                    if !improved {
                        width *= 0.5;
                    }
                }
                ang[k] = best_angle;
                current = best_local;
            }
            if current - before < 1e-11 {
                break;
            }
        }
        best = best.max(current);
    }
    best
}

/// Prints one acceptance line and returns the flag for the caller's
/// assert.
pub fn criterion(n: usize, ok: bool, detail: &str) -> bool {
    println!(
        "criterion {n}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}
