//! Generalized measurements, state update, local filters, and the
//! joint/conditional probability engine for sequences of local
//! measurements on a bipartite system.
//!
//! A generalized measurement is a partition of unity `{V_i}` with
//! `Σ V_i†V_i = I`; outcome `i` occurs with probability `Tr(V_i ρ V_i†)`
//! and updates the state to `V_i ρ V_i† / prob`. This normalization
//! convention is the one under which the outcome probabilities of every
//! measurement sum to one, and it is applied consistently to filters,
//! whose complement element is `√(I − Ṽ†Ṽ)`.

use std::collections::HashSet;

use thiserror::Error;

use crate::qcore::{
    hermitian_eig, operator_norm, psd_sqrt, tol, CMatrix, DensityMatrix, QcoreError, Side,
};

#[derive(Debug, Error)]
pub enum MeasurementError {
    #[error("partition of unity incomplete: residual {0:.3e}")]
    IncompletePartition(f64),
    #[error("outcome labels must be unique and non-empty")]
    BadLabels,
    #[error("observable is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),
    #[error("branch probability {0:.3e} too small to normalize a post-state")]
    ZeroProbabilityBranch(f64),
    #[error("cannot build a filter from a zero operator")]
    ZeroOperator,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("conditioning event has probability {0:.3e}")]
    ZeroProbabilityEvent(f64),
    #[error("bad axis or outcome index: {0}")]
    BadIndex(String),
    #[error("unknown outcome label {0:?}")]
    UnknownLabel(String),
    #[error(transparent)]
    Kernel(#[from] QcoreError),
}

/// Labeled partition of unity: one operator per outcome.
#[derive(Debug, Clone)]
pub struct GeneralizedMeasurement {
    labels: Vec<String>,
    operators: Vec<CMatrix>,
    dim: usize,
}

impl GeneralizedMeasurement {
    /// Builds and validates a measurement. Completeness `Σ V_i†V_i = I`
    /// is enforced within [`tol::COMPLETENESS`].
    pub fn new<S: Into<String>>(
        labels: Vec<S>,
        operators: Vec<CMatrix>,
    ) -> Result<Self, MeasurementError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() || labels.len() != operators.len() {
            return Err(MeasurementError::BadLabels);
        }
        let unique: HashSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(MeasurementError::BadLabels);
        }
        let dim = operators[0].rows();
        for op in &operators {
            if !op.is_square() || op.rows() != dim {
                return Err(MeasurementError::DimensionMismatch(
                    "all outcome operators must share one square dimension".into(),
                ));
            }
        }
        let m = Self { labels, operators, dim };
        m.validate()?;
        Ok(m)
    }

    /// Completeness check, exposed separately so callers can re-verify
    /// measurements assembled elsewhere.
    pub fn validate(&self) -> Result<(), MeasurementError> {
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for op in &self.operators {
            sum = &sum + &op.dagger().matmul(op);
        }
        let residual = sum.max_abs_diff(&CMatrix::identity(self.dim));
        if residual > tol::COMPLETENESS {
            return Err(MeasurementError::IncompletePartition(residual));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn operator(&self, outcome: usize) -> &CMatrix {
        &self.operators[outcome]
    }

    pub fn outcome_index(&self, label: &str) -> Result<usize, MeasurementError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| MeasurementError::UnknownLabel(label.into()))
    }

    /// The trivial one-outcome measurement {I}.
    pub fn trivial(dim: usize, label: &str) -> Self {
        Self {
            labels: vec![label.to_string()],
            operators: vec![CMatrix::identity(dim)],
            dim,
        }
    }
}

/// Validates that `{V_i}` is a partition of unity.
pub fn validate_measurement(m: &GeneralizedMeasurement) -> Result<(), MeasurementError> {
    m.validate()
}

/// Projective measurement of a Hermitian observable: one outcome per
/// distinct eigenvalue (merged within 1e-9), labels formatted from the
/// eigenvalues.
pub fn projective_from_observable(
    observable: &CMatrix,
) -> Result<GeneralizedMeasurement, MeasurementError> {
    let defect = observable.hermiticity_defect();
    if defect > tol::EIG_INPUT {
        return Err(MeasurementError::NotHermitian(defect));
    }
    let eig = hermitian_eig(observable)?;
    let n = observable.rows();
    let mut labels = Vec::new();
    let mut operators: Vec<CMatrix> = Vec::new();
    let mut k = 0;
    while k < eig.values.len() {
        let leader = eig.values[k];
        let mut projector = CMatrix::zeros(n, n);
        while k < eig.values.len() && (leader - eig.values[k]).abs() <= 1e-9 {
            let v = eig.vector(k);
            for i in 0..n {
                for j in 0..n {
                    let cur = projector.get(i, j);
                    projector.set(i, j, cur + v[i] * v[j].conj());
                }
            }
            k += 1;
        }
        labels.push(format!("{leader:+.6}"));
        operators.push(projector);
    }
    GeneralizedMeasurement::new(labels, operators)
}

/// Two-outcome filter `{Ṽ, √(I − Ṽ†Ṽ)}` built from a bounded operator,
/// with `Ṽ = v / ‖v‖` (operator norm). Outcomes are labeled
/// `"pass"` / `"fail"`.
pub fn filter_from_operator(v: &CMatrix) -> Result<GeneralizedMeasurement, MeasurementError> {
    assert!(v.is_square(), "filter operator must be square");
    let norm = operator_norm(v);
    if norm < 1e-14 {
        return Err(MeasurementError::ZeroOperator);
    }
    let pass = v.scale_real(1.0 / norm);
    let complement = &CMatrix::identity(v.rows()) - &pass.dagger().matmul(&pass);
    let fail = psd_sqrt(&complement.hermitized())?;
    GeneralizedMeasurement::new(vec!["pass", "fail"], vec![pass, fail])
}

/// Result of applying one outcome operator: the branch probability and,
/// when the branch is not negligible, the normalized post-state.
#[derive(Debug, Clone)]
pub struct OutcomeApplication {
    pub prob: f64,
    pub post_state: Option<DensityMatrix>,
}

impl OutcomeApplication {
    /// The post-state, or an error for a zero-probability branch.
    pub fn state(&self) -> Result<&DensityMatrix, MeasurementError> {
        self.post_state
            .as_ref()
            .ok_or(MeasurementError::ZeroProbabilityBranch(self.prob))
    }
}

/// Applies one measurement operator: prob = Tr(vρv†), post = vρv†/prob.
///
/// Branches with probability at or below [`tol::ZERO_BRANCH`] carry the
/// probability but no post-state.
pub fn apply_outcome(
    rho: &DensityMatrix,
    v: &CMatrix,
) -> Result<OutcomeApplication, MeasurementError> {
    if v.cols() != rho.dim() {
        return Err(MeasurementError::DimensionMismatch(format!(
            "operator acts on dim {}, state has dim {}",
            v.cols(),
            rho.dim()
        )));
    }
    let updated = v.matmul(rho.matrix()).matmul(&v.dagger());
    let prob = updated.trace().re;
    if prob <= tol::ZERO_BRANCH {
        return Ok(OutcomeApplication {
            prob: prob.max(0.0),
            post_state: None,
        });
    }
    let post = DensityMatrix::from_unnormalized(updated)?;
    Ok(OutcomeApplication {
        prob,
        post_state: Some(post),
    })
}

/// Two-sided local filter: prob = Tr((v⊗w)ρ(v⊗w)†) and the normalized
/// post-state. Errors on a zero-probability branch.
pub fn local_filter(
    rho: &DensityMatrix,
    v: &CMatrix,
    w: &CMatrix,
) -> Result<(f64, DensityMatrix), MeasurementError> {
    let embedded = v.kron(w);
    let applied = apply_outcome(rho, &embedded)?;
    let prob = applied.prob;
    let state = applied.state()?.clone();
    Ok((prob, state))
}

/// Ordered measurements applied first-to-last on one subsystem.
#[derive(Debug, Clone)]
pub struct MeasurementSequence {
    steps: Vec<GeneralizedMeasurement>,
}

impl MeasurementSequence {
    pub fn new(steps: Vec<GeneralizedMeasurement>) -> Result<Self, MeasurementError> {
        if steps.is_empty() {
            return Err(MeasurementError::DimensionMismatch(
                "a measurement sequence needs at least one step".into(),
            ));
        }
        let dim = steps[0].dim();
        if steps.iter().any(|s| s.dim() != dim) {
            return Err(MeasurementError::DimensionMismatch(
                "all steps of a sequence must share one dimension".into(),
            ));
        }
        Ok(Self { steps })
    }

    pub fn dim(&self) -> usize {
        self.steps[0].dim()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[GeneralizedMeasurement] {
        &self.steps
    }
}

/// The conditions defining a selected subensemble: the first
/// measurement on each side together with the required outcomes.
#[derive(Debug, Clone)]
pub struct SelectionContext {
    pub first_a: GeneralizedMeasurement,
    pub first_b: GeneralizedMeasurement,
    pub outcome_a1: String,
    pub outcome_b1: String,
}

impl SelectionContext {
    pub fn new(
        first_a: GeneralizedMeasurement,
        first_b: GeneralizedMeasurement,
        outcome_a1: &str,
        outcome_b1: &str,
    ) -> Result<Self, MeasurementError> {
        first_a.outcome_index(outcome_a1)?;
        first_b.outcome_index(outcome_b1)?;
        Ok(Self {
            first_a,
            first_b,
            outcome_a1: outcome_a1.to_string(),
            outcome_b1: outcome_b1.to_string(),
        })
    }
}

/// Probability table over tuples of outcome labels from a sequence of
/// local measurements; axes are the A-side steps followed by the B-side
/// steps.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    axis_labels: Vec<Vec<String>>,
    a_axes: usize,
    probs: Vec<f64>,
}

impl JointDistribution {
    fn new(
        axis_labels: Vec<Vec<String>>,
        a_axes: usize,
        mut probs: Vec<f64>,
    ) -> Result<Self, MeasurementError> {
        let expected: usize = axis_labels.iter().map(Vec::len).product();
        assert_eq!(expected, probs.len(), "table size mismatch");
        let mut sum = 0.0;
        for p in &mut probs {
            if *p < 0.0 {
                if *p < -1e-12 {
                    return Err(MeasurementError::BadIndex(format!(
                        "negative probability {p}"
                    )));
                }
                *p = 0.0;
            }
            sum += *p;
        }
        if (sum - 1.0).abs() > tol::TABLE_SUM {
            return Err(MeasurementError::BadIndex(format!(
                "table sums to {sum}, expected 1"
            )));
        }
        Ok(Self { axis_labels, a_axes, probs })
    }

    pub fn axes(&self) -> usize {
        self.axis_labels.len()
    }

    pub fn a_axes(&self) -> usize {
        self.a_axes
    }

    pub fn axis_labels(&self) -> &[Vec<String>] {
        &self.axis_labels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Flat index of an outcome tuple (row-major over axes).
    pub fn flat_index(&self, tuple: &[usize]) -> usize {
        assert_eq!(tuple.len(), self.axes());
        let mut idx = 0;
        for (axis, &o) in tuple.iter().enumerate() {
            assert!(o < self.axis_labels[axis].len());
            idx = idx * self.axis_labels[axis].len() + o;
        }
        idx
    }

    pub fn prob(&self, tuple: &[usize]) -> f64 {
        self.probs[self.flat_index(tuple)]
    }

    /// Looks up a tuple given per-axis outcome labels.
    pub fn prob_by_labels(&self, labels: &[&str]) -> Result<f64, MeasurementError> {
        let mut tuple = Vec::with_capacity(self.axes());
        for (axis, label) in labels.iter().enumerate() {
            let o = self.axis_labels[axis]
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| MeasurementError::UnknownLabel((*label).into()))?;
            tuple.push(o);
        }
        Ok(self.prob(&tuple))
    }

    fn tuple_of(&self, mut idx: usize) -> Vec<usize> {
        let mut tuple = vec![0; self.axes()];
        for axis in (0..self.axes()).rev() {
            let size = self.axis_labels[axis].len();
            tuple[axis] = idx % size;
            idx /= size;
        }
        tuple
    }
}

/// Joint distribution for measurement sequences applied to the two
/// sides of `rho`, with A-side steps first in the axis order.
pub fn sequence_joint(
    rho: &DensityMatrix,
    seq_a: &MeasurementSequence,
    seq_b: &MeasurementSequence,
) -> Result<JointDistribution, MeasurementError> {
    let order: Vec<Side> = std::iter::repeat_n(Side::A, seq_a.len())
        .chain(std::iter::repeat_n(Side::B, seq_b.len()))
        .collect();
    sequence_joint_with_order(rho, seq_a, seq_b, &order)
}

/// As [`sequence_joint`] but applying the steps in an explicit
/// chronological interleaving of the two sides. Local operators on
/// different factors commute, so the resulting table is independent of
/// `order`; axes always come out A-steps first.
pub fn sequence_joint_with_order(
    rho: &DensityMatrix,
    seq_a: &MeasurementSequence,
    seq_b: &MeasurementSequence,
    order: &[Side],
) -> Result<JointDistribution, MeasurementError> {
    let (da, db) = (seq_a.dim(), seq_b.dim());
    if rho.dim() != da * db {
        return Err(MeasurementError::DimensionMismatch(format!(
            "state dim {} != {da}*{db}",
            rho.dim()
        )));
    }
    let n_a = order.iter().filter(|s| **s == Side::A).count();
    if n_a != seq_a.len() || order.len() - n_a != seq_b.len() {
        return Err(MeasurementError::BadIndex(
            "step order does not match the sequence lengths".into(),
        ));
    }

    // Chronological step list: (side, step index within that side).
    let mut counters = (0usize, 0usize);
    let chronology: Vec<(Side, usize)> = order
        .iter()
        .map(|side| match side {
            Side::A => {
                let k = counters.0;
                counters.0 += 1;
                (Side::A, k)
            }
            Side::B => {
                let k = counters.1;
                counters.1 += 1;
                (Side::B, k)
            }
        })
        .collect();

    // Embedded operators V⊗I or I⊗W, cached per (chronological step, outcome).
    let ida = CMatrix::identity(da);
    let idb = CMatrix::identity(db);
    let embedded: Vec<Vec<CMatrix>> = chronology
        .iter()
        .map(|&(side, k)| {
            let m = match side {
                Side::A => &seq_a.steps()[k],
                Side::B => &seq_b.steps()[k],
            };
            m.operators()
                .iter()
                .map(|op| match side {
                    Side::A => op.kron(&idb),
                    Side::B => ida.kron(op),
                })
                .collect()
        })
        .collect();

    let axis_labels: Vec<Vec<String>> = seq_a
        .steps()
        .iter()
        .chain(seq_b.steps().iter())
        .map(|m| m.labels().to_vec())
        .collect();
    let total: usize = axis_labels.iter().map(Vec::len).product();
    let mut probs = vec![0.0; total];

    // Depth-first over chronological steps; tuple positions are mapped
    // back to the canonical A-then-B axis order. Branches below the
    // zero-probability threshold contribute exactly 0 to all deeper
    // tuples.
    struct Walk<'a> {
        chronology: &'a [(Side, usize)],
        embedded: &'a [Vec<CMatrix>],
        n_a: usize,
        axis_sizes: &'a [usize],
    }

    impl Walk<'_> {
        fn flat_index(&self, tuple: &[usize]) -> usize {
            let mut idx = 0;
            for (axis, &o) in tuple.iter().enumerate() {
                idx = idx * self.axis_sizes[axis] + o;
            }
            idx
        }

        fn recurse(
            &self,
            depth: usize,
            state: &DensityMatrix,
            weight: f64,
            tuple: &mut [usize],
            probs: &mut [f64],
        ) -> Result<(), MeasurementError> {
            if depth == self.chronology.len() {
                probs[self.flat_index(tuple)] = weight;
                return Ok(());
            }
            let (side, k) = self.chronology[depth];
            let axis = match side {
                Side::A => k,
                Side::B => self.n_a + k,
            };
            for (outcome, op) in self.embedded[depth].iter().enumerate() {
                let applied = apply_outcome(state, op)?;
                tuple[axis] = outcome;
                if let Some(post) = &applied.post_state {
                    self.recurse(depth + 1, post, weight * applied.prob, tuple, probs)?;
                } else if depth + 1 == self.chronology.len() {
                    // Leaf: record the (possibly tiny) branch probability.
                    probs[self.flat_index(tuple)] = weight * applied.prob;
                }
                // else: descendants stay at exactly 0.
            }
            Ok(())
        }
    }

    let axis_sizes: Vec<usize> = axis_labels.iter().map(Vec::len).collect();
    let walk = Walk {
        chronology: &chronology,
        embedded: &embedded,
        n_a: seq_a.len(),
        axis_sizes: &axis_sizes,
    };
    let mut tuple = vec![0; axis_labels.len()];
    walk.recurse(0, rho, 1.0, &mut tuple, &mut probs)?;

    JointDistribution::new(axis_labels, seq_a.len(), probs)
}

/// Sums out all axes not listed in `kept` (which must be strictly
/// increasing). Normalization is preserved.
pub fn marginalize(
    j: &JointDistribution,
    kept: &[usize],
) -> Result<JointDistribution, MeasurementError> {
    if kept.windows(2).any(|w| w[0] >= w[1]) || kept.iter().any(|&k| k >= j.axes()) {
        return Err(MeasurementError::BadIndex(format!(
            "kept axes {kept:?} invalid for {} axes",
            j.axes()
        )));
    }
    let axis_labels: Vec<Vec<String>> = kept.iter().map(|&k| j.axis_labels[k].clone()).collect();
    let sizes: Vec<usize> = axis_labels.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().product();
    let mut probs = vec![0.0; total];
    for idx in 0..j.probs.len() {
        let tuple = j.tuple_of(idx);
        let mut out = 0;
        for (pos, &axis) in kept.iter().enumerate() {
            out = out * sizes[pos] + tuple[axis];
        }
        probs[out] += j.probs[idx];
    }
    let a_axes = kept.iter().filter(|&&k| k < j.a_axes).count();
    JointDistribution::new(axis_labels, a_axes, probs)
}

/// Conditions on fixed outcomes for a subset of axes and renormalizes
/// the table over the remaining ones.
pub fn conditional(
    j: &JointDistribution,
    given: &[(usize, usize)],
) -> Result<JointDistribution, MeasurementError> {
    let mut fixed: Vec<Option<usize>> = vec![None; j.axes()];
    for &(axis, outcome) in given {
        if axis >= j.axes() || outcome >= j.axis_labels[axis].len() {
            return Err(MeasurementError::BadIndex(format!(
                "assignment ({axis},{outcome}) out of range"
            )));
        }
        if fixed[axis].replace(outcome).is_some() {
            return Err(MeasurementError::BadIndex(format!(
                "axis {axis} conditioned twice"
            )));
        }
    }
    let remaining: Vec<usize> = (0..j.axes()).filter(|&a| fixed[a].is_none()).collect();
    let axis_labels: Vec<Vec<String>> =
        remaining.iter().map(|&a| j.axis_labels[a].clone()).collect();
    let sizes: Vec<usize> = axis_labels.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().product::<usize>().max(1);
    let mut probs = vec![0.0; total];
    let mut mass = 0.0;
    for idx in 0..j.probs.len() {
        let tuple = j.tuple_of(idx);
        if given.iter().any(|&(axis, outcome)| tuple[axis] != outcome) {
            continue;
        }
        mass += j.probs[idx];
        let mut out = 0;
        for (pos, &axis) in remaining.iter().enumerate() {
            out = out * sizes[pos] + tuple[axis];
        }
        probs[out] += j.probs[idx];
    }
    if mass <= tol::ZERO_BRANCH {
        return Err(MeasurementError::ZeroProbabilityEvent(mass));
    }
    for p in &mut probs {
        *p /= mass;
    }
    let a_axes = remaining.iter().filter(|&&a| a < j.a_axes).count();
    JointDistribution::new(axis_labels, a_axes, probs)
}

/// Conditions using outcome labels instead of indices.
pub fn conditional_by_labels(
    j: &JointDistribution,
    given: &[(usize, &str)],
) -> Result<JointDistribution, MeasurementError> {
    let mut resolved = Vec::with_capacity(given.len());
    for &(axis, label) in given {
        if axis >= j.axes() {
            return Err(MeasurementError::BadIndex(format!("axis {axis} out of range")));
        }
        let outcome = j.axis_labels[axis]
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| MeasurementError::UnknownLabel(label.into()))?;
        resolved.push((axis, outcome));
    }
    conditional(j, &resolved)
}

/// Checks that the first-step joint marginal P(a1, b1) does not depend
/// on which later-step measurements are chosen.
///
/// `seq_a`/`seq_b` provide the first steps and one baseline choice of
/// later steps; `alternatives` supplies further candidate tails
/// (possibly empty to mean "no later measurement"). The marginal with
/// no later steps at all is used as the reference. Quantum mechanics
/// must give a deviation compatible with zero; supply at least two
/// distinct alternatives for the check to be informative.
pub fn causality_check(
    rho: &DensityMatrix,
    seq_a: &MeasurementSequence,
    seq_b: &MeasurementSequence,
    alternatives: &[(Vec<GeneralizedMeasurement>, Vec<GeneralizedMeasurement>)],
) -> Result<f64, MeasurementError> {
    let first_a = seq_a.steps()[0].clone();
    let first_b = seq_b.steps()[0].clone();

    let reference = sequence_joint(
        rho,
        &MeasurementSequence::new(vec![first_a.clone()])?,
        &MeasurementSequence::new(vec![first_b.clone()])?,
    )?;

    let mut tails: Vec<(Vec<GeneralizedMeasurement>, Vec<GeneralizedMeasurement>)> =
        vec![(seq_a.steps()[1..].to_vec(), seq_b.steps()[1..].to_vec())];
    tails.extend_from_slice(alternatives);

    let mut worst = 0.0_f64;
    for (tail_a, tail_b) in &tails {
        let mut steps_a = vec![first_a.clone()];
        steps_a.extend(tail_a.iter().cloned());
        let mut steps_b = vec![first_b.clone()];
        steps_b.extend(tail_b.iter().cloned());
        let joint = sequence_joint(
            rho,
            &MeasurementSequence::new(steps_a)?,
            &MeasurementSequence::new(steps_b)?,
        )?;
        let n_a = joint.a_axes();
        let marginal = marginalize(&joint, &[0, n_a])?;
        for (p, q) in marginal
            .probabilities()
            .iter()
            .zip(reference.probabilities())
        {
            worst = worst.max((p - q).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{density_from_pure, pauli_x, pauli_z, Complex64, PureState};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn phi_plus() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        density_from_pure(
            &PureState::new(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap(),
        )
    }

    fn projector(dim: usize, index: usize) -> CMatrix {
        PureState::basis(dim, index).projector()
    }

    #[test]
    fn validates_projective_and_trivial_partitions() {
        assert!(GeneralizedMeasurement::new(
            vec!["0", "1"],
            vec![projector(2, 0), projector(2, 1)]
        )
        .is_ok());
        assert!(GeneralizedMeasurement::new(vec!["only"], vec![CMatrix::identity(3)]).is_ok());
    }

    #[test]
    fn validates_diagonal_filter_pair() {
        // diag(1,1/4) + diag(0,3/4) = I
        let a = CMatrix::diag_real(&[1.0, 0.5]);
        let b = CMatrix::diag_real(&[0.0, 0.75f64.sqrt()]);
        assert!(GeneralizedMeasurement::new(vec!["pass", "fail"], vec![a, b]).is_ok());
    }

    #[test]
    fn rejects_incomplete_partition() {
        let err = GeneralizedMeasurement::new(vec!["p"], vec![CMatrix::diag_real(&[1.0, 0.5])])
            .unwrap_err();
        assert!(matches!(err, MeasurementError::IncompletePartition(_)));
    }

    #[test]
    fn projective_from_pauli_z() {
        let m = projective_from_observable(&pauli_z()).unwrap();
        assert_eq!(m.outcomes(), 2);
        assert_eq!(m.labels()[0], "+1.000000");
        assert_eq!(m.labels()[1], "-1.000000");
        assert!(m.operator(0).max_abs_diff(&projector(2, 0)) < 1e-12);
        assert!(m.operator(1).max_abs_diff(&projector(2, 1)) < 1e-12);
    }

    #[test]
    fn projective_from_identity_is_degenerate() {
        let m = projective_from_observable(&CMatrix::identity(2)).unwrap();
        assert_eq!(m.outcomes(), 1);
        assert!(m.operator(0).max_abs_diff(&CMatrix::identity(2)) < 1e-12);
    }

    #[test]
    fn projective_from_pauli_x_matches_eigendecomposition() {
        let m = projective_from_observable(&pauli_x()).unwrap();
        let plus = &(&CMatrix::identity(2) + &pauli_x()).scale_real(0.5);
        let minus = &(&CMatrix::identity(2) - &pauli_x()).scale_real(0.5);
        assert!(m.operator(0).max_abs_diff(plus) < 1e-12);
        assert!(m.operator(1).max_abs_diff(minus) < 1e-12);
    }

    #[test]
    fn apply_outcome_identity_and_projector() {
        let rho = DensityMatrix::maximally_mixed(2);
        let full = apply_outcome(&rho, &CMatrix::identity(2)).unwrap();
        assert!((full.prob - 1.0).abs() < 1e-14);
        assert!(full.state().unwrap().matrix().max_abs_diff(rho.matrix()) < 1e-14);

        let half = apply_outcome(&rho, &projector(2, 0)).unwrap();
        assert!((half.prob - 0.5).abs() < 1e-14);
        assert!(half.state().unwrap().matrix().max_abs_diff(&projector(2, 0)) < 1e-14);
    }

    #[test]
    fn apply_outcome_zero_branch_has_no_state() {
        let rho = density_from_pure(&PureState::basis(2, 0));
        let out = apply_outcome(&rho, &projector(2, 1)).unwrap();
        assert!(out.prob.abs() < 1e-14);
        assert!(matches!(
            out.state(),
            Err(MeasurementError::ZeroProbabilityBranch(_))
        ));
    }

    #[test]
    fn filter_branch_probability_on_mixture_component() {
        // Filter diag(1, β/α) on the α²=0.8 component state
        // β|00⟩ + α|11⟩ passes with probability 2β² = 0.4.
        let a = 0.8f64.sqrt();
        let b = 0.2f64.sqrt();
        let psi1 = PureState::new(vec![c(b, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(a, 0.0)]).unwrap();
        let v = CMatrix::diag_real(&[1.0, b / a]).kron(&CMatrix::identity(2));
        let out = apply_outcome(&density_from_pure(&psi1), &v).unwrap();
        assert!((out.prob - 0.4).abs() < 1e-12);
    }

    #[test]
    fn local_filter_identity_is_noop() {
        let rho = phi_plus();
        let (p, post) = local_filter(&rho, &CMatrix::identity(2), &CMatrix::identity(2)).unwrap();
        assert!((p - 1.0).abs() < 1e-14);
        assert!(post.matrix().max_abs_diff(rho.matrix()) < 1e-14);
    }

    #[test]
    fn local_filter_keeps_product_states_product() {
        let ra = DensityMatrix::new(CMatrix::diag_real(&[0.3, 0.7])).unwrap();
        let rb = DensityMatrix::new(CMatrix::diag_real(&[0.9, 0.1])).unwrap();
        let rho = DensityMatrix::new(ra.matrix().kron(rb.matrix())).unwrap();
        let v = CMatrix::diag_real(&[1.0, 0.5]);
        let (_, post) = local_filter(&rho, &v, &CMatrix::identity(2)).unwrap();
        let pa = crate::qcore::partial_trace(&post, Side::A, (2, 2)).unwrap();
        let pb = crate::qcore::partial_trace(&post, Side::B, (2, 2)).unwrap();
        let rebuilt = pa.matrix().kron(pb.matrix());
        assert!(post.matrix().max_abs_diff(&rebuilt) < 1e-12);
    }

    #[test]
    fn filter_from_operator_diagonal_and_identity() {
        let m = filter_from_operator(&CMatrix::diag_real(&[1.0, 0.5])).unwrap();
        assert!(m.operator(0).max_abs_diff(&CMatrix::diag_real(&[1.0, 0.5])) < 1e-12);
        assert!(m.operator(1).max_abs_diff(&CMatrix::diag_real(&[0.0, 0.75f64.sqrt()])) < 1e-12);

        let id = filter_from_operator(&CMatrix::identity(2)).unwrap();
        assert!(id.operator(0).max_abs_diff(&CMatrix::identity(2)) < 1e-12);
        assert!(id.operator(1).max_abs() < 1e-12);
    }

    #[test]
    fn filter_from_operator_is_scale_invariant() {
        let base = filter_from_operator(&CMatrix::diag_real(&[1.0, 0.5])).unwrap();
        let scaled = filter_from_operator(&CMatrix::diag_real(&[5.0, 2.5])).unwrap();
        assert!(base.operator(0).max_abs_diff(scaled.operator(0)) < 1e-12);
        assert!(base.operator(1).max_abs_diff(scaled.operator(1)) < 1e-12);
    }

    #[test]
    fn filter_from_zero_operator_fails() {
        let err = filter_from_operator(&CMatrix::zeros(2, 2)).unwrap_err();
        assert!(matches!(err, MeasurementError::ZeroOperator));
    }

    #[test]
    fn sequence_joint_factorizes_on_product_states() {
        let ra = DensityMatrix::new(CMatrix::diag_real(&[0.3, 0.7])).unwrap();
        let rb = DensityMatrix::new(CMatrix::diag_real(&[0.9, 0.1])).unwrap();
        let rho = DensityMatrix::new(ra.matrix().kron(rb.matrix())).unwrap();
        let mz = projective_from_observable(&pauli_z()).unwrap();
        let mx = projective_from_observable(&pauli_x()).unwrap();
        let seq_a = MeasurementSequence::new(vec![mz.clone(), mx.clone()]).unwrap();
        let seq_b = MeasurementSequence::new(vec![mx, mz]).unwrap();

        let joint = sequence_joint(&rho, &seq_a, &seq_b).unwrap();
        let ja = marginalize(&joint, &[0, 1]).unwrap();
        let jb = marginalize(&joint, &[2, 3]).unwrap();
        for idx in 0..joint.probabilities().len() {
            let tuple = joint.tuple_of(idx);
            let pa = ja.prob(&tuple[..2]);
            let pb = jb.prob(&tuple[2..]);
            assert!((joint.probabilities()[idx] - pa * pb).abs() < 1e-12);
        }
    }

    #[test]
    fn sequence_joint_perfect_correlations_on_phi_plus() {
        let mz = projective_from_observable(&pauli_z()).unwrap();
        let seq = MeasurementSequence::new(vec![mz]).unwrap();
        let joint = sequence_joint(&phi_plus(), &seq, &seq).unwrap();
        assert!((joint.prob(&[0, 0]) - 0.5).abs() < 1e-12);
        assert!((joint.prob(&[1, 1]) - 0.5).abs() < 1e-12);
        assert!(joint.prob(&[0, 1]).abs() < 1e-14);
        assert!(joint.prob(&[1, 0]).abs() < 1e-14);
    }

    #[test]
    fn marginalize_identity_and_uniform() {
        let mz = projective_from_observable(&pauli_z()).unwrap();
        let seq = MeasurementSequence::new(vec![mz.clone(), mz]).unwrap();
        let rho = DensityMatrix::maximally_mixed(4);
        let joint = sequence_joint(&rho, &seq.clone(), &seq).unwrap();

        let full = marginalize(&joint, &[0, 1, 2, 3]).unwrap();
        assert_eq!(full.probabilities(), joint.probabilities());

        let first = marginalize(&joint, &[0, 2]).unwrap();
        for &p in first.probabilities() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn marginalize_rejects_bad_axes() {
        let mz = projective_from_observable(&pauli_z()).unwrap();
        let seq = MeasurementSequence::new(vec![mz]).unwrap();
        let joint = sequence_joint(&phi_plus(), &seq.clone(), &seq).unwrap();
        assert!(matches!(
            marginalize(&joint, &[1, 0]),
            Err(MeasurementError::BadIndex(_))
        ));
        assert!(matches!(
            marginalize(&joint, &[0, 5]),
            Err(MeasurementError::BadIndex(_))
        ));
    }

    #[test]
    fn conditional_on_uniform_table_is_uniform() {
        let mz = projective_from_observable(&pauli_z()).unwrap();
        let seq = MeasurementSequence::new(vec![mz]).unwrap();
        let rho = DensityMatrix::maximally_mixed(4);
        let joint = sequence_joint(&rho, &seq.clone(), &seq).unwrap();
        let cond = conditional(&joint, &[(0, 1)]).unwrap();
        for &p in cond.probabilities() {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn conditioning_product_table_leaves_other_side_unchanged() {
        let ra = DensityMatrix::new(CMatrix::diag_real(&[0.3, 0.7])).unwrap();
        let rb = DensityMatrix::new(CMatrix::diag_real(&[0.9, 0.1])).unwrap();
        let rho = DensityMatrix::new(ra.matrix().kron(rb.matrix())).unwrap();
        let mz = projective_from_observable(&pauli_z()).unwrap();
        let seq = MeasurementSequence::new(vec![mz]).unwrap();
        let joint = sequence_joint(&rho, &seq.clone(), &seq).unwrap();
        let b_marginal = marginalize(&joint, &[1]).unwrap();
        let cond = conditional(&joint, &[(0, 0)]).unwrap();
        for (p, q) in cond.probabilities().iter().zip(b_marginal.probabilities()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn first_step_marginal_mass_of_filter_protocol() {
        // Filter + trivial first steps on the α²=0.8, p1=0.7 mixture:
        // the (pass, coincidence) event carries mass 2β² = 0.4.
        let a = 0.8f64.sqrt();
        let b = 0.2f64.sqrt();
        let psi1 = PureState::new(vec![c(b, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(a, 0.0)]).unwrap();
        let psi2 = PureState::new(vec![c(0.0, 0.0), c(b, 0.0), c(a, 0.0), c(0.0, 0.0)]).unwrap();
        let rho = crate::qcore::mix(&[
            (0.7, density_from_pure(&psi1)),
            (0.3, density_from_pure(&psi2)),
        ])
        .unwrap();
        let filter = filter_from_operator(&CMatrix::diag_real(&[1.0, b / a])).unwrap();
        let mz = projective_from_observable(&pauli_z()).unwrap();
        let seq_a = MeasurementSequence::new(vec![filter, mz.clone()]).unwrap();
        let seq_b = MeasurementSequence::new(vec![
            GeneralizedMeasurement::trivial(2, "coincidence"),
            mz,
        ])
        .unwrap();
        let joint = sequence_joint(&rho, &seq_a, &seq_b).unwrap();
        let first = marginalize(&joint, &[0, 2]).unwrap();
        assert!((first.prob_by_labels(&["pass", "coincidence"]).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn conditional_on_zero_event_fails() {
        let mz = projective_from_observable(&pauli_z()).unwrap();
        let seq = MeasurementSequence::new(vec![mz]).unwrap();
        let joint = sequence_joint(&phi_plus(), &seq.clone(), &seq).unwrap();
        // P(a=+1, b=-1) = 0 on Φ+ with σz⊗σz.
        let err = conditional(&joint, &[(0, 0), (1, 1)]).unwrap_err();
        assert!(matches!(err, MeasurementError::ZeroProbabilityEvent(_)));
    }

    #[test]
    fn interleaving_order_does_not_change_the_table() {
        let mz = projective_from_observable(&pauli_z()).unwrap();
        let mx = projective_from_observable(&pauli_x()).unwrap();
        let seq_a = MeasurementSequence::new(vec![mz.clone(), mx.clone()]).unwrap();
        let seq_b = MeasurementSequence::new(vec![mx, mz]).unwrap();
        let rho = phi_plus();
        let base = sequence_joint(&rho, &seq_a, &seq_b).unwrap();
        for order in [
            vec![Side::B, Side::B, Side::A, Side::A],
            vec![Side::A, Side::B, Side::A, Side::B],
            vec![Side::B, Side::A, Side::B, Side::A],
        ] {
            let other = sequence_joint_with_order(&rho, &seq_a, &seq_b, &order).unwrap();
            for (p, q) in base.probabilities().iter().zip(other.probabilities()) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn causality_check_identical_alternatives_is_zero() {
        let mz = projective_from_observable(&pauli_z()).unwrap();
        let mx = projective_from_observable(&pauli_x()).unwrap();
        let seq_a = MeasurementSequence::new(vec![mz.clone(), mx.clone()]).unwrap();
        let seq_b = MeasurementSequence::new(vec![mz.clone(), mx.clone()]).unwrap();
        let dev = causality_check(
            &phi_plus(),
            &seq_a,
            &seq_b,
            &[
                (vec![mx.clone()], vec![mx.clone()]),
                (vec![mx.clone()], vec![mx.clone()]),
            ],
        )
        .unwrap();
        assert!(dev < 1e-12);
    }

    #[test]
    fn causality_check_alternative_settings_do_not_signal() {
        let mz = projective_from_observable(&pauli_z()).unwrap();
        let mx = projective_from_observable(&pauli_x()).unwrap();
        let seq_a = MeasurementSequence::new(vec![mz.clone(), mz.clone()]).unwrap();
        let seq_b = MeasurementSequence::new(vec![mz.clone(), mz.clone()]).unwrap();
        let dev = causality_check(
            &phi_plus(),
            &seq_a,
            &seq_b,
            &[
                (vec![mx.clone()], vec![mz.clone()]),
                (vec![mz.clone()], vec![mx.clone()]),
                (vec![], vec![mx]),
            ],
        )
        .unwrap();
        assert!(dev < 1e-12);
    }

    #[test]
    fn selection_context_validates_labels() {
        let filter = filter_from_operator(&CMatrix::diag_real(&[1.0, 0.5])).unwrap();
        let triv = GeneralizedMeasurement::trivial(2, "coincidence");
        assert!(SelectionContext::new(filter.clone(), triv.clone(), "pass", "coincidence").is_ok());
        assert!(matches!(
            SelectionContext::new(filter, triv, "nope", "coincidence"),
            Err(MeasurementError::UnknownLabel(_))
        ));
    }
}
