//! Linear-optics construction of the example two-photon state and the
//! end-to-end filtering protocol.
//!
//! Mode-basis map, fixed project-wide: on each side mode |1⟩ is index 0
//! and mode |2⟩ is index 1. The detector mode |D⟩ used by the
//! pre-selection beamsplitter is a third basis state that exists only
//! inside the beamsplitter step; tracing it into the "fail" outcome is
//! equivalent to the two-dimensional filter element diag(1, β/α), and
//! both routes are computed and compared.

use num_complex::Complex64;
use thiserror::Error;

use crate::bell::{chsh_value, max_chsh, BellError, ChshSettings};
use crate::lhv::{
    behavior_from_quantum, conditional_behavior, lhv_feasible, LhvDecision, LhvError,
};
use crate::measurement::{
    apply_outcome, filter_from_operator, local_filter, projective_from_observable,
    GeneralizedMeasurement, MeasurementError, SelectionContext,
};
use crate::qcore::{
    density_from_pure, mix, operator_norm, tol, CMatrix, DensityMatrix, PureState, QcoreError,
};

#[derive(Debug, Error)]
pub enum OpticsError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("degenerate protocol: {0}")]
    DegenerateProtocol(String),
    #[error("bad branch weights: {0}")]
    BadWeights(String),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
    #[error(transparent)]
    Bell(#[from] BellError),
    #[error(transparent)]
    Lhv(#[from] LhvError),
    #[error(transparent)]
    Kernel(#[from] QcoreError),
}

/// Parameters of the example state family:
/// ρ = p1|ψ1⟩⟨ψ1| + p2|ψ2⟩⟨ψ2| with
/// |ψ1⟩ = α|2⟩|2'⟩ + β|1⟩|1'⟩ and |ψ2⟩ = α|2⟩|1'⟩ + β|1⟩|2'⟩,
/// α² + β² = 1, p2 = 1 − p1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleStateParams {
    alpha_sq: f64,
    p1: f64,
}

impl ExampleStateParams {
    pub fn new(alpha_sq: f64, p1: f64) -> Result<Self, OpticsError> {
        if !(alpha_sq > 0.0 && alpha_sq < 1.0) {
            return Err(OpticsError::OutOfRange(format!(
                "alpha_sq = {alpha_sq} must lie in (0,1)"
            )));
        }
        if !(p1 > 0.0 && p1 < 1.0) {
            return Err(OpticsError::OutOfRange(format!("p1 = {p1} must lie in (0,1)")));
        }
        Ok(Self { alpha_sq, p1 })
    }

    pub fn alpha_sq(&self) -> f64 {
        self.alpha_sq
    }

    pub fn beta_sq(&self) -> f64 {
        1.0 - self.alpha_sq
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        1.0 - self.p1
    }

    /// Margin of the no-violation constraint
    /// (α²−β²)² − (p1−p2)²; nonnegative means satisfied.
    pub fn constraint_margin(&self) -> f64 {
        let da = self.alpha_sq - self.beta_sq();
        let dp = self.p1 - self.p2();
        da * da - dp * dp
    }

    pub fn constraint_satisfied(&self) -> bool {
        self.constraint_margin() >= -1e-12
    }
}

/// A unitary acting on a small set of optical modes.
#[derive(Debug, Clone)]
pub struct OpticalUnitary {
    matrix: CMatrix,
    mode_labels: Vec<String>,
}

impl OpticalUnitary {
    pub fn new(matrix: CMatrix, mode_labels: Vec<String>) -> Result<Self, OpticsError> {
        assert_eq!(matrix.rows(), mode_labels.len(), "one label per mode");
        let gram = matrix.dagger().matmul(&matrix);
        let defect = gram.max_abs_diff(&CMatrix::identity(matrix.rows()));
        if defect > 1e-10 {
            return Err(OpticsError::OutOfRange(format!(
                "matrix is not unitary (defect {defect:.3e})"
            )));
        }
        Ok(Self { matrix, mode_labels })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn mode_labels(&self) -> &[String] {
        &self.mode_labels
    }
}

/// Symmetric beamsplitter of the given transmittivity; reflection picks
/// up a phase of π/2: [[√T, i√(1−T)], [i√(1−T), √T]].
pub fn beamsplitter(transmittivity: f64) -> Result<OpticalUnitary, OpticsError> {
    if !(0.0..=1.0).contains(&transmittivity) {
        return Err(OpticsError::OutOfRange(format!(
            "transmittivity {transmittivity} must lie in [0,1]"
        )));
    }
    let t = transmittivity.sqrt();
    let r = Complex64::new(0.0, (1.0 - transmittivity).sqrt());
    let matrix = CMatrix::new(
        2,
        2,
        vec![Complex64::new(t, 0.0), r, r, Complex64::new(t, 0.0)],
    )?;
    OpticalUnitary::new(matrix, vec!["1".into(), "2".into()])
}

/// Phase shifter diag(e^{iφ}, 1) on the first of two modes.
pub fn phase_shifter(phi: f64) -> OpticalUnitary {
    let matrix = CMatrix::new(
        2,
        2,
        vec![
            Complex64::from_polar(1.0, phi),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ],
    )
    .expect("finite entries");
    OpticalUnitary::new(matrix, vec!["1".into(), "2".into()]).expect("diagonal phase is unitary")
}

/// Mach-Zehnder interferometer: BS(1/2) · phase(φ_int) · BS(1/2) · phase(φ_ext).
///
/// At internal phase 0 the device acts as a mirror (modes swap, global
/// phase i); at internal phase π it is transparent up to a relative
/// sign between the arms, which the external shifter can compensate —
/// mz_unitary(π, π) is exactly the identity.
pub fn mz_unitary(phi_internal: f64, phi_external: f64) -> OpticalUnitary {
    let bs = beamsplitter(0.5).expect("0.5 is in range").matrix.clone();
    let matrix = bs
        .matmul(phase_shifter(phi_internal).matrix())
        .matmul(&bs)
        .matmul(phase_shifter(phi_external).matrix());
    OpticalUnitary::new(matrix, vec!["1".into(), "2".into()])
        .expect("product of unitaries is unitary")
}

/// Two-photon radiation of the crystal pair:
/// |ψ⟩ = α|2⟩|2"⟩ + β|1⟩|1"⟩.
pub fn pdc_pair_state(alpha_sq: f64) -> Result<PureState, OpticsError> {
    if !(alpha_sq > 0.0 && alpha_sq < 1.0) {
        return Err(OpticsError::OutOfRange(format!(
            "alpha_sq = {alpha_sq} must lie in (0,1)"
        )));
    }
    let alpha = alpha_sq.sqrt();
    let beta = (1.0 - alpha_sq).sqrt();
    Ok(PureState::normalized(vec![
        Complex64::new(beta, 0.0), // |1⟩|1"⟩
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(alpha, 0.0), // |2⟩|2"⟩
    ])?)
}

/// Sends the second photon through a Mach-Zehnder whose internal phase
/// jumps stochastically between the transparent and mirror settings.
///
/// The transparent branch (internal phase π, external compensation π)
/// leaves the state as |ψ1⟩ and carries weight `p1`; the mirror branch
/// (internal phase 0) produces |ψ2⟩ up to a global phase and carries
/// weight `p2`. Global branch phases cancel in the density matrix.
pub fn stochastic_mz_mix(
    psi: &PureState,
    p1: f64,
    p2: f64,
) -> Result<DensityMatrix, OpticsError> {
    if psi.dim() != 4 {
        return Err(OpticsError::OutOfRange(format!(
            "expected a two-photon state of dim 4, got {}",
            psi.dim()
        )));
    }
    if (p1 + p2 - 1.0).abs() > tol::WEIGHT_SUM || p1 < 0.0 || p2 < 0.0 {
        return Err(OpticsError::BadWeights(format!("p1 = {p1}, p2 = {p2}")));
    }
    let transparent = mz_unitary(std::f64::consts::PI, std::f64::consts::PI);
    let mirror = mz_unitary(0.0, 0.0);
    let branch = |u: &OpticalUnitary| -> Result<DensityMatrix, OpticsError> {
        let embedded = CMatrix::identity(2).kron(u.matrix());
        let amplitudes = embedded.matvec(psi.amplitudes());
        Ok(density_from_pure(&PureState::normalized(amplitudes)?))
    };
    let mut components = Vec::new();
    if p1 > 0.0 {
        components.push((p1, branch(&transparent)?));
    }
    if p2 > 0.0 {
        components.push((p2, branch(&mirror)?));
    }
    Ok(mix(&components)?)
}

fn example_component_states(alpha_sq: f64) -> (PureState, PureState) {
    let alpha = alpha_sq.sqrt();
    let beta = (1.0 - alpha_sq).sqrt();
    let psi1 = PureState::normalized(vec![
        Complex64::new(beta, 0.0), // |1⟩|1'⟩
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(alpha, 0.0), // |2⟩|2'⟩
    ])
    .expect("normalized by construction");
    let psi2 = PureState::normalized(vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(beta, 0.0),  // |1⟩|2'⟩
        Complex64::new(alpha, 0.0), // |2⟩|1'⟩
        Complex64::new(0.0, 0.0),
    ])
    .expect("normalized by construction");
    (psi1, psi2)
}

/// The example state ρ = p1|ψ1⟩⟨ψ1| + p2|ψ2⟩⟨ψ2|, together with the
/// no-violation constraint flag (p1−p2)² ≤ (α²−β²)².
pub fn build_example_state(params: &ExampleStateParams) -> (DensityMatrix, bool) {
    let (psi1, psi2) = example_component_states(params.alpha_sq);
    let rho = mix(&[
        (params.p1, density_from_pure(&psi1)),
        (params.p2(), density_from_pure(&psi2)),
    ])
    .expect("valid mixture by construction");
    (rho, params.constraint_satisfied())
}

/// Measurement settings for a protocol run.
#[derive(Debug, Clone, Copy)]
pub enum SettingsChoice {
    /// Use the analytically optimal settings of each state.
    Optimal,
    /// Use the given settings for both the unfiltered and filtered
    /// behavior.
    Explicit(ChshSettings),
}

/// Summary of one LHV feasibility verdict.
#[derive(Debug, Clone)]
pub struct LhvVerdict {
    pub feasible: bool,
    /// Re-expansion residual of the model when feasible.
    pub residual: Option<f64>,
    /// Certificate value and local bound when infeasible.
    pub certificate_value: Option<f64>,
    pub certificate_bound: Option<f64>,
}

impl LhvVerdict {
    fn from_decision(decision: &LhvDecision) -> Self {
        match decision {
            LhvDecision::Feasible { residual, .. } => Self {
                feasible: true,
                residual: Some(*residual),
                certificate_value: None,
                certificate_bound: None,
            },
            LhvDecision::Infeasible { certificate } => Self {
                feasible: false,
                residual: None,
                certificate_value: Some(certificate.value),
                certificate_bound: Some(certificate.local_bound),
            },
        }
    }
}

/// Everything the filtering protocol produces.
#[derive(Debug, Clone)]
pub struct ProtocolReport {
    pub params: Option<ExampleStateParams>,
    pub constraint_satisfied: Option<bool>,
    pub rho: DensityMatrix,
    pub pre_chsh: f64,
    pub pre_settings: ChshSettings,
    /// The "pass" Kraus element of the pre-selection filter.
    pub filter_pass: CMatrix,
    pub filter_is_identity: bool,
    pub pass_probability: f64,
    /// Closed-form pass probability 2·min(α²,β²), example states only.
    pub pass_probability_analytic: Option<f64>,
    pub rho_filtered: DensityMatrix,
    pub post_chsh: f64,
    pub post_settings: ChshSettings,
    /// Conditional-of-sequence behavior vs. direct behavior of the
    /// filtered state, infinity norm.
    pub sequence_route_residual: f64,
    /// Entrywise distance of ρ' from p1·Φ+ + p2·Ψ+, example states only.
    pub closed_form_residual: Option<f64>,
    /// Three-mode beamsplitter route vs. two-dimensional Kraus route,
    /// example states only.
    pub beamsplitter_route_residual: Option<f64>,
    /// Source construction (PDC + stochastic MZ) vs. the direct mixture,
    /// example states only.
    pub fig1_route_residual: Option<f64>,
    pub lhv_pre: LhvVerdict,
    pub lhv_post: LhvVerdict,
    pub hidden_nonlocality: bool,
    pub tol: f64,
    pub notes: Vec<String>,
}

fn projective_pair(
    settings: &ChshSettings,
) -> Result<(Vec<GeneralizedMeasurement>, Vec<GeneralizedMeasurement>), OpticsError> {
    let a = vec![
        projective_from_observable(&settings.a.operator())?,
        projective_from_observable(&settings.a_prime.operator())?,
    ];
    let b = vec![
        projective_from_observable(&settings.b.operator())?,
        projective_from_observable(&settings.b_prime.operator())?,
    ];
    Ok((a, b))
}

/// Runs the generic two-qubit filtering protocol: CHSH analysis of the
/// input state, one-sided pre-selection by `filter_v` (normalized to a
/// valid filter element), CHSH analysis of the selected subensemble,
/// and LHV verdicts for both behaviors. The filtered behavior is
/// produced by the sequential engine (filter step, then projective
/// step, conditioned on pass) and cross-checked against the
/// direct statistics of the filtered state.
pub fn run_protocol(
    rho: &DensityMatrix,
    filter_v: &CMatrix,
    settings: SettingsChoice,
    tol_verdict: f64,
) -> Result<ProtocolReport, OpticsError> {
    if rho.dim() != 4 {
        return Err(OpticsError::OutOfRange(format!(
            "protocol needs a two-qubit state, got dim {}",
            rho.dim()
        )));
    }
    let mut notes = Vec::new();

    let norm = operator_norm(filter_v);
    if norm < 1e-14 {
        return Err(OpticsError::OutOfRange("filter operator is zero".into()));
    }
    let pass = filter_v.scale_real(1.0 / norm);
    let filter_is_identity = pass.max_abs_diff(&CMatrix::identity(2)) < 1e-12;
    if filter_is_identity {
        notes.push("filter is the identity; no pre-selection occurs".into());
    }

    let (pre_max, pre_opt_settings) = max_chsh(rho)?;
    let (pass_probability, rho_filtered) = local_filter(rho, &pass, &CMatrix::identity(2))?;
    let (post_max, post_opt_settings) = max_chsh(&rho_filtered)?;

    let (pre_chsh, pre_settings, post_chsh, post_settings) = match settings {
        SettingsChoice::Optimal => (pre_max, pre_opt_settings, post_max, post_opt_settings),
        SettingsChoice::Explicit(s) => {
            notes.push("explicit settings supplied; reported values are not maxima".into());
            (chsh_value(rho, &s)?, s, chsh_value(&rho_filtered, &s)?, s)
        }
    };

    // Unfiltered behavior at the pre settings.
    let (pre_a, pre_b) = projective_pair(&pre_settings)?;
    let pre_behavior = behavior_from_quantum(rho, &pre_a, &pre_b)?;
    let lhv_pre = LhvVerdict::from_decision(&lhv_feasible(&pre_behavior, tol_verdict)?);

    // Filtered behavior via the sequential route, conditioned on pass.
    let filter = filter_from_operator(&pass)?;
    let ctx = SelectionContext::new(
        filter,
        GeneralizedMeasurement::trivial(2, "coincidence"),
        "pass",
        "coincidence",
    )?;
    let (post_a, post_b) = projective_pair(&post_settings)?;
    let post_behavior = conditional_behavior(rho, &ctx, &post_a, &post_b)?;
    let direct_behavior = behavior_from_quantum(&rho_filtered, &post_a, &post_b)?;
    let sequence_route_residual = post_behavior
        .probabilities()
        .iter()
        .zip(direct_behavior.probabilities())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    let lhv_post = LhvVerdict::from_decision(&lhv_feasible(&post_behavior, tol_verdict)?);

    let hidden_nonlocality =
        pre_chsh <= 2.0 + tol_verdict && post_chsh > 2.0 + tol_verdict && !lhv_post.feasible;

    Ok(ProtocolReport {
        params: None,
        constraint_satisfied: None,
        rho: rho.clone(),
        pre_chsh,
        pre_settings,
        filter_pass: pass,
        filter_is_identity,
        pass_probability,
        pass_probability_analytic: None,
        rho_filtered,
        post_chsh,
        post_settings,
        sequence_route_residual,
        closed_form_residual: None,
        beamsplitter_route_residual: None,
        fig1_route_residual: None,
        lhv_pre,
        lhv_post,
        hidden_nonlocality,
        tol: tol_verdict,
        notes,
    })
}

/// The filter element selected for the example state: the beamsplitter
/// attenuates whichever mode carries the larger amplitude.
fn example_filter(params: &ExampleStateParams) -> (CMatrix, bool, Option<String>) {
    let alpha = params.alpha_sq.sqrt();
    let beta = params.beta_sq().sqrt();
    if (alpha - beta).abs() <= 1e-12 {
        (CMatrix::identity(2), true, None)
    } else if alpha > beta {
        (CMatrix::diag_real(&[1.0, beta / alpha]), false, None)
    } else {
        (
            CMatrix::diag_real(&[alpha / beta, 1.0]),
            false,
            Some(format!(
                "alpha < beta: filtering mode 1 with transmittivity {:.6} instead",
                (alpha / beta).powi(2)
            )),
        )
    }
}

/// Filtered state via the explicit three-mode beamsplitter: embed side
/// A into {|1⟩,|2⟩,|D⟩}, apply the beamsplitter on (|2⟩,|D⟩) (or
/// (|1⟩,|D⟩) in the role-swapped case), and keep the no-detect modes.
fn beamsplitter_route(
    rho: &DensityMatrix,
    params: &ExampleStateParams,
) -> Result<(f64, DensityMatrix), OpticsError> {
    let alpha = params.alpha_sq.sqrt();
    let beta = params.beta_sq().sqrt();
    let (attenuated_mode, t) = if alpha >= beta {
        (1usize, (beta / alpha).powi(2))
    } else {
        (0usize, (alpha / beta).powi(2))
    };
    let bs2 = beamsplitter(t.min(1.0))?;

    // Embed C² into C³ (|D⟩ = index 2) on side A.
    let mut embed = CMatrix::zeros(3, 2);
    embed.set(0, 0, Complex64::new(1.0, 0.0));
    embed.set(1, 1, Complex64::new(1.0, 0.0));
    let id2 = CMatrix::identity(2);
    let rho6 = apply_outcome(rho, &embed.kron(&id2))?;

    // Beamsplitter couples the attenuated mode to |D⟩.
    let mut u3 = CMatrix::identity(3);
    let m = attenuated_mode;
    u3.set(m, m, bs2.matrix().get(0, 0));
    u3.set(m, 2, bs2.matrix().get(0, 1));
    u3.set(2, m, bs2.matrix().get(1, 0));
    u3.set(2, 2, bs2.matrix().get(1, 1));
    let after_bs = apply_outcome(rho6.state()?, &u3.kron(&id2))?;

    // No-detect projection back onto the two photon modes.
    let project = embed.dagger();
    let selected = apply_outcome(after_bs.state()?, &project.kron(&id2))?;
    let prob = selected.prob;
    Ok((prob, selected.state()?.clone()))
}

/// End-to-end run of the experiment: build the example state, filter it
/// with the suitably chosen beamsplitter, and analyze both behaviors.
///
/// Errors with `DegenerateProtocol` when p1 = p2 while a nontrivial
/// filter is requested (the filtered state then reaches CHSH = 2
/// exactly and can never violate).
pub fn fig3_pipeline(
    params: &ExampleStateParams,
    settings: SettingsChoice,
    tol_verdict: f64,
) -> Result<ProtocolReport, OpticsError> {
    let (rho, constraint_ok) = build_example_state(params);

    let (filter_v, is_identity, swap_note) = example_filter(params);
    if !is_identity && (params.p1 - params.p2()).abs() <= 1e-12 {
        return Err(OpticsError::DegenerateProtocol(
            "p1 = p2: the filtered state attains CHSH = 2 exactly and cannot violate".into(),
        ));
    }

    let mut report = run_protocol(&rho, &filter_v, settings, tol_verdict)?;
    report.params = Some(*params);
    report.constraint_satisfied = Some(constraint_ok);
    if let Some(note) = swap_note {
        report.notes.push(note);
    }

    // Closed form of the selected subensemble: p1·Φ+ + p2·Ψ+.
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let phi = PureState::normalized(vec![
        Complex64::new(inv, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(inv, 0.0),
    ])?;
    let psi = PureState::normalized(vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(inv, 0.0),
        Complex64::new(inv, 0.0),
        Complex64::new(0.0, 0.0),
    ])?;
    let closed_form = mix(&[
        (params.p1, density_from_pure(&phi)),
        (params.p2(), density_from_pure(&psi)),
    ])?;
    report.closed_form_residual = Some(
        report
            .rho_filtered
            .matrix()
            .max_abs_diff(closed_form.matrix()),
    );

    report.pass_probability_analytic = Some(2.0 * params.alpha_sq.min(params.beta_sq()));

    // Independent construction routes.
    let (bs_prob, bs_state) = beamsplitter_route(&rho, params)?;
    report.beamsplitter_route_residual = Some(
        bs_state
            .matrix()
            .max_abs_diff(report.rho_filtered.matrix())
            .max((bs_prob - report.pass_probability).abs()),
    );
    let fig1 = stochastic_mz_mix(&pdc_pair_state(params.alpha_sq)?, params.p1, params.p2())?;
    report.fig1_route_residual = Some(fig1.matrix().max_abs_diff(rho.matrix()));

    Ok(report)
}

/// One grid point of a parameter sweep. Degenerate cases (p1 = p2 or
/// α = β) are evaluated rather than rejected: the filter becomes the
/// identity when α = β, and the filtered state simply fails to violate
/// when p1 = p2.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub alpha_sq: f64,
    pub p1: f64,
    pub constraint_ok: bool,
    pub pre_chsh: f64,
    pub pass_prob: f64,
    pub post_chsh: f64,
    pub lhv_pre_feasible: bool,
    pub lhv_post_feasible: bool,
}

/// Evaluates one point of the (α², p1) grid with optimal settings.
pub fn sweep_point(params: &ExampleStateParams, tol_verdict: f64) -> Result<SweepPoint, OpticsError> {
    let (rho, constraint_ok) = build_example_state(params);
    let (filter_v, _, _) = example_filter(params);
    let report = run_protocol(&rho, &filter_v, SettingsChoice::Optimal, tol_verdict)?;
    Ok(SweepPoint {
        alpha_sq: params.alpha_sq,
        p1: params.p1,
        constraint_ok,
        pre_chsh: report.pre_chsh,
        pass_prob: report.pass_probability,
        post_chsh: report.post_chsh,
        lhv_pre_feasible: report.lhv_pre.feasible,
        lhv_post_feasible: report.lhv_post.feasible,
    })
}
