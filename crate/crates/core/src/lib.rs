//! Simulation of sequences of generalized measurements on bipartite
//! two-level systems, and analysis of whether the resulting statistics
//! admit a local hidden variable (LHV) model.
//!
//! The crate is organized bottom-up:
//!
//! * [`qcore`] — small dense complex linear algebra and quantum-state
//!   value types (matrices, pure states, density matrices, Hermitian
//!   eigendecomposition).
//! * [`measurement`] — generalized (Kraus / partition-of-unity)
//!   measurements, state update, local filters, and the sequential
//!   joint/conditional probability engine.
//! * [`bell`] — CHSH expectation values, two-qubit correlation
//!   matrices, and the maximal CHSH value with explicit settings.
//! * [`lhv`] — LHV-representability of behavior tables by linear
//!   programming over deterministic local strategies, explicit LHV
//!   models for separable states, and the detection-loophole demo.
//! * [`optics`] — the linear-optics state preparation (PDC source,
//!   stochastic Mach-Zehnder mixer, pre-selection beamsplitter) and
//!   the end-to-end filtering protocol.

pub mod bell;
pub mod lhv;
pub mod measurement;
pub mod optics;
pub mod qcore;
