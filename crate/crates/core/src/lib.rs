//! Biorthogonal quantum mechanics for non-Hermitian Hamiltonians.
//!
//! * [`biortho`]: right/left eigensystems, gauge fixing, exceptional points.
//! * [`dynamics`]: canonical states `(c_j, c̄_j)`, field pairs `(ψ, φ̄)` and
//!   their time evolution.
//! * [`geometric`]: complex Berry connections, curvatures, loop phases,
//!   adiabatic transport and action variables.
//! * [`fock`]: second quantization on truncated Fock spaces.
//! * [`gp`]: the stationary non-Hermitian Gross–Pitaevskii problem.
//! * [`builders`]: parameterized Hamiltonian families and the named registry.
//!
//! ```
//! use nhqm::prelude::*;
//!
//! let h = pt2x2(1.0, 0.5)?;
//! let sys = diagonalize_biortho(&h, &BiorthoOptions::default())?;
//! assert!((sys.eigenvalue(1).re - 0.75f64.sqrt()).abs() < 1e-12);
//! assert!(sys.biortho_defect() < 1e-12);
//! # Ok::<(), nhqm::Error>(())
//! ```

pub mod biortho;
pub mod builders;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod geometric;
pub mod gp;
pub mod hamiltonian;
pub mod io;
pub mod linalg;

pub use error::{Error, Result};
pub use hamiltonian::Hamiltonian;
pub use linalg::C64;

pub mod prelude {
    pub use crate::biortho::{diagonalize_biortho, BiorthoOptions, BiorthoSystem};
    pub use crate::builders::{pt2x2, spin_half, HamiltonianBuilder, Params, Pt2x2Builder, Registry, SpinHalfBuilder};
    pub use crate::dynamics::{evolve_ode, CanonicalState, FieldPair, Gauge, StateOptions, Trajectory};
    pub use crate::error::{Error, Result};
    pub use crate::fock::{
        build_free_hamiltonian, build_interacting_hamiltonian, build_mode_operators, total_number_operator, FockSpace,
        ManyBodyOperator, Statistics,
    };
    pub use crate::geometric::{
        action_variable, action_variables, adiabatic_evolve, berry_connection_left, berry_connection_right, berry_curvature,
        geometric_phase_loop, ParameterPath, PhaseReport,
    };
    pub use crate::gp::{
        build_gp_operator, gp_residual, solve_self_consistent, Boundary, GPSolution, GpOptions, GpProblem, Grid1D,
        Kinetic, Potential,
    };
    pub use crate::hamiltonian::{Hamiltonian, MatrixJson};
    pub use crate::linalg::{C64, I};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/biorthogonal.md")]
    pub struct Biorthogonal;
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub struct Dynamics;
    #[doc = include_str!("../../../book/src/geometric-phase.md")]
    pub struct GeometricPhase;
    #[doc = include_str!("../../../book/src/quantization.md")]
    pub struct Quantization;
    #[doc = include_str!("../../../book/src/gross-pitaevskii.md")]
    pub struct GrossPitaevskii;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
