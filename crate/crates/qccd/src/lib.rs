//! Compiler, transport scheduler, and noisy simulator for a linear-trap
//! QCCD (quantum charge-coupled device) machine.
//!
//! The machine model is a linear trap with two gate zones, two auxiliary
//! zones and a loading zone. Qubit ions travel in two-ion qubit/coolant
//! pairs; four-ion crystals are formed transiently in gate zones for
//! two-qubit gates and order swaps. The native gate set is
//! `RZ(theta)` (software), `RXY(theta, phi)` with `theta` in {pi/2, pi},
//! and the phase-insensitive entangler `ZZ = exp(-i pi/4 Z (x) Z)`.
//!
//! Crate layout:
//!
//! * [`circuit`] — gate-level IR with JSON (de)serialization and validation
//! * [`math`] — small dense complex linear algebra used by synthesis
//! * [`synth`] — native-gate synthesis (SU(2), SU(4) via Cartan/Weyl
//!   decomposition, software-Z commutation, wrapper-pulse search)
//! * [`machine`] — zones, crystals, transport primitives, timing and noise
//! * [`schedule`] — ion routing, transport/gate scheduling, time budgets,
//!   software phase tracking
//! * [`sim`] — exact density-matrix and trajectory-sampling simulation
//! * [`bench`] — randomized benchmarking, crosstalk statistics, teleported
//!   CNOT, quantum volume, and machine-readable reports

pub mod bench;
pub mod circuit;
pub mod machine;
pub mod math;
pub mod rng;
pub mod schedule;
pub mod sim;
pub mod synth;

mod error;

pub use error::{Error, Result};
