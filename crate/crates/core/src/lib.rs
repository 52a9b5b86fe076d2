//! Desk-scale simulator of frequency-comb-driven quantum-logic control of a
//! single trapped diatomic molecular ion co-trapped with an atomic logic ion.
//!
//! The crate models, at the population level:
//!
//! * rotational level structure and thermal statistics of a Σ-state diatomic
//!   ion ([`molecule`]),
//! * the frequency-comb stimulated-Raman drive: resonance arithmetic,
//!   Rabi-frequency formulas and multi-transition matching ([`comb`]),
//! * motional sideband coupling, sideband cooling and quantum-logic phonon
//!   readout ([`trapdyn`]),
//! * the rotational cooling protocol with Zeeman bookkeeping and
//!   spontaneous-emission loss, in rate-equation and Monte Carlo form
//!   ([`cooling`]),
//! * broadband optical-pumping compression of the rotational distribution
//!   ([`pumping`]),
//! * simulated offset-frequency scans and absolute comb-index extraction
//!   ([`spectro`]).
//!
//! All energies are stored as ordinary frequencies (E/h, in Hz). Angular
//! frequencies (rad/s) appear only inside Rabi-dynamics formulas; the single
//! conversion point is [`comb::angular`].

pub mod comb;
pub mod config;
pub mod constants;
pub mod cooling;
pub mod error;
pub mod molecule;
pub mod output;
pub mod population;
pub mod pumping;
pub mod report;
pub mod rng;
pub mod spectro;
pub mod trapdyn;
pub mod units;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use population::{PopulationState, RotLevel, StateKey};
