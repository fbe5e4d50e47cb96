//! Digital self-interference cancellation for in-band full-duplex radios.
//!
//! A transmitter that operates on the same frequency band as its co-located
//! receiver leaks a strong, distorted copy of its own signal into the receive
//! path. This crate reconstructs and removes that leakage in the digital
//! baseband domain. It provides:
//!
//! * a linear FIR canceller identified by least squares ([`lincanc`]),
//! * a polynomial (parallel-Hammerstein) canceller with efficient
//!   dynamic-programming basis-function computation ([`polycanc`]),
//! * a hybrid neural-network canceller trained with mini-batch Adam
//!   ([`nncanc`]),
//! * saturating fixed-point arithmetic reproducing the datapath of the
//!   hardware architectures ([`fxp`]),
//! * analytical and cycle-level models of two accelerator architectures:
//!   the alternating neuron-by-neuron / input-by-input macro-pipeline for
//!   the neural canceller and the complex-MAC array for the polynomial
//!   canceller ([`hwmodel`]),
//! * cancellation-ratio, spectral-density and operation-count metrics
//!   ([`metrics`]),
//! * a synthetic full-duplex transceiver that generates datasets with known
//!   ground truth ([`sigmodel`]).

pub mod fxp;
pub mod hwmodel;
pub mod lincanc;
pub mod linalg;
pub mod metrics;
pub mod nncanc;
pub mod opcount;
pub mod polycanc;
pub mod presets;
pub mod signal;
pub mod sigmodel;

pub use fxp::{FxpComplex, FxpFormat, FxpReal};
pub use lincanc::LinModel;
pub use metrics::ComplexityReport;
pub use nncanc::NnModel;
pub use opcount::OpCounter;
pub use polycanc::PolyModel;
pub use signal::{ComplexSeq, Reconstruction};
pub use sigmodel::{Dataset, TxChainConfig};

/// Complex double-precision baseband sample.
pub type Complex64 = num_complex::Complex<f64>;
