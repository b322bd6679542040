//! Classification from sparse, noisy crowdsourced annotations.
//!
//! The pipeline aggregates annotations with Dawid–Skene EM, perturbs each
//! training sample toward a nearby synthetic sample (drawn from a Gaussian
//! copula fit) in proportion to its label certainty, and trains an asymmetric
//! teacher/student co-teaching pair on the perturbed data. Simulators for the
//! annotators and for synthetic mixed-type datasets make every experiment
//! reproducible from a seed.

pub mod annotation;
pub mod coteach;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod metrics;
pub mod neural;
pub mod perturb;
pub mod rng;
pub mod synth;
pub mod tabular;

pub use error::{Error, Result};
