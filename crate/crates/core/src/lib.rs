#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod augment;
pub mod bundle;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod dsp;
pub mod ensembles;
pub mod error;
pub mod eval;
pub mod features;
pub mod learners;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod record;
pub mod seed;
pub mod synth;
