//! Synthetic multiplexed-immunofluorescence tissue generator.
//!
//! The pipeline for one image is
//! [`run_neighborhood_model`] → [`run_phenotype_model`] →
//! [`render_multiplex`] → [`compute_metrics`], each stage drawing from its
//! own substream of a seeded [`RandomStream`]. Ground-truth masks, the
//! rendered volume, and the metrics report are written by [`io`] and
//! [`cohort`].

pub mod cohort;
pub mod config;
pub mod ellipse;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod neighborhood;
pub mod phenotype;
pub mod rng;
pub mod rule;
pub mod texture;

#[cfg(feature = "cli")]
pub mod cli;

pub use config::{parse_config, preset_fig4, validate_config, PresetScale, SimulationConfig};
pub use error::{Error, Result};
pub use grid::Grid;
pub use metrics::{compute_metrics, MetricsReport};
pub use neighborhood::{run_neighborhood_model, IterationTelemetry, NeighborhoodMask};
pub use phenotype::{run_phenotype_model, PhenotypeState};
pub use rng::RandomStream;
pub use texture::{render_multiplex, MultiplexImage};
