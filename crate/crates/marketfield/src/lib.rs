//! Dynamics of co-moving asset prices, modelled as a particle in a latent
//! potential field.
//!
//! The pipeline: ingest per-asset OHLCV series into an aligned [`Trajectory`]
//! (`market_data`), turn it into force observations via central second
//! differences, fit an independent-output Gaussian process to the force field
//! (`gp_field`), score every grid point by how confidently its inferred
//! Laplacian departs from the prior (`attractor`), and summarise where the
//! trajectory is being pulled. Stability of a window is measured directly
//! from pairwise trajectory separations (`lyapunov`), co-movement across
//! horizons by Morlet wavelet coherence (`wavelet`), and `synth` integrates
//! known potentials to provide ground truth for all of it.

pub mod attractor;
pub mod gp_field;
pub mod lyapunov;
pub mod market_data;
pub mod pipeline;
pub mod synth;
pub mod wavelet;

pub use attractor::{AttractorSummary, KLField, TrendReport};
pub use gp_field::{FieldPosterior, PotentialFieldModel, SEKernelParams};
pub use lyapunov::LyapunovResult;
pub use market_data::{GradientObservations, PriceRecord, Trajectory};
pub use synth::SynthSpec;
pub use wavelet::CoherenceMap;
