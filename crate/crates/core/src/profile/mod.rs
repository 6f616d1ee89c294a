//! Profile decomposition machinery: greedy scale pieces, space-time
//! bubbles, their assembly, and the almost-periodicity parameters.

pub mod bubbles;
pub mod decompose;
pub mod greedy;
pub mod periodicity;
pub mod synthetic;

pub use bubbles::{align, extract_bubbles, place, Bubble, BubbleConfig, BubbleExtraction};
pub use decompose::{
    piece_deformation, profile_decompose, renormalize, Profile, ProfileConfig, ProfileDecomposition, SizeTable, Trend,
};
pub use greedy::{greedy_scale_decomposition, greedy_spec, GreedyConfig, ScaleDecomposition, ScalePiece};
pub use periodicity::{
    almost_periodicity_params, beta_shape, eta_lower_bound, track_almost_periodicity, EtaReport, PeriodicityConfig,
    PeriodicityParams, PeriodicityRow,
};
