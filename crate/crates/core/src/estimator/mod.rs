//! Sliding-window estimation of edge probabilities and the window's spectral response.

pub mod spectral;
pub mod window;

pub use spectral::{
    correct_single_frequency, dft, dirichlet_gain, dirichlet_phase, dirichlet_signed, fit_sinusoid, idft,
    optimal_window, solve_least_squares, window_lag, SpectralResponse, DEFAULT_GAIN_FLOOR,
};
pub use window::{
    boundary_incidence, boundary_probability, boundary_sigma, bulk_from_stats, bulk_probability, estimate_at,
    estimate_sigma, grid_bounds, sliding_series, temporal_average, window_counts,
    window_sigma, Counts, EstimatedSeries, PointEstimate, SeriesSet, WindowStats, FLAG_DEGENERATE, FLAG_RADICAND,
};
