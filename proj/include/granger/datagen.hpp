#ifndef GRANGER_DATAGEN_HPP
#define GRANGER_DATAGEN_HPP

#include "granger/matrix.hpp"
#include "granger/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace granger {

/// T x p observation panel, rows oldest first. Panels loaded from replicated
/// sources carry per-replicate lengths; lagged windows never span replicates.
/// truth[i][j] = 1 iff series j Granger-causes series i.
struct TimeSeriesPanel {
    std::vector<std::string> series_names;
    Matrix data;                                // T x p
    std::vector<std::size_t> replicate_lengths; // sums to T; {T} when unreplicated
    std::optional<Matrix> truth;                // p x p of 0/1
    std::optional<Matrix> truth_lags;           // p x K_true of 0/1

    std::size_t num_series() const { return data.cols; }
    std::size_t length() const { return data.rows; }
};

/// Supervised lag windows: inputs row n is the flattened [K x p] window with
/// column m = (k-1)*p + j holding x_{t-k,j}; targets row n is x_t.
struct LaggedDataset {
    std::size_t num_series = 0;  // p
    std::size_t max_lag = 0;     // K
    Matrix inputs;               // N x K*p
    Matrix targets;              // N x p

    std::size_t size() const { return inputs.rows; }
};

struct ScalerStats {
    std::vector<double> input_mean, input_sd;    // per K*p input coordinate
    std::vector<double> target_mean, target_sd;  // per series
};

/// Below this sample sd a coordinate passes through unscaled.
inline constexpr double kScaleSdFloor = 1e-12;

struct VarSimConfig {
    std::size_t p = 10;
    std::size_t T = 1000;
    std::vector<std::size_t> causal_lags = {1, 2, 3};
    double density = 0.2;
    double coeff = 0.13;
    double noise_sd = 0.1;
    std::uint64_t seed = 1;
    std::size_t burn_in = 200;
    double stability_radius = 0.95;
};

/// Sparse stationary VAR(K) panel. Each target keeps itself as a cause plus
/// uniformly chosen others to the requested density; coefficients are
/// +/- coeff at the causal lags, resampled until the companion spectral
/// radius stays within the stability bound.
TimeSeriesPanel simulate_var(const VarSimConfig& cfg);

struct VarSimOutput {
    TimeSeriesPanel panel;
    std::vector<Matrix> coefficients;  // A^(1) .. A^(K)
};

/// simulate_var plus the accepted coefficient matrices.
VarSimOutput simulate_var_detailed(const VarSimConfig& cfg);

/// The raw recursion x_t = sum_k A^(k) x_{t-k} + noise. `history` row k-1
/// holds x_{1-k}; returns T rows starting at x_1 after dropping burn_in.
Matrix simulate_var_process(std::span<const Matrix> coefficients, const Matrix& history,
                            std::size_t T, double noise_sd, std::size_t burn_in,
                            RngStream& noise);

/// Largest eigenvalue magnitude of the stacked VAR(K) transition matrix.
double companion_spectral_radius(std::span<const Matrix> coefficients);

struct LorenzConfig {
    std::size_t p = 20;
    std::size_t T = 1500;
    double forcing = 20.0;    // F
    double dt_record = 0.05;
    std::uint64_t seed = 1;
    std::size_t burn_in = 1000;       // recorded points discarded
    std::size_t substeps = 10;        // RK4 internal steps per recorded point
    double init_perturb_sd = 0.01;
    double measurement_noise_sd = 0.01;
};

/// Lorenz-96 panel: RK4 integration of the cyclic dynamics, burn-in dropped,
/// i.i.d. Gaussian measurement noise added. truth marks {i-2, i-1, i, i+1}.
TimeSeriesPanel simulate_lorenz96(const LorenzConfig& cfg);

/// Noise-free RK4 trajectory: `steps` recorded states after x0, spaced
/// dt_record apart with `substeps` internal steps each.
Matrix lorenz96_trajectory(std::size_t p, double forcing, std::span<const double> x0,
                           std::size_t steps, double dt_record, std::size_t substeps);

/// Tab-separated replicated panel (time column first, blank lines between
/// replicates, optional header) plus an optional "Ga Gb 1" edge list.
TimeSeriesPanel load_replicated_panel(const std::filesystem::path& panel_path,
                                      const std::filesystem::path& truth_path = {});

/// Comma-separated panel (header of series names) plus optional truth matrix.
TimeSeriesPanel load_panel_csv(const std::filesystem::path& panel_path,
                               const std::filesystem::path& truth_path = {});

LaggedDataset make_lagged(const TimeSeriesPanel& panel, std::size_t max_lag);

/// Standardizes every (series, lag) input coordinate and every target series
/// using mean and sample sd estimated on the given training rows only.
std::pair<LaggedDataset, ScalerStats> standard_scale(const LaggedDataset& dataset,
                                                     std::span<const std::size_t> train_rows);

struct WindowSlice {
    TimeSeriesPanel panel;
    std::size_t start_sample = 0;
    double start_seconds = 0.0;
};

std::vector<WindowSlice> sliding_windows(const TimeSeriesPanel& panel, std::size_t window_len,
                                         double overlap_fraction, double sampling_rate_hz);

struct SplitIndices {
    std::vector<std::size_t> train, val;
};

/// Seeded uniform partition with ceil(n * val_fraction) validation rows.
SplitIndices train_val_split(std::size_t n, double val_fraction, std::uint64_t seed);

/// First floor(n * train_fraction) rows train, the rest validate.
SplitIndices chronological_split(std::size_t n, double train_fraction);

} // namespace granger

#endif
