#include "granger/datagen.hpp"

#include "granger/errors.hpp"
#include "granger/io.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace granger {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// VAR simulation
// ---------------------------------------------------------------------------

double companion_spectral_radius(std::span<const Matrix> coefficients) {
    if (coefficients.empty()) return 0.0;
    const std::size_t p = coefficients[0].rows;
    const std::size_t lags = coefficients.size();
    const std::size_t n = p * lags;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                      static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < lags; ++k) {
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = 0; j < p; ++j) {
                companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k * p + j)) =
                    coefficients[k].at(i, j);
            }
        }
    }
    for (std::size_t k = 1; k < lags; ++k) {
        for (std::size_t i = 0; i < p; ++i) {
            companion(static_cast<Eigen::Index>(k * p + i),
                      static_cast<Eigen::Index>((k - 1) * p + i)) = 1.0;
        }
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
    double radius = 0.0;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
        radius = std::max(radius, std::abs(solver.eigenvalues()[i]));
    }
    return radius;
}

Matrix simulate_var_process(std::span<const Matrix> coefficients, const Matrix& history,
                            std::size_t T, double noise_sd, std::size_t burn_in,
                            RngStream& noise) {
    const std::size_t lags = coefficients.size();
    const std::size_t p = coefficients.empty() ? history.cols : coefficients[0].rows;
    if (history.rows != lags || history.cols != p) {
        throw DimensionError("simulate_var_process: history must be [K x p]");
    }

    // rolling buffer of the last K states, most recent first
    std::vector<std::vector<double>> past(lags, std::vector<double>(p));
    for (std::size_t k = 0; k < lags; ++k) {
        for (std::size_t j = 0; j < p; ++j) past[k][j] = history.at(k, j);
    }

    Matrix out(T, p);
    std::vector<double> next(p);
    for (std::size_t t = 0; t < burn_in + T; ++t) {
        for (std::size_t i = 0; i < p; ++i) {
            double acc = noise_sd == 0.0 ? 0.0 : noise.normal(0.0, noise_sd);
            for (std::size_t k = 0; k < lags; ++k) {
                const Matrix& a = coefficients[k];
                const std::vector<double>& x = past[k];
                for (std::size_t j = 0; j < p; ++j) acc += a.at(i, j) * x[j];
            }
            next[i] = acc;
        }
        if (t >= burn_in) {
            for (std::size_t j = 0; j < p; ++j) out.at(t - burn_in, j) = next[j];
        }
        for (std::size_t k = lags; k-- > 1;) past[k] = past[k - 1];
        if (lags > 0) past[0] = next;
    }
    return out;
}

TimeSeriesPanel simulate_var(const VarSimConfig& cfg) {
    return simulate_var_detailed(cfg).panel;
}

VarSimOutput simulate_var_detailed(const VarSimConfig& cfg) {
    if (cfg.p < 1 || cfg.T < 1) throw UsageError("simulate_var: p and T must be >= 1");
    if (cfg.density <= 0.0 || cfg.density > 1.0) {
        throw UsageError("simulate_var: density must lie in (0, 1]");
    }
    if (cfg.causal_lags.empty()) throw UsageError("simulate_var: causal_lags must be nonempty");

    const std::size_t p = cfg.p;
    const std::size_t k_true = *std::max_element(cfg.causal_lags.begin(), cfg.causal_lags.end());
    const std::size_t n_causes = static_cast<std::size_t>(
        std::ceil(cfg.density * static_cast<double>(p)));

    RngStream support_rng(cfg.seed, "support");
    RngStream sign_rng(cfg.seed, "signs");
    RngStream noise_rng(cfg.seed, "noise");

    std::vector<Matrix> coefficients;
    std::vector<std::vector<std::size_t>> causes(p);

    constexpr std::size_t kMaxAttempts = 1000;
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < kMaxAttempts && !accepted; ++attempt) {
        coefficients.assign(k_true, Matrix(p, p));
        for (std::size_t i = 0; i < p; ++i) causes[i].clear();
        for (std::size_t i = 0; i < p; ++i) {
            // the target always causes itself; remaining causes drawn uniformly
            std::vector<std::size_t> selected = {i};
            std::vector<std::size_t> others;
            others.reserve(p - 1);
            for (std::size_t j = 0; j < p; ++j) {
                if (j != i) others.push_back(j);
            }
            while (selected.size() < n_causes && !others.empty()) {
                std::size_t pick = static_cast<std::size_t>(support_rng.uniform_below(others.size()));
                selected.push_back(others[pick]);
                others.erase(others.begin() + static_cast<std::ptrdiff_t>(pick));
            }
            for (std::size_t j : selected) {
                const double sign = j == i ? 1.0 : sign_rng.sign();
                for (std::size_t lag : cfg.causal_lags) {
                    coefficients[lag - 1].at(i, j) = cfg.coeff * sign;
                }
            }
            causes[i] = std::move(selected);
        }
        accepted = cfg.coeff == 0.0 ||
                   companion_spectral_radius(coefficients) <= cfg.stability_radius;
    }
    if (!accepted) {
        throw GenerationError("simulate_var: no stable coefficient draw in 1000 attempts; "
                              "reduce coeff or density");
    }

    TimeSeriesPanel panel;
    panel.data = simulate_var_process(coefficients, Matrix(k_true, p), cfg.T, cfg.noise_sd,
                                      cfg.burn_in, noise_rng);
    panel.replicate_lengths = {cfg.T};
    panel.series_names.reserve(p);
    for (std::size_t j = 0; j < p; ++j) panel.series_names.push_back("x" + std::to_string(j + 1));

    Matrix truth(p, p);
    for (std::size_t i = 0; i < p; ++i) {
        truth.at(i, i) = 1.0;  // self-edges are ground truth by convention
        if (cfg.coeff != 0.0) {
            for (std::size_t j : causes[i]) truth.at(i, j) = 1.0;
        }
    }
    panel.truth = std::move(truth);

    Matrix truth_lags(p, k_true);
    if (cfg.coeff != 0.0) {
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t lag : cfg.causal_lags) truth_lags.at(i, lag - 1) = 1.0;
        }
    }
    panel.truth_lags = std::move(truth_lags);
    return {std::move(panel), std::move(coefficients)};
}

// ---------------------------------------------------------------------------
// Lorenz-96
// ---------------------------------------------------------------------------

namespace {

void lorenz_derivative(std::span<const double> x, double forcing, std::span<double> dx) {
    const std::size_t p = x.size();
    for (std::size_t i = 0; i < p; ++i) {
        const double xp1 = x[(i + 1) % p];
        const double xm1 = x[(i + p - 1) % p];
        const double xm2 = x[(i + p - 2) % p];
        dx[i] = (xp1 - xm2) * xm1 - x[i] + forcing;
    }
}

} // namespace

Matrix lorenz96_trajectory(std::size_t p, double forcing, std::span<const double> x0,
                           std::size_t steps, double dt_record, std::size_t substeps) {
    if (p < 4) throw UsageError("lorenz96: p must be >= 4");
    if (dt_record <= 0.0 || substeps == 0) throw UsageError("lorenz96: bad step configuration");
    if (x0.size() != p) throw DimensionError("lorenz96: x0 must have length p");

    const double dt = dt_record / static_cast<double>(substeps);
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> k1(p), k2(p), k3(p), k4(p), tmp(p);

    Matrix out(steps, p);
    for (std::size_t step = 0; step < steps; ++step) {
        for (std::size_t s = 0; s < substeps; ++s) {
            lorenz_derivative(x, forcing, k1);
            for (std::size_t i = 0; i < p; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
            lorenz_derivative(tmp, forcing, k2);
            for (std::size_t i = 0; i < p; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
            lorenz_derivative(tmp, forcing, k3);
            for (std::size_t i = 0; i < p; ++i) tmp[i] = x[i] + dt * k3[i];
            lorenz_derivative(tmp, forcing, k4);
            for (std::size_t i = 0; i < p; ++i) {
                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        for (std::size_t i = 0; i < p; ++i) {
            if (std::abs(x[i]) > 1e6) {
                throw GenerationError("lorenz96: trajectory diverged; reduce the internal step");
            }
            out.at(step, i) = x[i];
        }
    }
    return out;
}

TimeSeriesPanel simulate_lorenz96(const LorenzConfig& cfg) {
    RngStream init_rng(cfg.seed, "init");
    RngStream noise_rng(cfg.seed, "noise");

    std::vector<double> x0(cfg.p, cfg.forcing);
    for (double& v : x0) v += init_rng.normal(0.0, cfg.init_perturb_sd);

    Matrix track = lorenz96_trajectory(cfg.p, cfg.forcing, x0, cfg.burn_in + cfg.T,
                                       cfg.dt_record, cfg.substeps);

    TimeSeriesPanel panel;
    panel.data = Matrix(cfg.T, cfg.p);
    for (std::size_t t = 0; t < cfg.T; ++t) {
        for (std::size_t i = 0; i < cfg.p; ++i) {
            panel.data.at(t, i) = track.at(cfg.burn_in + t, i) +
                                  noise_rng.normal(0.0, cfg.measurement_noise_sd);
        }
    }
    panel.replicate_lengths = {cfg.T};
    for (std::size_t j = 0; j < cfg.p; ++j) panel.series_names.push_back("x" + std::to_string(j + 1));

    Matrix truth(cfg.p, cfg.p);
    for (std::size_t i = 0; i < cfg.p; ++i) {
        truth.at(i, (i + cfg.p - 2) % cfg.p) = 1.0;
        truth.at(i, (i + cfg.p - 1) % cfg.p) = 1.0;
        truth.at(i, i) = 1.0;
        truth.at(i, (i + 1) % cfg.p) = 1.0;
    }
    panel.truth = std::move(truth);
    return panel;
}

// ---------------------------------------------------------------------------
// Loaders
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == '\t' || line[i] == ' ' || line[i] == '\r')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != '\t' && line[i] != ' ' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

bool blank_line(const std::string& line) {
    for (char c : line) {
        if (c != ' ' && c != '\t' && c != '\r') return false;
    }
    return true;
}

bool numeric_token(const std::string& token) {
    try {
        io::parse_double(token, "");
        return true;
    } catch (const FormatError&) {
        return false;
    }
}

Matrix load_truth_edge_list(const fs::path& path, const std::vector<std::string>& names) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    const std::size_t p = names.size();
    Matrix truth(p, p);
    std::string line;
    std::size_t line_no = 0;
    auto index_of = [&](const std::string& name) {
        for (std::size_t j = 0; j < p; ++j) {
            if (names[j] == name) return j;
        }
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": unknown series name '" +
                          name + "'");
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (blank_line(line)) continue;
        auto fields = split_ws(line);
        if (fields.size() < 2 || fields.size() > 3) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) +
                              ": expected 'cause effect [0|1]'");
        }
        const std::size_t cause = index_of(fields[0]);
        const std::size_t effect = index_of(fields[1]);
        double flag = 1.0;
        if (fields.size() == 3) {
            flag = io::parse_double(fields[2], path.string() + ":" + std::to_string(line_no));
        }
        if (flag != 0.0) truth.at(effect, cause) = 1.0;
    }
    return truth;
}

} // namespace

TimeSeriesPanel load_replicated_panel(const fs::path& panel_path, const fs::path& truth_path) {
    std::ifstream in(panel_path);
    if (!in) throw FormatError("cannot open " + panel_path.string());

    TimeSeriesPanel panel;
    std::vector<double> values;
    std::vector<std::size_t> lengths;
    std::size_t cols = 0;         // series count (time column excluded)
    std::size_t current_len = 0;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;

    auto close_replicate = [&]() {
        if (current_len == 0) return;
        if (!lengths.empty() && current_len != lengths.front()) {
            throw FormatError(panel_path.string() + ":" + std::to_string(line_no) +
                              ": ragged replicate of length " + std::to_string(current_len) +
                              " (expected " + std::to_string(lengths.front()) + ")");
        }
        lengths.push_back(current_len);
        current_len = 0;
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (blank_line(line)) {
            close_replicate();
            continue;
        }
        auto fields = split_ws(line);
        if (!saw_header && values.empty() && !fields.empty() && !numeric_token(fields[0])) {
            panel.series_names.assign(fields.begin() + 1, fields.end());
            cols = panel.series_names.size();
            saw_header = true;
            continue;
        }
        if (fields.size() < 2) {
            throw FormatError(panel_path.string() + ":" + std::to_string(line_no) +
                              ": expected a time column plus series values");
        }
        if (cols == 0) cols = fields.size() - 1;
        if (fields.size() - 1 != cols) {
            throw FormatError(panel_path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(cols + 1) + " fields, got " +
                              std::to_string(fields.size()));
        }
        for (std::size_t c = 1; c < fields.size(); ++c) {
            values.push_back(io::parse_double(
                fields[c], panel_path.string() + ":" + std::to_string(line_no)));
        }
        ++current_len;
    }
    close_replicate();
    if (values.empty()) throw FormatError(panel_path.string() + ": no observations");

    const std::size_t n_rows = values.size() / cols;
    panel.data = Matrix(n_rows, cols, std::move(values));
    panel.replicate_lengths = std::move(lengths);
    if (panel.series_names.empty()) {
        for (std::size_t j = 0; j < cols; ++j) panel.series_names.push_back("G" + std::to_string(j + 1));
    }
    if (!truth_path.empty()) {
        panel.truth = load_truth_edge_list(truth_path, panel.series_names);
    }
    return panel;
}

TimeSeriesPanel load_panel_csv(const fs::path& panel_path, const fs::path& truth_path) {
    io::CsvContents csv = io::read_csv(panel_path);
    TimeSeriesPanel panel;
    panel.data = std::move(csv.data);
    panel.replicate_lengths = {panel.data.rows};
    if (!csv.header.empty()) {
        panel.series_names = std::move(csv.header);
    } else {
        for (std::size_t j = 0; j < panel.data.cols; ++j) {
            panel.series_names.push_back("x" + std::to_string(j + 1));
        }
    }
    if (!truth_path.empty()) {
        io::CsvContents truth = io::read_csv(truth_path);
        if (truth.data.rows != panel.data.cols || truth.data.cols != panel.data.cols) {
            throw FormatError(truth_path.string() + ": truth must be p x p for p = " +
                              std::to_string(panel.data.cols));
        }
        panel.truth = std::move(truth.data);
    }
    return panel;
}

// ---------------------------------------------------------------------------
// Dataset assembly and transforms
// ---------------------------------------------------------------------------

LaggedDataset make_lagged(const TimeSeriesPanel& panel, std::size_t max_lag) {
    if (max_lag < 1) throw UsageError("make_lagged: max_lag must be >= 1");
    const std::size_t p = panel.num_series();
    std::size_t n = 0;
    for (std::size_t len : panel.replicate_lengths) {
        if (len <= max_lag) {
            throw UsageError("make_lagged: replicate of length " + std::to_string(len) +
                             " cannot support lag " + std::to_string(max_lag));
        }
        n += len - max_lag;
    }

    LaggedDataset out;
    out.num_series = p;
    out.max_lag = max_lag;
    out.inputs = Matrix(n, max_lag * p);
    out.targets = Matrix(n, p);

    std::size_t row = 0, offset = 0;
    for (std::size_t len : panel.replicate_lengths) {
        for (std::size_t t = max_lag; t < len; ++t) {
            for (std::size_t k = 1; k <= max_lag; ++k) {
                const double* src = panel.data.row_ptr(offset + t - k);
                double* dst = out.inputs.v.data() + row * max_lag * p + (k - 1) * p;
                std::copy(src, src + p, dst);
            }
            const double* tgt = panel.data.row_ptr(offset + t);
            std::copy(tgt, tgt + p, out.targets.v.data() + row * p);
            ++row;
        }
        offset += len;
    }
    return out;
}

std::pair<LaggedDataset, ScalerStats> standard_scale(const LaggedDataset& dataset,
                                                     std::span<const std::size_t> train_rows) {
    if (train_rows.empty()) throw UsageError("standard_scale: empty training subset");

    const std::size_t width = dataset.inputs.cols;
    const std::size_t p = dataset.targets.cols;
    ScalerStats stats;
    stats.input_mean.assign(width, 0.0);
    stats.input_sd.assign(width, 0.0);
    stats.target_mean.assign(p, 0.0);
    stats.target_sd.assign(p, 0.0);

    const double n = static_cast<double>(train_rows.size());
    auto fit = [&](const Matrix& m, std::vector<double>& mean, std::vector<double>& sd) {
        for (std::size_t r : train_rows) {
            for (std::size_t c = 0; c < m.cols; ++c) mean[c] += m.at(r, c);
        }
        for (double& v : mean) v /= n;
        if (train_rows.size() > 1) {
            for (std::size_t r : train_rows) {
                for (std::size_t c = 0; c < m.cols; ++c) {
                    const double d = m.at(r, c) - mean[c];
                    sd[c] += d * d;
                }
            }
            for (double& v : sd) v = std::sqrt(v / (n - 1.0));
        }
    };
    fit(dataset.inputs, stats.input_mean, stats.input_sd);
    fit(dataset.targets, stats.target_mean, stats.target_sd);

    LaggedDataset scaled = dataset;
    auto apply = [](Matrix& m, const std::vector<double>& mean, const std::vector<double>& sd) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            if (sd[c] < kScaleSdFloor) continue;  // degenerate coordinate passes through
            for (std::size_t r = 0; r < m.rows; ++r) {
                m.at(r, c) = (m.at(r, c) - mean[c]) / sd[c];
            }
        }
    };
    apply(scaled.inputs, stats.input_mean, stats.input_sd);
    apply(scaled.targets, stats.target_mean, stats.target_sd);
    return {std::move(scaled), std::move(stats)};
}

std::vector<WindowSlice> sliding_windows(const TimeSeriesPanel& panel, std::size_t window_len,
                                         double overlap_fraction, double sampling_rate_hz) {
    if (window_len == 0 || window_len > panel.length()) {
        throw UsageError("sliding_windows: window length " + std::to_string(window_len) +
                         " exceeds panel length " + std::to_string(panel.length()));
    }
    if (overlap_fraction < 0.0 || overlap_fraction >= 1.0) {
        throw UsageError("sliding_windows: overlap must lie in [0, 1)");
    }
    if (panel.replicate_lengths.size() != 1) {
        throw UsageError("sliding_windows: panel must be unreplicated");
    }
    const auto stride = static_cast<std::size_t>(std::llround(
        static_cast<double>(window_len) * (1.0 - overlap_fraction)));
    if (stride == 0) throw UsageError("sliding_windows: stride rounds to zero");

    std::vector<WindowSlice> out;
    const std::size_t p = panel.num_series();
    for (std::size_t start = 0; start + window_len <= panel.length(); start += stride) {
        WindowSlice slice;
        slice.start_sample = start;
        slice.start_seconds = sampling_rate_hz > 0.0
                                  ? static_cast<double>(start) / sampling_rate_hz
                                  : 0.0;
        slice.panel.series_names = panel.series_names;
        slice.panel.data = Matrix(window_len, p);
        std::copy(panel.data.row_ptr(start), panel.data.row_ptr(start) + window_len * p,
                  slice.panel.data.v.begin());
        slice.panel.replicate_lengths = {window_len};
        out.push_back(std::move(slice));
    }
    return out;
}

SplitIndices train_val_split(std::size_t n, double val_fraction, std::uint64_t seed) {
    if (val_fraction <= 0.0 || val_fraction >= 1.0) {
        throw UsageError("train_val_split: val_fraction must lie in (0, 1)");
    }
    const auto n_val = static_cast<std::size_t>(
        std::ceil(static_cast<double>(n) * val_fraction));
    if (n_val == 0 || n_val >= n) {
        throw UsageError("train_val_split: split would leave an empty side (n = " +
                         std::to_string(n) + ")");
    }
    RngStream rng(seed, "split");
    std::vector<std::size_t> perm = rng.permutation(n);
    SplitIndices out;
    out.val.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.train.begin(), out.train.end());
    return out;
}

SplitIndices chronological_split(std::size_t n, double train_fraction) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw UsageError("chronological_split: train_fraction must lie in (0, 1)");
    }
    const auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * train_fraction));
    if (n_train == 0 || n_train >= n) {
        throw UsageError("chronological_split: split would leave an empty side");
    }
    SplitIndices out;
    for (std::size_t i = 0; i < n_train; ++i) out.train.push_back(i);
    for (std::size_t i = n_train; i < n; ++i) out.val.push_back(i);
    return out;
}

} // namespace granger
