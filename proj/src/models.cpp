#include "granger/models.hpp"

#include "granger/errors.hpp"

#include <cmath>

namespace granger {

using ad::Tape;
using ad::Tensor;
using ad::Var;

bool is_component_wise(ModelKind k) {
    return k == ModelKind::cmlp || k == ModelKind::cmlp_wf || k == ModelKind::clstm ||
           k == ModelKind::clstm_wf;
}

bool is_recurrent(ModelKind k) { return k == ModelKind::clstm || k == ModelKind::clstm_wf; }

bool has_decoupling_factors(ModelKind k) {
    return k == ModelKind::cmlp_wf || k == ModelKind::clstm_wf;
}

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::var: return "VAR";
        case ModelKind::lekvar: return "LeKVAR";
        case ModelKind::cmlp: return "cMLP";
        case ModelKind::cmlp_wf: return "cMLPwF";
        case ModelKind::clstm: return "cLSTM";
        case ModelKind::clstm_wf: return "cLSTMwF";
    }
    return "?";
}

std::pair<ModelKind, bool> parse_model_spec(const std::string& spec) {
    std::string base = spec;
    bool small = false;
    if (base.size() > 2 && base.substr(base.size() - 2) == "_s") {
        small = true;
        base = base.substr(0, base.size() - 2);
    }
    for (ModelKind k : {ModelKind::var, ModelKind::lekvar, ModelKind::cmlp, ModelKind::cmlp_wf,
                        ModelKind::clstm, ModelKind::clstm_wf}) {
        if (to_string(k) == base) return {k, small};
    }
    throw ConfigError("unknown model kind: " + spec);
}

std::string ModelConfig::display_name() const {
    return to_string(kind) + (small ? "_s" : "");
}

void ModelConfig::validate() const {
    std::string problems;
    if (num_series < 1) problems += "num_series must be >= 1; ";
    if (max_lag < 1) problems += "max_lag must be >= 1; ";
    for (std::size_t h : hidden_layers) {
        if (h == 0) {
            problems += "hidden widths must be positive; ";
            break;
        }
    }
    if (is_component_wise(kind)) {
        if (!target_index) {
            problems += "component-wise model needs a target_index; ";
        } else if (*target_index >= num_series) {
            problems += "target_index out of range; ";
        }
        if (hidden_layers.empty()) problems += "component-wise model needs hidden layers; ";
    } else {
        if (target_index) problems += "target_index only applies to component-wise kinds; ";
        if (kind == ModelKind::lekvar && hidden_layers.size() != 1) {
            problems += "LeKVAR kernel has exactly one hidden layer; ";
        }
        if (kind == ModelKind::var && !hidden_layers.empty()) {
            problems += "VAR has no hidden layers; ";
        }
    }
    if (!problems.empty()) throw ConfigError("ModelConfig: " + problems);
}

ModelConfig ModelConfig::make(ModelKind kind, std::size_t p, std::size_t K, bool small,
                              std::optional<std::size_t> target) {
    ModelConfig cfg;
    cfg.kind = kind;
    cfg.num_series = p;
    cfg.max_lag = K;
    cfg.small = small;
    cfg.target_index = target;
    switch (kind) {
        case ModelKind::var: break;
        case ModelKind::lekvar: cfg.hidden_layers = {10}; break;
        default: cfg.hidden_layers = small ? std::vector<std::size_t>{10}
                                           : std::vector<std::size_t>{10, 10};
    }
    return cfg;
}

std::vector<double> normalized_group(std::span<const double> w) {
    double ss = 0.0;
    for (double x : w) ss += x * x;
    double norm = std::sqrt(ss);
    std::vector<double> out(w.begin(), w.end());
    if (norm > kGroupNormEpsilon) {
        for (double& x : out) x /= norm;
    }
    return out;
}

namespace {

Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, RngStream& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
    for (double& v : t.values) v = rng.uniform(-a, a);
    t.requires_grad = true;
    return t;
}

Tensor ones_row(std::size_t n) {
    Tensor t = Tensor::full({1, n}, 1.0);
    t.requires_grad = true;
    return t;
}

void check_inputs(const Tape& tape, Var inputs, std::size_t width) {
    const Tensor& t = tape.value(inputs);
    if (!t.is_matrix() || t.shape[1] != width) {
        throw DimensionError("model forward: expected [N x " + std::to_string(width) +
                             "] inputs, got " + t.shape_string());
    }
}

/// Rebuilds a [R x C] weight matrix with each row divided by its own L2
/// norm (rows with norm below the epsilon guard pass through unchanged).
Var normalized_row_matrix(Tape& tape, Var weights, std::size_t rows, std::size_t cols) {
    std::vector<Var> parts;
    parts.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        Var row = tape.slice(weights, r * cols, cols);
        Var norm = tape.group_norm(row);
        parts.push_back(tape.scalar_value(norm) > kGroupNormEpsilon ? tape.div(row, norm) : row);
    }
    return tape.reshape(tape.concat(parts), {rows, cols});
}

} // namespace

std::vector<ad::Tensor*> Model::parameter_tensors() {
    std::vector<Tensor*> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::vector<std::vector<double>> Model::snapshot_values() {
    std::vector<std::vector<double>> snap;
    for (Tensor* t : parameter_tensors()) snap.push_back(t->values);
    return snap;
}

void Model::restore_values(const std::vector<std::vector<double>>& snap) {
    auto params = parameter_tensors();
    if (snap.size() != params.size()) throw UsageError("snapshot does not match parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (snap[i].size() != params[i]->values.size()) {
            throw UsageError("snapshot tensor size mismatch");
        }
        params[i]->values = snap[i];
    }
}

std::vector<double> Model::predict(const Matrix& window) {
    if (window.rows != cfg_.max_lag || window.cols != cfg_.num_series) {
        throw DimensionError("predict: window must be [K x p] = [" + std::to_string(cfg_.max_lag) +
                             " x " + std::to_string(cfg_.num_series) + "]");
    }
    Tape tape;
    Var x = tape.constant(Tensor::matrix(1, window.numel(), window.v));
    Var y = forward(tape, x);
    return tape.value(y).values;
}

// ---------------------------------------------------------------------------
// VAR
// ---------------------------------------------------------------------------

VarModel::VarModel(ModelConfig cfg, RngStream& init) : Model(std::move(cfg)) {
    cfg_.validate();
    const std::size_t p = cfg_.num_series, width = cfg_.input_width();
    weights_ = uniform_init({width, p}, width, init);
    bias_ = uniform_init({1, p}, width, init);
}

Var VarModel::forward(Tape& tape, Var inputs) {
    check_inputs(tape, inputs, cfg_.input_width());
    return tape.add(tape.matmul(inputs, tape.leaf(weights_)), tape.leaf(bias_));
}

std::vector<PenaltyGroup> VarModel::penalized_groups(Tape& tape) {
    const std::size_t p = cfg_.num_series, lags = cfg_.max_lag;
    Var w = tape.leaf(weights_);
    std::vector<PenaltyGroup> groups;
    groups.reserve(p * p);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            PenaltyGroup g;
            g.name = "A[" + std::to_string(i) + "][" + std::to_string(j) + "]";
            g.lag_parts.reserve(lags);
            for (std::size_t k = 0; k < lags; ++k) {
                g.lag_parts.push_back(tape.slice(w, (k * p + j) * p + i, 1));
            }
            g.whole = tape.concat(g.lag_parts);
            groups.push_back(std::move(g));
        }
    }
    return groups;
}

std::vector<std::pair<std::string, Tensor*>> VarModel::named_parameters() {
    return {{"A", &weights_}, {"bias", &bias_}};
}

double VarModel::coefficient(std::size_t k, std::size_t i, std::size_t j) const {
    const std::size_t p = cfg_.num_series;
    return weights_.values[((k - 1) * p + j) * p + i];
}

void VarModel::set_coefficient(std::size_t k, std::size_t i, std::size_t j, double value) {
    const std::size_t p = cfg_.num_series;
    weights_.values[((k - 1) * p + j) * p + i] = value;
}

Matrix VarModel::gc_series_scores() const {
    const std::size_t p = cfg_.num_series, lags = cfg_.max_lag;
    Matrix scores(p, p);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            double ss = 0.0;
            for (std::size_t k = 1; k <= lags; ++k) {
                double a = coefficient(k, i, j);
                ss += a * a;
            }
            scores.at(i, j) = std::sqrt(ss);
        }
    }
    return scores;
}

std::optional<Matrix> VarModel::gc_lag_scores() const {
    const std::size_t p = cfg_.num_series, lags = cfg_.max_lag;
    Matrix scores(p, lags);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 1; k <= lags; ++k) {
            double ss = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                double a = coefficient(k, i, j);
                ss += a * a;
            }
            scores.at(i, k - 1) = std::sqrt(ss);
        }
    }
    return scores;
}

// ---------------------------------------------------------------------------
// LeKVAR
// ---------------------------------------------------------------------------

LekvarModel::LekvarModel(ModelConfig cfg, RngStream& init)
    : VarModel(
          [&cfg] {
              ModelConfig base = cfg;
              base.kind = ModelKind::var;
              base.hidden_layers.clear();
              return base;
          }(),
          init) {
    cfg_ = std::move(cfg);
    cfg_.validate();
    const std::size_t h = cfg_.hidden_layers.at(0);
    // kernel init: sign-paired units give a monotone map with near-zero mean
    // output; a kernel that starts flat tends to stay flat, with A inflating
    // against it until the group norms stop ranking edges
    k_w1_ = uniform_init({1, h}, 1, init);
    k_b1_ = uniform_init({1, h}, 1, init);
    k_w2_ = uniform_init({h, 1}, h, init);
    k_b2_ = uniform_init({1, 1}, h, init);
    for (std::size_t i = 0; i < h; ++i) {
        const double s = i < h / 2 ? 1.0 : -1.0;
        k_w1_.values[i] = s * (0.25 + 0.75 * std::abs(k_w1_.values[i]));
        k_w2_.values[i] = s * std::abs(k_w2_.values[i]);
    }
}

Var LekvarModel::kernel_apply(Tape& tape, Var x) {
    const std::vector<std::size_t> shape = tape.value(x).shape;
    const std::size_t n = tape.value(x).numel();
    Var flat = tape.reshape(x, {n, 1});
    Var hidden = tape.sigmoid(tape.add(tape.matmul(flat, tape.leaf(k_w1_)), tape.leaf(k_b1_)));
    Var w2 = tape.leaf(k_w2_);
    if (cfg_.normalize_penalized_groups) {
        Var norm = tape.group_norm(w2);
        if (tape.scalar_value(norm) > kGroupNormEpsilon) w2 = tape.div(w2, norm);
    }
    Var out = tape.add(tape.matmul(hidden, w2), tape.leaf(k_b2_));
    return tape.reshape(out, shape);
}

Var LekvarModel::forward(Tape& tape, Var inputs) {
    check_inputs(tape, inputs, cfg_.input_width());
    Var transformed = kernel_identity_ ? inputs : kernel_apply(tape, inputs);
    return tape.add(tape.matmul(transformed, tape.leaf(weights_)), tape.leaf(bias_));
}

std::vector<std::pair<std::string, Tensor*>> LekvarModel::named_parameters() {
    return {{"A", &weights_},          {"bias", &bias_},        {"kernel.w1", &k_w1_},
            {"kernel.b1", &k_b1_},     {"kernel.w2", &k_w2_},   {"kernel.b2", &k_b2_}};
}

void LekvarModel::project_after_step() {
    if (!cfg_.normalize_penalized_groups || kernel_identity_) return;
    k_w2_.values = normalized_group(k_w2_.values);
}

double LekvarModel::kernel_value(double x) const {
    if (kernel_identity_) return x;
    const std::size_t h = k_w1_.numel();
    std::vector<double> w2 = cfg_.normalize_penalized_groups ? normalized_group(k_w2_.values)
                                                             : k_w2_.values;
    double acc = k_b2_.values[0];
    for (std::size_t i = 0; i < h; ++i) {
        double hidden = 1.0 / (1.0 + std::exp(-(k_w1_.values[i] * x + k_b1_.values[i])));
        acc += w2[i] * hidden;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Component-wise MLP
// ---------------------------------------------------------------------------

ComponentMlp::ComponentMlp(ModelConfig cfg, RngStream& init) : Model(std::move(cfg)) {
    cfg_.validate();
    if (is_recurrent(cfg_.kind) || !is_component_wise(cfg_.kind)) {
        throw ConfigError("ComponentMlp built with kind " + to_string(cfg_.kind));
    }
    std::size_t in = cfg_.input_width();
    for (std::size_t h : cfg_.hidden_layers) {
        layers_.push_back({uniform_init({in, h}, in, init), uniform_init({1, h}, in, init)});
        in = h;
    }
    out_ = {uniform_init({in, 1}, in, init), uniform_init({1, 1}, in, init)};
    if (has_decoupling_factors(cfg_.kind)) {
        v_ = ones_row(cfg_.num_series);
        q_ = ones_row(cfg_.max_lag);
    }
}

Var ComponentMlp::forward(Tape& tape, Var inputs) {
    check_inputs(tape, inputs, cfg_.input_width());
    const bool factors = has_decoupling_factors(cfg_.kind);
    Var x = inputs;
    if (factors) {
        // scale column (k-1)*p + j by q_k * v_j
        Var outer = tape.matmul(tape.reshape(tape.leaf(q_), {cfg_.max_lag, 1}),
                                tape.leaf(v_));
        x = tape.mul(x, tape.reshape(outer, {1, cfg_.input_width()}));
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Var w = tape.leaf(layers_[l].w);
        if (l == 0 && factors && cfg_.normalize_penalized_groups) {
            w = normalized_row_matrix(tape, w, cfg_.input_width(), cfg_.hidden_layers[0]);
        }
        x = tape.sigmoid(tape.add(tape.matmul(x, w), tape.leaf(layers_[l].b)));
    }
    return tape.add(tape.matmul(x, tape.leaf(out_.w)), tape.leaf(out_.b));
}

std::vector<PenaltyGroup> ComponentMlp::penalized_groups(Tape& tape) {
    std::vector<PenaltyGroup> groups;
    const std::size_t p = cfg_.num_series, lags = cfg_.max_lag;
    if (has_decoupling_factors(cfg_.kind)) {
        Var v = tape.leaf(v_), q = tape.leaf(q_);
        for (std::size_t j = 0; j < p; ++j) {
            groups.push_back({"v[" + std::to_string(j) + "]", GroupRole::factor_v,
                              tape.slice(v, j, 1), {}});
        }
        for (std::size_t k = 0; k < lags; ++k) {
            groups.push_back({"q[" + std::to_string(k + 1) + "]", GroupRole::factor_q,
                              tape.slice(q, k, 1), {}});
        }
        return groups;
    }
    const std::size_t h1 = cfg_.hidden_layers[0];
    Var w = tape.leaf(layers_[0].w);
    groups.reserve(p);
    for (std::size_t j = 0; j < p; ++j) {
        PenaltyGroup g;
        g.name = "W[" + std::to_string(j) + "]";
        g.lag_parts.reserve(lags);
        for (std::size_t k = 0; k < lags; ++k) {
            g.lag_parts.push_back(tape.slice(w, (k * p + j) * h1, h1));
        }
        g.whole = tape.concat(g.lag_parts);
        groups.push_back(std::move(g));
    }
    return groups;
}

std::vector<std::pair<std::string, Tensor*>> ComponentMlp::named_parameters() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        out.emplace_back("layer" + std::to_string(l) + ".w", &layers_[l].w);
        out.emplace_back("layer" + std::to_string(l) + ".b", &layers_[l].b);
    }
    out.emplace_back("out.w", &out_.w);
    out.emplace_back("out.b", &out_.b);
    if (has_decoupling_factors(cfg_.kind)) {
        out.emplace_back("v", &v_);
        out.emplace_back("q", &q_);
    }
    return out;
}

Matrix ComponentMlp::gc_series_scores() const {
    const std::size_t p = cfg_.num_series, lags = cfg_.max_lag;
    Matrix row(1, p);
    if (has_decoupling_factors(cfg_.kind)) {
        for (std::size_t j = 0; j < p; ++j) row.at(0, j) = std::abs(v_.values[j]);
        return row;
    }
    const std::size_t h1 = cfg_.hidden_layers[0];
    for (std::size_t j = 0; j < p; ++j) {
        double ss = 0.0;
        for (std::size_t k = 0; k < lags; ++k) {
            const double* w = layers_[0].w.values.data() + (k * p + j) * h1;
            for (std::size_t h = 0; h < h1; ++h) ss += w[h] * w[h];
        }
        row.at(0, j) = std::sqrt(ss);
    }
    return row;
}

std::optional<Matrix> ComponentMlp::gc_lag_scores() const {
    const std::size_t p = cfg_.num_series, lags = cfg_.max_lag;
    Matrix row(1, lags);
    if (has_decoupling_factors(cfg_.kind)) {
        for (std::size_t k = 0; k < lags; ++k) row.at(0, k) = std::abs(q_.values[k]);
        return row;
    }
    const std::size_t h1 = cfg_.hidden_layers[0];
    for (std::size_t k = 0; k < lags; ++k) {
        double ss = 0.0;
        const double* w = layers_[0].w.values.data() + k * p * h1;
        for (std::size_t m = 0; m < p * h1; ++m) ss += w[m] * w[m];
        row.at(0, k) = std::sqrt(ss);
    }
    return row;
}

// ---------------------------------------------------------------------------
// Component-wise LSTM
// ---------------------------------------------------------------------------

ComponentLstm::ComponentLstm(ModelConfig cfg, RngStream& init) : Model(std::move(cfg)) {
    cfg_.validate();
    if (!is_recurrent(cfg_.kind)) {
        throw ConfigError("ComponentLstm built with kind " + to_string(cfg_.kind));
    }
    std::size_t in = cfg_.num_series;
    for (std::size_t h : cfg_.hidden_layers) {
        Cell cell;
        cell.wx = uniform_init({in, 4 * h}, in, init);
        cell.wh = uniform_init({h, 4 * h}, h, init);
        cell.b = uniform_init({1, 4 * h}, in, init);
        cell.hidden = h;
        cells_.push_back(std::move(cell));
        in = h;
    }
    out_w_ = uniform_init({in, 1}, in, init);
    out_b_ = uniform_init({1, 1}, in, init);
    if (has_decoupling_factors(cfg_.kind)) {
        v_ = ones_row(cfg_.num_series);
        q_ = ones_row(cfg_.max_lag);
    }
}

Var ComponentLstm::forward(Tape& tape, Var inputs) {
    check_inputs(tape, inputs, cfg_.input_width());
    const std::size_t n = tape.value(inputs).shape[0];
    const std::size_t p = cfg_.num_series, lags = cfg_.max_lag;
    const bool factors = has_decoupling_factors(cfg_.kind);

    Var wx0 = tape.leaf(cells_[0].wx);
    if (factors && cfg_.normalize_penalized_groups) {
        wx0 = normalized_row_matrix(tape, wx0, p, 4 * cells_[0].hidden);
    }

    std::vector<Var> h, c;
    for (const Cell& cell : cells_) {
        h.push_back(tape.constant(Tensor::zeros({n, cell.hidden})));
        c.push_back(tape.constant(Tensor::zeros({n, cell.hidden})));
    }

    // window row k-1 holds lag k; the sequence runs oldest-first (k = K..1)
    for (std::size_t s = 0; s < lags; ++s) {
        const std::size_t k = lags - s;
        Var x = tape.slice_cols(inputs, (k - 1) * p, p);
        if (factors) {
            Var scale = tape.mul(tape.leaf(v_), tape.slice(tape.leaf(q_), k - 1, 1));
            x = tape.mul(x, scale);
        }
        for (std::size_t l = 0; l < cells_.size(); ++l) {
            const Cell& cell = cells_[l];
            const std::size_t hid = cell.hidden;
            Var wx = l == 0 ? wx0 : tape.leaf(cells_[l].wx);
            Var gates = tape.add(tape.add(tape.matmul(x, wx), tape.matmul(h[l], tape.leaf(cells_[l].wh))),
                                 tape.leaf(cells_[l].b));
            Var ig = tape.sigmoid(tape.slice_cols(gates, 0, hid));
            Var fg = tape.sigmoid(tape.slice_cols(gates, hid, hid));
            Var gg = tape.tanh(tape.slice_cols(gates, 2 * hid, hid));
            Var og = tape.sigmoid(tape.slice_cols(gates, 3 * hid, hid));
            c[l] = tape.add(tape.mul(fg, c[l]), tape.mul(ig, gg));
            h[l] = tape.mul(og, tape.tanh(c[l]));
            x = h[l];
        }
    }
    return tape.add(tape.matmul(h.back(), tape.leaf(out_w_)), tape.leaf(out_b_));
}

std::vector<PenaltyGroup> ComponentLstm::penalized_groups(Tape& tape) {
    std::vector<PenaltyGroup> groups;
    const std::size_t p = cfg_.num_series, lags = cfg_.max_lag;
    if (has_decoupling_factors(cfg_.kind)) {
        Var v = tape.leaf(v_), q = tape.leaf(q_);
        for (std::size_t j = 0; j < p; ++j) {
            groups.push_back({"v[" + std::to_string(j) + "]", GroupRole::factor_v,
                              tape.slice(v, j, 1), {}});
        }
        for (std::size_t k = 0; k < lags; ++k) {
            groups.push_back({"q[" + std::to_string(k + 1) + "]", GroupRole::factor_q,
                              tape.slice(q, k, 1), {}});
        }
        return groups;
    }
    // input projections of all four gates for series j; weights are shared
    // across lags, so there is no per-lag partition
    const std::size_t row = 4 * cells_[0].hidden;
    Var w = tape.leaf(cells_[0].wx);
    groups.reserve(p);
    for (std::size_t j = 0; j < p; ++j) {
        groups.push_back({"W[" + std::to_string(j) + "]", GroupRole::series,
                          tape.slice(w, j * row, row), {}});
    }
    return groups;
}

std::vector<std::pair<std::string, Tensor*>> ComponentLstm::named_parameters() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (std::size_t l = 0; l < cells_.size(); ++l) {
        const std::string prefix = "lstm" + std::to_string(l);
        out.emplace_back(prefix + ".wx", &cells_[l].wx);
        out.emplace_back(prefix + ".wh", &cells_[l].wh);
        out.emplace_back(prefix + ".b", &cells_[l].b);
    }
    out.emplace_back("out.w", &out_w_);
    out.emplace_back("out.b", &out_b_);
    if (has_decoupling_factors(cfg_.kind)) {
        out.emplace_back("v", &v_);
        out.emplace_back("q", &q_);
    }
    return out;
}

Matrix ComponentLstm::gc_series_scores() const {
    const std::size_t p = cfg_.num_series;
    Matrix row(1, p);
    if (has_decoupling_factors(cfg_.kind)) {
        for (std::size_t j = 0; j < p; ++j) row.at(0, j) = std::abs(v_.values[j]);
        return row;
    }
    const std::size_t width = 4 * cells_[0].hidden;
    for (std::size_t j = 0; j < p; ++j) {
        double ss = 0.0;
        const double* w = cells_[0].wx.values.data() + j * width;
        for (std::size_t m = 0; m < width; ++m) ss += w[m] * w[m];
        row.at(0, j) = std::sqrt(ss);
    }
    return row;
}

std::optional<Matrix> ComponentLstm::gc_lag_scores() const {
    if (!has_decoupling_factors(cfg_.kind)) return std::nullopt;
    Matrix row(1, cfg_.max_lag);
    for (std::size_t k = 0; k < cfg_.max_lag; ++k) row.at(0, k) = std::abs(q_.values[k]);
    return row;
}

// ---------------------------------------------------------------------------
// Factory and checkpointing
// ---------------------------------------------------------------------------

std::unique_ptr<Model> make_model(const ModelConfig& cfg, RngStream& init) {
    cfg.validate();
    switch (cfg.kind) {
        case ModelKind::var: return std::make_unique<VarModel>(cfg, init);
        case ModelKind::lekvar: return std::make_unique<LekvarModel>(cfg, init);
        case ModelKind::cmlp:
        case ModelKind::cmlp_wf: return std::make_unique<ComponentMlp>(cfg, init);
        case ModelKind::clstm:
        case ModelKind::clstm_wf: return std::make_unique<ComponentLstm>(cfg, init);
    }
    throw ConfigError("make_model: unknown kind");
}

nlohmann::json model_to_json(Model& model, std::uint64_t seed) {
    const ModelConfig& cfg = model.config();
    nlohmann::json j;
    j["config"] = {
        {"kind", to_string(cfg.kind)},
        {"small", cfg.small},
        {"num_series", cfg.num_series},
        {"max_lag", cfg.max_lag},
        {"hidden_layers", cfg.hidden_layers},
        {"normalize_penalized_groups", cfg.normalize_penalized_groups},
    };
    if (cfg.target_index) j["config"]["target_index"] = *cfg.target_index;
    j["seed"] = seed;
    nlohmann::json params = nlohmann::json::object();
    for (auto& [name, t] : model.named_parameters()) params[name] = t->values;
    j["params"] = std::move(params);
    return j;
}

std::unique_ptr<Model> model_from_json(const nlohmann::json& j) {
    const auto& jc = j.at("config");
    ModelConfig cfg;
    cfg.kind = parse_model_spec(jc.at("kind").get<std::string>()).first;
    cfg.small = jc.value("small", false);
    cfg.num_series = jc.at("num_series").get<std::size_t>();
    cfg.max_lag = jc.at("max_lag").get<std::size_t>();
    cfg.hidden_layers = jc.at("hidden_layers").get<std::vector<std::size_t>>();
    cfg.normalize_penalized_groups = jc.value("normalize_penalized_groups", true);
    if (jc.contains("target_index")) cfg.target_index = jc.at("target_index").get<std::size_t>();

    RngStream scratch(0, "checkpoint");
    auto model = make_model(cfg, scratch);
    for (auto& [name, t] : model->named_parameters()) {
        const auto& arr = j.at("params").at(name);
        if (arr.size() != t->values.size()) {
            throw FormatError("checkpoint parameter '" + name + "' has " +
                              std::to_string(arr.size()) + " values, expected " +
                              std::to_string(t->values.size()));
        }
        t->values = arr.get<std::vector<double>>();
    }
    return model;
}

} // namespace granger
