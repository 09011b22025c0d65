#ifndef GRANGER_MODELS_HPP
#define GRANGER_MODELS_HPP

#include "granger/matrix.hpp"
#include "granger/penalties.hpp"
#include "granger/rng.hpp"
#include "granger/tape.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace granger {

enum class ModelKind { var, lekvar, cmlp, cmlp_wf, clstm, clstm_wf };

bool is_component_wise(ModelKind k);
bool is_recurrent(ModelKind k);
bool has_decoupling_factors(ModelKind k);
std::string to_string(ModelKind k);

struct ModelConfig {
    ModelKind kind = ModelKind::var;
    /// Target series for component-wise kinds; absent for VAR/LeKVAR.
    std::optional<std::size_t> target_index;
    std::size_t num_series = 1;  // p
    std::size_t max_lag = 1;     // K
    /// Hidden widths: MLP/LSTM layers, or the kernel's hidden layer for LeKVAR.
    std::vector<std::size_t> hidden_layers;
    bool small = false;
    /// Diagnostic switch for the degenerate-objective demonstration; always
    /// true in real runs. When false, penalized groups enter the forward
    /// pass unnormalized.
    bool normalize_penalized_groups = true;

    std::size_t input_width() const { return num_series * max_lag; }
    std::string display_name() const;  // kind plus "_s" for small variants
    void validate() const;

    static ModelConfig make(ModelKind kind, std::size_t p, std::size_t K, bool small = false,
                            std::optional<std::size_t> target = std::nullopt);
};

/// Parses a model spec string such as "cMLP", "cLSTMwF_s" into kind + small.
std::pair<ModelKind, bool> parse_model_spec(const std::string& spec);

/// Guard below which a group is left unnormalized (degenerate at sparsity).
inline constexpr double kGroupNormEpsilon = 1e-12;

/// w / ||w||_2 when the norm exceeds the epsilon guard, otherwise w itself.
std::vector<double> normalized_group(std::span<const double> w);

/// A differentiable predictive model with named penalized weight groups.
///
/// forward() consumes a batch of flattened lag windows, shape [N x K*p] with
/// column m = (k-1)*p + j holding x_{t-k,j} (lag 1 first). Joint kinds
/// return [N x p]; component-wise kinds return [N x 1] for their target.
class Model {
  public:
    explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {}
    virtual ~Model() = default;

    const ModelConfig& config() const { return cfg_; }
    std::size_t output_width() const {
        return is_component_wise(cfg_.kind) ? 1 : cfg_.num_series;
    }

    virtual ad::Var forward(ad::Tape& tape, ad::Var inputs) = 0;
    virtual std::vector<PenaltyGroup> penalized_groups(ad::Tape& tape) = 0;
    virtual std::vector<std::pair<std::string, ad::Tensor*>> named_parameters() = 0;

    /// Series-importance scores read from the trained weights: [p x p] for
    /// joint kinds, [1 x p] (the target's row) for component-wise kinds.
    virtual Matrix gc_series_scores() const = 0;
    /// Lag-importance scores ([p x K] or [1 x K]); absent for plain cLSTM.
    virtual std::optional<Matrix> gc_lag_scores() const = 0;

    /// Hook applied after each optimizer step (weight renormalization).
    virtual void project_after_step() {}

    std::vector<ad::Tensor*> parameter_tensors();
    std::vector<std::vector<double>> snapshot_values();
    void restore_values(const std::vector<std::vector<double>>& snap);

    /// Single-window prediction: window is [K x p], row k-1 = lag k.
    std::vector<double> predict(const Matrix& window);

  protected:
    ModelConfig cfg_;
};

std::unique_ptr<Model> make_model(const ModelConfig& cfg, RngStream& init);

/// Checkpoint round-trip; doubles survive bit-exactly.
nlohmann::json model_to_json(Model& model, std::uint64_t seed);
std::unique_ptr<Model> model_from_json(const nlohmann::json& j);

/// Linear VAR: x_t = sum_k A^(k) x_{t-k} + bias.
class VarModel : public Model {
  public:
    VarModel(ModelConfig cfg, RngStream& init);

    ad::Var forward(ad::Tape& tape, ad::Var inputs) override;
    std::vector<PenaltyGroup> penalized_groups(ad::Tape& tape) override;
    std::vector<std::pair<std::string, ad::Tensor*>> named_parameters() override;
    Matrix gc_series_scores() const override;
    std::optional<Matrix> gc_lag_scores() const override;

    /// A^(k)_{ij}; k is 1-based.
    double coefficient(std::size_t k, std::size_t i, std::size_t j) const;
    void set_coefficient(std::size_t k, std::size_t i, std::size_t j, double value);
    ad::Tensor& bias() { return bias_; }
    ad::Tensor& stacked_coefficients() { return weights_; }

  protected:
    // [K*p x p]: row (k-1)*p + j, column i  <=>  A^(k)_{ij}
    ad::Tensor weights_;
    ad::Tensor bias_;  // [1 x p]
};

/// VAR over inputs transformed by a learned shared scalar kernel.
class LekvarModel : public VarModel {
  public:
    LekvarModel(ModelConfig cfg, RngStream& init);

    ad::Var forward(ad::Tape& tape, ad::Var inputs) override;
    std::vector<std::pair<std::string, ad::Tensor*>> named_parameters() override;
    void project_after_step() override;

    /// Freezes the kernel to the identity map (reduction to plain VAR).
    void freeze_kernel_identity(bool on) { kernel_identity_ = on; }
    bool kernel_identity() const { return kernel_identity_; }

    /// The scalar kernel applied to one value (diagnostics).
    double kernel_value(double x) const;

  private:
    ad::Var kernel_apply(ad::Tape& tape, ad::Var x);

    ad::Tensor k_w1_;  // [1 x h]
    ad::Tensor k_b1_;  // [1 x h]
    ad::Tensor k_w2_;  // [h x 1]; used in unit-norm form, renormalized after steps
    ad::Tensor k_b2_;  // [1 x 1]
    bool kernel_identity_ = false;
};

/// Component-wise MLP for one target series, optionally with decoupling
/// factors v (series importance) and q (lag importance) scaling the inputs.
class ComponentMlp : public Model {
  public:
    ComponentMlp(ModelConfig cfg, RngStream& init);

    ad::Var forward(ad::Tape& tape, ad::Var inputs) override;
    std::vector<PenaltyGroup> penalized_groups(ad::Tape& tape) override;
    std::vector<std::pair<std::string, ad::Tensor*>> named_parameters() override;
    Matrix gc_series_scores() const override;
    std::optional<Matrix> gc_lag_scores() const override;

    ad::Tensor& first_layer() { return layers_[0].w; }
    ad::Tensor& factors_v() { return v_; }
    ad::Tensor& factors_q() { return q_; }

  private:
    struct Dense {
        ad::Tensor w, b;
    };
    std::vector<Dense> layers_;  // hidden layers; layers_[0].w is [K*p x H1]
    Dense out_;
    ad::Tensor v_;  // [1 x p] (wF only)
    ad::Tensor q_;  // [1 x K]
};

/// Component-wise LSTM over the K-lag window consumed oldest-first.
class ComponentLstm : public Model {
  public:
    ComponentLstm(ModelConfig cfg, RngStream& init);

    ad::Var forward(ad::Tape& tape, ad::Var inputs) override;
    std::vector<PenaltyGroup> penalized_groups(ad::Tape& tape) override;
    std::vector<std::pair<std::string, ad::Tensor*>> named_parameters() override;
    Matrix gc_series_scores() const override;
    std::optional<Matrix> gc_lag_scores() const override;

    ad::Tensor& input_weights() { return cells_[0].wx; }
    ad::Tensor& factors_v() { return v_; }
    ad::Tensor& factors_q() { return q_; }

  private:
    struct Cell {
        // gate blocks ordered [input | forget | cell | output] along columns
        ad::Tensor wx;  // [in x 4H]
        ad::Tensor wh;  // [H x 4H]
        ad::Tensor b;   // [1 x 4H]
        std::size_t hidden = 0;
    };
    std::vector<Cell> cells_;
    ad::Tensor out_w_, out_b_;
    ad::Tensor v_, q_;
};

} // namespace granger

#endif
