#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace clorl {

class Rng;

enum class Activation { ReLU };

/// Architecture of a fully-connected network: n_hidden_layers hidden
/// layers of hidden_dim with ReLU, then a linear output layer. With
/// n_hidden_layers = 0 the network is a single affine map and hidden_dim
/// is ignored.
struct MlpSpec {
    int input_dim = 1;
    int hidden_dim = 256;
    int n_hidden_layers = 2;
    int output_dim = 1;
    Activation activation = Activation::ReLU;
    double dropout_rate = 0.0;  // applied to hidden activations in Train mode

    int n_affine_layers() const { return n_hidden_layers + 1; }
    int layer_in(int l) const { return l == 0 ? input_dim : hidden_dim; }
    int layer_out(int l) const { return l == n_hidden_layers ? output_dim : hidden_dim; }
    std::size_t param_count() const;
    void validate() const;
};

/// Per-layer weights and biases. W[l] is (in x out) so a batch row-matrix
/// X maps forward as X * W + b.
struct ParamSet {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    std::size_t count() const;
    bool same_shape(const ParamSet& other) const;
    bool all_finite() const;

    void setZero();
    ParamSet zeros_like() const;

    /// Visit every coefficient in a fixed order (layer, weights then bias).
    template <typename F>
    void for_each(F&& f) {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            double* w = weights[l].data();
            for (Eigen::Index i = 0; i < weights[l].size(); ++i) f(w[i]);
            double* b = biases[l].data();
            for (Eigen::Index i = 0; i < biases[l].size(); ++i) f(b[i]);
        }
    }
};

ParamSet init_params(const MlpSpec& spec, Rng& rng);

enum class ForwardMode { Train, Eval };

/// Activations retained by a forward pass for the matching backward pass.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> post;          // post[0] = input, post[l+1] = layer l output
    std::vector<Eigen::MatrixXd> dropout_mask;  // scaled inverted-dropout masks, train only
    bool train = false;
};

/// Batched forward pass; rows are samples. In Train mode inverted dropout
/// is applied after each hidden ReLU using draws from rng.
Eigen::MatrixXd forward_batch(const ParamSet& params, const MlpSpec& spec,
                              const Eigen::MatrixXd& input, ForwardMode mode,
                              Rng* rng = nullptr, ForwardCache* cache = nullptr);

/// Single-sample convenience wrapper.
Eigen::VectorXd forward(const ParamSet& params, const MlpSpec& spec,
                        const Eigen::VectorXd& input, ForwardMode mode = ForwardMode::Eval,
                        Rng* rng = nullptr);

struct BackwardResult {
    ParamSet param_grads;
    Eigen::MatrixXd input_grads;
};

/// Reverse-mode gradients of sum(upstream .* output) with respect to every
/// parameter and the input, for the pass recorded in cache.
BackwardResult backward_batch(const ParamSet& params, const MlpSpec& spec,
                              const ForwardCache& cache, const Eigen::MatrixXd& upstream);

BackwardResult backward(const ParamSet& params, const MlpSpec& spec,
                        const Eigen::VectorXd& input, const Eigen::VectorXd& upstream_grad);

enum class LrSchedule { Constant, CosineDecay };

struct AdamState {
    ParamSet m;  // first moments
    ParamSet v;  // second moments
    std::int64_t step = 0;
    double base_lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    LrSchedule schedule = LrSchedule::Constant;
    std::int64_t total_steps = 0;  // CosineDecay horizon

    /// Learning rate the next adam_step call will use.
    double current_lr() const;
};

AdamState make_adam(const ParamSet& params, double base_lr,
                    LrSchedule schedule = LrSchedule::Constant, std::int64_t total_steps = 0);

/// One bias-corrected Adam update, in place. Throws on non-finite grads.
void adam_step(AdamState& state, ParamSet& params, const ParamSet& grads);

/// target <- tau * online + (1 - tau) * target, elementwise.
void soft_update(ParamSet& target, const ParamSet& online, double tau);

/// Checkpoint file: u32-LE length-prefixed JSON header (spec, step,
/// schedule) followed by little-endian float32 parameter blocks in layer
/// order (weights then bias per layer).
struct Checkpoint {
    MlpSpec spec;
    ParamSet params;
    std::int64_t step = 0;
    LrSchedule schedule = LrSchedule::Constant;
    std::int64_t total_steps = 0;
    double base_lr = 0.0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace clorl
