#include "clorl/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "clorl/dataset.hpp"  // FormatError
#include "clorl/rng.hpp"

namespace clorl {

void MlpSpec::validate() const {
    if (input_dim <= 0 || output_dim <= 0)
        throw std::invalid_argument("MlpSpec: dims must be positive");
    if (n_hidden_layers < 0)
        throw std::invalid_argument("MlpSpec: negative hidden layer count");
    if (n_hidden_layers > 0 && hidden_dim <= 0)
        throw std::invalid_argument("MlpSpec: hidden_dim must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw std::invalid_argument("MlpSpec: dropout_rate must be in [0, 1)");
}

std::size_t MlpSpec::param_count() const {
    std::size_t total = 0;
    for (int l = 0; l < n_affine_layers(); ++l)
        total += static_cast<std::size_t>(layer_in(l)) * layer_out(l) + layer_out(l);
    return total;
}

std::size_t ParamSet::count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        total += static_cast<std::size_t>(weights[l].size()) + biases[l].size();
    return total;
}

bool ParamSet::same_shape(const ParamSet& other) const {
    if (weights.size() != other.weights.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != other.weights[l].rows()) return false;
        if (weights[l].cols() != other.weights[l].cols()) return false;
        if (biases[l].size() != other.biases[l].size()) return false;
    }
    return true;
}

bool ParamSet::all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l)
        if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    return true;
}

void ParamSet::setZero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
}

ParamSet ParamSet::zeros_like() const {
    ParamSet z;
    z.weights.reserve(weights.size());
    z.biases.reserve(biases.size());
    for (const auto& w : weights) z.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : biases) z.biases.push_back(Eigen::VectorXd::Zero(b.size()));
    return z;
}

ParamSet init_params(const MlpSpec& spec, Rng& rng) {
    spec.validate();
    ParamSet p;
    for (int l = 0; l < spec.n_affine_layers(); ++l) {
        int in = spec.layer_in(l), out = spec.layer_out(l);
        double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Eigen::MatrixXd w(in, out);
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                w(r, c) = rng.uniform(-bound, bound);
        p.weights.push_back(std::move(w));
        p.biases.push_back(Eigen::VectorXd::Zero(out));
    }
    return p;
}

Eigen::MatrixXd forward_batch(const ParamSet& params, const MlpSpec& spec,
                              const Eigen::MatrixXd& input, ForwardMode mode, Rng* rng,
                              ForwardCache* cache) {
    if (input.cols() != spec.input_dim)
        throw std::invalid_argument("forward: input dimension mismatch");
    const bool train = mode == ForwardMode::Train;
    const bool use_dropout = train && spec.dropout_rate > 0.0;
    if (use_dropout && rng == nullptr)
        throw std::invalid_argument("forward: Train mode with dropout needs an rng");

    if (cache) {
        cache->post.clear();
        cache->dropout_mask.clear();
        cache->train = train;
        cache->post.push_back(input);
    }

    Eigen::MatrixXd x = input;
    for (int l = 0; l < spec.n_affine_layers(); ++l) {
        Eigen::MatrixXd z = (x * params.weights[l]).rowwise() + params.biases[l].transpose();
        if (l < spec.n_hidden_layers) {
            z = z.cwiseMax(0.0);
            if (use_dropout) {
                const double keep = 1.0 - spec.dropout_rate;
                Eigen::MatrixXd mask(z.rows(), z.cols());
                for (Eigen::Index r = 0; r < mask.rows(); ++r)
                    for (Eigen::Index c = 0; c < mask.cols(); ++c)
                        mask(r, c) = rng->uniform() < keep ? 1.0 / keep : 0.0;
                z = z.cwiseProduct(mask);
                if (cache) cache->dropout_mask.push_back(std::move(mask));
            }
        }
        x = std::move(z);
        if (cache) cache->post.push_back(x);
    }
    return x;
}

Eigen::VectorXd forward(const ParamSet& params, const MlpSpec& spec,
                        const Eigen::VectorXd& input, ForwardMode mode, Rng* rng) {
    Eigen::MatrixXd row = input.transpose();
    return forward_batch(params, spec, row, mode, rng).row(0).transpose();
}

BackwardResult backward_batch(const ParamSet& params, const MlpSpec& spec,
                              const ForwardCache& cache, const Eigen::MatrixXd& upstream) {
    if (cache.post.size() != static_cast<std::size_t>(spec.n_affine_layers()) + 1)
        throw std::invalid_argument("backward: cache does not match spec");
    if (upstream.rows() != cache.post.back().rows() || upstream.cols() != spec.output_dim)
        throw std::invalid_argument("backward: upstream shape mismatch");

    BackwardResult out;
    out.param_grads.weights.resize(params.weights.size());
    out.param_grads.biases.resize(params.biases.size());

    const bool use_dropout = cache.train && spec.dropout_rate > 0.0;
    Eigen::MatrixXd delta = upstream;
    for (int l = spec.n_affine_layers() - 1; l >= 0; --l) {
        const Eigen::MatrixXd& layer_in = cache.post[static_cast<std::size_t>(l)];
        out.param_grads.weights[l] = layer_in.transpose() * delta;
        out.param_grads.biases[l] = delta.colwise().sum().transpose();
        if (l == 0) {
            out.input_grads = delta * params.weights[0].transpose();
        } else {
            delta = delta * params.weights[l].transpose();
            // Through dropout, then ReLU. The cached activation is
            // post-dropout; nonzero entries were positive pre-dropout.
            if (use_dropout)
                delta = delta.cwiseProduct(cache.dropout_mask[static_cast<std::size_t>(l - 1)]);
            const Eigen::MatrixXd& act = cache.post[static_cast<std::size_t>(l)];
            delta = (act.array() > 0.0).select(delta, 0.0);
        }
    }
    return out;
}

BackwardResult backward(const ParamSet& params, const MlpSpec& spec,
                        const Eigen::VectorXd& input, const Eigen::VectorXd& upstream_grad) {
    ForwardCache cache;
    Eigen::MatrixXd row = input.transpose();
    forward_batch(params, spec, row, ForwardMode::Eval, nullptr, &cache);
    return backward_batch(params, spec, cache, upstream_grad.transpose());
}

double AdamState::current_lr() const {
    if (schedule == LrSchedule::Constant) return base_lr;
    double frac = total_steps > 0
                      ? static_cast<double>(std::min(step, total_steps)) / total_steps
                      : 1.0;
    return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
}

AdamState make_adam(const ParamSet& params, double base_lr, LrSchedule schedule,
                    std::int64_t total_steps) {
    AdamState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    s.base_lr = base_lr;
    s.schedule = schedule;
    s.total_steps = total_steps;
    return s;
}

void adam_step(AdamState& state, ParamSet& params, const ParamSet& grads) {
    if (!params.same_shape(grads) || !params.same_shape(state.m))
        throw std::invalid_argument("adam_step: shape mismatch");
    if (!grads.all_finite())
        throw std::invalid_argument("adam_step: non-finite gradient");

    const double lr = state.current_lr();
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        auto update = [&](Eigen::Ref<Eigen::MatrixXd> p, const Eigen::MatrixXd& g,
                          Eigen::Ref<Eigen::MatrixXd> m, Eigen::Ref<Eigen::MatrixXd> v) {
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            v = state.beta2 * v.array().matrix() + (1.0 - state.beta2) * g.cwiseProduct(g);
            Eigen::ArrayXXd m_hat = m.array() / bc1;
            Eigen::ArrayXXd v_hat = v.array() / bc2;
            p.array() -= lr * m_hat / (v_hat.sqrt() + state.eps);
        };
        update(params.weights[l], grads.weights[l], state.m.weights[l], state.v.weights[l]);
        Eigen::MatrixXd gb = grads.biases[l];
        Eigen::Map<Eigen::MatrixXd> pb(params.biases[l].data(), params.biases[l].size(), 1);
        Eigen::Map<Eigen::MatrixXd> mb(state.m.biases[l].data(), state.m.biases[l].size(), 1);
        Eigen::Map<Eigen::MatrixXd> vb(state.v.biases[l].data(), state.v.biases[l].size(), 1);
        update(pb, gb, mb, vb);
    }
}

void soft_update(ParamSet& target, const ParamSet& online, double tau) {
    if (!target.same_shape(online))
        throw std::invalid_argument("soft_update: shape mismatch");
    if (!(tau > 0.0 && tau <= 1.0))
        throw std::invalid_argument("soft_update: tau must be in (0, 1]");
    for (std::size_t l = 0; l < target.weights.size(); ++l) {
        target.weights[l] = tau * online.weights[l] + (1.0 - tau) * target.weights[l];
        target.biases[l] = tau * online.biases[l] + (1.0 - tau) * target.biases[l];
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::json header;
    header["spec"] = {{"input_dim", ckpt.spec.input_dim},
                      {"hidden_dim", ckpt.spec.hidden_dim},
                      {"n_hidden_layers", ckpt.spec.n_hidden_layers},
                      {"output_dim", ckpt.spec.output_dim},
                      {"activation", "relu"},
                      {"dropout_rate", ckpt.spec.dropout_rate}};
    header["step"] = ckpt.step;
    header["schedule"] = {{"kind", ckpt.schedule == LrSchedule::Constant ? "constant" : "cosine"},
                          {"total_steps", ckpt.total_steps},
                          {"base_lr", ckpt.base_lr}};
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("checkpoint: cannot open for writing: " + path);
    std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    std::vector<float> block;
    for (std::size_t l = 0; l < ckpt.params.weights.size(); ++l) {
        const auto& w = ckpt.params.weights[l];
        block.resize(static_cast<std::size_t>(w.size()) + static_cast<std::size_t>(ckpt.params.biases[l].size()));
        std::size_t k = 0;
        // Column-major coefficient order, matching Eigen storage.
        for (Eigen::Index i = 0; i < w.size(); ++i) block[k++] = static_cast<float>(w.data()[i]);
        const auto& b = ckpt.params.biases[l];
        for (Eigen::Index i = 0; i < b.size(); ++i) block[k++] = static_cast<float>(b(i));
        out.write(reinterpret_cast<const char*>(block.data()),
                  static_cast<std::streamsize>(block.size() * 4));
    }
    if (!out) throw FormatError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("checkpoint: cannot open: " + path);
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    if (in.gcount() != 4) throw FormatError("checkpoint: truncated header length");
    std::string header_str(len, '\0');
    in.read(header_str.data(), len);
    if (in.gcount() != static_cast<std::streamsize>(len))
        throw FormatError("checkpoint: truncated header");

    Checkpoint ckpt;
    try {
        nlohmann::json header = nlohmann::json::parse(header_str);
        const auto& s = header.at("spec");
        ckpt.spec.input_dim = s.at("input_dim").get<int>();
        ckpt.spec.hidden_dim = s.at("hidden_dim").get<int>();
        ckpt.spec.n_hidden_layers = s.at("n_hidden_layers").get<int>();
        ckpt.spec.output_dim = s.at("output_dim").get<int>();
        ckpt.spec.dropout_rate = s.at("dropout_rate").get<double>();
        ckpt.step = header.at("step").get<std::int64_t>();
        const auto& sched = header.at("schedule");
        ckpt.schedule = sched.at("kind").get<std::string>() == "cosine" ? LrSchedule::CosineDecay
                                                                        : LrSchedule::Constant;
        ckpt.total_steps = sched.at("total_steps").get<std::int64_t>();
        ckpt.base_lr = sched.at("base_lr").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
    }
    ckpt.spec.validate();

    for (int l = 0; l < ckpt.spec.n_affine_layers(); ++l) {
        int rows = ckpt.spec.layer_in(l), cols = ckpt.spec.layer_out(l);
        std::vector<float> block(static_cast<std::size_t>(rows) * cols + cols);
        in.read(reinterpret_cast<char*>(block.data()),
                static_cast<std::streamsize>(block.size() * 4));
        if (in.gcount() != static_cast<std::streamsize>(block.size() * 4))
            throw FormatError("checkpoint: truncated parameter block");
        Eigen::MatrixXd w(rows, cols);
        std::size_t k = 0;
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = block[k++];
        Eigen::VectorXd b(cols);
        for (int i = 0; i < cols; ++i) b(i) = block[k++];
        ckpt.params.weights.push_back(std::move(w));
        ckpt.params.biases.push_back(std::move(b));
    }
    if (in.peek() != std::ifstream::traits_type::eof())
        throw FormatError("checkpoint: trailing bytes");
    return ckpt;
}

}  // namespace clorl
