#include "clorl/envs.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "clorl/rng.hpp"

namespace clorl {

namespace {

double clampd(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

float quantize(double x) { return static_cast<float>(x); }

}  // namespace

Eigen::VectorXd Env::initial_state(Rng& rng) const {
    auto [lo, hi] = state_box();
    Eigen::VectorXd s(lo.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = rng.uniform(lo(i), hi(i));
    return s;
}

StepResult step(const Env& env, const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                int t) {
    if (action.size() != env.act_dim())
        throw std::invalid_argument("step: action dimension mismatch");
    for (Eigen::Index i = 0; i < action.size(); ++i)
        if (!(action(i) >= -1.0 && action(i) <= 1.0))
            throw std::invalid_argument("step: action outside [-1, 1]");
    StepResult r;
    r.reward = env.reward(state);
    r.next_state = env.transition(state, action);
    r.done = t + 1 >= env.horizon();
    return r;
}

double PointMass2D::reward(const Eigen::VectorXd& state) const {
    double dx = state(0) - 0.5, dy = state(1) - 0.5;
    return -std::sqrt(dx * dx + dy * dy);
}

Eigen::VectorXd PointMass2D::transition(const Eigen::VectorXd& state,
                                        const Eigen::VectorXd& action) const {
    Eigen::VectorXd next(4);
    // Position integrates the old velocity, then velocity absorbs the
    // acceleration; both stay inside their boxes.
    next(0) = clampd(state(0) + kDt * state(2), -1.0, 1.0);
    next(1) = clampd(state(1) + kDt * state(3), -1.0, 1.0);
    next(2) = clampd(state(2) + kDt * action(0), -kVelCap, kVelCap);
    next(3) = clampd(state(3) + kDt * action(1), -kVelCap, kVelCap);
    return next;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> PointMass2D::state_box() const {
    Eigen::VectorXd lo(4), hi(4);
    lo << -1.0, -1.0, -kVelCap, -kVelCap;
    hi << 1.0, 1.0, kVelCap, kVelCap;
    return {lo, hi};
}

Eigen::VectorXd PointMass2D::controller_action(const Eigen::VectorXd& state, double kp,
                                               double kd) const {
    Eigen::VectorXd a(2);
    a(0) = clampd(kp * (0.5 - state(0)) - kd * state(2), -1.0, 1.0);
    a(1) = clampd(kp * (0.5 - state(1)) - kd * state(3), -1.0, 1.0);
    return a;
}

double Chain1D::reward(const Eigen::VectorXd& state) const {
    return std::abs(state(0) - kGoal) < 0.1 ? 1.0 : 0.0;
}

Eigen::VectorXd Chain1D::transition(const Eigen::VectorXd& state,
                                    const Eigen::VectorXd& action) const {
    Eigen::VectorXd next(1);
    next(0) = clampd(state(0) + 0.2 * action(0), -1.0, 1.0);
    return next;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> Chain1D::state_box() const {
    Eigen::VectorXd lo(1), hi(1);
    lo << -1.0;
    hi << 1.0;
    return {lo, hi};
}

Eigen::VectorXd Chain1D::controller_action(const Eigen::VectorXd& state, double kp,
                                           double /*kd*/) const {
    Eigen::VectorXd a(1);
    a(0) = clampd(kp * (kGoal - state(0)), -1.0, 1.0);
    return a;
}

std::unique_ptr<Env> make_env(const std::string& name) {
    if (name == "pointmass") return std::make_unique<PointMass2D>();
    if (name == "chain") return std::make_unique<Chain1D>();
    throw std::invalid_argument("unknown environment: " + name);
}

Behavior behavior_from_string(const std::string& s) {
    if (s == "random") return Behavior::Random;
    if (s == "mediocre") return Behavior::Mediocre;
    if (s == "expert") return Behavior::Expert;
    throw std::invalid_argument("unknown behavior: " + s);
}

std::string to_string(Behavior b) {
    switch (b) {
    case Behavior::Random: return "random";
    case Behavior::Mediocre: return "mediocre";
    case Behavior::Expert: return "expert";
    }
    return "?";
}

namespace {

Eigen::VectorXd behavior_action(const Env& env, Behavior behavior,
                                const Eigen::VectorXd& state, double noise_std, Rng& rng) {
    Eigen::VectorXd a(env.act_dim());
    switch (behavior) {
    case Behavior::Random:
        for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.uniform(-1.0, 1.0);
        return a;
    case Behavior::Mediocre:
        a = env.controller_action(state, kMediocreKp, kMediocreKd);
        break;
    case Behavior::Expert:
        a = env.controller_action(state, kExpertKp, kExpertKd);
        break;
    }
    if (noise_std > 0.0)
        for (Eigen::Index i = 0; i < a.size(); ++i)
            a(i) = clampd(a(i) + noise_std * rng.normal(), -1.0, 1.0);
    return a;
}

}  // namespace

double mc_policy_return(const Env& env, Behavior behavior, double noise_std, int n_episodes,
                        Rng& rng) {
    double total = 0.0;
    for (int e = 0; e < n_episodes; ++e) {
        Eigen::VectorXd s = env.initial_state(rng);
        for (int t = 0; t < env.horizon(); ++t) {
            Eigen::VectorXd a = behavior_action(env, behavior, s, noise_std, rng);
            StepResult r = step(env, s, a, t);
            total += r.reward;
            s = r.next_state;
        }
    }
    return total / n_episodes;
}

std::pair<OfflineDataset, DatasetMeta> generate_dataset(const Env& env, Behavior behavior,
                                                        int n_episodes, double noise_std,
                                                        std::uint64_t seed,
                                                        double reward_scale) {
    if (n_episodes < 1) throw std::invalid_argument("generate_dataset: n_episodes must be >= 1");
    Rng root(seed);
    Rng init_rng = root.split("init");
    Rng act_rng = root.split("actions");
    Rng mc_rng = root.split("mc");

    const int H = env.horizon();
    OfflineDataset d;
    d.obs_dim = env.obs_dim();
    d.act_dim = env.act_dim();
    d.n = static_cast<std::size_t>(n_episodes) * H;
    d.observations.reserve(d.n * d.obs_dim);
    d.actions.reserve(d.n * d.act_dim);
    d.raw_rewards.reserve(d.n);
    d.next_observations.reserve(d.n * d.obs_dim);
    d.dones.reserve(d.n);

    for (int e = 0; e < n_episodes; ++e) {
        d.episode_starts.push_back(static_cast<std::size_t>(e) * H);
        Eigen::VectorXd s = env.initial_state(init_rng);
        // Quantize through float32 so the stored dataset is exactly the
        // trajectory that was rolled out.
        for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = quantize(s(i));
        for (int t = 0; t < H; ++t) {
            Eigen::VectorXd a = behavior_action(env, behavior, s, noise_std, act_rng);
            for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = quantize(a(i));
            StepResult r = step(env, s, a, t);
            for (Eigen::Index i = 0; i < r.next_state.size(); ++i)
                r.next_state(i) = quantize(r.next_state(i));

            for (Eigen::Index i = 0; i < s.size(); ++i)
                d.observations.push_back(static_cast<float>(s(i)));
            for (Eigen::Index i = 0; i < a.size(); ++i)
                d.actions.push_back(static_cast<float>(a(i)));
            d.raw_rewards.push_back(static_cast<float>(r.reward));
            for (Eigen::Index i = 0; i < r.next_state.size(); ++i)
                d.next_observations.push_back(static_cast<float>(r.next_state(i)));
            d.dones.push_back(r.done ? 1 : 0);
            s = r.next_state;
        }
    }

    DatasetMeta meta;
    meta.reward_scale = reward_scale;
    meta.random_score = mc_policy_return(env, Behavior::Random, 0.0, 1000, mc_rng);
    meta.expert_score = mc_policy_return(env, Behavior::Expert, 0.0, 1000, mc_rng);
    std::ostringstream src;
    src << env.name() << " " << to_string(behavior) << " episodes=" << n_episodes
        << " noise=" << noise_std << " seed=" << seed;
    meta.source = src.str();

    apply_reward_scale(d, meta);
    build_next_actions(d);
    validate_dataset(d);
    return {std::move(d), meta};
}

std::size_t OracleGrid::snap_state(const Eigen::VectorXd& state) const {
    std::size_t idx = 0;
    for (int i = 0; i < obs_dim; ++i) {
        double span = state_hi(i) - state_lo(i);
        double frac = (state(i) - state_lo(i)) / span;
        long j = std::lround(frac * (state_res - 1));
        j = std::min<long>(state_res - 1, std::max<long>(0, j));
        idx = idx * state_res + static_cast<std::size_t>(j);
    }
    return idx;
}

Eigen::VectorXd OracleGrid::action_at(std::size_t a) const {
    Eigen::VectorXd out(act_dim);
    for (int i = act_dim - 1; i >= 0; --i) {
        std::size_t j = a % action_res;
        a /= action_res;
        out(i) = -1.0 + 2.0 * static_cast<double>(j) / (action_res - 1);
    }
    return out;
}

Eigen::VectorXd OracleGrid::greedy_action(const Eigen::VectorXd& state) const {
    std::size_t s = snap_state(state);
    std::size_t best = 0;
    double best_q = q_at(s, 0);
    for (std::size_t a = 1; a < n_actions; ++a) {
        if (q_at(s, a) > best_q) {
            best_q = q_at(s, a);
            best = a;
        }
    }
    return action_at(best);
}

OracleGrid tabular_oracle(const Env& env, double gamma, int state_res, int action_res,
                          double tol) {
    if (state_res < 2 || action_res < 2)
        throw std::invalid_argument("tabular_oracle: resolutions must be >= 2");
    OracleGrid g;
    g.state_res = state_res;
    g.action_res = action_res;
    g.gamma = gamma;
    g.tol = tol;
    g.obs_dim = env.obs_dim();
    g.act_dim = env.act_dim();
    auto [lo, hi] = env.state_box();
    g.state_lo = lo;
    g.state_hi = hi;
    g.n_states = 1;
    for (int i = 0; i < g.obs_dim; ++i) g.n_states *= static_cast<std::size_t>(state_res);
    g.n_actions = 1;
    for (int i = 0; i < g.act_dim; ++i) g.n_actions *= static_cast<std::size_t>(action_res);

    // Decode a flat state index back to grid coordinates.
    auto state_at = [&](std::size_t s) {
        Eigen::VectorXd out(g.obs_dim);
        for (int i = g.obs_dim - 1; i >= 0; --i) {
            std::size_t j = s % static_cast<std::size_t>(state_res);
            s /= static_cast<std::size_t>(state_res);
            out(i) = lo(i) + (hi(i) - lo(i)) * static_cast<double>(j) / (state_res - 1);
        }
        return out;
    };

    // Precompute rewards and snapped successor indices.
    std::vector<double> reward(g.n_states);
    std::vector<std::size_t> succ(g.n_states * g.n_actions);
    for (std::size_t s = 0; s < g.n_states; ++s) {
        Eigen::VectorXd xs = state_at(s);
        reward[s] = env.reward(xs);
        for (std::size_t a = 0; a < g.n_actions; ++a)
            succ[s * g.n_actions + a] = g.snap_state(env.transition(xs, g.action_at(a)));
    }

    // Backward induction from the zero function, iterated until the
    // discounted fixed point: residual contracts by gamma per sweep.
    std::vector<double> value(g.n_states, 0.0);
    g.q.assign(g.n_states * g.n_actions, 0.0);
    const int max_sweeps = gamma > 0.0 ? 100000 : 1;
    double residual = 0.0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        residual = 0.0;
        for (std::size_t s = 0; s < g.n_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < g.n_actions; ++a) {
                double q_new = reward[s] + gamma * value[succ[s * g.n_actions + a]];
                residual = std::max(residual, std::abs(q_new - g.q[s * g.n_actions + a]));
                g.q[s * g.n_actions + a] = q_new;
                best = std::max(best, q_new);
            }
            // value[] is updated after the sweep to keep the operator
            // synchronous (plain value iteration).
        }
        for (std::size_t s = 0; s < g.n_states; ++s) {
            double best = g.q[s * g.n_actions];
            for (std::size_t a = 1; a < g.n_actions; ++a)
                best = std::max(best, g.q[s * g.n_actions + a]);
            value[s] = best;
        }
        if (residual < tol) break;
    }
    g.residual = residual;

    // Greedy-policy return under the true dynamics from the canonical
    // start, over one horizon.
    Eigen::VectorXd s = env.canonical_state();
    double ret = 0.0;
    for (int t = 0; t < env.horizon(); ++t) {
        StepResult r = step(env, s, g.greedy_action(s), t);
        ret += r.reward;
        s = r.next_state;
    }
    g.greedy_return = ret;
    return g;
}

}  // namespace clorl
