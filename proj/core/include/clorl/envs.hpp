#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "clorl/dataset.hpp"

namespace clorl {

class Rng;

/// Deterministic, fixed-horizon toy environments. Rewards are a function
/// of the state before the transition; episodes end only by running out
/// the horizon (the done flag marks time-limit truncation).
class Env {
public:
    virtual ~Env() = default;
    virtual std::string name() const = 0;
    virtual int obs_dim() const = 0;
    virtual int act_dim() const = 0;
    virtual int horizon() const = 0;
    virtual double reward(const Eigen::VectorXd& state) const = 0;
    virtual Eigen::VectorXd transition(const Eigen::VectorXd& state,
                                       const Eigen::VectorXd& action) const = 0;
    /// Per-component bounds of the state box.
    virtual std::pair<Eigen::VectorXd, Eigen::VectorXd> state_box() const = 0;
    virtual Eigen::VectorXd canonical_state() const = 0;
    /// Scripted proportional-derivative controller toward the goal.
    virtual Eigen::VectorXd controller_action(const Eigen::VectorXd& state, double kp,
                                              double kd) const = 0;

    Eigen::VectorXd initial_state(Rng& rng) const;
};

struct StepResult {
    Eigen::VectorXd next_state;
    double reward = 0.0;
    bool done = false;
};

/// One environment step at time index t (0-based); done marks the last
/// step of the horizon. Throws if the action leaves [-1, 1]^d.
StepResult step(const Env& env, const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                int t);

/// Point mass on the plane accelerating toward a fixed goal.
/// State (px, py, vx, vy); position box [-1,1]^2, velocity cap 0.5,
/// dt = 0.1, horizon 50, reward -|pos - goal|, goal (0.5, 0.5).
class PointMass2D final : public Env {
public:
    static constexpr double kDt = 0.1;
    static constexpr double kVelCap = 0.5;
    static constexpr int kHorizon = 50;

    std::string name() const override { return "pointmass"; }
    int obs_dim() const override { return 4; }
    int act_dim() const override { return 2; }
    int horizon() const override { return kHorizon; }
    double reward(const Eigen::VectorXd& state) const override;
    Eigen::VectorXd transition(const Eigen::VectorXd& state,
                               const Eigen::VectorXd& action) const override;
    std::pair<Eigen::VectorXd, Eigen::VectorXd> state_box() const override;
    Eigen::VectorXd canonical_state() const override { return Eigen::VectorXd::Zero(4); }
    Eigen::VectorXd controller_action(const Eigen::VectorXd& state, double kp,
                                      double kd) const override;
};

/// One-dimensional chain: s' = clamp(s + 0.2 a), reward 1 inside the
/// target band |s - 0.8| < 0.1, horizon 20.
class Chain1D final : public Env {
public:
    static constexpr double kGoal = 0.8;
    static constexpr int kHorizon = 20;

    std::string name() const override { return "chain"; }
    int obs_dim() const override { return 1; }
    int act_dim() const override { return 1; }
    int horizon() const override { return kHorizon; }
    double reward(const Eigen::VectorXd& state) const override;
    Eigen::VectorXd transition(const Eigen::VectorXd& state,
                               const Eigen::VectorXd& action) const override;
    std::pair<Eigen::VectorXd, Eigen::VectorXd> state_box() const override;
    Eigen::VectorXd canonical_state() const override { return Eigen::VectorXd::Zero(1); }
    Eigen::VectorXd controller_action(const Eigen::VectorXd& state, double kp,
                                      double kd) const override;
};

std::unique_ptr<Env> make_env(const std::string& name);

enum class Behavior { Random, Mediocre, Expert };

Behavior behavior_from_string(const std::string& s);
std::string to_string(Behavior b);

/// PD gains used by the scripted behaviors.
constexpr double kMediocreKp = 0.5, kMediocreKd = 0.3;
constexpr double kExpertKp = 2.0, kExpertKd = 1.0;

/// Roll out the scripted behavior for n_episodes and package the
/// transitions. Meta's random_score / expert_score come from
/// 1000-episode Monte-Carlo returns of the random and noiseless expert
/// policies under the same generator seed.
std::pair<OfflineDataset, DatasetMeta> generate_dataset(const Env& env, Behavior behavior,
                                                        int n_episodes, double noise_std,
                                                        std::uint64_t seed,
                                                        double reward_scale = 1.0);

/// Mean undiscounted return of a scripted behavior over n episodes.
double mc_policy_return(const Env& env, Behavior behavior, double noise_std, int n_episodes,
                        Rng& rng);

/// Q table over a nearest-neighbor discretization of the state/action
/// boxes, iterated to the discounted fixed point.
struct OracleGrid {
    int state_res = 0;
    int action_res = 0;
    double gamma = 0.0;
    double tol = 0.0;
    double residual = 0.0;  // final sup-norm Bellman residual
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    Eigen::VectorXd state_lo, state_hi;
    int obs_dim = 0, act_dim = 0;
    std::vector<double> q;  // n_states * n_actions
    double greedy_return = 0.0;  // true-dynamics rollout from the canonical state

    std::size_t snap_state(const Eigen::VectorXd& state) const;
    Eigen::VectorXd action_at(std::size_t a) const;
    Eigen::VectorXd greedy_action(const Eigen::VectorXd& state) const;
    double q_at(std::size_t s, std::size_t a) const { return q[s * n_actions + a]; }
};

OracleGrid tabular_oracle(const Env& env, double gamma, int state_res, int action_res,
                          double tol);

}  // namespace clorl
