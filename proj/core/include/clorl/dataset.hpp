#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace clorl {

class Rng;

/// Raised on any structural problem with a dataset file: bad magic,
/// truncation, checksum mismatch, or invariant violations. Loading never
/// returns a partial dataset.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DatasetMeta {
    double reward_scale = 1.0;  // multiplier applied to stored rewards at load
    std::string source;
    double random_score = 0.0;  // mean return of the random behavior policy
    double expert_score = 0.0;  // mean return of the noiseless expert controller
};

/// Immutable transition arrays. Rows are flattened row-major with the
/// dimensions recorded in obs_dim / act_dim. Storage is float32, matching
/// the on-disk format, so save/load round-trips are bitwise. `rewards`
/// holds the training view with reward_scale already applied exactly once;
/// `raw_rewards` holds the stored values.
struct OfflineDataset {
    std::size_t n = 0;
    int obs_dim = 0;
    int act_dim = 0;
    std::vector<float> observations;       // n * obs_dim
    std::vector<float> actions;            // n * act_dim, componentwise in [-1, 1]
    std::vector<float> raw_rewards;        // n, as stored
    std::vector<double> rewards;           // n, raw * reward_scale
    std::vector<float> next_observations;  // n * obs_dim
    std::vector<float> next_actions;       // n * act_dim, derived (not stored)
    std::vector<std::uint8_t> dones;       // n, 1 exactly at episode ends
    std::vector<std::size_t> episode_starts;
};

/// Aligned transition slices promoted to double for training math.
struct Batch {
    Eigen::MatrixXd states;        // B x obs_dim
    Eigen::MatrixXd actions;       // B x act_dim
    Eigen::VectorXd rewards;       // B
    Eigen::MatrixXd next_states;   // B x obs_dim
    Eigen::MatrixXd next_actions;  // B x act_dim
    Eigen::VectorXd dones;         // B, 0 or 1
    std::size_t size() const { return static_cast<std::size_t>(rewards.size()); }
};

/// Check every structural invariant (array lengths, action bounds, done
/// placement, episode_starts shape); throws FormatError on violation.
void validate_dataset(const OfflineDataset& dataset);

/// Fill next_actions from the action at the following step; the last step
/// of each episode repeats its own action. That entry is inert: every TD
/// target multiplies it by (1 - done) = 0.
void build_next_actions(OfflineDataset& dataset);

/// Apply meta.reward_scale to raw_rewards, producing the training rewards.
void apply_reward_scale(OfflineDataset& dataset, const DatasetMeta& meta);

/// CODS v1 container: "CODSv001" magic, u32-LE header length, JSON header,
/// float32-LE blocks (observations, actions, rewards, next_observations),
/// n done bytes, CRC32 of everything preceding it.
void save_dataset(const OfflineDataset& dataset, const DatasetMeta& meta,
                  const std::string& path);
std::pair<OfflineDataset, DatasetMeta> load_dataset(const std::string& path);

/// Uniform sampling with replacement; deterministic given the rng state.
Batch sample_batch(const OfflineDataset& dataset, std::size_t batch_size, Rng& rng);

/// Extract specific transitions (used by sample_batch and tests).
Batch gather_batch(const OfflineDataset& dataset, const std::vector<std::size_t>& indices);

/// 100 * (raw - random) / (expert - random).
double normalized_score(double raw, const DatasetMeta& meta);

/// CRC32 (IEEE 802.3, reflected polynomial 0xEDB88320).
std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace clorl
