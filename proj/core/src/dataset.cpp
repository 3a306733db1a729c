#include "clorl/dataset.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "clorl/rng.hpp"

namespace clorl {

namespace {

constexpr char kMagic[8] = {'C', 'O', 'D', 'S', 'v', '0', '0', '1'};

const std::array<std::uint32_t, 256>& crc_table() {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}

void append_bytes(std::vector<std::uint8_t>& out, const void* src, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(src);
    out.insert(out.end(), p, p + len);
}

void append_f32_block(std::vector<std::uint8_t>& out, const std::vector<float>& values) {
    static_assert(sizeof(float) == 4);
    append_bytes(out, values.data(), values.size() * 4);
}

void read_exact(std::ifstream& in, void* dst, std::size_t len, const char* what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(len));
    if (in.gcount() != static_cast<std::streamsize>(len))
        throw FormatError(std::string("CODS: truncated file while reading ") + what);
}

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t seed) {
    const auto& table = crc_table();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i)
        c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void validate_dataset(const OfflineDataset& d) {
    if (d.n == 0) throw FormatError("dataset: empty");
    if (d.obs_dim <= 0 || d.act_dim <= 0) throw FormatError("dataset: nonpositive dims");
    auto expect = [&](std::size_t got, std::size_t want, const char* name) {
        if (got != want)
            throw FormatError(std::string("dataset: bad length for ") + name);
    };
    expect(d.observations.size(), d.n * d.obs_dim, "observations");
    expect(d.actions.size(), d.n * d.act_dim, "actions");
    expect(d.raw_rewards.size(), d.n, "rewards");
    expect(d.rewards.size(), d.n, "scaled rewards");
    expect(d.next_observations.size(), d.n * d.obs_dim, "next_observations");
    expect(d.dones.size(), d.n, "dones");
    if (!d.next_actions.empty()) expect(d.next_actions.size(), d.n * d.act_dim, "next_actions");

    if (d.episode_starts.empty() || d.episode_starts[0] != 0)
        throw FormatError("dataset: episode_starts must begin at 0");
    for (std::size_t i = 1; i < d.episode_starts.size(); ++i)
        if (d.episode_starts[i] <= d.episode_starts[i - 1] || d.episode_starts[i] >= d.n)
            throw FormatError("dataset: episode_starts not strictly increasing within range");

    for (float a : d.actions)
        if (!(a >= -1.0f && a <= 1.0f))
            throw FormatError("dataset: action outside [-1, 1]");
    for (float a : d.next_actions)
        if (!(a >= -1.0f && a <= 1.0f))
            throw FormatError("dataset: next_action outside [-1, 1]");

    // dones must be 1 exactly at the last index of each episode.
    std::vector<std::uint8_t> expected(d.n, 0);
    for (std::size_t e = 1; e < d.episode_starts.size(); ++e)
        expected[d.episode_starts[e] - 1] = 1;
    expected[d.n - 1] = 1;
    for (std::size_t i = 0; i < d.n; ++i) {
        if (d.dones[i] != expected[i])
            throw FormatError("dataset: done flags inconsistent with episode boundaries");
    }
}

void build_next_actions(OfflineDataset& d) {
    d.next_actions.assign(d.n * d.act_dim, 0.0f);
    for (std::size_t e = 0; e < d.episode_starts.size(); ++e) {
        std::size_t begin = d.episode_starts[e];
        std::size_t end = (e + 1 < d.episode_starts.size()) ? d.episode_starts[e + 1] : d.n;
        for (std::size_t t = begin; t < end; ++t) {
            std::size_t src = (t + 1 < end) ? t + 1 : t;
            std::memcpy(&d.next_actions[t * d.act_dim], &d.actions[src * d.act_dim],
                        sizeof(float) * d.act_dim);
        }
    }
}

void apply_reward_scale(OfflineDataset& d, const DatasetMeta& meta) {
    d.rewards.resize(d.n);
    for (std::size_t i = 0; i < d.n; ++i)
        d.rewards[i] = static_cast<double>(d.raw_rewards[i]) * meta.reward_scale;
}

void save_dataset(const OfflineDataset& d, const DatasetMeta& meta, const std::string& path) {
    nlohmann::json header;
    header["obs_dim"] = d.obs_dim;
    header["act_dim"] = d.act_dim;
    header["n"] = d.n;
    header["episode_starts"] = d.episode_starts;
    header["reward_scale"] = meta.reward_scale;
    header["random_score"] = meta.random_score;
    header["expert_score"] = meta.expert_score;
    header["source"] = meta.source;
    const std::string header_str = header.dump();

    std::vector<std::uint8_t> buf;
    buf.reserve(64 + header_str.size() + 4 * (d.observations.size() + d.actions.size() +
                                              d.raw_rewards.size() + d.next_observations.size()) +
                d.n + 4);
    append_bytes(buf, kMagic, 8);
    std::uint32_t header_len = static_cast<std::uint32_t>(header_str.size());
    append_bytes(buf, &header_len, 4);
    append_bytes(buf, header_str.data(), header_str.size());
    append_f32_block(buf, d.observations);
    append_f32_block(buf, d.actions);
    append_f32_block(buf, d.raw_rewards);
    append_f32_block(buf, d.next_observations);
    append_bytes(buf, d.dones.data(), d.dones.size());
    std::uint32_t checksum = crc32(buf.data(), buf.size());
    append_bytes(buf, &checksum, 4);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("CODS: cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) throw FormatError("CODS: write failed: " + path);
}

std::pair<OfflineDataset, DatasetMeta> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("CODS: cannot open: " + path);

    char magic[8];
    read_exact(in, magic, 8, "magic");
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("CODS: bad magic or unsupported version");

    std::uint32_t header_len = 0;
    read_exact(in, &header_len, 4, "header length");
    std::string header_str(header_len, '\0');
    read_exact(in, header_str.data(), header_len, "header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("CODS: malformed header JSON: ") + e.what());
    }

    OfflineDataset d;
    DatasetMeta meta;
    try {
        d.obs_dim = header.at("obs_dim").get<int>();
        d.act_dim = header.at("act_dim").get<int>();
        d.n = header.at("n").get<std::size_t>();
        d.episode_starts = header.at("episode_starts").get<std::vector<std::size_t>>();
        meta.reward_scale = header.at("reward_scale").get<double>();
        meta.random_score = header.at("random_score").get<double>();
        meta.expert_score = header.at("expert_score").get<double>();
        meta.source = header.at("source").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("CODS: header missing field: ") + e.what());
    }
    if (d.obs_dim <= 0 || d.act_dim <= 0 || d.n == 0)
        throw FormatError("CODS: degenerate dimensions in header");

    auto read_f32_block = [&](std::vector<float>& dst, std::size_t count, const char* what) {
        dst.resize(count);
        read_exact(in, dst.data(), count * 4, what);
    };
    read_f32_block(d.observations, d.n * d.obs_dim, "observations");
    read_f32_block(d.actions, d.n * d.act_dim, "actions");
    read_f32_block(d.raw_rewards, d.n, "rewards");
    read_f32_block(d.next_observations, d.n * d.obs_dim, "next_observations");
    d.dones.resize(d.n);
    read_exact(in, d.dones.data(), d.n, "dones");

    std::uint32_t stored_crc = 0;
    read_exact(in, &stored_crc, 4, "checksum");
    if (in.peek() != std::ifstream::traits_type::eof())
        throw FormatError("CODS: trailing bytes after checksum");

    // Recompute the checksum over everything before it.
    in.clear();
    in.seekg(0);
    std::vector<std::uint8_t> all;
    {
        std::array<char, 65536> chunk;
        while (in.read(chunk.data(), chunk.size()) || in.gcount() > 0)
            all.insert(all.end(), chunk.data(), chunk.data() + in.gcount());
    }
    if (all.size() < 4) throw FormatError("CODS: truncated file");
    std::uint32_t actual = crc32(all.data(), all.size() - 4);
    if (actual != stored_crc)
        throw FormatError("CODS: checksum mismatch");

    apply_reward_scale(d, meta);
    build_next_actions(d);
    validate_dataset(d);
    if (meta.expert_score <= meta.random_score)
        throw FormatError("CODS: expert_score must exceed random_score");
    return {std::move(d), meta};
}

Batch gather_batch(const OfflineDataset& d, const std::vector<std::size_t>& indices) {
    const Eigen::Index B = static_cast<Eigen::Index>(indices.size());
    Batch b;
    b.states.resize(B, d.obs_dim);
    b.actions.resize(B, d.act_dim);
    b.rewards.resize(B);
    b.next_states.resize(B, d.obs_dim);
    b.next_actions.resize(B, d.act_dim);
    b.dones.resize(B);
    for (Eigen::Index r = 0; r < B; ++r) {
        std::size_t i = indices[static_cast<std::size_t>(r)];
        for (int c = 0; c < d.obs_dim; ++c) {
            b.states(r, c) = d.observations[i * d.obs_dim + c];
            b.next_states(r, c) = d.next_observations[i * d.obs_dim + c];
        }
        for (int c = 0; c < d.act_dim; ++c) {
            b.actions(r, c) = d.actions[i * d.act_dim + c];
            b.next_actions(r, c) = d.next_actions[i * d.act_dim + c];
        }
        b.rewards(r) = d.rewards[i];
        b.dones(r) = d.dones[i] ? 1.0 : 0.0;
    }
    return b;
}

Batch sample_batch(const OfflineDataset& d, std::size_t batch_size, Rng& rng) {
    if (d.n == 0) throw std::invalid_argument("sample_batch: empty dataset");
    if (batch_size == 0) throw std::invalid_argument("sample_batch: batch_size must be >= 1");
    std::vector<std::size_t> indices(batch_size);
    for (auto& idx : indices) idx = static_cast<std::size_t>(rng.uniform_index(d.n));
    return gather_batch(d, indices);
}

double normalized_score(double raw, const DatasetMeta& meta) {
    if (!(meta.expert_score > meta.random_score))
        throw std::invalid_argument("normalized_score: expert_score must exceed random_score");
    return 100.0 * (raw - meta.random_score) / (meta.expert_score - meta.random_score);
}

}  // namespace clorl
