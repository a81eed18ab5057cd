#include "fg/foresight/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fg/env/trajectory.hpp"
#include "fg/error.hpp"

namespace fg::foresight {
namespace {

Split split_for_episode(std::size_t e) {
    switch (e % 20) {
        case 18: return Split::val;
        case 19: return Split::test;
        default: return Split::train;
    }
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw FileError("dataset index: unknown split '" + s + "'");
}

std::uint8_t to_byte(float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

void append_frame(EpisodeData& ep, const Frame& f) {
    for (float v : f.px) ep.frames.push_back(to_byte(v));
}

}  // namespace

std::string_view split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Frame EpisodeData::frame(std::size_t t) const {
    Frame f;
    const std::uint8_t* src = frames.data() + t * env::kPixels;
    for (std::size_t i = 0; i < env::kPixels; ++i) f.px[i] = static_cast<float>(src[i]) / 255.0f;
    return f;
}

void EpisodeData::frame_preprocessed(std::size_t t, const policy::PixelStats& stats, float* out) const {
    const std::uint8_t* src = frames.data() + t * env::kPixels;
    for (std::size_t i = 0; i < env::kPixels; ++i) out[i] = static_cast<float>(src[i]) / 255.0f - stats.mean[i];
}

std::size_t PredictionDataset::total_frames() const {
    std::size_t n = 0;
    for (const auto& ep : episodes) n += ep.frame_count();
    return n;
}

std::vector<WindowRef> windows(const PredictionDataset& data, Split split, std::size_t horizon) {
    if (horizon == 0) throw Error("windows: horizon must be at least 1");
    std::vector<WindowRef> out;
    for (std::size_t e = 0; e < data.episodes.size(); ++e) {
        const auto& ep = data.episodes[e];
        if (ep.split != split) continue;
        const std::size_t frames = ep.frame_count();
        for (std::size_t t = kHistory; t + horizon <= frames; ++t) out.push_back({e, t});
    }
    return out;
}

History window_history(const PredictionDataset& data, const WindowRef& w) {
    const auto& ep = data.episodes.at(w.episode);
    if (w.t < kHistory || w.t >= ep.frame_count()) throw Error("window_history: window out of range");
    History h;
    for (std::size_t k = 0; k < kHistory; ++k) {
        h.frames[k] = ep.frame(w.t - kHistory + k);
        h.actions[k] = ep.actions[w.t - kHistory + k];
    }
    return h;
}

PredictionDataset collect_dataset(const policy::PolicyModel& policy, env::EnvKind kind, std::size_t frames,
                                  double epsilon, std::uint64_t seed) {
    if (policy.env != kind) throw Error("collect: policy was trained on a different environment");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error("collect: epsilon must lie in [0, 1]");
    PredictionDataset data;
    data.env = kind;
    data.action_count = env::action_count(kind);
    nn::Rng rng(nn::derive_seed(seed, 1));
    const policy::Selection sel{policy::SelectMode::epsilon, epsilon};

    std::size_t total = 0;
    for (std::size_t e = 0; total < frames; ++e) {
        EpisodeData ep;
        ep.seed = nn::derive_seed(seed, 1000 + e);
        ep.split = split_for_episode(e);
        auto reset = env::env_reset(kind, ep.seed);
        append_frame(ep, reset.frame);
        ++total;
        auto stack = policy::FrameStack::filled(reset.frame);
        while (total < frames) {
            const auto dist = policy::action_distribution(policy, stack);
            const std::size_t a = policy::select_action(dist, sel, rng);
            const auto sr = env::env_step(reset.state, a);
            ep.actions.push_back(static_cast<std::uint8_t>(a));
            append_frame(ep, sr.frame);
            ++total;
            if (sr.done) break;
            stack = stack.pushed(sr.frame);
        }
        data.episodes.push_back(std::move(ep));
    }
    return data;
}

void save_dataset(const std::string& dir, const PredictionDataset& data) {
    std::filesystem::create_directories(dir);
    std::ofstream traj(std::filesystem::path(dir) / "trajectories.jsonl");
    if (!traj) throw FileError("cannot write " + dir + "/trajectories.jsonl");
    nlohmann::ordered_json index;
    index["env"] = std::string(env::env_kind_name(data.env));
    index["action_count"] = data.action_count;
    index["frames"] = data.total_frames();
    auto& eps = index["episodes"] = nlohmann::ordered_json::array();
    std::size_t line = 0;
    for (const auto& ep : data.episodes) {
        const std::size_t n = ep.frame_count();
        for (std::size_t t = 0; t < n; ++t) {
            env::TrajectoryStep step;
            step.t = static_cast<int>(t);
            step.action = t < ep.actions.size() ? static_cast<int>(ep.actions[t]) : -1;
            step.frame = ep.frame(t);
            step.done = t + 1 == n;
            traj << env::trajectory_line(step) << '\n';
        }
        eps.push_back({{"seed", ep.seed}, {"split", split_name(ep.split)}, {"first_line", line}, {"frames", n}});
        line += n;
    }
    std::ofstream idx(std::filesystem::path(dir) / "index.json");
    if (!idx) throw FileError("cannot write " + dir + "/index.json");
    idx << index.dump(2) << '\n';
}

PredictionDataset load_dataset(const std::string& dir) {
    const auto root = std::filesystem::path(dir);
    std::ifstream idx(root / "index.json");
    if (!idx) throw FileError("cannot open " + (root / "index.json").string());
    std::ifstream traj(root / "trajectories.jsonl");
    if (!traj) throw FileError("cannot open " + (root / "trajectories.jsonl").string());
    PredictionDataset data;
    try {
        const auto index = nlohmann::json::parse(idx);
        data.env = env::parse_env_kind(index.at("env").get<std::string>());
        data.action_count = index.at("action_count").get<std::size_t>();
        const auto steps = env::read_trajectory(traj);
        for (const auto& e : index.at("episodes")) {
            EpisodeData ep;
            ep.seed = e.at("seed").get<std::uint64_t>();
            ep.split = parse_split(e.at("split").get<std::string>());
            const auto first = e.at("first_line").get<std::size_t>();
            const auto n = e.at("frames").get<std::size_t>();
            if (n == 0 || first + n > steps.size()) throw FileError("dataset index: episode exceeds trajectory file");
            for (std::size_t t = 0; t < n; ++t) {
                const auto& st = steps[first + t];
                append_frame(ep, st.frame);
                if (t + 1 < n) {
                    if (st.action < 0 || static_cast<std::size_t>(st.action) >= data.action_count) {
                        throw FileError("dataset: invalid action in trajectory");
                    }
                    ep.actions.push_back(static_cast<std::uint8_t>(st.action));
                }
            }
            data.episodes.push_back(std::move(ep));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw FileError("dataset index: " + std::string(ex.what()));
    }
    return data;
}

}  // namespace fg::foresight
