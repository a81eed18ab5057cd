#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fg/env/env.hpp"
#include "fg/foresight/predictor.hpp"
#include "fg/policy/policy.hpp"

namespace fg::foresight {

enum class Split { train, val, test };

std::string_view split_name(Split s);

// One episode: frames[0..T] as bytes (round(pixel * 255)), actions[0..T-1].
struct EpisodeData {
    std::uint64_t seed = 0;
    Split split = Split::train;
    std::vector<std::uint8_t> frames;
    std::vector<std::uint8_t> actions;

    std::size_t frame_count() const { return frames.size() / env::kPixels; }
    Frame frame(std::size_t t) const;
    void frame_preprocessed(std::size_t t, const policy::PixelStats& stats, float* out) const;
};

struct PredictionDataset {
    env::EnvKind env = env::EnvKind::pong_lite;
    std::size_t action_count = 0;
    std::vector<EpisodeData> episodes;

    std::size_t total_frames() const;
};

// A prediction target: frame t of episode e, with frames t-4..t-1 as history.
struct WindowRef {
    std::size_t episode;
    std::size_t t;
};

// Every window of the given split with room for `horizon` consecutive targets.
std::vector<WindowRef> windows(const PredictionDataset& data, Split split, std::size_t horizon);

History window_history(const PredictionDataset& data, const WindowRef& w);

// epsilon-greedy rollouts of the policy until `frames` frames are recorded.
// Episodes are assigned to train/val/test 90/5/5 by episode index.
PredictionDataset collect_dataset(const policy::PolicyModel& policy, env::EnvKind kind, std::size_t frames,
                                  double epsilon, std::uint64_t seed);

// <dir>/trajectories.jsonl (trajectory records) + <dir>/index.json.
void save_dataset(const std::string& dir, const PredictionDataset& data);
PredictionDataset load_dataset(const std::string& dir);

}  // namespace fg::foresight
