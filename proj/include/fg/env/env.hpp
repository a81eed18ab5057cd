#pragma once
// Deterministic 16x16 pixel environments.
//
// PongLite: one ball, one paddle (3 rows tall, column 1) controlled by
//   {up, noop, down}. The ball bounces off the top, bottom and right walls;
//   reaching column 1 is a hit (+1, ball returns) if the paddle covers the
//   ball row, otherwise a miss (-1, episode over).
// GridChase: an agent on the grid moves {up, down, left, right, noop};
//   stepping onto the pellet scores +1 and respawns the pellet from the
//   episode's seeded stream.
// Both episodes are capped at 512 steps.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include "fg/nn/rng.hpp"

namespace fg::env {

inline constexpr int kSide = 16;
inline constexpr std::size_t kPixels = 256;
inline constexpr int kEpisodeCap = 512;

struct Frame {
    std::array<float, kPixels> px{};

    float at(int row, int col) const { return px[static_cast<std::size_t>(row * kSide + col)]; }
    float& at(int row, int col) { return px[static_cast<std::size_t>(row * kSide + col)]; }
    friend bool operator==(const Frame&, const Frame&) = default;
};

enum class EnvKind { pong_lite, grid_chase };

EnvKind parse_env_kind(std::string_view name);
std::string_view env_kind_name(EnvKind kind);
std::size_t action_count(EnvKind kind);
std::size_t noop_action(EnvKind kind);

namespace pong {
inline constexpr std::size_t kUp = 0, kNoop = 1, kDown = 2;
inline constexpr int kPaddleCol = 1;
inline constexpr int kPaddleHeight = 3;
}  // namespace pong

namespace chase {
inline constexpr std::size_t kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kNoop = 4;
}

struct PongState {
    int ball_row = 0, ball_col = 0;
    int vel_row = 1, vel_col = 1;
    int paddle_top = 6;
    int steps = 0;
    bool done = false;
    friend bool operator==(const PongState&, const PongState&) = default;
};

struct ChaseState {
    int agent_row = 8, agent_col = 8;
    int pellet_row = 0, pellet_col = 0;
    int steps = 0;
    bool done = false;
    std::uint64_t pellet_seed = 0;
    std::uint64_t pellet_draws = 0;  // draws consumed from the pellet stream
};

struct EnvState {
    EnvKind kind = EnvKind::pong_lite;
    std::variant<PongState, ChaseState> data;
    bool done() const;
    int steps() const;
};

struct StepResult {
    Frame frame;
    double reward = 0.0;
    bool done = false;
};

struct ResetResult {
    EnvState state;
    Frame frame;
};

ResetResult env_reset(EnvKind kind, std::uint64_t seed);
// Throws fg::Error on step-after-done or an out-of-range action.
StepResult env_step(EnvState& state, std::size_t action);
Frame render(const EnvState& state);

// Next pellet cell drawn from a GridChase stream, skipping the agent cell.
// Exposed so tests can replay the stream independently.
std::pair<int, int> draw_pellet(std::uint64_t seed, std::uint64_t& draws, int agent_row, int agent_col);

}  // namespace fg::env
