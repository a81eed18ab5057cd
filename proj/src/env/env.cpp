#include "fg/env/env.hpp"

#include <algorithm>

#include "fg/error.hpp"

namespace fg::env {

EnvKind parse_env_kind(std::string_view name) {
    if (name == "pong" || name == "ponglite" || name == "pong_lite") return EnvKind::pong_lite;
    if (name == "chase" || name == "gridchase" || name == "grid_chase") return EnvKind::grid_chase;
    throw Error("unknown environment '" + std::string(name) + "' (expected pong or chase)");
}

std::string_view env_kind_name(EnvKind kind) { return kind == EnvKind::pong_lite ? "pong" : "chase"; }

std::size_t action_count(EnvKind kind) { return kind == EnvKind::pong_lite ? 3 : 5; }

std::size_t noop_action(EnvKind kind) { return kind == EnvKind::pong_lite ? pong::kNoop : chase::kNoop; }

bool EnvState::done() const {
    return std::visit([](const auto& s) { return s.done; }, data);
}

int EnvState::steps() const {
    return std::visit([](const auto& s) { return s.steps; }, data);
}

std::pair<int, int> draw_pellet(std::uint64_t seed, std::uint64_t& draws, int agent_row, int agent_col) {
    // The stream is replayed from its seed so the state stays a small value.
    nn::Rng rng(seed);
    for (std::uint64_t i = 0; i < draws; ++i) rng.below(kPixels);
    for (;;) {
        const auto cell = static_cast<int>(rng.below(kPixels));
        ++draws;
        const int r = cell / kSide, c = cell % kSide;
        if (r != agent_row || c != agent_col) return {r, c};
    }
}

ResetResult env_reset(EnvKind kind, std::uint64_t seed) {
    EnvState st;
    st.kind = kind;
    if (kind == EnvKind::pong_lite) {
        nn::Rng rng(seed);
        PongState p;
        p.ball_row = 1 + static_cast<int>(rng.below(14));
        p.ball_col = 8 + static_cast<int>(rng.below(7));
        p.vel_row = rng.below(2) ? 1 : -1;
        p.vel_col = rng.below(2) ? 1 : -1;
        p.paddle_top = 6;
        st.data = p;
    } else {
        ChaseState c;
        c.pellet_seed = seed;
        std::tie(c.pellet_row, c.pellet_col) = draw_pellet(seed, c.pellet_draws, c.agent_row, c.agent_col);
        st.data = c;
    }
    Frame f = render(st);
    return {std::move(st), f};
}

namespace {

StepResult step_pong(PongState& s, std::size_t action) {
    const int move = action == pong::kUp ? -1 : (action == pong::kDown ? 1 : 0);
    s.paddle_top = std::clamp(s.paddle_top + move, 0, kSide - pong::kPaddleHeight);

    s.ball_row += s.vel_row;
    s.ball_col += s.vel_col;
    if (s.ball_row <= 0) {
        s.ball_row = 0;
        s.vel_row = 1;
    } else if (s.ball_row >= kSide - 1) {
        s.ball_row = kSide - 1;
        s.vel_row = -1;
    }
    if (s.ball_col >= kSide - 1) {
        s.ball_col = kSide - 1;
        s.vel_col = -1;
    }

    StepResult r;
    if (s.ball_col <= pong::kPaddleCol) {
        s.ball_col = pong::kPaddleCol;
        if (s.ball_row >= s.paddle_top && s.ball_row < s.paddle_top + pong::kPaddleHeight) {
            r.reward = 1.0;
            s.vel_col = 1;
        } else {
            r.reward = -1.0;
            s.done = true;
        }
    }
    s.steps += 1;
    if (s.steps >= kEpisodeCap) s.done = true;
    r.done = s.done;
    return r;
}

StepResult step_chase(ChaseState& s, std::size_t action) {
    switch (action) {
        case chase::kUp: s.agent_row = std::max(0, s.agent_row - 1); break;
        case chase::kDown: s.agent_row = std::min(kSide - 1, s.agent_row + 1); break;
        case chase::kLeft: s.agent_col = std::max(0, s.agent_col - 1); break;
        case chase::kRight: s.agent_col = std::min(kSide - 1, s.agent_col + 1); break;
        default: break;
    }
    StepResult r;
    if (s.agent_row == s.pellet_row && s.agent_col == s.pellet_col) {
        r.reward = 1.0;
        std::tie(s.pellet_row, s.pellet_col) = draw_pellet(s.pellet_seed, s.pellet_draws, s.agent_row, s.agent_col);
    }
    s.steps += 1;
    if (s.steps >= kEpisodeCap) s.done = true;
    r.done = s.done;
    return r;
}

}  // namespace

StepResult env_step(EnvState& state, std::size_t action) {
    if (state.done()) throw Error("env_step: episode is over; reset first");
    if (action >= action_count(state.kind)) {
        throw Error("env_step: action " + std::to_string(action) + " out of range for " +
                    std::string(env_kind_name(state.kind)));
    }
    StepResult r = std::visit(
        [&](auto& s) {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, PongState>) {
                return step_pong(s, action);
            } else {
                return step_chase(s, action);
            }
        },
        state.data);
    r.frame = render(state);
    return r;
}

Frame render(const EnvState& state) {
    Frame f;
    if (const auto* p = std::get_if<PongState>(&state.data)) {
        for (int i = 0; i < pong::kPaddleHeight; ++i) f.at(p->paddle_top + i, pong::kPaddleCol) = 1.0f;
        f.at(p->ball_row, p->ball_col) = 1.0f;
    } else {
        const auto& c = std::get<ChaseState>(state.data);
        f.at(c.agent_row, c.agent_col) = 1.0f;
        f.at(c.pellet_row, c.pellet_col) = 1.0f;
    }
    return f;
}

}  // namespace fg::env
