#include <doctest.h>

#include <sstream>

#include "fg/env/env.hpp"
#include "fg/env/trajectory.hpp"
#include "fg/error.hpp"

using namespace fg;
using namespace fg::env;

namespace {

EnvState pong_state(int row, int col, int vr, int vc, int paddle = 6) {
    EnvState s;
    s.kind = EnvKind::pong_lite;
    PongState p;
    p.ball_row = row;
    p.ball_col = col;
    p.vel_row = vr;
    p.vel_col = vc;
    p.paddle_top = paddle;
    s.data = p;
    return s;
}

bool binary_frame(const Frame& f) {
    for (float p : f.px) {
        if (p != 0.0f && p != 1.0f) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("reset is deterministic in the seed") {
    for (auto kind : {EnvKind::pong_lite, EnvKind::grid_chase}) {
        const auto a = env_reset(kind, 42), b = env_reset(kind, 42);
        CHECK(a.frame == b.frame);
    }
    bool differs = false;
    for (std::uint64_t s = 0; s < 20; ++s) differs |= !(env_reset(EnvKind::pong_lite, s).frame == env_reset(EnvKind::pong_lite, 0).frame);
    CHECK(differs);
}

TEST_CASE("pong reset draws the paddle at rows 6 to 8 of column 1") {
    const auto r = env_reset(EnvKind::pong_lite, 7);
    for (int row = 6; row <= 8; ++row) CHECK(r.frame.at(row, 1) == 1.0f);
    CHECK(r.frame.at(5, 1) == 0.0f);
    CHECK(r.frame.at(9, 1) == 0.0f);
}

TEST_CASE("chase reset places the pellet at the first draw of the seeded stream") {
    for (std::uint64_t seed : {1ULL, 2ULL, 99ULL, 123456789ULL}) {
        nn::Rng rng(seed);
        int cell;
        do {
            cell = static_cast<int>(rng.below(256));
        } while (cell == 8 * 16 + 8);
        const auto r = env_reset(EnvKind::grid_chase, seed);
        const auto& c = std::get<ChaseState>(r.state.data);
        CHECK(c.pellet_row == cell / 16);
        CHECK(c.pellet_col == cell % 16);
        CHECK(r.frame.at(cell / 16, cell % 16) == 1.0f);
        CHECK(r.frame.at(8, 8) == 1.0f);
    }
}

TEST_CASE("pong ball moves diagonally and reflects off the bottom wall") {
    auto s = pong_state(8, 8, 1, 1);
    env_step(s, pong::kNoop);
    auto p = std::get<PongState>(s.data);
    CHECK(p.ball_row == 9);
    CHECK(p.ball_col == 9);

    s = pong_state(14, 8, 1, 1);
    env_step(s, pong::kNoop);
    p = std::get<PongState>(s.data);
    CHECK(p.vel_row == -1);
    CHECK(p.vel_col == 1);
    CHECK(p.ball_row == 15);
    env_step(s, pong::kNoop);
    CHECK(std::get<PongState>(s.data).ball_row == 14);
}

TEST_CASE("pong paddle hit rewards and a miss ends the episode") {
    auto s = pong_state(7, 2, 1, -1, 6);
    auto r = env_step(s, pong::kNoop);  // ball to (8, 1), paddle covers 6..8
    CHECK(r.reward == 1.0);
    CHECK_FALSE(r.done);
    CHECK(std::get<PongState>(s.data).vel_col == 1);

    s = pong_state(2, 2, -1, -1, 10);
    r = env_step(s, pong::kNoop);
    CHECK(r.reward == -1.0);
    CHECK(r.done);
    CHECK_THROWS_AS(env_step(s, pong::kNoop), Error);
}

TEST_CASE("chase pellet pickup rewards and respawns from the stream") {
    EnvState s;
    s.kind = EnvKind::grid_chase;
    ChaseState c;
    c.agent_row = 8;
    c.agent_col = 8;
    c.pellet_row = 8;
    c.pellet_col = 9;
    c.pellet_seed = 77;
    c.pellet_draws = 1;
    s.data = c;
    const auto r = env_step(s, chase::kRight);
    CHECK(r.reward == 1.0);

    nn::Rng rng(77);
    rng.below(256);
    int cell;
    do {
        cell = static_cast<int>(rng.below(256));
    } while (cell == 8 * 16 + 9);
    const auto& after = std::get<ChaseState>(s.data);
    CHECK(after.pellet_row == cell / 16);
    CHECK(after.pellet_col == cell % 16);
}

TEST_CASE("out-of-range actions are rejected") {
    auto r = env_reset(EnvKind::pong_lite, 1);
    CHECK_THROWS_AS(env_step(r.state, 3), Error);
    auto c = env_reset(EnvKind::grid_chase, 1);
    CHECK_THROWS_AS(env_step(c.state, 5), Error);
}

TEST_CASE("random play keeps every invariant") {
    nn::Rng actions(5);
    for (auto kind : {EnvKind::pong_lite, EnvKind::grid_chase}) {
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            auto r = env_reset(kind, seed);
            CHECK(binary_frame(r.frame));
            double ret = 0;
            int hits = 0, misses = 0;
            while (!r.state.done()) {
                const auto step = env_step(r.state, actions.below(action_count(kind)));
                CHECK(binary_frame(step.frame));
                ret += step.reward;
                if (kind == EnvKind::pong_lite) {
                    const auto& p = std::get<PongState>(r.state.data);
                    CHECK((p.ball_row >= 0 && p.ball_row < kSide && p.ball_col >= 0 && p.ball_col < kSide));
                    CHECK(std::abs(p.vel_row) == 1);
                    CHECK(std::abs(p.vel_col) == 1);
                    if (step.reward > 0) ++hits;
                    if (step.reward < 0) {
                        ++misses;
                        CHECK(step.done);
                    }
                }
            }
            CHECK(r.state.steps() <= kEpisodeCap);
            if (kind == EnvKind::pong_lite) CHECK(ret == hits - misses);
        }
    }
}

TEST_CASE("same seed and actions replay bit-identical frames") {
    for (auto kind : {EnvKind::pong_lite, EnvKind::grid_chase}) {
        nn::Rng pick(9);
        std::vector<std::size_t> acts(200);
        for (auto& a : acts) a = pick.below(action_count(kind));
        auto run = [&] {
            std::vector<Frame> frames;
            auto r = env_reset(kind, 31);
            frames.push_back(r.frame);
            for (auto a : acts) {
                if (r.state.done()) break;
                frames.push_back(env_step(r.state, a).frame);
            }
            return frames;
        };
        CHECK(run() == run());
    }
}

TEST_CASE("trajectory records round-trip") {
    CHECK(base64_encode(reinterpret_cast<const std::uint8_t*>("foobar"), 6) == "Zm9vYmFy");
    CHECK(base64_encode(reinterpret_cast<const std::uint8_t*>("fo"), 2) == "Zm8=");
    const auto bytes = base64_decode("Zm9vYg==");
    CHECK(std::string(bytes.begin(), bytes.end()) == "foob");

    auto r = env_reset(EnvKind::grid_chase, 3);
    std::vector<TrajectoryStep> steps;
    steps.push_back({0, 1, 0.0, false, r.frame});
    const auto s = env_step(r.state, 1);
    steps.push_back({1, -1, s.reward, s.done, s.frame});
    std::stringstream ss;
    write_trajectory(ss, steps);
    const auto back = read_trajectory(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].frame == steps[0].frame);
    CHECK(back[1].action == -1);
    CHECK(back[1].t == 1);
    CHECK_THROWS_AS(parse_trajectory_line("{not json"), Error);
}
