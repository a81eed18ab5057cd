#include <doctest.h>

#include <sstream>

#include "fg/error.hpp"
#include "fg/guard/guard.hpp"
#include "helpers.hpp"

using namespace fg;
using namespace fg::guard;

namespace {

GuardConfig attacked_config(DefenseKind defense, double ratio) {
    GuardConfig c;
    c.attack.kind = attack::AttackKind::fgsm;
    c.attack.epsilon = 0.05;
    c.schedule.ratio = ratio;
    c.defense = defense;
    if (defense != DefenseKind::none) {
        detect::DetectorConfig d;
        d.kind = defense == DefenseKind::squeeze_suggest ? detect::DetectorKind::squeeze : detect::DetectorKind::foresight;
        d.threshold = 0.0;
        c.detector = d;
    }
    return c;
}

std::vector<std::size_t> actions_of(const EpisodeLog& log) {
    std::vector<std::size_t> a;
    for (const auto& s : log.steps) a.push_back(s.action_taken);
    return a;
}

bool same_log(const EpisodeLog& a, const EpisodeLog& b) {
    if (a.seed != b.seed || a.total_return != b.total_return || a.config != b.config) return false;
    if (a.steps.size() != b.steps.size()) return false;
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        const auto &x = a.steps[i], &y = b.steps[i];
        if (x.t != y.t || x.attacked != y.attacked || x.attack_success != y.attack_success || x.scored != y.scored ||
            x.score != y.score || x.flagged != y.flagged || x.action_taken != y.action_taken ||
            x.action_clean != y.action_clean || x.reward != y.reward)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("without attack or defense the agent acts greedily on clean frames") {
    const auto policy = fgt::random_policy(1);
    GuardModels m;
    m.policy = &policy;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto log = run_episode(attacked_config(DefenseKind::none, 0.0), m, seed);
        for (const auto& s : log.steps) {
            CHECK(s.action_taken == s.action_clean);
            CHECK_FALSE(s.attacked);
            CHECK_FALSE(s.scored);
        }
        double ret = 0;
        for (const auto& s : log.steps) ret += s.reward;
        CHECK(ret == log.total_return);
    }
}

TEST_CASE("detect_only never changes the executed actions") {
    const auto policy = fgt::random_policy(2);
    GuardModels m;
    m.policy = &policy;
    m.oracle_predictor = true;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto plain = run_episode(attacked_config(DefenseKind::none, 0.5), m, seed);
        const auto watched = run_episode(attacked_config(DefenseKind::detect_only, 0.5), m, seed);
        CHECK(actions_of(plain) == actions_of(watched));
        CHECK(plain.total_return == watched.total_return);
        for (std::size_t i = 0; i < watched.steps.size(); ++i) CHECK(watched.steps[i].scored == (i >= 4));
    }
}

TEST_CASE("a flagged step under foresight_suggest follows the suggestion") {
    const auto policy = fgt::random_policy(3);
    GuardModels m;
    m.policy = &policy;
    m.oracle_predictor = true;
    std::size_t flagged = 0;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto log = run_episode(attacked_config(DefenseKind::foresight_suggest, 1.0), m, seed);
        for (const auto& s : log.steps) {
            // the oracle suggestion is the policy on the pristine frame
            if (s.flagged) {
                CHECK(s.action_taken == s.action_clean);
                ++flagged;
            }
        }
    }
    CHECK(flagged > 0);
}

TEST_CASE("the loop keeps the observed frames and executed actions as history") {
    const auto policy = fgt::random_policy(4);
    GuardModels m;
    m.policy = &policy;
    m.oracle_predictor = true;
    const auto cfg = attacked_config(DefenseKind::random_on_flag, 1.0);
    nn::Rng rng(5);
    const auto first = fgt::sparse_frame(rng);
    GuardLoop loop(cfg, m, 7, first);
    for (const auto& f : loop.history().frames) CHECK(f == first);
    for (auto a : loop.history().actions) CHECK(a == env::noop_action(env::EnvKind::pong_lite));

    std::vector<env::Frame> observed;
    std::vector<std::size_t> taken;
    for (int t = 0; t < 12; ++t) {
        const auto pristine = fgt::sparse_frame(rng);
        auto obs = pristine;
        obs.px[rng.below(env::kPixels)] = 0.5f;
        const auto rec = loop.protected_step(t, obs, pristine, true, true);
        CHECK(rec.action_taken < 3);
        observed.push_back(obs);
        taken.push_back(rec.action_taken);
        if (t >= 3) {
            for (std::size_t k = 0; k < 4; ++k) {
                CHECK(loop.history().frames[k] == observed[t - 3 + k]);
                CHECK(loop.history().actions[k] == taken[t - 3 + k]);
            }
        }
    }
}

TEST_CASE("episodes are deterministic and threads do not change results") {
    const auto policy = fgt::random_policy(6);
    GuardModels m;
    m.policy = &policy;
    m.oracle_predictor = true;
    const auto cfg = attacked_config(DefenseKind::random_on_flag, 0.4);
    const std::vector<std::uint64_t> seeds{11, 12, 13};
    const auto a = run_trials(cfg, m, seeds, 1);
    const auto b = run_trials(cfg, m, seeds, 3);
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(same_log(a[i], b[i]));
}

TEST_CASE("episode logs round-trip through their text form") {
    const auto policy = fgt::random_policy(7);
    GuardModels m;
    m.policy = &policy;
    m.oracle_predictor = true;
    const auto log = run_episode(attacked_config(DefenseKind::detect_only, 0.5), m, 3);
    std::stringstream ss;
    write_log(ss, log);
    const auto back = read_log(ss);
    CHECK(same_log(log, back));
    CHECK(back.config.at("defense") == "detect_only");

    std::stringstream cut(ss.str().substr(0, ss.str().find('\n') + 1));
    CHECK_THROWS_AS(read_log(cut), FileError);
    std::stringstream empty;
    CHECK_THROWS_AS(read_log(empty), FileError);
}

TEST_CASE("guard configurations are validated") {
    const auto policy = fgt::random_policy(8);
    GuardModels m;
    m.policy = &policy;
    GuardConfig c = attacked_config(DefenseKind::none, 0.5);
    c.defense = DefenseKind::foresight_suggest;
    CHECK_THROWS_AS(c.validate(), Error);
    c = attacked_config(DefenseKind::squeeze_suggest, 0.5);
    c.detector->kind = detect::DetectorKind::foresight;
    CHECK_THROWS_AS(c.validate(), Error);
    // foresight without a predictor
    CHECK_THROWS_AS(run_episode(attacked_config(DefenseKind::detect_only, 0.5), m, 1), Error);
    c = attacked_config(DefenseKind::none, 0.5);
    c.env = env::EnvKind::grid_chase;
    CHECK_THROWS_AS(run_episode(c, m, 1), Error);
    CHECK_THROWS_AS(parse_defense_kind("block"), Error);
}
