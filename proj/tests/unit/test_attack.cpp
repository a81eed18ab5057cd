#include <doctest.h>

#include <cmath>
#include <cstring>

#include "fg/attack/attack.hpp"
#include "fg/error.hpp"
#include "helpers.hpp"

using namespace fg;
using namespace fg::attack;

namespace {

constexpr std::size_t kNewest = 3 * env::kPixels;

// Q = [w * x_p, 0.5, 0] on pixel p of the newest frame (mean 0.1 subtracted).
policy::PolicyModel single_pixel_policy(std::size_t p, float w) {
    auto m = fgt::random_policy(1, "affine:4,relu");
    std::vector<std::unique_ptr<nn::Layer>> layers;
    auto a = std::make_unique<nn::Affine>(4 * env::kPixels, 3);
    a->weight().fill(0.0f);
    a->bias().fill(0.0f);
    a->weight()[kNewest + p] = w;
    a->bias()[1] = 0.5f;
    layers.push_back(std::move(a));
    m.q_network = nn::Network({4, 16, 16}, std::move(layers));
    return m;
}

double ce_loss(const policy::PolicyModel& m, const FrameStack& s, std::size_t label) {
    const auto d = policy::action_distribution(m, s);
    return -std::log(d.probs[label]);
}

void check_outcome(const FrameStack& s, const AttackOutcome& o, double eps) {
    double linf = 0;
    for (std::size_t i = 0; i < env::kPixels; ++i) {
        CHECK(o.adversarial.px[i] >= 0.0f);
        CHECK(o.adversarial.px[i] <= 1.0f);
        linf = std::max(linf, std::abs(static_cast<double>(o.adversarial.px[i]) - s.newest().px[i]));
    }
    CHECK(linf <= eps + 1e-6);
    CHECK(o.delta_linf == doctest::Approx(linf));
}

}  // namespace

TEST_CASE("a vanishing budget leaves the frame in place and fails") {
    const auto m = fgt::random_policy(2);
    nn::Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto s = fgt::random_stack(rng);
        const auto o = fgsm(m, s, 1e-12);
        for (std::size_t p = 0; p < env::kPixels; ++p) CHECK(std::abs(o.adversarial.px[p] - s.newest().px[p]) <= 1e-6f);
        CHECK_FALSE(o.success);
    }
}

TEST_CASE("fgsm moves a pixel with positive loss gradient up by exactly epsilon") {
    const std::size_t p = 37;
    const auto m = single_pixel_policy(p, 2.0f);
    Frame x;
    x.px.fill(0.3f);
    const auto s = FrameStack::filled(x);
    const std::size_t label = policy::greedy_action(m, s);
    CHECK(label == 1);
    // finite-difference sign of dJ/dx_p
    Frame up = x, down = x;
    up.px[p] += 1e-3f;
    down.px[p] -= 1e-3f;
    const double slope = ce_loss(m, s.with_newest(up), label) - ce_loss(m, s.with_newest(down), label);
    REQUIRE(slope > 0);
    const auto o = fgsm(m, s, 0.01);
    CHECK(o.adversarial.px[p] == doctest::Approx(0.31f).epsilon(1e-6));
    for (std::size_t i = 0; i < env::kPixels; ++i) {
        if (i != p) CHECK(o.adversarial.px[i] == x.px[i]);
    }

    Frame top = x;
    top.px[p] = 1.0f;
    const auto s2 = FrameStack::filled(x).with_newest(top);
    const auto o2 = fgsm(m, s2, 0.01, 1);
    CHECK(o2.adversarial.px[p] == 1.0f);
}

TEST_CASE("bim with one step of size epsilon is bit-identical to fgsm") {
    nn::Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const auto m = fgt::random_policy(100 + i % 5);
        const auto s = fgt::random_stack(rng);
        const double eps = rng.uniform(1e-4, 0.1);
        const auto a = fgsm(m, s, eps), b = bim(m, s, eps, eps, 1);
        CHECK(std::memcmp(a.adversarial.px.data(), b.adversarial.px.data(), sizeof(float) * env::kPixels) == 0);
        CHECK(a.success == b.success);
    }
}

TEST_CASE("every attack respects the budget, the pixel range and the success definition") {
    nn::Rng rng(5);
    const AttackKind kinds[] = {AttackKind::fgsm, AttackKind::bim, AttackKind::cw_lite};
    for (int i = 0; i < 600; ++i) {
        const auto m = fgt::random_policy(200 + i % 7, i % 2 ? "affine:16,relu" : "conv:4:4:2:1,relu,affine:8,relu");
        FrameStack s = fgt::random_stack(rng);
        if (i % 3 == 0) s = s.with_newest(fgt::sparse_frame(rng, 0.2));
        AttackConfig c;
        c.kind = kinds[i % 3];
        c.epsilon = rng.uniform(1e-3, 0.1);
        c.alpha = i % 4 == 0 ? 0.0 : rng.uniform(1e-4, 0.05);
        c.iterations = 1 + rng.below(10);
        const auto o = craft(m, s, c);
        check_outcome(s, o, c.epsilon);
        CHECK(o.success == (policy::greedy_action(m, s.with_newest(o.adversarial)) != policy::greedy_action(m, s)));
        CHECK(o.iterations_used >= 1);
        CHECK(o.iterations_used <= (c.kind == AttackKind::fgsm ? 1 : c.iterations));
        const auto again = craft(m, s, c);
        CHECK(again.adversarial == o.adversarial);
    }
}

TEST_CASE("cw-lite stops at once when the label is already beaten") {
    const auto m = single_pixel_policy(5, 1.0f);
    Frame x;
    x.px.fill(0.2f);
    const auto s = FrameStack::filled(x);
    // Q = [0.1, 0.5, 0]: label 0 already trails action 1 by more than kappa.
    const auto o = cw_linf_lite(m, s, 0.05, 0.01, 10, 0);
    CHECK(o.iterations_used == 1);
    CHECK(o.success);
    CHECK(o.adversarial == x);
}

TEST_CASE("cw-lite descends the margin") {
    const auto m = single_pixel_policy(5, 10.0f);
    Frame x;
    x.px.fill(0.13f);
    // Q0 = 10 * (x - 0.1) = 0.3 < Q1 = 0.5: pushing pixel 5 up overtakes action 1.
    const auto s = FrameStack::filled(x);
    const auto o = cw_linf_lite(m, s, 0.1, 0.01, 10);
    CHECK(o.success);
    CHECK(o.adversarial.px[5] > x.px[5]);
    CHECK(policy::greedy_action(m, s.with_newest(o.adversarial)) == 0);
}

TEST_CASE("bad attack parameters are rejected") {
    const auto m = fgt::random_policy(6);
    nn::Rng rng(7);
    const auto s = fgt::random_stack(rng);
    CHECK_THROWS_AS(fgsm(m, s, 0.0), Error);
    CHECK_THROWS_AS(fgsm(m, s, 0.2), Error);
    CHECK_THROWS_AS(bim(m, s, 0.01, 0.0, 3), Error);
    CHECK_THROWS_AS(bim(m, s, 0.01, 0.01, 0), Error);
    CHECK_THROWS_AS(fgsm(m, s, 0.01, 7), Error);
    CHECK_THROWS_AS(parse_attack_kind("pgd"), Error);
    AttackConfig c;
    c.alpha = -1;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK(c.step_size() == doctest::Approx(0.0025));
}

TEST_CASE("schedule masks") {
    ScheduleConfig c;
    c.ratio = 0.0;
    for (bool b : schedule_mask(300, c, 1).attacked) CHECK_FALSE(b);
    c.ratio = 1.0;
    for (bool b : schedule_mask(300, c, 1).attacked) CHECK(b);
    c.ratio = 0.3;
    const auto m = schedule_mask(20000, c, 2);
    double n = 0;
    for (bool b : m.attacked) n += b;
    CHECK(std::abs(n / 20000 - 0.3) < 4 * std::sqrt(0.3 * 0.7 / 20000));
    CHECK(schedule_mask(500, c, 9).attacked == schedule_mask(500, c, 9).attacked);
    CHECK_FALSE(m.at(999999));

    ScheduleConfig p;
    p.mode = ScheduleMode::periodic;
    p.period = 100;
    p.width = 50;
    const auto pm = schedule_mask(200, p, 0);
    for (std::size_t t = 0; t < 200; ++t) CHECK(pm.at(t) == ((t < 50) || (t >= 100 && t < 150)));
    p.width = 101;
    CHECK_THROWS_AS(schedule_mask(10, p, 0), Error);
    CHECK_THROWS_AS(schedule_mask(0, c, 0), Error);
}
