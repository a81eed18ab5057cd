#include <doctest.h>

#include <cmath>

#include "fg/detect/detect.hpp"
#include "fg/error.hpp"
#include "helpers.hpp"

using namespace fg;
using namespace fg::detect;

namespace {

ActionDist random_dist(nn::Rng& rng, std::size_t n) {
    ActionDist d;
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        d.probs.push_back(rng.uniform() + 1e-3);
        s += d.probs.back();
    }
    for (auto& p : d.probs) p /= s;
    return d;
}

foresight::History random_history(nn::Rng& rng) {
    foresight::History h;
    for (auto& f : h.frames) f = fgt::random_frame(rng);
    for (auto& a : h.actions) a = rng.below(3);
    return h;
}

class FixedPredictor final : public foresight::FramePredictor {
public:
    explicit FixedPredictor(Frame f) : f_(f) {}
    Frame predict(const foresight::History&) const override { return f_; }

private:
    Frame f_;
};

}  // namespace

TEST_CASE("distance metrics on hand examples") {
    const ActionDist p{{0.5, 0.5, 0.0}}, q{{0.0, 0.5, 0.5}};
    CHECK(action_dist_distance(p, q, Metric::l1) == doctest::Approx(1.0));
    CHECK(action_dist_distance(p, q, Metric::chi2) == doctest::Approx(0.25 / 0.5 + 0.25 / 0.5));
    CHECK(action_dist_distance(p, q, Metric::histint) == doctest::Approx(0.5));
    const ActionDist a{{1.0, 0.0}}, b{{0.0, 1.0}};
    CHECK(action_dist_distance(a, b, Metric::l1) == doctest::Approx(2.0));
    CHECK(action_dist_distance(a, b, Metric::chi2) == doctest::Approx(2.0));
    CHECK(action_dist_distance(a, b, Metric::histint) == doctest::Approx(1.0));
    CHECK_THROWS_AS(action_dist_distance(a, p, Metric::l1), Error);
    CHECK_THROWS_AS(parse_metric("kl"), Error);
}

TEST_CASE("distance metrics are symmetric, bounded and zero on identical inputs") {
    nn::Rng rng(1);
    for (int i = 0; i < 500; ++i) {
        const std::size_t n = 2 + rng.below(4);
        const auto p = random_dist(rng, n), q = random_dist(rng, n);
        for (auto m : {Metric::l1, Metric::chi2, Metric::histint}) {
            const double d = action_dist_distance(p, q, m);
            CHECK(d >= 0.0);
            CHECK(d == doctest::Approx(action_dist_distance(q, p, m)));
            CHECK(action_dist_distance(p, p, m) == doctest::Approx(0.0));
            CHECK(d <= (m == Metric::histint ? 1.0 : 2.0) + 1e-12);
        }
        // histogram intersection distance is half the L1 distance on normalised inputs
        CHECK(action_dist_distance(p, q, Metric::histint) == doctest::Approx(0.5 * action_dist_distance(p, q, Metric::l1)));
    }
}

TEST_CASE("median filter cases") {
    Frame c;
    c.px.fill(0.7f);
    CHECK(median_filter(c) == c);

    Frame z;
    z.px.fill(0.0f);
    CHECK(median_filter(z) == z);

    // window {0,0,1,1} sits on a vertical edge
    Frame edge;
    edge.px.fill(0.0f);
    for (int r = 0; r < env::kSide; ++r) {
        for (int col = 8; col < env::kSide; ++col) edge.at(r, col) = 1.0f;
    }
    const auto m = median_filter(edge);
    CHECK(m.at(3, 7) == 0.5f);
    CHECK(m.at(3, 6) == 0.0f);
    CHECK(m.at(3, 8) == 1.0f);

    Frame impulse = z;
    impulse.at(5, 5) = 1.0f;
    CHECK(median_filter(impulse) == z);

    // bottom-right corner replicates itself
    Frame corner = z;
    corner.at(15, 15) = 1.0f;
    CHECK(median_filter(corner).at(15, 15) == 1.0f);
}

TEST_CASE("median filter output stays in the pixel range") {
    nn::Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const auto f = fgt::random_frame(rng);
        const auto m = median_filter(f);
        for (std::size_t p = 0; p < env::kPixels; ++p) {
            CHECK(m.px[p] >= 0.0f);
            CHECK(m.px[p] <= 1.0f);
        }
    }
}

TEST_CASE("foresight scores zero when the prediction equals the observation") {
    const auto policy = fgt::random_policy(3);
    nn::Rng rng(4);
    for (int i = 0; i < 20; ++i) {
        const auto h = random_history(rng);
        const auto x = fgt::random_frame(rng);
        foresight::OraclePredictor oracle;
        oracle.observe_pristine(x);
        Detector d({}, {&policy, &oracle, nullptr});
        const auto v = d.score(h, x);
        CHECK(v.score == 0.0);
        CHECK_FALSE(v.flagged);
    }
}

TEST_CASE("foresight flags iff the score exceeds the threshold") {
    const auto policy = fgt::random_policy(5);
    nn::Rng rng(6);
    for (int i = 0; i < 100; ++i) {
        const auto h = random_history(rng);
        FixedPredictor pred(fgt::random_frame(rng));
        DetectorConfig cfg;
        cfg.threshold = rng.uniform(0.0, 0.05);
        cfg.metric = static_cast<Metric>(i % 3);
        Detector d(cfg, {&policy, &pred, nullptr});
        const auto v = d.score(h, fgt::random_frame(rng));
        CHECK(v.flagged == (v.score > cfg.threshold));
        CHECK(v.score >= 0.0);
    }
}

TEST_CASE("the foresight suggestion never depends on the current observation") {
    const auto policy = fgt::random_policy(7);
    nn::Rng rng(8);
    const auto h = random_history(rng);
    FixedPredictor pred(fgt::random_frame(rng));
    Detector d({}, {&policy, &pred, nullptr});
    const auto a = d.score(h, fgt::random_frame(rng));
    const auto b = d.score(h, fgt::random_frame(rng));
    CHECK(a.suggested.probs == b.suggested.probs);
}

TEST_CASE("squeeze scores zero on a frame the filter leaves unchanged") {
    const auto policy = fgt::random_policy(9);
    nn::Rng rng(10);
    DetectorConfig cfg;
    cfg.kind = DetectorKind::squeeze;
    Detector d(cfg, {&policy, nullptr, nullptr});
    Frame c;
    c.px.fill(0.4f);
    CHECK(d.score(random_history(rng), c).score == 0.0);
}

TEST_CASE("dropout scores are reproducible in the seed and the network keeps its weights") {
    const auto policy = fgt::random_policy(11, "affine:16,relu");
    DetectorConfig cfg;
    cfg.kind = DetectorKind::dropout;
    cfg.dropout_passes = 10;
    nn::Rng rng(12);
    const auto h = random_history(rng);
    const auto x = fgt::random_frame(rng);
    Detector a(cfg, {&policy, nullptr, nullptr}, 5), b(cfg, {&policy, nullptr, nullptr}, 5);
    const auto va = a.score(h, x), vb = b.score(h, x);
    CHECK(va.score == vb.score);
    CHECK(va.score > 0.0);
    double total = 0;
    for (double p : va.suggested.probs) total += p;
    CHECK(total == doctest::Approx(1.0));
    CHECK(a.dropout_network().layer_count() == policy.q_network.layer_count() + 1);
    CHECK(a.dropout_network().param_count() == policy.q_network.param_count());

    cfg.dropout_passes = 1;
    CHECK_THROWS_AS(Detector(cfg, {&policy, nullptr, nullptr}), Error);
}

TEST_CASE("detectors refuse missing models") {
    const auto policy = fgt::random_policy(13);
    CHECK_THROWS_AS(Detector({}, {&policy, nullptr, nullptr}), Error);
    DetectorConfig ae;
    ae.kind = DetectorKind::autoencoder;
    CHECK_THROWS_AS(Detector(ae, {&policy, nullptr, nullptr}), Error);
    DetectorConfig neg;
    neg.threshold = -1;
    CHECK_THROWS_AS(neg.validate(), Error);
    CHECK_THROWS_AS(parse_detector_kind("svm"), Error);
}

TEST_CASE("f1 threshold separates perfectly separable scores") {
    const std::vector<double> s{0.9, 0.8, 0.1, 0.05};
    const std::vector<bool> l{true, true, false, false};
    const double h = f1_threshold(s, l);
    CHECK(h == doctest::Approx(0.45));
    CHECK_THROWS_AS(f1_threshold(s, {false, false, false, false}), Error);
}

TEST_CASE("f1 threshold maximises F1 among candidate cuts") {
    nn::Rng rng(14);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 5 + rng.below(30);
        std::vector<double> s(n);
        std::vector<bool> l(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = std::round(rng.uniform() * 10) / 10;
            l[i] = rng.bernoulli(0.4);
        }
        l[0] = true;
        auto f1_at = [&](double h) {
            double tp = 0, fp = 0, pos = 0;
            for (std::size_t i = 0; i < n; ++i) {
                pos += l[i];
                if (s[i] > h) (l[i] ? tp : fp) += 1;
            }
            return 2 * tp / (tp + fp + pos);
        };
        const double chosen = f1_at(f1_threshold(s, l));
        double best = f1_at(0.0);
        std::vector<double> u = s;
        std::sort(u.begin(), u.end());
        for (std::size_t i = 0; i + 1 < u.size(); ++i) best = std::max(best, f1_at(0.5 * (u[i] + u[i + 1])));
        CHECK(chosen == doctest::Approx(best));
    }
}
