#include "fg/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fg/error.hpp"

namespace fg::eval {
namespace {

std::vector<std::size_t> ranked(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

Labeled label_positives(const guard::EpisodeLog& log) {
    Labeled out;
    for (const auto& s : log.steps) {
        if (!s.scored) continue;
        if (s.attack_success && !s.attacked) throw Error("label_positives: successful attack on an unattacked step");
        if (!(s.score >= 0.0)) throw Error("label_positives: invalid score");
        out.scores.push_back(s.score);
        out.labels.push_back(s.attacked && s.attack_success);
        out.steps.push_back(s.t);
    }
    return out;
}

PRCurve pr_curve_ap(std::span<const double> scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw Error("pr_curve: scores and labels differ in length");
    for (double s : scores) {
        if (!std::isfinite(s)) throw Error("pr_curve: non-finite score");
    }
    const auto order = ranked(scores);
    const std::size_t positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));

    PRCurve curve;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const double s = scores[order[i]];
        if (i == 0 || s < scores[order[i - 1]]) {
            PRPoint p;
            p.threshold = s;
            p.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
            p.recall = positives == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(positives);
            curve.points.push_back(p);
        }
        (labels[order[i]] ? tp : fp) += 1;
    }
    std::reverse(curve.points.begin(), curve.points.end());

    if (positives > 0) {
        double sum = 0.0;
        tp = 0;
        for (std::size_t r = 0; r < order.size(); ++r) {
            if (!labels[order[r]]) continue;
            ++tp;
            sum += static_cast<double>(tp) / static_cast<double>(r + 1);
        }
        curve.average_precision = sum / static_cast<double>(positives);
    }
    return curve;
}

std::optional<double> mean_ap(const std::vector<PRCurve>& curves) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : curves) {
        if (!c.average_precision) continue;
        sum += *c.average_precision;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

PRBand pr_band(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<bool>>& labels) {
    if (scores.size() != labels.size()) throw Error("pr_band: trial count mismatch");
    PRBand band;
    for (std::size_t g = 0; g < kRecallGrid; ++g) band.recall.push_back(static_cast<double>(g) / (kRecallGrid - 1));
    std::vector<std::vector<double>> rows;
    for (std::size_t trial = 0; trial < scores.size(); ++trial) {
        const auto& s = scores[trial];
        const auto& l = labels[trial];
        if (s.size() != l.size()) throw Error("pr_band: scores and labels differ in length");
        const auto positives = static_cast<double>(std::count(l.begin(), l.end(), true));
        if (positives == 0) continue;
        std::vector<std::pair<double, double>> pts;  // (recall, precision) at each positive rank
        const auto order = ranked(s);
        double tp = 0;
        for (std::size_t r = 0; r < order.size(); ++r) {
            if (!l[order[r]]) continue;
            tp += 1;
            pts.emplace_back(tp / positives, tp / static_cast<double>(r + 1));
        }
        pts.insert(pts.begin(), {0.0, pts.front().second});
        std::vector<double> row;
        std::size_t k = 0;
        for (double r : band.recall) {
            while (k + 1 < pts.size() && pts[k + 1].first < r) ++k;
            if (k + 1 >= pts.size()) {
                row.push_back(pts.back().second);
                continue;
            }
            const auto [r0, p0] = pts[k];
            const auto [r1, p1] = pts[k + 1];
            row.push_back(r1 > r0 ? p0 + (p1 - p0) * (r - r0) / (r1 - r0) : p1);
        }
        rows.push_back(std::move(row));
    }
    band.mean.assign(kRecallGrid, 0.0);
    band.stddev.assign(kRecallGrid, 0.0);
    if (rows.empty()) return band;
    const auto n = static_cast<double>(rows.size());
    for (std::size_t g = 0; g < kRecallGrid; ++g) {
        double m = 0.0;
        for (const auto& row : rows) m += row[g];
        m /= n;
        double var = 0.0;
        for (const auto& row : rows) var += (row[g] - m) * (row[g] - m);
        band.mean[g] = m;
        band.stddev[g] = std::sqrt(var / n);
    }
    return band;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error("spearman: length mismatch");
    if (x.size() < 2) throw Error("spearman: need at least two points");
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace fg::eval
