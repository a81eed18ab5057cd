// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance <work-dir>
// FG_ACCEPT_REUSE=1 keeps finished quickstart runs found in <work-dir>.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fg/attack/attack.hpp"
#include "fg/eval/metrics.hpp"
#include "fg/eval/report.hpp"
#include "fg/guard/guard.hpp"
#include "fg/nn/network.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Result {
    int id = 0;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

fs::path g_work;
std::string g_bin = FG_CLI_PATH;
std::string g_cfg = FG_CONFIG_DIR;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int shell(const std::string& cmd, const fs::path& log) {
    fs::create_directories(log.parent_path());
    const std::string full = cmd + " > '" + log.string() + "' 2>&1";
    const int rc = std::system(full.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void cli(const std::string& args, const fs::path& log) {
    const int rc = shell(g_bin + " " + args, log);
    if (rc != 0) throw std::runtime_error("command failed (" + std::to_string(rc) + "): " + args + "; see " + log.string());
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::runtime_error("missing " + p.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// Spearman correlation from first principles: Pearson on average ranks.
double rank_correlation(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double less = 0, equal = 0;
            for (double w : v) {
                less += w < v[i];
                equal += w == v[i];
            }
            r[i] = less + (equal + 1) / 2;
        }
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double mx = mean(rx), my = mean(ry);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

fg::policy::PolicyModel random_policy(std::uint64_t seed, const std::string& hidden) {
    fg::policy::PolicyModel p;
    p.env = fg::env::EnvKind::pong_lite;
    p.action_count = 3;
    p.stats.mean.fill(0.05f);
    fg::nn::Rng rng(seed);
    p.q_network = fg::nn::build_network({4, 16, 16}, hidden + ",affine:3", rng);
    return p;
}

Result gradient_oracle() {
    const auto t0 = Clock::now();
    fg::nn::Rng rng(20240501);
    double worst = 0;
    std::size_t nets = 0;
    for (int round = 0; round < 2; ++round) {
        for (const auto& [shape, spec] : fgt::gradcheck_architectures()) {
            const auto net = fg::nn::build_network(shape, spec, rng);
            const double e = fgt::random_gradient_error(net, rng);
            worst = std::isnan(e) ? 1.0 : std::max(worst, e);
            ++nets;
        }
    }
    const double s = since(t0);
    return {1, nets >= 20 && worst < 1e-3 && s < 10,
            std::to_string(nets) + " networks, max relative error " + fmt("%.2e", worst) + " (< 1e-3)", s};
}

Result attack_invariants() {
    const auto t0 = Clock::now();
    using namespace fg::attack;
    std::vector<fg::policy::PolicyModel> pool;
    const char* hidden[] = {"affine:16,relu", "affine:32,relu,affine:16,relu", "conv:4:4:2:1,relu,affine:16,relu"};
    for (std::uint64_t i = 0; i < 6; ++i) pool.push_back(random_policy(100 + i, hidden[i % 3]));
    fg::nn::Rng rng(7);
    std::size_t bound_bad = 0, range_bad = 0, fgsm_bim_bad = 0, pairs = 0;
    double worst_excess = -1;
    const AttackKind kinds[] = {AttackKind::fgsm, AttackKind::bim, AttackKind::cw_lite};
    const std::size_t n = 10000;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& policy = pool[rng.below(pool.size())];
        fg::policy::FrameStack s;
        for (auto& f : s.frames) {
            const bool sparse = rng.bernoulli(0.5);
            for (auto& p : f.px) p = sparse ? (rng.bernoulli(0.05) ? 1.0f : 0.0f) : static_cast<float>(rng.uniform());
        }
        AttackConfig c;
        c.kind = kinds[i % 3];
        c.epsilon = rng.uniform(1e-4, 0.1);
        c.alpha = rng.bernoulli(0.3) ? 0.0 : rng.uniform(1e-4, 0.05);
        c.iterations = 1 + rng.below(10);
        const auto o = craft(policy, s, c);
        double linf = 0;
        for (std::size_t p = 0; p < fg::env::kPixels; ++p) {
            const float v = o.adversarial.px[p];
            if (!(v >= 0.0f && v <= 1.0f)) ++range_bad;
            linf = std::max(linf, std::abs(static_cast<double>(v) - s.newest().px[p]));
        }
        worst_excess = std::max(worst_excess, linf - c.epsilon);
        if (linf > c.epsilon + 1e-6) ++bound_bad;
        if (c.kind == AttackKind::fgsm) {
            const auto b = bim(policy, s, c.epsilon, c.epsilon, 1);
            ++pairs;
            if (std::memcmp(b.adversarial.px.data(), o.adversarial.px.data(), sizeof(float) * fg::env::kPixels) != 0) {
                ++fgsm_bim_bad;
            }
        }
    }
    const double s = since(t0);
    const bool ok = bound_bad == 0 && range_bad == 0 && fgsm_bim_bad == 0 && s < 60;
    return {2, ok,
            std::to_string(n) + " invocations: budget violations " + std::to_string(bound_bad) + " (max excess " +
                fmt("%.1e", worst_excess) + "), range violations " + std::to_string(range_bad) + ", BIM(1,eps)!=FGSM " +
                std::to_string(fgsm_bim_bad) + "/" + std::to_string(pairs),
            s};
}

Result pr_oracle() {
    const auto t0 = Clock::now();
    fg::nn::Rng rng(8);
    double worst = 0;
    std::size_t compared = 0, mismatched_presence = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + rng.below(60);
        std::vector<double> s(n);
        std::vector<bool> l(n);
        const bool ties = i % 2 == 0;
        for (std::size_t k = 0; k < n; ++k) {
            s[k] = ties ? static_cast<double>(rng.below(6)) / 5 : rng.uniform();
            l[k] = rng.bernoulli(0.35);
        }
        const auto c = fg::eval::pr_curve_ap(s, l);
        const double bf = fgt::brute_force_ap(s, l);
        if (std::isnan(bf) != !c.average_precision) {
            ++mismatched_presence;
            continue;
        }
        if (std::isnan(bf)) continue;
        worst = std::max(worst, std::abs(*c.average_precision - bf));
        ++compared;
    }
    const auto ex = fg::eval::pr_curve_ap(std::vector<double>{0.9, 0.5, 0.4}, {true, false, true});
    const double ex_err = ex.average_precision ? std::abs(*ex.average_precision - 5.0 / 6.0) : 1.0;
    const bool ok = worst <= 1e-12 && mismatched_presence == 0 && ex_err <= 1e-12;
    return {8, ok,
            std::to_string(compared) + " instances with positives, max |AP - brute force| " + fmt("%.1e", worst) +
                "; worked example AP " + fmt("%.12f", ex.average_precision.value_or(NAN)) + " (5/6)",
            since(t0)};
}

bool quickstart_done(const fs::path& dir) { return fs::exists(dir / "timeline" / "summary.csv"); }

// Runs the quickstart into dir; returns seconds spent until the policy was written.
double run_quickstart(const fs::path& dir) {
    const bool reuse = std::getenv("FG_ACCEPT_REUSE") && std::string(std::getenv("FG_ACCEPT_REUSE")) == "1";
    if (reuse && quickstart_done(dir)) return NAN;
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto start = fs::file_time_type::clock::now();
    const int rc = shell("bash '" FG_QUICKSTART "' '" + dir.string() + "' '" + g_bin + "'", dir.string() + ".log");
    if (rc != 0) throw std::runtime_error("quickstart failed; see " + dir.string() + ".log");
    const auto done = fs::last_write_time(dir / "train-policy" / "summary.csv");
    return std::chrono::duration<double>(done - start).count();
}

std::vector<fs::path> csv_files(const fs::path& root) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        const auto rel = fs::relative(e.path(), root);
        // criteria 3-7 write into run1 only
        if (*rel.begin() == "acceptance") continue;
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(rel);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Result determinism(const fs::path& a, const fs::path& b, double seconds) {
    const auto fa = csv_files(a), fb = csv_files(b);
    std::size_t differing = 0;
    std::string first;
    for (const auto& f : fa) {
        if (!fs::exists(b / f) || slurp(a / f) != slurp(b / f)) {
            ++differing;
            if (first.empty()) first = f.string();
        }
    }
    const bool ok = fa == fb && differing == 0 && !fa.empty();
    return {9, ok,
            std::to_string(fa.size()) + " CSVs compared, " + std::to_string(differing) + " differ" +
                (first.empty() ? "" : " (first: " + first + ")") + (fa == fb ? "" : ", file sets differ"),
            seconds};
}

Result well_trained(const fs::path& run) {
    const auto t = fg::eval::read_csv((run / "train-policy" / "summary.csv").string());
    const double greedy = t.number(0, t.column("greedy_mean"));
    const double best = t.number(0, t.column("best_return"));
    const bool ok = best > 0 && greedy >= 0.8 * best;
    return {10, ok, "greedy mean " + fmt("%.2f", greedy) + " vs 0.8 x best " + fmt("%.2f", best), 0};
}

std::vector<double> returns_of(const fs::path& csv) {
    const auto t = fg::eval::read_csv(csv.string());
    std::vector<double> r;
    for (std::size_t i = 0; i < t.rows.size(); ++i) r.push_back(t.number(i, t.column("return")));
    return r;
}

Result attack_gate(const fs::path& run, double train_seconds) {
    const auto t0 = Clock::now();
    const fs::path out = run / "acceptance";
    const std::string policy = (run / "train-policy" / "policy.fgn").string();
    const std::string base = "guard run --out '" + out.string() + "' --policy '" + policy +
                             "' --defense none --attack fgsm --eps 0.01 --trials 5 --seed 1";
    cli(base + " --attack-ratio 0 --run-name c3_clean", out / "c3_clean.log");
    cli(base + " --attack-ratio 1 --run-name c3_attacked", out / "c3_attacked.log");
    const double clean = mean(returns_of(out / "c3_clean" / "returns.csv"));
    const double attacked = mean(returns_of(out / "c3_attacked" / "returns.csv"));
    const double loss = clean > 0 ? (clean - attacked) / clean : 0.0;
    const double s = since(t0) + (std::isnan(train_seconds) ? 0.0 : train_seconds);
    const bool ok = loss >= 0.5 && s < 300;
    return {3, ok,
            "clean mean " + fmt("%.2f", clean) + ", attacked mean " + fmt("%.2f", attacked) + ", loss " +
                fmt("%.1f%%", 100 * loss) + " (>= 50%)" + (std::isnan(train_seconds) ? ", training reused" : ""),
            s};
}

double map_from(const fs::path& ap_csv) {
    const auto t = fg::eval::read_csv(ap_csv.string());
    std::vector<double> v;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const double a = t.number(i, t.column("ap"));
        if (!std::isnan(a)) v.push_back(a);
    }
    return v.empty() ? NAN : mean(v);
}

Result detection_ordering(const fs::path& run) {
    const auto t0 = Clock::now();
    const fs::path out = run / "acceptance";
    const std::string models = "--policy '" + (run / "train-policy" / "policy.fgn").string() + "' --predictor '" +
                               (run / "train-foresight" / "predictor.fgn").string() + "' --ae '" +
                               (run / "train-ae" / "ae.fgn").string() + "'";
    std::ostringstream detail;
    bool ok = true;
    for (const char* atk : {"fgsm", "bim", "cwlite"}) {
        std::map<std::string, double> map;
        for (const char* det : {"foresight", "squeeze", "ae", "dropout"}) {
            const std::string name = std::string("c4_") + atk + "_" + det;
            cli("eval-detect --config '" + g_cfg + "/eval-detect.conf' --out '" + out.string() + "' --run-name " + name +
                    " " + models + " --attack " + atk + " --detector " + det + " --seed 1",
                out / (name + ".log"));
            map[det] = map_from(out / name / "ap.csv");
        }
        const double fs_map = map["foresight"];
        bool row = true;
        for (const char* det : {"squeeze", "ae", "dropout"}) row = row && fs_map > map[det];
        ok = ok && row;
        detail << atk << ": foresight " << fmt("%.4f", fs_map) << " squeeze " << fmt("%.4f", map["squeeze"]) << " ae "
               << fmt("%.4f", map["ae"]) << " dropout " << fmt("%.4f", map["dropout"]) << (row ? "" : " [order fails]")
               << "; ";
    }
    const double s = since(t0);
    return {4, ok && s < 900, detail.str(), s};
}

Result timeline_gate(const fs::path& run) {
    const auto t0 = Clock::now();
    const fs::path out = run / "acceptance";
    cli("timeline --config '" + g_cfg + "/timeline.conf' --out '" + out.string() + "' --run-name c5 --policy '" +
            (run / "train-policy" / "policy.fgn").string() + "' --predictor '" +
            (run / "train-foresight" / "predictor.fgn").string() + "' --seed 1",
        out / "c5.log");
    // recompute the separation from the step logs
    double in = 0, outside = 0;
    std::size_t ni = 0, no = 0;
    for (const auto& e : fs::directory_iterator(out / "c5" / "logs")) {
        std::istringstream is(slurp(e.path()));
        const auto log = fg::guard::read_log(is);
        for (const auto& st : log.steps) {
            if (!st.scored) continue;
            (st.attacked ? in : outside) += st.score;
            ++(st.attacked ? ni : no);
        }
    }
    in /= static_cast<double>(std::max<std::size_t>(ni, 1));
    outside /= static_cast<double>(std::max<std::size_t>(no, 1));
    const double ratio = outside > 0 ? in / outside : INFINITY;
    const double s = since(t0);
    return {5, ni > 0 && ratio >= 3.0 && s < 120,
            "mean score inside " + fmt("%.4f", in) + " outside " + fmt("%.4f", outside) + ", ratio " + fmt("%.2f", ratio) +
                " (>= 3)",
            s};
}

Result reward_retention(const fs::path& run) {
    const auto t0 = Clock::now();
    const fs::path out = run / "acceptance";
    cli("eval-reward --config '" + g_cfg + "/eval-reward.conf' --out '" + out.string() + "' --run-name c6 --policy '" +
            (run / "train-policy" / "policy.fgn").string() + "' --predictor '" +
            (run / "train-foresight" / "predictor.fgn").string() + "' --seed 1",
        out / "c6.log");
    const auto t = fg::eval::read_csv((out / "c6" / "reward.csv").string());
    std::map<std::pair<double, std::string>, std::vector<double>> cells;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        cells[{t.number(i, t.column("ratio")), t.rows[i][t.column("defense")]}].push_back(t.number(i, t.column("return")));
    }
    bool ok = true;
    std::ostringstream detail;
    std::set<double> ratios;
    for (const auto& [key, v] : cells) ratios.insert(key.first);
    for (double r : ratios) {
        if (r == 0.0) {
            const auto& clean = cells[{r, "clean"}];
            bool equal = true;
            for (const char* d : {"foresight_suggest", "random_on_flag", "squeeze_suggest", "none"}) {
                equal = equal && cells[{r, d}] == clean;
            }
            ok = ok && equal;
            detail << "ratio 0: " << (equal ? "all equal clean " + fmt("%.2f", mean(clean)) : "defenses differ from clean")
                   << "; ";
            continue;
        }
        const double f = mean(cells[{r, "foresight_suggest"}]), n = mean(cells[{r, "none"}]),
                     rnd = mean(cells[{r, "random_on_flag"}]);
        const bool row = r < 0.4 || (f > n && f > rnd);
        ok = ok && row;
        detail << "ratio " << fmt("%.1f", r) << ": fs " << fmt("%.2f", f) << " none " << fmt("%.2f", n) << " rand "
               << fmt("%.2f", rnd) << (row ? "" : " [fails]") << "; ";
    }
    const double s = since(t0);
    return {6, ok && s < 900, detail.str(), s};
}

Result quality_study(const fs::path& run) {
    const auto t0 = Clock::now();
    const fs::path out = run / "acceptance";
    cli("eval-quality --config '" + g_cfg + "/eval-quality.conf' --out '" + out.string() + "' --run-name c7 --policy '" +
            (run / "train-policy" / "policy.fgn").string() + "' --snapshots '" +
            (run / "train-foresight" / "snapshots").string() + "' --data '" + (run / "collect" / "dataset").string() +
            "' --seed 1",
        out / "c7.log");
    const auto t = fg::eval::read_csv((out / "c7" / "quality.csv").string());
    std::vector<double> mse, map;
    std::ostringstream pts;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const double a = t.number(i, t.column("map"));
        pts << t.rows[i][t.column("snapshot")] << ":" << fmt("%.2e", t.number(i, t.column("mse"))) << "/"
            << fmt("%.3f", a) << " ";
        if (std::isnan(a)) continue;
        mse.push_back(t.number(i, t.column("mse")));
        map.push_back(a);
    }
    const double rho = mse.size() >= 2 ? rank_correlation(mse, map) : NAN;
    const double s = since(t0);
    return {7, mse.size() >= 6 && rho <= -0.5 && s < 1200,
            std::to_string(mse.size()) + " snapshots, Spearman " + fmt("%.3f", rho) + " (<= -0.5); " + pts.str(), s};
}

}  // namespace

int main(int argc, char** argv) {
    g_work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance");
    fs::create_directories(g_work);
    std::vector<Result> results;
    auto attempt = [&](int id, const std::function<Result()>& f) {
        try {
            results.push_back(f());
        } catch (const std::exception& e) {
            results.push_back({id, false, std::string("error: ") + e.what(), 0});
        }
        const auto& r = results.back();
        std::cout << "criterion " << r.id << ": " << (r.pass ? "PASS" : "FAIL") << "  " << r.detail << "  ["
                  << fmt("%.1f", r.seconds) << " s]" << std::endl;
    };

    attempt(1, gradient_oracle);
    attempt(2, attack_invariants);
    attempt(8, pr_oracle);

    const fs::path run1 = g_work / "run1", run2 = g_work / "run2";
    double train_seconds = NAN;
    double pipeline_seconds = 0;
    bool pipeline_ok = true;
    try {
        const auto t0 = Clock::now();
        train_seconds = run_quickstart(run1);
        run_quickstart(run2);
        pipeline_seconds = since(t0);
    } catch (const std::exception& e) {
        pipeline_ok = false;
        std::cout << "quickstart: " << e.what() << std::endl;
    }
    if (pipeline_ok) {
        attempt(9, [&] { return determinism(run1, run2, pipeline_seconds); });
        attempt(10, [&] { return well_trained(run1); });
        attempt(3, [&] { return attack_gate(run1, train_seconds); });
        attempt(4, [&] { return detection_ordering(run1); });
        attempt(5, [&] { return timeline_gate(run1); });
        attempt(6, [&] { return reward_retention(run1); });
        attempt(7, [&] { return quality_study(run1); });
    } else {
        for (int id : {9, 10, 3, 4, 5, 6, 7}) {
            results.push_back({id, false, "quickstart failed", 0});
            std::cout << "criterion " << id << ": FAIL  quickstart failed" << std::endl;
        }
    }

    // Exact properties gate the exit status; the scaled reproductions (3-7) are reported.
    int passed = 0;
    bool gate = true;
    for (const auto& r : results) {
        passed += r.pass;
        if (!r.pass && (r.id == 1 || r.id == 2 || r.id == 8 || r.id == 9 || r.id == 10)) gate = false;
    }
    std::cout << "summary: " << passed << "/" << results.size() << " PASS" << std::endl;
    std::ofstream(g_work / "summary.txt") << passed << "/" << results.size() << "\n";
    return gate ? 0 : 1;
}
