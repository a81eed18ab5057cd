#include "fg/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "fg/error.hpp"
#include "fg/eval/experiments.hpp"
#include "fg/eval/report.hpp"
#include "fg/foresight/dataset.hpp"
#include "fg/foresight/train.hpp"
#include "fg/guard/guard.hpp"
#include "fg/policy/dqn.hpp"

namespace fg::cli {
namespace {

namespace fs = std::filesystem;

struct Common {
    std::string config;
    std::uint64_t seed = 1;
    std::string out;
    std::string run_name;
    std::size_t jobs = 1;
};

struct ModelOpts {
    std::string env = "pong";
    std::string policy;
    std::string predictor;  // a predictor file or "oracle"
    std::string ae;
};

struct AttackOpts {
    std::string kind = "fgsm";
    double eps = 0.01;
    double alpha = 0.0;
    std::size_t iters = 10;
    double ratio = 0.5;
    std::string mode = "bernoulli";
    std::size_t period = 100;
    std::size_t width = 50;
};

struct DetectOpts {
    std::string kind = "foresight";
    std::string metric = "l1";
    double threshold = 0.0;
    std::size_t passes = 30;
    double rate = 0.2;
};

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "key=value file mirroring these flags; command-line flags win");
    sub->add_option("--seed", c.seed, "root of all randomness")->capture_default_str();
    sub->add_option("--out", c.out, "output root (default: $FG_OUT_DIR, else ./runs)");
    sub->add_option("--run-name", c.run_name, "run directory under the output root (default: subcommand name)");
    sub->add_option("--jobs", c.jobs, "worker threads across independent episodes")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
}

void add_env(CLI::App* sub, ModelOpts& m) {
    sub->add_option("--env", m.env, "pong or chase")->capture_default_str()->check(CLI::IsMember({"pong", "chase"}));
}

void add_models(CLI::App* sub, ModelOpts& m, bool need_predictor) {
    add_env(sub, m);
    sub->add_option("--policy", m.policy, "policy checkpoint")->required();
    auto* p = sub->add_option("--predictor", m.predictor, "predictor checkpoint, or 'oracle' for the true frame");
    if (need_predictor) p->required();
    sub->add_option("--ae", m.ae, "autoencoder checkpoint (ae detector)");
}

void add_attack(CLI::App* sub, AttackOpts& a) {
    sub->add_option("--attack", a.kind, "fgsm, bim or cwlite")
        ->capture_default_str()
        ->check(CLI::IsMember({"fgsm", "bim", "cwlite"}));
    sub->add_option("--eps", a.eps, "L-infinity budget in pixel units")->capture_default_str();
    sub->add_option("--alpha", a.alpha, "iterative step size; 0 means eps/4")->capture_default_str();
    sub->add_option("--iters", a.iters, "iterations of bim and cwlite")->capture_default_str();
    sub->add_option("--attack-ratio", a.ratio, "per-step attack probability")->capture_default_str();
    sub->add_option("--attack-mode", a.mode, "bernoulli or periodic")
        ->capture_default_str()
        ->check(CLI::IsMember({"bernoulli", "periodic"}));
    sub->add_option("--period", a.period, "periodic schedule period")->capture_default_str();
    sub->add_option("--width", a.width, "periodic schedule attack width")->capture_default_str();
}

void add_detector(CLI::App* sub, DetectOpts& d) {
    sub->add_option("--detector", d.kind, "foresight, squeeze, ae or dropout")
        ->capture_default_str()
        ->check(CLI::IsMember({"foresight", "squeeze", "ae", "dropout"}));
    sub->add_option("--metric", d.metric, "l1, chi2 or histint")
        ->capture_default_str()
        ->check(CLI::IsMember({"l1", "chi2", "histint"}));
    sub->add_option("--threshold", d.threshold, "flag when score exceeds this")->capture_default_str();
    sub->add_option("--dropout-passes", d.passes, "stochastic passes of the dropout detector")->capture_default_str();
    sub->add_option("--dropout-rate", d.rate, "dropout rate of the dropout detector")->capture_default_str();
}

fs::path run_dir(const Common& c, const std::string& name) {
    std::string root = c.out;
    if (root.empty()) {
        const char* env = std::getenv("FG_OUT_DIR");
        root = env && *env ? env : "runs";
    }
    fs::path dir = fs::path(root) / (c.run_name.empty() ? name : c.run_name);
    fs::create_directories(dir);
    return dir;
}

void write_echo(const CLI::App* sub, const fs::path& dir) {
    std::ofstream os(dir / "config.txt");
    if (!os) throw FileError("cannot write " + (dir / "config.txt").string());
    for (const CLI::Option* o : sub->get_options()) {
        if (o->get_lnames().empty()) continue;
        const std::string& name = o->get_lnames().front();
        if (name == "help" || name == "config") continue;
        const std::string value = o->count() > 0 ? o->results().back() : o->get_default_str();
        os << name << '=' << value << '\n';
    }
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            if constexpr (std::is_same_v<T, double> || std::is_same_v<T, float>) {
                out.push_back(static_cast<T>(std::stod(item, &used)));
            } else {
                out.push_back(static_cast<T>(std::stoull(item, &used)));
            }
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--" + what, "bad list element '" + item + "'");
        }
    }
    if (out.empty()) throw CLI::ValidationError("--" + what, "empty list");
    return out;
}

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw FileError(what + " not found: " + path);
}

struct Loaded {
    policy::PolicyModel policy;
    std::optional<foresight::PredictorModel> predictor;
    std::optional<foresight::PredictorModel> ae;
    bool oracle = false;
};

Loaded load_models(const ModelOpts& m) {
    Loaded l;
    require_file(m.policy, "policy");
    l.policy = policy::load_policy(m.policy);
    if (l.policy.env != env::parse_env_kind(m.env)) throw Error("policy was trained on a different environment");
    if (m.predictor == "oracle") {
        l.oracle = true;
    } else if (!m.predictor.empty()) {
        require_file(m.predictor, "predictor");
        l.predictor = foresight::load_predictor(m.predictor);
    }
    if (!m.ae.empty()) {
        require_file(m.ae, "autoencoder");
        l.ae = foresight::load_predictor(m.ae);
    }
    return l;
}

guard::GuardModels models_of(const Loaded& l) {
    guard::GuardModels g;
    g.policy = &l.policy;
    g.predictor = l.predictor ? &*l.predictor : nullptr;
    g.autoencoder = l.ae ? &*l.ae : nullptr;
    g.oracle_predictor = l.oracle;
    return g;
}

attack::AttackConfig attack_config(const AttackOpts& a) {
    attack::AttackConfig c;
    c.kind = attack::parse_attack_kind(a.kind);
    c.epsilon = a.eps;
    c.alpha = a.alpha;
    c.iterations = a.iters;
    c.validate();
    return c;
}

attack::ScheduleConfig schedule_config(const AttackOpts& a) {
    attack::ScheduleConfig s;
    s.mode = attack::parse_schedule_mode(a.mode);
    s.ratio = a.ratio;
    s.period = a.period;
    s.width = a.width;
    s.validate();
    return s;
}

detect::DetectorConfig detector_config(const DetectOpts& d) {
    detect::DetectorConfig c;
    c.kind = detect::parse_detector_kind(d.kind);
    c.metric = detect::parse_metric(d.metric);
    c.threshold = d.threshold;
    c.dropout_passes = d.passes;
    c.dropout_rate = d.rate;
    c.validate();
    return c;
}

guard::GuardConfig guard_config(const ModelOpts& m, const AttackOpts& a) {
    guard::GuardConfig g;
    g.env = env::parse_env_kind(m.env);
    g.attack = attack_config(a);
    g.schedule = schedule_config(a);
    return g;
}

void write_logs(const fs::path& dir, const std::vector<guard::EpisodeLog>& logs) {
    fs::create_directories(dir / "logs");
    for (std::size_t i = 0; i < logs.size(); ++i) {
        std::ofstream os(dir / "logs" / ("trial_" + std::to_string(i) + ".jsonl"));
        if (!os) throw FileError("cannot write episode log");
        guard::write_log(os, logs[i]);
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FileError("cannot write " + path.string());
    os << text;
}

std::string sub_tokens_name(const std::vector<std::string>& args, std::size_t& count) {
    if (args.empty()) return {};
    if (args[0] == "guard" && args.size() > 1 && args[1].rfind("-", 0) != 0) {
        count = 2;
        return "guard " + args[1];
    }
    count = 1;
    return args[0];
}

}  // namespace

std::vector<std::string> expand_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FileError("config file not found: " + path);
    std::vector<std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw CLI::ValidationError("--config", path + ":" + std::to_string(lineno) + ": expected key=value");
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        if (key == "config") throw CLI::ValidationError("--config", "config files cannot include other config files");
        out.push_back("--" + key);
        out.push_back(trim(line.substr(eq + 1)));
    }
    return out;
}

int run(const std::vector<std::string>& raw_args) {
    CLI::App app{"Visual-foresight defense testbed: train, attack, detect and evaluate."};
    app.name("foresight");
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    Common common;
    ModelOpts models;
    AttackOpts attack_opts;
    DetectOpts detect_opts;
    policy::DQNConfig dqn;
    std::function<void()> action;

    auto bind = [&](CLI::App* sub, const std::string& name, std::function<void(const fs::path&)> body) {
        sub->callback([&, sub, name, body] {
            // Flag values that parse but violate a contract are usage errors too.
            try {
                if (sub->get_option_no_throw("--eps")) {
                    attack_config(attack_opts);
                    schedule_config(attack_opts);
                }
                if (sub->get_option_no_throw("--detector")) detector_config(detect_opts);
                if (name == "train-policy") dqn.validate();
            } catch (const Error& e) {
                throw CLI::ValidationError(name, e.what());
            }
            action = [&, sub, name, body] {
                const fs::path dir = run_dir(common, name);
                write_echo(sub, dir);
                body(dir);
            };
        });
    };

    // train-policy
    std::size_t eval_episodes = 100;
    {
        auto* sub = app.add_subcommand("train-policy", "train a DQN policy");
        add_common(sub, common);
        add_env(sub, models);
        sub->add_option("--layers", dqn.layers, "hidden layers; the action head is appended")->capture_default_str();
        sub->add_option("--steps", dqn.training_steps, "environment steps")->capture_default_str();
        sub->add_option("--lr", dqn.learning_rate, "Adam learning rate")->capture_default_str();
        sub->add_option("--replay", dqn.replay_capacity, "replay capacity")->capture_default_str();
        sub->add_option("--batch", dqn.batch_size, "minibatch size")->capture_default_str();
        sub->add_option("--gamma", dqn.gamma, "discount")->capture_default_str();
        sub->add_option("--target-sync", dqn.target_sync, "steps between target copies")->capture_default_str();
        sub->add_option("--eps-start", dqn.epsilon_start, "initial exploration rate")->capture_default_str();
        sub->add_option("--eps-end", dqn.epsilon_end, "final exploration rate")->capture_default_str();
        sub->add_option("--eps-decay", dqn.epsilon_decay_steps, "exploration decay steps")->capture_default_str();
        sub->add_option("--learn-start", dqn.learn_start, "steps before updates begin")->capture_default_str();
        sub->add_option("--train-every", dqn.train_every, "steps per update")->capture_default_str();
        sub->add_option("--stats-frames", dqn.stats_frames, "random frames for pixel statistics")
            ->capture_default_str();
        sub->add_option("--eval-episodes", eval_episodes, "greedy evaluation episodes")->capture_default_str();
        bind(sub, "train-policy", [&](const fs::path& dir) {
            dqn.seed = common.seed;
            const auto kind = env::parse_env_kind(models.env);
            const auto result = policy::train_dqn(kind, dqn);
            policy::save_policy((dir / "policy.fgn").string(), result.model, dqn.echo());
            eval::CsvTable curve{{"episode", "return"}, {}};
            for (std::size_t i = 0; i < result.curve.episode_returns.size(); ++i) {
                curve.rows.push_back({std::to_string(i), eval::format_number(result.curve.episode_returns[i])});
            }
            eval::write_csv((dir / "curve.csv").string(), curve);
            const auto greedy = policy::evaluate_greedy(result.model, eval_episodes, nn::derive_seed(common.seed, 7));
            const double mean = std::accumulate(greedy.begin(), greedy.end(), 0.0) / static_cast<double>(greedy.size());
            eval::CsvTable summary{{"greedy_mean", "best_return", "ratio"}, {}};
            const double ratio = result.curve.best_return > 0 ? mean / result.curve.best_return : 0.0;
            summary.rows.push_back({eval::format_number(mean), eval::format_number(result.curve.best_return),
                                    eval::format_number(ratio)});
            eval::write_csv((dir / "summary.csv").string(), summary);
            std::cout << "greedy_mean=" << eval::format_number(mean)
                      << " best_return=" << eval::format_number(result.curve.best_return) << " policy="
                      << (dir / "policy.fgn").string() << '\n';
        });
    }

    // collect
    std::size_t frames = 100000;
    double collect_eps = 0.3;
    {
        auto* sub = app.add_subcommand("collect", "record an epsilon-greedy dataset for the frame predictor");
        add_common(sub, common);
        add_env(sub, models);
        sub->add_option("--policy", models.policy, "policy checkpoint")->required();
        sub->add_option("--frames", frames, "total frames")->capture_default_str();
        sub->add_option("--epsilon", collect_eps, "random-action probability")->capture_default_str();
        bind(sub, "collect", [&](const fs::path& dir) {
            require_file(models.policy, "policy");
            const auto pol = policy::load_policy(models.policy);
            const auto data =
                foresight::collect_dataset(pol, env::parse_env_kind(models.env), frames, collect_eps, common.seed);
            foresight::save_dataset((dir / "dataset").string(), data);
            std::cout << "episodes=" << data.episodes.size() << " frames=" << data.total_frames()
                      << " dataset=" << (dir / "dataset").string() << '\n';
        });
    }

    // train-foresight
    std::string data_dir;
    foresight::PredictorArch arch;
    std::string horizons = "1,3,5", phase_lr = "1e-4,1e-5,1e-5", phase_batch = "32,8,8",
                phase_iters = "20000,5000,5000", snapshot_marks = "1000,2000,4000,8000,16000,30000";
    std::size_t val_windows = 2000;
    {
        auto* sub = app.add_subcommand("train-foresight", "train the action-conditioned frame predictor");
        add_common(sub, common);
        sub->add_option("--data", data_dir, "dataset directory from collect")->required();
        sub->add_option("--encoder", arch.encoder, "encoder spec")->capture_default_str();
        sub->add_option("--decoder", arch.decoder, "decoder spec")->capture_default_str();
        sub->add_option("--factors", arch.factors, "factor size of the action transform")->capture_default_str();
        sub->add_option("--horizons", horizons, "curriculum rollout horizons")->capture_default_str();
        sub->add_option("--phase-lr", phase_lr, "per-phase learning rates")->capture_default_str();
        sub->add_option("--phase-batch", phase_batch, "per-phase batch sizes")->capture_default_str();
        sub->add_option("--phase-iters", phase_iters, "per-phase iterations")->capture_default_str();
        sub->add_option("--snapshots", snapshot_marks, "total-iteration snapshot marks")->capture_default_str();
        sub->add_option("--val-windows", val_windows, "validation windows per evaluation")->capture_default_str();
        bind(sub, "train-foresight", [&](const fs::path& dir) {
            const auto data = foresight::load_dataset(data_dir);
            foresight::PredictorTrainConfig cfg;
            cfg.arch = arch;
            cfg.seed = common.seed;
            cfg.val_windows = val_windows;
            const auto h = parse_list<std::size_t>(horizons, "horizons");
            const auto lr = parse_list<float>(phase_lr, "phase-lr");
            const auto b = parse_list<std::size_t>(phase_batch, "phase-batch");
            const auto it = parse_list<std::size_t>(phase_iters, "phase-iters");
            if (lr.size() != h.size() || b.size() != h.size() || it.size() != h.size()) {
                throw CLI::ValidationError("--horizons", "phase lists must have equal length");
            }
            cfg.phases.clear();
            for (std::size_t i = 0; i < h.size(); ++i) cfg.phases.push_back({h[i], lr[i], b[i], it[i]});
            cfg.snapshot_marks = parse_list<std::size_t>(snapshot_marks, "snapshots");
            const auto r = foresight::train_predictor(data, cfg);
            foresight::save_predictor((dir / "predictor.fgn").string(), r.model);
            fs::create_directories(dir / "snapshots");
            eval::CsvTable snaps{{"snapshot", "mse"}, {}};
            for (const auto& s : r.snapshots) {
                foresight::save_predictor((dir / "snapshots" / ("iter_" + std::to_string(s.iteration) + ".fgn")).string(),
                                          s.model);
                snaps.rows.push_back({std::to_string(s.iteration), eval::format_number(s.val_mse)});
            }
            eval::write_csv((dir / "snapshots.csv").string(), snaps);
            eval::CsvTable phases{{"phase", "horizon", "val_mse"}, {}};
            phases.rows.push_back({"0", "0", eval::format_number(r.initial_val_mse)});
            for (std::size_t i = 0; i < r.phase_val_mse.size(); ++i) {
                phases.rows.push_back({std::to_string(i + 1), std::to_string(cfg.phases[i].horizon),
                                       eval::format_number(r.phase_val_mse[i])});
            }
            eval::write_csv((dir / "train.csv").string(), phases);
            std::cout << "val_mse=" << eval::format_number(r.phase_val_mse.empty() ? r.initial_val_mse
                                                                                    : r.phase_val_mse.back())
                      << " predictor=" << (dir / "predictor.fgn").string() << '\n';
        });
    }

    // train-ae
    foresight::AutoencoderTrainConfig ae_cfg;
    {
        auto* sub = app.add_subcommand("train-ae", "train the single-frame autoencoder baseline");
        add_common(sub, common);
        sub->add_option("--data", data_dir, "dataset directory from collect")->required();
        sub->add_option("--encoder", ae_cfg.arch.encoder, "encoder spec")->capture_default_str();
        sub->add_option("--decoder", ae_cfg.arch.decoder, "decoder spec")->capture_default_str();
        sub->add_option("--iters", ae_cfg.iterations, "iterations")->capture_default_str();
        sub->add_option("--lr", ae_cfg.learning_rate, "learning rate")->capture_default_str();
        sub->add_option("--batch", ae_cfg.batch_size, "batch size")->capture_default_str();
        sub->add_option("--checkpoint-every", ae_cfg.checkpoint_every, "iterations between MSE checkpoints")
            ->capture_default_str();
        bind(sub, "train-ae", [&](const fs::path& dir) {
            const auto data = foresight::load_dataset(data_dir);
            ae_cfg.seed = common.seed;
            const auto r = foresight::train_autoencoder(data, ae_cfg);
            foresight::save_predictor((dir / "ae.fgn").string(), r.model);
            eval::CsvTable t{{"iteration", "mse"}, {}};
            for (const auto& [i, m] : r.train_mse) t.rows.push_back({std::to_string(i), eval::format_number(m)});
            eval::write_csv((dir / "ae.csv").string(), t);
            std::cout << "train_mse=" << eval::format_number(r.train_mse.back().second)
                      << " ae=" << (dir / "ae.fgn").string() << '\n';
        });
    }

    std::size_t trials = 5;

    // eval-detect
    {
        auto* sub = app.add_subcommand("eval-detect", "precision-recall of a detector under attack");
        add_common(sub, common);
        add_models(sub, models, false);
        add_attack(sub, attack_opts);
        add_detector(sub, detect_opts);
        sub->add_option("--trials", trials, "episodes")->capture_default_str();
        bind(sub, "eval-detect", [&](const fs::path& dir) {
            const auto loaded = load_models(models);
            auto g = guard_config(models, attack_opts);
            g.detector = detector_config(detect_opts);
            const auto r = eval::eval_detect(g, models_of(loaded), eval::trial_seeds(common.seed, trials), common.jobs);
            eval::write_csv((dir / "pr.csv").string(), eval::pr_table(r.curves));
            eval::CsvTable band{{"recall", "mean", "std"}, {}};
            for (std::size_t i = 0; i < r.band.recall.size(); ++i) {
                band.rows.push_back({eval::format_number(r.band.recall[i]), eval::format_number(r.band.mean[i]),
                                     eval::format_number(r.band.stddev[i])});
            }
            eval::write_csv((dir / "band.csv").string(), band);
            eval::CsvTable ap{{"trial", "ap"}, {}};
            for (std::size_t i = 0; i < r.curves.size(); ++i) {
                const auto& a = r.curves[i].average_precision;
                ap.rows.push_back({std::to_string(i), a ? eval::format_number(*a) : "nan"});
            }
            eval::write_csv((dir / "ap.csv").string(), ap);
            write_logs(dir, r.logs);
            std::cout << "detector=" << detect_opts.kind << " attack=" << attack_opts.kind
                      << " map=" << (r.map ? eval::format_number(*r.map) : "nan") << '\n';
        });
    }

    // eval-reward
    std::string ratios = "0,0.2,0.4,0.6,0.8,1", defenses = "foresight_suggest,random_on_flag,squeeze_suggest,none";
    double foresight_threshold = -1, squeeze_threshold = -1;
    std::size_t calib_trials = 5;
    {
        auto* sub = app.add_subcommand("eval-reward", "returns under attack across attack ratios and defenses");
        add_common(sub, common);
        add_models(sub, models, true);
        add_attack(sub, attack_opts);
        sub->add_option("--metric", detect_opts.metric, "l1, chi2 or histint")
            ->capture_default_str()
            ->check(CLI::IsMember({"l1", "chi2", "histint"}));
        sub->add_option("--ratios", ratios, "attack ratios")->capture_default_str();
        sub->add_option("--defenses", defenses, "defenses to compare")->capture_default_str();
        sub->add_option("--foresight-threshold", foresight_threshold, "negative: calibrate for F1")
            ->capture_default_str();
        sub->add_option("--squeeze-threshold", squeeze_threshold, "negative: calibrate for F1")->capture_default_str();
        sub->add_option("--calib-trials", calib_trials, "episodes for threshold calibration")->capture_default_str();
        sub->add_option("--trials", trials, "episodes per cell")->capture_default_str();
        bind(sub, "eval-reward", [&](const fs::path& dir) {
            const auto loaded = load_models(models);
            const auto gm = models_of(loaded);
            eval::RewardSweepConfig cfg;
            cfg.base = guard_config(models, attack_opts);
            cfg.ratios = parse_list<double>(ratios, "ratios");
            cfg.defenses.clear();
            std::stringstream ds(defenses);
            for (std::string d; std::getline(ds, d, ',');) cfg.defenses.push_back(guard::parse_defense_kind(d));
            cfg.trials = trials;
            cfg.seed = common.seed;
            cfg.jobs = common.jobs;
            cfg.foresight.kind = detect::DetectorKind::foresight;
            cfg.squeeze.kind = detect::DetectorKind::squeeze;
            cfg.foresight.metric = cfg.squeeze.metric = detect::parse_metric(detect_opts.metric);
            auto calibrate = [&](detect::DetectorConfig d) {
                guard::GuardConfig g = cfg.base;
                g.schedule.mode = attack::ScheduleMode::bernoulli;
                g.schedule.ratio = 0.5;
                g.detector = d;
                return eval::calibrate_threshold(g, gm, eval::calibration_seeds(common.seed, calib_trials), common.jobs);
            };
            cfg.foresight.threshold = foresight_threshold >= 0 ? foresight_threshold : calibrate(cfg.foresight);
            cfg.squeeze.threshold = squeeze_threshold >= 0 ? squeeze_threshold : calibrate(cfg.squeeze);
            const auto table = eval::reward_sweep(cfg, gm);
            eval::write_csv((dir / "reward.csv").string(), eval::reward_csv(table));
            eval::CsvTable th{{"detector", "threshold"}, {}};
            th.rows.push_back({"foresight", eval::format_number(cfg.foresight.threshold)});
            th.rows.push_back({"squeeze", eval::format_number(cfg.squeeze.threshold)});
            eval::write_csv((dir / "thresholds.csv").string(), th);
            for (const auto& c : table.cells) {
                std::cout << "ratio=" << eval::format_number(c.ratio) << " defense=" << c.defense
                          << " mean=" << eval::format_number(c.mean) << " std=" << eval::format_number(c.stddev)
                          << '\n';
            }
        });
    }

    // eval-quality
    std::string snapshot_dir;
    {
        auto* sub = app.add_subcommand("eval-quality", "predictor MSE against foresight mAP over snapshots");
        add_common(sub, common);
        add_env(sub, models);
        sub->add_option("--policy", models.policy, "policy checkpoint")->required();
        sub->add_option("--snapshots", snapshot_dir, "directory of predictor snapshots")->required();
        sub->add_option("--data", data_dir, "dataset directory (validation split)")->required();
        sub->add_option("--val-windows", val_windows, "validation windows per snapshot")->capture_default_str();
        add_attack(sub, attack_opts);
        sub->add_option("--metric", detect_opts.metric, "l1, chi2 or histint")
            ->capture_default_str()
            ->check(CLI::IsMember({"l1", "chi2", "histint"}));
        sub->add_option("--trials", trials, "episodes per snapshot")->capture_default_str();
        bind(sub, "eval-quality", [&](const fs::path& dir) {
            models.predictor.clear();
            const auto loaded = load_models(models);
            if (!fs::is_directory(snapshot_dir)) throw FileError("snapshot directory not found: " + snapshot_dir);
            const auto data = foresight::load_dataset(data_dir);
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(snapshot_dir)) {
                if (e.path().extension() == ".fgn") files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            std::vector<foresight::Snapshot> snaps;
            for (const auto& f : files) {
                foresight::Snapshot s;
                s.model = foresight::load_predictor(f.string());
                s.iteration = s.model.trained_iterations;
                s.val_mse = foresight::prediction_mse(data, s.model, foresight::Split::val, val_windows);
                snaps.push_back(std::move(s));
            }
            std::sort(snaps.begin(), snaps.end(), [](const auto& a, const auto& b) { return a.iteration < b.iteration; });
            auto g = guard_config(models, attack_opts);
            detect::DetectorConfig d;
            d.metric = detect::parse_metric(detect_opts.metric);
            g.detector = d;
            const auto records =
                eval::quality_study(snaps, g, models_of(loaded), eval::trial_seeds(common.seed, trials), common.jobs);
            eval::write_csv((dir / "quality.csv").string(), eval::quality_table(records));
            std::vector<double> mse, map;
            for (const auto& r : records) {
                if (!r.map) continue;
                mse.push_back(r.mse);
                map.push_back(*r.map);
            }
            const double rho = mse.size() >= 2 ? eval::spearman(mse, map) : std::nan("");
            eval::CsvTable s{{"snapshots", "spearman"}, {{std::to_string(records.size()), eval::format_number(rho)}}};
            eval::write_csv((dir / "summary.csv").string(), s);
            std::cout << "snapshots=" << records.size() << " spearman=" << eval::format_number(rho) << '\n';
        });
    }

    // timeline
    {
        auto* sub = app.add_subcommand("timeline", "detector score over an episode under periodic attacks");
        add_common(sub, common);
        add_models(sub, models, false);
        add_attack(sub, attack_opts);
        add_detector(sub, detect_opts);
        sub->add_option("--trials", trials, "episodes (the first is exported)")->capture_default_str();
        bind(sub, "timeline", [&](const fs::path& dir) {
            const auto loaded = load_models(models);
            auto a = attack_opts;
            a.mode = "periodic";
            auto g = guard_config(models, a);
            g.detector = detector_config(detect_opts);
            g.defense = guard::DefenseKind::detect_only;
            const auto logs =
                guard::run_trials(g, models_of(loaded), eval::trial_seeds(common.seed, trials), common.jobs);
            const auto table = eval::timeline_table(eval::timeline_export(logs.front()));
            eval::write_csv((dir / "timeline.csv").string(), table);
            write_text(dir / "timeline.svg", eval::render_svg(eval::chart_from_csv(table)));
            write_logs(dir, logs);
            const auto sep = eval::timeline_separation(logs);
            eval::CsvTable s{{"inside", "outside"}, {{eval::format_number(sep.inside), eval::format_number(sep.outside)}}};
            eval::write_csv((dir / "summary.csv").string(), s);
            std::cout << "inside=" << eval::format_number(sep.inside) << " outside=" << eval::format_number(sep.outside)
                      << '\n';
        });
    }

    // plot
    std::string csv_path, svg_path;
    {
        auto* sub = app.add_subcommand("plot", "render a pr, reward, quality or timeline CSV as SVG");
        sub->add_option("--config", common.config, "key=value file mirroring these flags");
        sub->add_option("--csv", csv_path, "input CSV")->required();
        sub->add_option("--svg", svg_path, "output SVG (default: the CSV path with .svg)");
        sub->callback([&] {
            action = [&] {
                require_file(csv_path, "csv");
                const auto table = eval::read_csv(csv_path);
                const std::string out = svg_path.empty() ? fs::path(csv_path).replace_extension(".svg").string() : svg_path;
                write_text(out, eval::render_svg(eval::chart_from_csv(table)));
                std::cout << "svg=" << out << '\n';
            };
        });
    }

    // guard run
    std::string defense = "foresight_suggest";
    bool defense_needs_detector = true;
    {
        auto* guard_cmd = app.add_subcommand("guard", "closed-loop protected episodes");
        guard_cmd->require_subcommand(1);
        auto* sub = guard_cmd->add_subcommand("run", "run episodes under attack with a defense");
        add_common(sub, common);
        add_models(sub, models, false);
        add_attack(sub, attack_opts);
        add_detector(sub, detect_opts);
        sub->add_option("--defense", defense, "none, detect_only, foresight_suggest, random_on_flag or squeeze_suggest")
            ->capture_default_str()
            ->check(CLI::IsMember({"none", "detect_only", "foresight_suggest", "random_on_flag", "squeeze_suggest"}));
        sub->add_option("--trials", trials, "episodes")->capture_default_str();
        bind(sub, "guard-run", [&](const fs::path& dir) {
            const auto loaded = load_models(models);
            auto g = guard_config(models, attack_opts);
            g.defense = guard::parse_defense_kind(defense);
            defense_needs_detector = g.defense != guard::DefenseKind::none;
            if (defense_needs_detector) g.detector = detector_config(detect_opts);
            const auto logs =
                guard::run_trials(g, models_of(loaded), eval::trial_seeds(common.seed, trials), common.jobs);
            write_logs(dir, logs);
            eval::CsvTable t{{"trial", "return"}, {}};
            for (std::size_t i = 0; i < logs.size(); ++i) {
                t.rows.push_back({std::to_string(i), eval::format_number(logs[i].total_return)});
            }
            eval::write_csv((dir / "returns.csv").string(), t);
            double mean = 0;
            for (const auto& l : logs) mean += l.total_return / static_cast<double>(logs.size());
            std::cout << "defense=" << defense << " mean_return=" << eval::format_number(mean) << '\n';
        });
    }

    try {
        // Splice config-file pairs in right after the subcommand so later command-line flags win.
        std::vector<std::string> args = raw_args;
        std::size_t sub_count = 0;
        sub_tokens_name(args, sub_count);
        for (std::size_t i = sub_count; i < args.size(); ++i) {
            std::string path;
            if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
            if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
            if (path.empty()) continue;
            const auto pairs = expand_config(path);
            CLI::App* target = app.get_subcommand_no_throw(args[0]);
            if (target && sub_count == 2) target = target->get_subcommand_no_throw(args[1]);
            if (target) {
                for (std::size_t k = 0; k < pairs.size(); k += 2) {
                    if (!target->get_option_no_throw(pairs[k])) {
                        throw CLI::ValidationError("--config", "unknown key '" + pairs[k].substr(2) + "' in " + path);
                    }
                }
            }
            args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_count), pairs.begin(), pairs.end());
            break;
        }
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << one_line(e.what()) << '\n';
        std::cerr << app.help();
        return kExitUsage;
    } catch (const FileError& e) {
        std::cerr << "error: " << one_line(e.what()) << '\n';
        return kExitMissingFile;
    }

    try {
        if (!action) {
            std::cerr << app.help();
            return kExitUsage;
        }
        action();
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << one_line(e.what()) << '\n';
        return kExitUsage;
    } catch (const FileError& e) {
        std::cerr << "error: " << one_line(e.what()) << '\n';
        return kExitMissingFile;
    } catch (const std::exception& e) {
        std::cerr << "error: " << one_line(e.what()) << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

}  // namespace fg::cli
