#include "fg/guard/guard.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "fg/error.hpp"

namespace fg::guard {
namespace {

policy::FrameStack stack_from(const foresight::History& h, const env::Frame& newest) {
    policy::FrameStack s;
    for (std::size_t k = 1; k < foresight::kHistory; ++k) s.frames[k - 1] = h.frames[k];
    s.frames.back() = newest;
    return s;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

DefenseKind parse_defense_kind(std::string_view name) {
    if (name == "none") return DefenseKind::none;
    if (name == "detect_only") return DefenseKind::detect_only;
    if (name == "foresight_suggest") return DefenseKind::foresight_suggest;
    if (name == "random_on_flag") return DefenseKind::random_on_flag;
    if (name == "squeeze_suggest") return DefenseKind::squeeze_suggest;
    throw Error("unknown defense '" + std::string(name) +
                "' (expected none, detect_only, foresight_suggest, random_on_flag or squeeze_suggest)");
}

std::string_view defense_kind_name(DefenseKind kind) {
    switch (kind) {
        case DefenseKind::none: return "none";
        case DefenseKind::detect_only: return "detect_only";
        case DefenseKind::foresight_suggest: return "foresight_suggest";
        case DefenseKind::random_on_flag: return "random_on_flag";
        case DefenseKind::squeeze_suggest: return "squeeze_suggest";
    }
    return "?";
}

void GuardConfig::validate() const {
    attack.validate();
    schedule.validate();
    if (detector) detector->validate();
    const bool needs_detector = defense != DefenseKind::none;
    if (needs_detector && !detector) {
        throw Error("guard: defense '" + std::string(defense_kind_name(defense)) + "' needs a detector");
    }
    if (defense == DefenseKind::foresight_suggest && detector->kind != detect::DetectorKind::foresight) {
        throw Error("guard: foresight_suggest needs the foresight detector");
    }
    if (defense == DefenseKind::squeeze_suggest && detector->kind != detect::DetectorKind::squeeze) {
        throw Error("guard: squeeze_suggest needs the squeeze detector");
    }
}

std::map<std::string, std::string> GuardConfig::echo() const {
    std::map<std::string, std::string> e{
        {"env", std::string(env::env_kind_name(env))},
        {"attack", std::string(attack::attack_kind_name(attack.kind))},
        {"eps", fmt(attack.epsilon)},
        {"alpha", fmt(attack.step_size())},
        {"iters", std::to_string(attack.iterations)},
        {"attack_mode", schedule.mode == attack::ScheduleMode::bernoulli ? "bernoulli" : "periodic"},
        {"attack_ratio", fmt(schedule.ratio)},
        {"period", std::to_string(schedule.period)},
        {"width", std::to_string(schedule.width)},
        {"defense", std::string(defense_kind_name(defense))},
    };
    if (detector) {
        e["detector"] = std::string(detect::detector_kind_name(detector->kind));
        e["metric"] = std::string(detect::metric_name(detector->metric));
        e["threshold"] = fmt(detector->threshold);
    }
    return e;
}

GuardLoop::GuardLoop(const GuardConfig& config, const GuardModels& models, std::uint64_t seed,
                     const env::Frame& first)
    : config_(config), models_(models), random_rng_(nn::derive_seed(seed, 3)) {
    if (!models_.policy) throw Error("guard: policy model required");
    history_.frames.fill(first);
    history_.actions.fill(env::noop_action(config.env));
    if (config.detector) {
        detect::DetectorModels dm;
        dm.policy = models_.policy;
        dm.autoencoder = models_.autoencoder;
        if (config.detector->kind == detect::DetectorKind::foresight) {
            if (models_.oracle_predictor) {
                predictor_ = std::make_unique<foresight::OraclePredictor>();
            } else {
                if (!models_.predictor) throw Error("guard: foresight detector needs --predictor");
                predictor_ = std::make_unique<foresight::LearnedPredictor>(*models_.predictor);
            }
            dm.predictor = predictor_.get();
        }
        detector_.emplace(*config.detector, dm, nn::derive_seed(seed, 4));
    }
}

StepRecord GuardLoop::protected_step(int t, const env::Frame& observed, const env::Frame& pristine, bool attacked,
                                     bool attack_success) {
    const auto& policy = *models_.policy;
    StepRecord rec;
    rec.t = t;
    rec.attacked = attacked;
    rec.attack_success = attacked && attack_success;
    rec.action_clean = policy::greedy_action(policy, stack_from(history_, pristine));
    std::size_t action = policy::greedy_action(policy, stack_from(history_, observed));

    rec.scored = detector_.has_value() && t >= static_cast<int>(foresight::kHistory);
    if (rec.scored) {
        if (predictor_) predictor_->observe_pristine(pristine);
        const auto verdict = detector_->score(history_, observed);
        rec.score = verdict.score;
        rec.flagged = verdict.flagged;
        if (verdict.flagged) {
            switch (config_.defense) {
                case DefenseKind::foresight_suggest:
                case DefenseKind::squeeze_suggest: action = verdict.suggested.argmax(); break;
                case DefenseKind::random_on_flag: action = random_rng_.below(policy.action_count); break;
                case DefenseKind::none:
                case DefenseKind::detect_only: break;
            }
        }
    }
    rec.action_taken = action;
    for (std::size_t k = 0; k + 1 < foresight::kHistory; ++k) {
        history_.frames[k] = history_.frames[k + 1];
        history_.actions[k] = history_.actions[k + 1];
    }
    history_.frames.back() = observed;
    history_.actions.back() = action;
    return rec;
}

EpisodeLog run_episode(const GuardConfig& config, const GuardModels& models, std::uint64_t seed) {
    config.validate();
    if (!models.policy) throw Error("guard: policy model required");
    if (models.policy->env != config.env) throw Error("guard: policy was trained on a different environment");
    EpisodeLog log;
    log.seed = seed;
    log.config = config.echo();

    auto reset = env::env_reset(config.env, seed);
    env::Frame pristine = reset.frame;
    GuardLoop loop(config, models, seed, pristine);
    const auto mask = attack::schedule_mask(env::kEpisodeCap, config.schedule, nn::derive_seed(seed, 2));
    for (int t = 0;; ++t) {
        env::Frame observed = pristine;
        bool success = false;
        const bool attacked = mask.at(static_cast<std::size_t>(t));
        if (attacked) {
            const auto clean_stack = stack_from(loop.history(), pristine);
            const auto outcome = attack::craft(*models.policy, clean_stack, config.attack);
            observed = outcome.adversarial;
            success = outcome.success;
        }
        StepRecord rec = loop.protected_step(t, observed, pristine, attacked, success);
        const auto sr = env::env_step(reset.state, rec.action_taken);
        rec.reward = sr.reward;
        log.total_return += sr.reward;
        log.steps.push_back(rec);
        if (sr.done) break;
        pristine = sr.frame;
    }
    return log;
}

std::vector<EpisodeLog> run_trials(const GuardConfig& config, const GuardModels& models,
                                   const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
    std::vector<EpisodeLog> logs(seeds.size());
    if (jobs <= 1 || seeds.size() <= 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i) logs[i] = run_episode(config, models, seeds[i]);
        return logs;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
            try {
                logs[i] = run_episode(config, models, seeds[i]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < std::min(jobs, seeds.size()); ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return logs;
}

void write_log(std::ostream& os, const EpisodeLog& log) {
    nlohmann::ordered_json head;
    head["seed"] = log.seed;
    head["return"] = log.total_return;
    head["steps"] = log.steps.size();
    head["config"] = log.config;
    os << head.dump() << '\n';
    for (const auto& s : log.steps) {
        nlohmann::ordered_json j;
        j["t"] = s.t;
        j["attacked"] = s.attacked;
        j["attack_success"] = s.attack_success;
        j["scored"] = s.scored;
        j["score"] = s.score;
        j["flagged"] = s.flagged;
        j["action_taken"] = s.action_taken;
        j["action_clean"] = s.action_clean;
        j["reward"] = s.reward;
        os << j.dump() << '\n';
    }
}

EpisodeLog read_log(std::istream& is) {
    EpisodeLog log;
    std::string line;
    try {
        if (!std::getline(is, line)) throw FileError("episode log: missing header line");
        const auto head = nlohmann::json::parse(line);
        log.seed = head.at("seed").get<std::uint64_t>();
        log.total_return = head.at("return").get<double>();
        log.config = head.at("config").get<std::map<std::string, std::string>>();
        const auto n = head.at("steps").get<std::size_t>();
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::getline(is, line)) throw FileError("episode log: truncated step records");
            const auto j = nlohmann::json::parse(line);
            StepRecord s;
            s.t = j.at("t").get<int>();
            s.attacked = j.at("attacked").get<bool>();
            s.attack_success = j.at("attack_success").get<bool>();
            s.scored = j.at("scored").get<bool>();
            s.score = j.at("score").get<double>();
            s.flagged = j.at("flagged").get<bool>();
            s.action_taken = j.at("action_taken").get<std::size_t>();
            s.action_clean = j.at("action_clean").get<std::size_t>();
            s.reward = j.at("reward").get<double>();
            log.steps.push_back(s);
        }
    } catch (const nlohmann::json::exception& ex) {
        throw FileError("episode log: " + std::string(ex.what()));
    }
    return log;
}

}  // namespace fg::guard
