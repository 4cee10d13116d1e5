#include "cyops/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "cyops/emu_env.hpp"
#include "cyops/format.hpp"
#include "cyops/oracle.hpp"
#include "cyops/simgen.hpp"

namespace cyops {

void LoopConfig::validate() const {
    if (delta_r_t && !(*delta_r_t > 0.0)) throw std::invalid_argument("delta_r_t must be positive");
    if (regen_every_k < 1) throw std::invalid_argument("regen_every_k must be at least 1");
    if (plateau_patience < 1) throw std::invalid_argument("plateau_patience must be at least 1");
    if (window < 1) throw std::invalid_argument("window must be at least 1");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
    if (sim_eval_every < 1 || sim_eval_runs < 1) throw std::invalid_argument("simulator evaluation cadence must be positive");
    if (sim_min_episodes < 0 || sim_max_episodes < sim_min_episodes) {
        throw std::invalid_argument("simulator episode bounds are inconsistent");
    }
    if (eval_runs < 1 || screen_runs < 0 || seg1_max_episodes < 0) throw std::invalid_argument("evaluation runs out of range");
    seg1.cfg.validate();
    seg3.cfg.validate();
}

std::string_view to_string(Segment s) {
    switch (s) {
        case Segment::Seg1: return "SEG1";
        case Segment::Seg2: return "SEG2";
        case Segment::Seg3: return "SEG3";
        case Segment::Seg4: return "SEG4";
        case Segment::Seg5: return "SEG5";
        case Segment::Seg6: return "SEG6";
    }
    return "SEG?";
}

bool seg1_trigger(const std::vector<double>& rewards, int window, double delta) {
    const auto w = static_cast<std::size_t>(window);
    if (window < 1 || rewards.size() < 2 * w) return false;
    const double first = std::accumulate(rewards.begin(), rewards.begin() + static_cast<std::ptrdiff_t>(w), 0.0) / window;
    const double last = std::accumulate(rewards.end() - static_cast<std::ptrdiff_t>(w), rewards.end(), 0.0) / window;
    return last - first > delta;
}

bool seg3_plateau(const std::vector<double>& evals, int patience) {
    const auto p = static_cast<std::size_t>(patience);
    if (patience < 1 || evals.size() <= p) return false;
    const auto split = evals.end() - static_cast<std::ptrdiff_t>(p);
    const double best_before = *std::max_element(evals.begin(), split);
    return *std::max_element(split, evals.end()) <= best_before;
}

double default_required_return(const Scenario& scenario) {
    auto g = enumerate(scenario);
    auto r = value_iteration(g, scenario.game);
    return r.optimal_expected_return - 0.05 * std::abs(r.optimal_expected_return);
}

namespace {

std::uint64_t segment_seed(std::uint64_t seed, int iteration, Segment s) {
    return derive_stream(derive_stream(seed, streams::kSegment),
                         static_cast<std::uint64_t>(iteration) * 16 + static_cast<std::uint64_t>(s));
}

struct EpisodeTally {
    std::vector<double> returns;
    int best_len{0};
    int max_steps{0};

    void add(const EpisodeSummary& e) {
        returns.push_back(e.episode_return);
        if (e.length < max_steps && (best_len == 0 || e.length < best_len)) best_len = e.length;
    }
    double window_mean(int window) const {
        if (returns.empty()) return 0.0;
        const auto n = std::min(returns.size(), static_cast<std::size_t>(window));
        return std::accumulate(returns.end() - static_cast<std::ptrdiff_t>(n), returns.end(), 0.0) /
               static_cast<double>(n);
    }
};

std::uint64_t total_steps(const EvalResult& e) {
    return std::accumulate(e.lengths.begin(), e.lengths.end(), std::uint64_t{0});
}

TeeSink make_tee(CountIndex& logs, TransitionSink* external) {
    std::vector<TransitionSink*> targets{&logs};
    if (external) targets.push_back(external);
    return TeeSink(std::move(targets));
}

struct Gate {
    bool passed{false};
    EvalResult last;
    double virtual_s{0.0};
    std::uint64_t steps{0};
};

Gate emulator_gate(EmuEnv& emu, const Learner& learner, double r_t, int screen_runs, int eval_runs,
                   std::uint64_t seed, TransitionSink* sink, std::int64_t& next_episode) {
    Gate g;
    if (screen_runs > 0) {
        g.last = evaluate(emu, learner, screen_runs, derive_stream(seed, 1), sink, next_episode);
        next_episode += screen_runs;
        g.virtual_s += g.last.virtual_time_s;
        g.steps += total_steps(g.last);
        if (g.last.mean_return < r_t) return g;
    }
    g.last = evaluate(emu, learner, eval_runs, derive_stream(seed, 2), sink, next_episode);
    next_episode += eval_runs;
    g.virtual_s += g.last.virtual_time_s;
    g.steps += total_steps(g.last);
    g.passed = g.last.mean_return >= r_t;
    return g;
}

struct SimTraining {
    std::unique_ptr<Learner> learner;
    SegmentRecord record;
};

SimTraining train_in_simulator(const LoopConfig& cfg, std::shared_ptr<const EmpiricalMdp> mdp,
                               std::shared_ptr<const ActionModel> model, std::uint64_t seed) {
    SimEnv sim(std::move(mdp), std::move(model));
    SimTraining out;
    out.learner = make_learner(cfg.seg3.kind, cfg.seg3.cfg, sim.num_actions());
    Trainer trainer(sim, *out.learner, cfg.seg3.cfg, seed);
    EpisodeTally tally;
    tally.max_steps = sim.max_steps();
    std::vector<double> evals;
    int episodes = 0;
    while (episodes < cfg.sim_max_episodes) {
        for (int i = 0; i < cfg.sim_eval_every && episodes < cfg.sim_max_episodes; ++i, ++episodes) {
            tally.add(trainer.run_episode());
        }
        evals.push_back(trainer.run_evaluation(cfg.sim_eval_runs).mean_return);
        if (episodes >= cfg.sim_min_episodes && seg3_plateau(evals, cfg.plateau_patience)) break;
    }
    out.record = {Segment::Seg3, EnvKind::Simulator, std::string(out.learner->name()), trainer.virtual_time(),
                  tally.window_mean(cfg.window), tally.best_len, evals.empty() ? 0.0 : evals.back()};
    return out;
}

}  // namespace

UnifiedReport run_unified(const Scenario& scenario, const LoopConfig& cfg, std::uint64_t seed,
                          TransitionSink* emulator_log) {
    cfg.validate();
    auto scen = std::make_shared<const Scenario>(scenario);
    auto model = std::make_shared<const ActionModel>(scen);
    EmuEnv emu(model);
    const int A = emu.num_actions();

    UnifiedReport report;
    report.r_t = cfg.r_t ? *cfg.r_t : default_required_return(scenario);

    CountIndex logs;
    logs.scenario_digest = emu.scenario_digest();
    TeeSink sinks = make_tee(logs, emulator_log);
    std::int64_t next_episode = 0;

    // SEG1: emulator training until the moving mean jumps.
    auto seg1_learner = make_learner(cfg.seg1.kind, cfg.seg1.cfg, A);
    {
        Trainer t(emu, *seg1_learner, cfg.seg1.cfg, segment_seed(seed, 0, Segment::Seg1));
        t.set_sink(&sinks);
        t.set_episode_base(next_episode);
        EpisodeTally tally;
        tally.max_steps = emu.max_steps();
        std::optional<double> delta = cfg.delta_r_t;
        for (int ep = 0; ep < cfg.seg1_max_episodes; ++ep) {
            tally.add(t.run_episode());
            if (!delta && tally.returns.size() == static_cast<std::size_t>(cfg.window)) {
                const double first = tally.window_mean(cfg.window);
                delta = std::max(0.5 * std::abs(first), 1.0);
            }
            if (delta && seg1_trigger(tally.returns, cfg.window, *delta)) break;
        }
        next_episode += static_cast<std::int64_t>(t.episodes());
        report.emulator_virtual_s += t.virtual_time();
        report.emulator_steps += t.steps();
        report.segments.push_back({Segment::Seg1, EnvKind::Emulator, std::string(seg1_learner->name()),
                                   t.virtual_time(), tally.window_mean(cfg.window), tally.best_len, 0.0});
    }

    std::unique_ptr<Learner> transferred;
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        report.iterations = it;

        // SEG2 (and SEG6 on later iterations): rebuild from every log so far.
        auto mdp = std::make_shared<const EmpiricalMdp>(build_mdp(logs, scenario));
        report.segments.push_back({it == 1 ? Segment::Seg2 : Segment::Seg6, EnvKind::Simulator, "-", 0.0, 0.0, 0,
                                   0.0});

        SimTraining sim;
        if (cfg.parallel && transferred) {
            // Simulator training on the snapshot runs while the emulator keeps
            // collecting with the previous policy; only the logs are merged after.
            auto future = std::async(std::launch::async, train_in_simulator, std::cref(cfg), mdp, model,
                                     segment_seed(seed, it, Segment::Seg3));
            CountIndex pending;
            pending.scenario_digest = logs.scenario_digest;
            TeeSink side = make_tee(pending, emulator_log);
            Trainer t(emu, *transferred, cfg.seg1.cfg, segment_seed(seed, it, Segment::Seg5));
            t.restart_epsilon(cfg.seg5_epsilon);
            t.set_sink(&side);
            t.set_episode_base(next_episode);
            EpisodeTally tally;
            tally.max_steps = emu.max_steps();
            for (int k = 0; k < cfg.regen_every_k; ++k) tally.add(t.run_episode());
            sim = future.get();
            next_episode += static_cast<std::int64_t>(t.episodes());
            logs.merge(pending);
            report.emulator_virtual_s += t.virtual_time();
            report.emulator_steps += t.steps();
            report.simulator_virtual_s += sim.record.elapsed_virtual_s;
            report.segments.push_back(sim.record);
            report.segments.push_back({Segment::Seg5, EnvKind::Emulator, std::string(transferred->name()),
                                       t.virtual_time(), tally.window_mean(cfg.window), tally.best_len, 0.0});
        } else {
            sim = train_in_simulator(cfg, mdp, model, segment_seed(seed, it, Segment::Seg3));
            report.simulator_virtual_s += sim.record.elapsed_virtual_s;
            report.segments.push_back(sim.record);
        }

        // SEG4: transfer back and evaluate in the emulator.
        auto gate = emulator_gate(emu, *sim.learner, report.r_t, cfg.screen_runs, cfg.eval_runs,
                                  segment_seed(seed, it, Segment::Seg4), cfg.log_evaluations ? &sinks : nullptr,
                                  next_episode);
        report.emulator_virtual_s += gate.virtual_s;
        report.emulator_steps += gate.steps;
        report.final_eval = gate.last;
        report.segments.push_back({Segment::Seg4, EnvKind::Emulator, std::string(sim.learner->name()), gate.virtual_s,
                                   gate.last.mean_return, 0, gate.last.mean_return});
        if (gate.passed) {
            report.completed = true;
            break;
        }

        transferred = std::move(sim.learner);
        if (!cfg.parallel) {
            // SEG5: keep training the transferred table in the emulator.
            Trainer t(emu, *transferred, cfg.seg1.cfg, segment_seed(seed, it, Segment::Seg5));
            t.restart_epsilon(cfg.seg5_epsilon);
            t.set_sink(&sinks);
            t.set_episode_base(next_episode);
            EpisodeTally tally;
            tally.max_steps = emu.max_steps();
            for (int k = 0; k < cfg.regen_every_k; ++k) tally.add(t.run_episode());
            next_episode += static_cast<std::int64_t>(t.episodes());
            report.emulator_virtual_s += t.virtual_time();
            report.emulator_steps += t.steps();
            report.segments.push_back({Segment::Seg5, EnvKind::Emulator, std::string(transferred->name()),
                                       t.virtual_time(), tally.window_mean(cfg.window), tally.best_len, 0.0});
        }
    }
    return report;
}

BaselineReport run_emulator_only(const Scenario& scenario, const BaselineConfig& cfg, std::uint64_t seed,
                                 TransitionSink* emulator_log) {
    BaselineReport report;
    if (cfg.budget_episodes == 0 && cfg.budget_steps == 0) return report;
    if (cfg.eval_every < 1 || cfg.eval_runs < 1 || cfg.screen_runs < 0) {
        throw std::invalid_argument("baseline evaluation cadence out of range");
    }
    auto scen = std::make_shared<const Scenario>(scenario);
    auto model = std::make_shared<const ActionModel>(scen);
    EmuEnv emu(model);
    report.r_t = cfg.r_t ? *cfg.r_t : default_required_return(scenario);

    auto learner = make_learner(cfg.learner.kind, cfg.learner.cfg, emu.num_actions());
    const auto base_seed = derive_stream(seed, streams::kBaseline);
    Trainer t(emu, *learner, cfg.learner.cfg, base_seed);
    t.set_sink(emulator_log);
    std::int64_t next_eval_episode = std::int64_t{1} << 40;
    double eval_time = 0.0;
    std::uint64_t eval_steps = 0;
    int checks = 0;
    auto budget_left = [&] {
        if (cfg.budget_episodes > 0 && t.episodes() >= cfg.budget_episodes) return false;
        if (cfg.budget_steps > 0 && t.steps() >= cfg.budget_steps) return false;
        return true;
    };
    while (budget_left()) {
        t.run_episode();
        auto row = t.metrics_row();
        row.virtual_time_s += eval_time;
        if (t.episodes() % static_cast<std::uint64_t>(cfg.eval_every) == 0) {
            auto gate = emulator_gate(emu, *learner, report.r_t, cfg.screen_runs, cfg.eval_runs,
                                      derive_stream(base_seed, 0x100 + static_cast<std::uint64_t>(checks++)),
                                      emulator_log, next_eval_episode);
            eval_time += gate.virtual_s;
            eval_steps += gate.steps;
            report.final_eval = gate.last;
            row.avg_evaluation_reward = gate.last.mean_return;
            row.virtual_time_s = t.virtual_time() + eval_time;
            if (gate.passed) {
                report.completed = true;
                report.metrics.push_back(row);
                break;
            }
        } else if (!report.metrics.empty()) {
            row.avg_evaluation_reward = report.metrics.back().avg_evaluation_reward;
        }
        report.metrics.push_back(row);
    }
    report.episodes = t.episodes();
    report.emulator_virtual_s = t.virtual_time() + eval_time;
    report.emulator_steps = t.steps() + eval_steps;
    return report;
}

void write_unified_report(std::ostream& out, const UnifiedReport& r) {
    out << "segment,env,learner,elapsed_virtual_s,avg_reward,best_episode_len,eval_reward\n";
    for (const auto& s : r.segments) {
        out << to_string(s.segment) << ',' << to_string(s.env) << ',' << s.learner << ','
            << format_number(s.elapsed_virtual_s) << ',' << format_number(s.avg_reward) << ',' << s.best_episode_len
            << ',' << format_number(s.eval_reward) << '\n';
    }
    out << "#summary,completed=" << (r.completed ? 1 : 0) << ",iterations=" << r.iterations
        << ",emulator_virtual_s=" << format_number(r.emulator_virtual_s) << ",emulator_steps=" << r.emulator_steps
        << ",simulator_virtual_s=" << format_number(r.simulator_virtual_s) << ",r_t=" << format_number(r.r_t)
        << ",final_eval_runs=" << r.final_eval.returns.size()
        << ",final_eval_mean=" << format_number(r.final_eval.mean_return) << '\n';
}

void write_unified_report(const std::filesystem::path& path, const UnifiedReport& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_unified_report(out, r);
    if (!out) throw std::runtime_error("I/O failure writing " + path.string());
}

}  // namespace cyops
