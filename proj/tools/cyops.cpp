#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cyops/emu_env.hpp"
#include "cyops/format.hpp"
#include "cyops/learners.hpp"
#include "cyops/oracle.hpp"
#include "cyops/orchestrator.hpp"
#include "cyops/scenario.hpp"
#include "cyops/simgen.hpp"
#include "cyops/trace_store.hpp"

#ifndef CYOPS_VERSION
#define CYOPS_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cyops;

namespace {

enum Exit : int { kOk = 0, kDigest = 2, kConfig = 3, kBudget = 4, kIo = 5 };

struct Failure : std::runtime_error {
    Failure(int code, const std::string& what) : std::runtime_error(what), code(code) {}
    int code;
};

std::string_view kind_name(int code) {
    switch (code) {
        case kDigest: return "digest_mismatch";
        case kConfig: return "invalid_config";
        case kBudget: return "budget_exceeded";
        case kIo: return "io";
    }
    return "internal";
}

struct Common {
    std::string scenario;  // empty: built-in default
    std::uint64_t seed{1};
    std::string out{"out"};
};

struct LearnerFlags {
    std::string kind{"q"};
    LearnerConfig cfg;
};

void add_common(CLI::App* sub, Common& c, bool with_scenario = true) {
    if (with_scenario) sub->add_option("--scenario", c.scenario, "scenario JSON (default: built-in)");
    sub->add_option("--seed", c.seed, "root seed")->capture_default_str();
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
}

void add_learner(CLI::App* sub, LearnerFlags& f) {
    sub->add_option("--learner", f.kind, "q | dqn | c51")->capture_default_str();
    sub->add_option("--alpha", f.cfg.alpha)->capture_default_str();
    sub->add_option("--gamma", f.cfg.gamma)->capture_default_str();
    sub->add_option("--epsilon-start", f.cfg.epsilon.start)->capture_default_str();
    sub->add_option("--epsilon-end", f.cfg.epsilon.end)->capture_default_str();
    sub->add_option("--epsilon-decay", f.cfg.epsilon.decay_steps, "steps")->capture_default_str();
    sub->add_option("--atoms", f.cfg.atoms)->capture_default_str();
    sub->add_option("--vmin", f.cfg.v_min)->capture_default_str();
    sub->add_option("--vmax", f.cfg.v_max)->capture_default_str();
    sub->add_option("--q-init", f.cfg.q_init)->capture_default_str();
}

void add_budget(CLI::App* sub, LearnerFlags& f) {
    sub->add_option("--budget-steps", f.cfg.budget_steps)->capture_default_str();
    sub->add_option("--budget-episodes", f.cfg.budget_episodes)->capture_default_str();
    sub->add_option("--eval-every", f.cfg.eval_every, "episodes; 0 disables")->capture_default_str();
    sub->add_option("--eval-runs", f.cfg.eval_runs)->capture_default_str();
}

LearnerKind parse_kind(const std::string& s) {
    try {
        return learner_kind_from_string(s);
    } catch (const std::invalid_argument& e) {
        throw Failure(kConfig, e.what());
    }
}

void check_config(const LearnerConfig& cfg) {
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw Failure(kConfig, e.what());
    }
}

ScenarioPtr load_scenario(const Common& c) {
    if (c.scenario.empty()) return std::make_shared<const Scenario>(builtin_default());
    if (!fs::exists(c.scenario)) throw Failure(kIo, "scenario file not found: " + c.scenario);
    try {
        return std::make_shared<const Scenario>(load_scenario_file(c.scenario));
    } catch (const ScenarioError& e) {
        throw Failure(kConfig, e.what());
    }
}

fs::path prepare_out(const Common& c) {
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec) throw Failure(kIo, "cannot create output directory " + c.out + ": " + ec.message());
    return c.out;
}

void write_manifest(const fs::path& dir, const CLI::App& sub, const Common& c, std::optional<std::uint64_t> digest,
                    const std::vector<std::string>& argv) {
    json m;
    m["subcommand"] = sub.get_name();
    m["scenario_path"] = c.scenario.empty() ? "builtin:default" : c.scenario;
    m["scenario_digest"] = digest ? json(digest_hex(*digest)) : json(nullptr);
    m["seed"] = c.seed;
    m["config"] = sub.config_to_str(true, false);
    m["argv"] = argv;
    m["output_dir"] = c.out;
    m["tool_version"] = CYOPS_VERSION;
    std::ofstream out(dir / "manifest.json");
    out << m.dump(2) << '\n';
    if (!out) throw Failure(kIo, "cannot write manifest in " + dir.string());
}

void write_table(const fs::path& path, const Learner& learner) {
    std::ofstream out(path);
    learner.write_table(out);
    if (!out) throw Failure(kIo, "cannot write " + path.string());
}

std::uint64_t to_evaluate_seed(std::uint64_t seed) { return derive_stream(seed, streams::kEvalEpisodes); }

int cmd_oracle(const CLI::App& sub, const Common& c, std::size_t node_budget, const std::vector<std::string>& argv) {
    auto s = load_scenario(c);
    auto dir = prepare_out(c);
    write_manifest(dir, sub, c, scenario_digest(*s), argv);
    StateGraph g;
    try {
        g = enumerate(*s, node_budget);
    } catch (const OracleBudgetExceeded& e) {
        throw Failure(kBudget, e.what());
    }
    auto r = value_iteration(g, s->game);
    std::ofstream out(dir / "oracle.csv");
    out << "metric,value\n"
        << "optimal_expected_return," << format_number(r.optimal_expected_return) << '\n'
        << "expected_steps," << format_number(r.expected_steps) << '\n'
        << "best_case_steps," << r.best_case_steps << '\n'
        << "goal_reachable," << (r.goal_reachable ? 1 : 0) << '\n'
        << "nodes," << g.num_nodes() << '\n'
        << "edges," << g.num_edges() << '\n'
        << "horizon," << g.horizon << '\n';
    if (!out) throw Failure(kIo, "cannot write oracle.csv");
    std::printf("optimal_return=%s expected_steps=%s best_case_steps=%d nodes=%zu edges=%zu\n",
                format_number(r.optimal_expected_return).c_str(), format_number(r.expected_steps).c_str(),
                r.best_case_steps, g.num_nodes(), g.num_edges());
    return kOk;
}

int cmd_emu_train(const CLI::App& sub, const Common& c, const LearnerFlags& f, const std::vector<std::string>& argv) {
    auto kind = parse_kind(f.kind);
    check_config(f.cfg);
    auto s = load_scenario(c);
    auto dir = prepare_out(c);
    const auto digest = scenario_digest(*s);
    write_manifest(dir, sub, c, digest, argv);
    EmuEnv env(s);
    auto learner = make_learner(kind, f.cfg, env.num_actions());
    TraceWriter trace(dir / "trace.cgt", {1, digest, c.seed, "cyops emu-train"});
    Trainer trainer(env, *learner, f.cfg, c.seed);
    trainer.set_sink(&trace);
    auto rows = trainer.train();
    trace.close();
    write_metrics_csv(dir / "metrics.csv", rows);
    write_table(dir / "table.csv", *learner);
    std::printf("steps=%llu episodes=%llu records=%llu\n", static_cast<unsigned long long>(trainer.steps()),
                static_cast<unsigned long long>(trainer.episodes()),
                static_cast<unsigned long long>(trace.records_written()));
    return kOk;
}

int cmd_simgen(const CLI::App& sub, const Common& c, const std::vector<std::string>& traces,
               const std::vector<std::string>& argv) {
    auto s = load_scenario(c);
    auto dir = prepare_out(c);
    write_manifest(dir, sub, c, scenario_digest(*s), argv);
    std::vector<fs::path> paths;
    for (const auto& t : traces) {
        if (!fs::exists(t)) throw Failure(kIo, "trace not found: " + t);
        paths.emplace_back(t);
    }
    auto idx = load(paths);
    auto mdp = build_mdp(idx, *s);
    save_simulator(mdp, dir / "simulator.cgs");
    write_report(sufficiency_report(mdp, {}, {}), dir / "sufficiency.csv");
    export_unknown_histogram({}, dir / "unknown_histogram.csv");
    std::printf("observations=%zu pairs=%zu transitions=%llu\n", mdp.num_observations(), mdp.num_pairs(),
                static_cast<unsigned long long>(mdp.total_transitions()));
    return kOk;
}

std::shared_ptr<const EmpiricalMdp> load_sim(const std::string& path, const Scenario& s) {
    if (!fs::exists(path)) throw Failure(kIo, "simulator file not found: " + path);
    auto mdp = std::make_shared<const EmpiricalMdp>(load_simulator(path));
    if (mdp->scenario_digest() != scenario_digest(s)) {
        throw Failure(kDigest, "scenario digest mismatch: simulator has " + digest_hex(mdp->scenario_digest()) +
                                   ", scenario has " + digest_hex(scenario_digest(s)));
    }
    if (mdp->num_actions() != static_cast<int>(s.actions.size())) {
        throw Failure(kConfig, "simulator action count differs from the scenario");
    }
    return mdp;
}

int cmd_sim_train(const CLI::App& sub, const Common& c, const LearnerFlags& f, const std::string& sim_path,
                  const std::vector<std::string>& argv) {
    auto kind = parse_kind(f.kind);
    check_config(f.cfg);
    auto s = load_scenario(c);
    auto dir = prepare_out(c);
    write_manifest(dir, sub, c, scenario_digest(*s), argv);
    auto mdp = load_sim(sim_path, *s);
    SimEnv env(mdp, std::make_shared<const ActionModel>(s));
    auto learner = make_learner(kind, f.cfg, env.num_actions());
    Trainer trainer(env, *learner, f.cfg, c.seed);
    auto rows = trainer.train();
    auto eval = evaluate(env, *learner, f.cfg.eval_runs, to_evaluate_seed(c.seed));
    write_metrics_csv(dir / "metrics.csv", rows);
    write_table(dir / "table.csv", *learner);
    write_report(sufficiency_report(*mdp, env.ledger(), eval.returns), dir / "sufficiency.csv");
    export_unknown_histogram(env.ledger(), dir / "unknown_histogram.csv");
    std::printf("steps=%llu episodes=%llu sim_eval_mean=%s unknown=%llu\n",
                static_cast<unsigned long long>(trainer.steps()), static_cast<unsigned long long>(trainer.episodes()),
                format_number(eval.mean_return).c_str(), static_cast<unsigned long long>(env.ledger().total));
    return kOk;
}

struct LoopFlags {
    LearnerFlags learner;
    LoopConfig loop;
    std::optional<double> delta_rt;
    std::optional<double> rt;
    std::uint64_t sim_epsilon_decay{sim_learner_defaults().epsilon.decay_steps};
};

int cmd_cross_train(const CLI::App& sub, const Common& c, LoopFlags& f, const std::vector<std::string>& argv) {
    auto kind = parse_kind(f.learner.kind);
    LoopConfig cfg = f.loop;
    cfg.delta_r_t = f.delta_rt;
    cfg.r_t = f.rt;
    cfg.seg1 = {kind, f.learner.cfg};
    cfg.seg3 = {kind, f.learner.cfg};
    cfg.seg3.cfg.epsilon = {f.learner.cfg.epsilon.start, f.learner.cfg.epsilon.end, f.sim_epsilon_decay};
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw Failure(kConfig, e.what());
    }
    auto s = load_scenario(c);
    auto dir = prepare_out(c);
    const auto digest = scenario_digest(*s);
    write_manifest(dir, sub, c, digest, argv);
    TraceWriter trace(dir / "emulator.cgt", {1, digest, c.seed, "cyops cross-train"});
    UnifiedReport r;
    try {
        r = run_unified(*s, cfg, c.seed, &trace);
    } catch (const OracleBudgetExceeded& e) {
        throw Failure(kBudget, e.what());
    }
    trace.close();
    write_unified_report(dir / "unified_report.csv", r);
    std::printf("completed=%d iterations=%d emulator_virtual_s=%s emulator_steps=%llu r_t=%s final_eval_mean=%s\n",
                r.completed ? 1 : 0, r.iterations, format_number(r.emulator_virtual_s).c_str(),
                static_cast<unsigned long long>(r.emulator_steps), format_number(r.r_t).c_str(),
                format_number(r.final_eval.mean_return).c_str());
    return kOk;
}

int cmd_eval(const CLI::App& sub, const Common& c, const std::string& table, const std::string& sim_path, int runs,
             const std::vector<std::string>& argv) {
    if (runs < 1) throw Failure(kConfig, "--eval-runs must be positive");
    auto s = load_scenario(c);
    auto dir = prepare_out(c);
    write_manifest(dir, sub, c, scenario_digest(*s), argv);
    if (!fs::exists(table)) throw Failure(kIo, "policy table not found: " + table);
    std::unique_ptr<Learner> learner;
    try {
        learner = read_table_file(table, static_cast<int>(s->actions.size()));
    } catch (const std::invalid_argument& e) {
        throw Failure(kConfig, e.what());
    }
    std::unique_ptr<Environment> env;
    if (sim_path.empty()) {
        env = std::make_unique<EmuEnv>(s);
    } else {
        env = std::make_unique<SimEnv>(load_sim(sim_path, *s), std::make_shared<const ActionModel>(s));
    }
    auto res = evaluate(*env, *learner, runs, to_evaluate_seed(c.seed));
    std::ofstream out(dir / "eval.csv");
    out << "run,return,length\n";
    for (std::size_t i = 0; i < res.returns.size(); ++i) {
        out << i << ',' << format_number(res.returns[i]) << ',' << res.lengths[i] << '\n';
    }
    if (!out) throw Failure(kIo, "cannot write eval.csv");
    std::printf("env=%s runs=%d mean_return=%s mean_length=%s\n", std::string(to_string(env->kind())).c_str(), runs,
                format_number(res.mean_return).c_str(), format_number(res.mean_length).c_str());
    return kOk;
}

int classify(const std::exception& e) {
    const std::string what = e.what();
    if (what.find("digest mismatch") != std::string::npos || what.find("header mismatch") != std::string::npos) {
        return kDigest;
    }
    if (dynamic_cast<const SimgenError*>(&e) || dynamic_cast<const std::invalid_argument*>(&e) ||
        dynamic_cast<const ScenarioError*>(&e)) {
        return what.find("corrupt") != std::string::npos ? kIo : kConfig;
    }
    if (dynamic_cast<const TraceError*>(&e)) return kIo;
    return kIo;
}

void report_error(int code, const std::string& message) {
    json line = {{"error", kind_name(code)}, {"exit", code}, {"message", message}};
    std::cerr << line.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cyber-operations training: emulator, empirical simulator, learners and the unified loop"};
    app.require_subcommand(1);
    app.set_version_flag("--version", CYOPS_VERSION);
    const std::vector<std::string> args(argv, argv + argc);

    Common common;
    std::size_t node_budget = 1'000'000;
    auto* oracle = app.add_subcommand("oracle", "exact optimum by backward induction");
    add_common(oracle, common);
    oracle->add_option("--budget-nodes", node_budget)->capture_default_str();

    LearnerFlags emu_flags;
    auto* emu_train = app.add_subcommand("emu-train", "train in the emulator, logging every transition");
    add_common(emu_train, common);
    add_learner(emu_train, emu_flags);
    add_budget(emu_train, emu_flags);

    std::vector<std::string> traces;
    auto* simgen = app.add_subcommand("simgen", "build a simulator from trace logs");
    add_common(simgen, common);
    simgen->add_option("--trace", traces, "trace log (.cgt); repeatable")->required();

    LearnerFlags sim_flags;
    std::string sim_path;
    auto* sim_train = app.add_subcommand("sim-train", "train in a generated simulator");
    add_common(sim_train, common);
    add_learner(sim_train, sim_flags);
    add_budget(sim_train, sim_flags);
    sim_train->add_option("--sim", sim_path, "simulator file (.cgs)")->required();

    LoopFlags loop;
    auto* cross = app.add_subcommand("cross-train", "unified emulator/simulator training loop");
    add_common(cross, common);
    add_learner(cross, loop.learner);
    cross->add_option("--delta-rt", loop.delta_rt, "SEG1 moving-mean jump threshold");
    cross->add_option("--rt", loop.rt, "required return (default: 95% of the oracle optimum)");
    cross->add_option("--regen-k", loop.loop.regen_every_k)->capture_default_str();
    cross->add_option("--eval-runs", loop.loop.eval_runs)->capture_default_str();
    cross->add_option("--screen-runs", loop.loop.screen_runs)->capture_default_str();
    cross->add_option("--max-iterations", loop.loop.max_iterations)->capture_default_str();
    cross->add_option("--budget-seg1-episodes", loop.loop.seg1_max_episodes)->capture_default_str();
    cross->add_option("--budget-sim-min-episodes", loop.loop.sim_min_episodes)->capture_default_str();
    cross->add_option("--budget-sim-max-episodes", loop.loop.sim_max_episodes)->capture_default_str();
    cross->add_option("--sim-eval-every", loop.loop.sim_eval_every)->capture_default_str();
    cross->add_option("--sim-epsilon-decay", loop.sim_epsilon_decay)->capture_default_str();
    cross->add_option("--seg5-epsilon-start", loop.loop.seg5_epsilon.start)->capture_default_str();
    cross->add_flag("--parallel", loop.loop.parallel, "simulator training overlaps emulator collection");

    std::string table;
    std::string eval_sim;
    int eval_runs = 50;
    auto* eval = app.add_subcommand("eval", "greedy evaluation of a saved policy table");
    add_common(eval, common);
    eval->add_option("--table", table, "policy table written by a training command")->required();
    eval->add_option("--sim", eval_sim, "evaluate in this simulator instead of the emulator");
    eval->add_option("--eval-runs", eval_runs)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error(kConfig, e.what());
        return kConfig;
    }

    try {
        if (*oracle) return cmd_oracle(*oracle, common, node_budget, args);
        if (*emu_train) return cmd_emu_train(*emu_train, common, emu_flags, args);
        if (*simgen) return cmd_simgen(*simgen, common, traces, args);
        if (*sim_train) return cmd_sim_train(*sim_train, common, sim_flags, sim_path, args);
        if (*cross) return cmd_cross_train(*cross, common, loop, args);
        if (*eval) return cmd_eval(*eval, common, table, eval_sim, eval_runs, args);
    } catch (const Failure& e) {
        report_error(e.code, e.what());
        return e.code;
    } catch (const std::exception& e) {
        const int code = classify(e);
        report_error(code, e.what());
        return code;
    }
    return kOk;
}
