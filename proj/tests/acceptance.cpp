// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "brute_force.hpp"
#include "cyops/emu_env.hpp"
#include "cyops/learners.hpp"
#include "cyops/oracle.hpp"
#include "cyops/orchestrator.hpp"
#include "cyops/simgen.hpp"
#include "temp_dir.hpp"
#include "toys.hpp"

using namespace cyops;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass{false};
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ScenarioPtr default_ptr() { return std::make_shared<const Scenario>(builtin_default()); }

struct Collector final : TransitionSink {
    CountIndex index;
    std::uint64_t records{0};
    void append(const TransitionRecord& r) override {
        index.append(r);
        ++records;
    }
};

// ---------------------------------------------------------------------------

Verdict count_ratio_exactness() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(20261016);
    const std::vector<std::string> keys{"D2|H2.user", "D1|D2|H2.user", "D2|D5|H2.user", "D2|H2.elevated|H2.user",
                                        "D2|S2.smb|H2.user", "D2|C2.helpdesk|H2.user", "D2|F5.admin$|H2.user",
                                        "D2|D6|H2.user|H6.user", "D2|H2.user|A6.domain"};
    const int actions = 6;
    std::size_t pairs_checked = 0;
    double worst_sum = 0.0;
    bool exact = true;
    for (int c = 0; c < 1000; ++c) {
        CountIndex idx;
        idx.scenario_digest = 77;
        const int n = 1 + static_cast<int>(gen() % 60);
        for (int i = 0; i < n; ++i) {
            idx.add(keys[gen() % keys.size()], static_cast<int>(gen() % actions), keys[gen() % keys.size()],
                    1 + gen() % 1'000'000'007ULL);
        }
        auto m = build_mdp(idx, observation_from_key(keys[0]), actions, 77);
        for (const auto& [pair, oc] : idx.pairs()) {
            auto o = m.find(pair.first);
            if (!o) return {false, "observation missing from built MDP: " + pair.first};
            auto outs = m.outcomes(*o, pair.second);
            if (outs.size() != oc.counts.size()) return {false, "outcome count differs for " + pair.first};
            double sum = 0.0;
            auto it = oc.counts.begin();
            for (const auto& out : outs) {
                const double ratio = static_cast<double>(it->second) / static_cast<double>(oc.total);
                exact = exact && out.prob == ratio && m.observation(out.next).key() == it->first;
                sum += out.prob;
                ++it;
            }
            worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
            ++pairs_checked;
        }
    }
    const double t = seconds_since(t0);
    return {exact && worst_sum <= 1e-12 && t < 5.0,
            fmt("%zu pairs, exact ratios %s, worst |sum-1| %.3g, %.2fs (limit 5s)", pairs_checked,
                exact ? "yes" : "no", worst_sum, t)};
}

// ---------------------------------------------------------------------------

constexpr double kSimSteps = 1'000'000;

// Fresh tabular Q trained in the simulator built from `idx`, then greedy in the emulator.
double train_in_sim_eval_in_emulator(const ScenarioPtr& s, const CountIndex& idx, std::uint64_t seed) {
    auto model = std::make_shared<const ActionModel>(s);
    auto mdp = std::make_shared<const EmpiricalMdp>(build_mdp(idx, *s));
    SimEnv sim(mdp, model);
    LearnerConfig cfg;
    cfg.gamma = 1.0;
    cfg.alpha = 0.1;
    cfg.budget_steps = static_cast<std::uint64_t>(kSimSteps);
    cfg.epsilon.decay_steps = 500'000;
    QTable q(sim.num_actions(), cfg.alpha, cfg.gamma);
    Trainer trainer(sim, q, cfg, seed);
    trainer.train();
    EmuEnv emu(model);
    return evaluate(emu, q, 50, derive_stream(seed, streams::kEvalEpisodes)).mean_return;
}

BaselineConfig strong_emulator_learner(double r_t) {
    BaselineConfig b;
    b.r_t = r_t;
    b.budget_steps = 2'000'000;
    b.learner.cfg.gamma = 1.0;
    b.learner.cfg.alpha = 0.2;
    b.learner.cfg.q_init = 100.0;
    return b;
}

struct SufficiencyRun {
    std::uint64_t session_records{0};
    double session_return{0.0};
    double random_return{0.0};
};

std::vector<SufficiencyRun> sufficiency_runs;

Verdict session_sufficiency(double optimum) {
    const auto t0 = Clock::now();
    auto s = default_ptr();
    const double target = optimum - 0.05 * std::abs(optimum);
    int ok = 0;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Collector session;
        session.index.scenario_digest = scenario_digest(*s);
        run_emulator_only(*s, strong_emulator_learner(target), seed, &session);
        SufficiencyRun r;
        r.session_records = session.records;
        r.session_return = train_in_sim_eval_in_emulator(s, session.index, seed);
        sufficiency_runs.push_back(r);
        ok += r.session_return >= target;
        per_seed += fmt(" %.2f", r.session_return);
    }
    const double t = seconds_since(t0);
    return {ok >= 4 && t < 600.0,
            fmt("%d/5 seeds reach %.4f (oracle %.4f); emulator means%s; %.0fs (limit 600s)", ok, target, optimum,
                per_seed.c_str(), t)};
}

Verdict random_play_insufficiency() {
    if (sufficiency_runs.size() != 5) return {false, "criterion 2 did not run"};
    const auto t0 = Clock::now();
    auto s = default_ptr();
    int lower = 0;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto& r = sufficiency_runs[seed - 1];
        EmuEnv emu(s);
        QTable q(emu.num_actions());
        LearnerConfig uniform;
        uniform.epsilon = {1.0, 1.0, 0};
        uniform.budget_steps = r.session_records;
        Collector random;
        random.index.scenario_digest = scenario_digest(*s);
        Trainer play(emu, q, uniform, derive_stream(seed, streams::kBaseline));
        play.set_sink(&random);
        play.train();
        r.random_return = train_in_sim_eval_in_emulator(s, random.index, seed);
        lower += r.random_return < r.session_return;
        per_seed += fmt(" %.2f/%.2f", r.random_return, r.session_return);
    }
    return {lower >= 4, fmt("random trace strictly lower on %d/5 seeds (random/session:%s); %.0fs", lower,
                            per_seed.c_str(), seconds_since(t0))};
}

// ---------------------------------------------------------------------------

Verdict fallback_semantics() {
    auto s = default_ptr();
    auto model = std::make_shared<const ActionModel>(s);
    EmuEnv emu(model);
    auto start = emu.reset(3);
    CountIndex truncated;
    truncated.scenario_digest = emu.scenario_digest();
    auto out = emu.step(13);
    truncated.add(start.key(), 13, out.observation.key());
    auto mdp = std::make_shared<const EmpiricalMdp>(build_mdp(truncated, *s));
    SimEnv sim(mdp, model);
    auto o = sim.reset(1);
    const bool one_hand = ActionModel::hands_in(o.facts()).size() == 1;
    auto step = sim.step(1);
    const bool identical = step.observation == o && step.info.unknown_transition;
    const bool reward = step.reward == -8.0;
    const bool ledger = sim.ledger().total == 1 && sim.ledger().counts.count({o.key(), 1}) == 1;

    TempDir dir("accept-fallback");
    export_unknown_histogram(sim.ledger(), dir / "hist.csv");
    std::ifstream in(dir / "hist.csv");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    const bool histogram = lines.size() == 2 && lines[1] == o.key() + ",1,1";
    return {one_hand && identical && reward && ledger && histogram,
            fmt("one hand %d, identity %d, reward %g, ledger %llu, histogram rows %zu", one_hand, identical,
                step.reward, static_cast<unsigned long long>(sim.ledger().total),
                lines.empty() ? 0 : lines.size() - 1)};
}

// ---------------------------------------------------------------------------

Verdict reward_bounds() {
    auto s = default_ptr();
    EmuEnv env(s);
    const auto& model = env.model();
    const auto& game = s->game;
    Rng pick(99);
    std::uint64_t steps = 0, capped = 0, goals = 0, single_hand_goals = 0;
    std::string problem;
    for (std::uint64_t ep = 0; ep < 10'000 && problem.empty(); ++ep) {
        auto prev = env.reset(derive_stream(7, ep));
        bool reached = false;
        while (!env.done()) {
            const int a = static_cast<int>(pick.uniform_int(static_cast<std::uint64_t>(env.num_actions())));
            const auto hands = ActionModel::hands_in(prev.facts());
            double cost = 0.0;
            for (const auto& h : hands) cost += model.plan(prev.facts(), h, a).executable ? game.cost_valid : game.cost_invalid;
            auto out = env.step(a);
            ++steps;
            const bool goal_now = model.goal_satisfied(out.observation.facts()) && !model.goal_satisfied(prev.facts());
            const double expected = (goal_now ? game.goal_gain : 0.0) - cost;
            if (out.reward != expected) problem = fmt("episode %llu: reward %g, expected %g", (unsigned long long)ep,
                                                      out.reward, expected);
            if (goal_now) {
                reached = true;
                ++goals;
                if (hands.size() == 1 && cost == game.cost_valid) {
                    ++single_hand_goals;
                    if (out.reward != 99.0) problem = fmt("single-hand goal step paid %g", out.reward);
                }
            }
            prev = out.observation;
        }
        if (!reached && env.step_count() == game.max_steps) {
            ++capped;
            if (env.episode_return() > -80.0) problem = fmt("capped episode returned %g", env.episode_return());
        }
    }
    // the default start holds one hand, so a single-hand goal step may never come up at random
    auto toy = toys::make(toys::kOneHost);
    EmuEnv one(toy);
    one.reset(1);
    const double toy_reward = one.step(0).reward;
    if (toy_reward != 99.0) problem = fmt("one-host goal step paid %g", toy_reward);
    return {problem.empty(),
            problem.empty() ? fmt("%llu steps checked; %llu capped episodes all <= -80; %llu goal steps, %llu with one "
                                  "valid hand; one-host toy goal step 99",
                                  (unsigned long long)steps, (unsigned long long)capped, (unsigned long long)goals,
                                  (unsigned long long)single_hand_goals)
                            : problem};
}

// ---------------------------------------------------------------------------

Verdict unified_speedup(double r_t) {
    const auto t0 = Clock::now();
    const auto& s = builtin_default();
    int faster = 0;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        LoopConfig cfg;
        cfg.r_t = r_t;
        cfg.regen_every_k = 20;
        cfg.seg1.cfg.gamma = 1.0;
        cfg.seg3.cfg.gamma = 1.0;
        auto u = run_unified(s, cfg, seed);
        auto b = run_emulator_only(s, strong_emulator_learner(r_t), seed);
        const bool win = u.completed && b.completed && u.emulator_virtual_s <= 0.5 * b.emulator_virtual_s;
        faster += win;
        per_seed += fmt(" [%s%.0f/%s%.0f]", u.completed ? "" : "!", u.emulator_virtual_s, b.completed ? "" : "!",
                        b.emulator_virtual_s);
    }
    const double t = seconds_since(t0);
    return {faster == 5 && t < 1800.0,
            fmt("%d/5 seeds at <= 1/2 (unified/emulator-only virtual s:%s); %.0fs (limit 1800s)", faster,
                per_seed.c_str(), t)};
}

// ---------------------------------------------------------------------------

Verdict throughput() {
    auto s = default_ptr();
    auto model = std::make_shared<const ActionModel>(s);
    Collector trace;
    trace.index.scenario_digest = scenario_digest(*s);
    {
        EmuEnv emu(model);
        QTable q(emu.num_actions());
        LearnerConfig cfg;
        cfg.budget_steps = 100'000;
        Trainer t(emu, q, cfg, 5);
        t.set_sink(&trace);
        t.train();
    }
    auto mdp = std::make_shared<const EmpiricalMdp>(build_mdp(trace.index, *s));
    SimEnv sim(mdp, model);
    Rng pick(1);
    const std::uint64_t n = 2'000'000;
    sim.reset(0);
    std::uint64_t episode = 0;
    const auto t0 = Clock::now();
    for (std::uint64_t i = 0; i < n; ++i) {
        if (sim.done()) sim.reset(++episode);
        sim.step(static_cast<int>(pick.uniform_int(16)));
    }
    const double rate = static_cast<double>(n) / seconds_since(t0);

    EmuEnv emu(model);
    emu.reset(1);
    int steps = 0;
    while (!emu.done()) {
        emu.step(steps % 2 == 0 ? 13 : 8);
        ++steps;
    }
    const double per_step = emu.virtual_time() / steps;
    return {rate >= 1e5 && per_step == 16.0,
            fmt("%.3g simulator steps/s over %zu pairs (need 1e5); emulator %.6g virtual s/step over %d steps", rate,
                mdp->num_pairs(), per_step, steps)};
}

// ---------------------------------------------------------------------------

std::vector<double> hat(const std::vector<double>& atoms, double v) {
    const double z = std::clamp(v, atoms.front(), atoms.back());
    const double dz = atoms[1] - atoms[0];
    std::vector<double> w(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) w[i] = std::max(0.0, 1.0 - std::abs(z - atoms[i]) / dz);
    return w;
}

Verdict categorical_correctness() {
    Support wide{51, -160, 100};
    CategoricalTable t(16, wide, 0.5, 0.99);
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> reward(-300, 300);
    double drift = 0.0;
    bool negative = false;
    for (int i = 0; i < 100'000; ++i) {
        const std::string o = "o" + std::to_string(gen() % 40);
        const int a = static_cast<int>(gen() % 16);
        c51_update(t, {o, a, reward(gen), "o" + std::to_string(gen() % 40), gen() % 4 == 0});
        double sum = 0.0;
        for (double w : t.distribution(o, a)) {
            sum += w;
            negative = negative || w < 0.0;
        }
        drift = std::max(drift, std::abs(sum - 1.0));
    }

    const std::vector<double> atoms{-1, 0, 1};
    const std::vector<std::vector<double>> nexts{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.25, 0.25, 0.5}, {0.6, 0, 0.4}};
    int cases = 0;
    double worst = 0.0;
    for (double gamma : {0.0, 0.5, 0.9, 1.0}) {
        for (int ri = -8; ri <= 8; ++ri) {
            const double r = ri * 0.25;
            for (bool done : {false, true}) {
                for (const auto& nd : nexts) {
                    CategoricalTable small(1, Support{3, -1, 1}, 1.0, gamma);
                    small.set_distribution("n", 0, nd);
                    c51_update(small, {"o", 0, r, "n", done});
                    std::vector<double> want(3, 0.0);
                    if (done) {
                        want = hat(atoms, r);
                    } else {
                        for (std::size_t j = 0; j < 3; ++j) {
                            auto h = hat(atoms, r + gamma * atoms[j]);
                            for (std::size_t i = 0; i < 3; ++i) want[i] += nd[j] * h[i];
                        }
                    }
                    auto got = small.distribution("o", 0);
                    for (std::size_t i = 0; i < 3; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
                    ++cases;
                }
            }
        }
    }
    return {drift <= 1e-9 && !negative && worst <= 1e-12,
            fmt("mass drift %.3g over 1e5 updates, negative weights %d; %d three-atom cases, worst error %.3g", drift,
                negative, cases, worst)};
}

// ---------------------------------------------------------------------------

Verdict oracle_consistency(double& optimum) {
    struct Toy {
        const char* name;
        ScenarioPtr s;
    };
    std::vector<Toy> toys{{"one-host", toys::make(toys::kOneHost)},
                          {"three-host", toys::make(toys::three_host_document(7, 0.5))},
                          {"fork", toys::make(toys::fork_document(6, 0.6))}};
    std::string detail;
    bool ok = true;
    for (const auto& t : toys) {
        auto g = enumerate(*t.s);
        const double vi = value_iteration(g, t.s->game).optimal_expected_return;
        const double bf = brute::optimal_return(t.s);
        ok = ok && std::abs(vi - bf) <= 1e-9;
        detail += fmt("%s %.6g=%.6g; ", t.name, vi, bf);
    }
    auto g = enumerate(builtin_default());
    auto r = value_iteration(g, builtin_default().game);
    optimum = r.optimal_expected_return;
    const bool pinned = g.num_nodes() == 4922 && g.num_edges() == 66719 &&
                        std::abs(r.optimal_expected_return - 8522.0 / 99.0) <= 1e-9 &&
                        std::abs(r.expected_steps - 82.0 / 11.0) <= 1e-9 && r.best_case_steps == 7;
    detail += fmt("default: return %.12g, expected steps %.12g, best case %d, %zu nodes, %zu edges",
                  r.optimal_expected_return, r.expected_steps, r.best_case_steps, g.num_nodes(), g.num_edges());
    return {ok && pinned, detail};
}

// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict cross_train_determinism() {
    TempDir dir("accept-determinism");
    std::vector<std::string> outputs;
    for (const char* run : {"a", "b"}) {
        const auto out = dir / run;
        const std::string cmd = std::string("\"") + CYOPS_CLI +
                                "\" cross-train --seed 7 --gamma 1 --regen-k 20 --max-iterations 4 "
                                "--budget-sim-min-episodes 2000 --budget-sim-max-episodes 6000 --sim-eval-every 500 "
                                "--out \"" + out.string() + "\" > \"" + (dir / run).string() + ".log\" 2>&1";
        if (std::system(cmd.c_str()) != 0) return {false, "cross-train exited nonzero: " + slurp(dir / (std::string(run) + ".log"))};
        outputs.push_back(out.string());
    }
    bool same = true;
    std::string detail;
    for (const char* f : {"unified_report.csv", "emulator.cgt"}) {
        const auto a = slurp(std::filesystem::path(outputs[0]) / f);
        const auto b = slurp(std::filesystem::path(outputs[1]) / f);
        same = same && !a.empty() && a == b;
        detail += fmt("%s %zu bytes %s; ", f, a.size(), a == b ? "identical" : "DIFFERENT");
    }
    return {same, detail + "sequential mode, --seed 7"};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int n, const char* name, auto&& run) {
        Verdict v;
        try {
            v = run();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        std::printf("criterion %2d %-32s %s  %s\n", n, name, v.pass ? "PASS" : "FAIL", v.detail.c_str());
        std::fflush(stdout);
        failures += !v.pass;
    };
    double optimum = 0.0;
    const auto oracle = oracle_consistency(optimum);
    const double r_t = optimum - 0.05 * std::abs(optimum);

    report(1, "count-ratio exactness", [&] { return count_ratio_exactness(); });
    report(2, "session trace sufficiency", [&] { return session_sufficiency(optimum); });
    report(3, "random-play insufficiency", [&] { return random_play_insufficiency(); });
    report(4, "fallback semantics", [&] { return fallback_semantics(); });
    report(5, "reward bounds", [&] { return reward_bounds(); });
    report(6, "cross-training speedup", [&] { return unified_speedup(r_t); });
    report(7, "simulator throughput", [&] { return throughput(); });
    report(8, "categorical correctness", [&] { return categorical_correctness(); });
    report(9, "oracle self-consistency", [&] { return oracle; });
    report(10, "cross-train determinism", [&] { return cross_train_determinism(); });
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
