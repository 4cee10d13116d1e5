#include <cmath>
#include <random>
#include <sstream>

#include "cyops/emu_env.hpp"
#include "cyops/learners.hpp"
#include "cyops/oracle.hpp"
#include "cyops/simgen.hpp"
#include "doctest.h"
#include "toys.hpp"

using namespace cyops;

namespace {

// Value of a fixed stationary policy on the oracle graph, full horizon.
double policy_value(const StateGraph& g, const Learner& learner) {
    std::vector<double> v(g.num_nodes(), 0.0), next(g.num_nodes());
    std::vector<int> act(g.num_nodes());
    for (std::size_t n = 0; n < g.num_nodes(); ++n) act[n] = learner.greedy_action(g.keys[n]);
    for (int k = 0; k < g.horizon; ++k) {
        for (std::size_t n = 0; n < g.num_nodes(); ++n) {
            double q = 0.0;
            for (const auto& e : g.outcomes(n, act[n])) q += e.prob * (e.reward + (g.goal[e.next] ? 0.0 : v[e.next]));
            next[n] = g.goal[n] ? 0.0 : q;
        }
        v.swap(next);
    }
    return v[0];
}

std::string metrics_text(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    write_metrics_header(out);
    for (const auto& r : rows) write_metrics_row(out, r);
    return out.str();
}

// Hat-kernel projection of one atom, written independently of the library.
std::vector<double> hat_project(const std::vector<double>& atoms, double value) {
    double lo = atoms.front(), hi = atoms.back();
    double z = std::min(std::max(value, lo), hi);
    double dz = atoms[1] - atoms[0];
    std::vector<double> out(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) out[i] = std::max(0.0, 1.0 - std::abs(z - atoms[i]) / dz);
    return out;
}

}  // namespace

TEST_CASE("epsilon schedule decays linearly then holds") {
    EpsilonSchedule e{1.0, 0.05, 100};
    CHECK(e.at(0) == 1.0);
    CHECK(e.at(50) == doctest::Approx(0.525));
    CHECK(e.at(100) == 0.05);
    CHECK(e.at(1'000'000) == 0.05);
    EpsilonSchedule flat{0.2, 0.2, 0};
    CHECK(flat.at(7) == 0.2);
}

TEST_CASE("config validation") {
    LearnerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.gamma = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.epsilon.start = 2;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.atoms = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.v_min = 5;
    cfg.v_max = 5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK(learner_kind_from_string("dqn") == LearnerKind::Q);
    CHECK(learner_kind_from_string("c51") == LearnerKind::Categorical);
    CHECK_THROWS_AS(learner_kind_from_string("ppo"), std::invalid_argument);
}

TEST_CASE("greedy selection and tie breaking") {
    QTable q(16);
    Rng rng(1);
    CHECK(q.select_action("o", 0.0, rng) == 0);
    q.set("o", 3, 2.5);
    CHECK(q.select_action("o", 0.0, rng) == 3);
    q.set("o", 9, 2.5);
    CHECK(q.greedy_action("o") == 3);
    CategoricalTable c(4, Support{3, -1, 1});
    CHECK(c.greedy_action("o") == 0);
}

TEST_CASE("epsilon one is uniform") {
    QTable q(16);
    q.set("o", 5, 10);
    Rng rng(2024);
    std::vector<int> counts(16, 0);
    const int n = 100'000;
    for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(q.select_action("o", 1.0, rng))] += 1;
    double chi2 = 0.0;
    const double expected = n / 16.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 37.7);  // 15 degrees of freedom, p = 0.001
}

TEST_CASE("q update arithmetic") {
    QTable q(2, 0.5, 0.9);
    q_update(q, {"o", 0, -1.0, "o2", false});
    CHECK(q.value("o", 0) == -0.5);
    q.set("o2", 1, 10.0);
    q_update(q, {"o", 1, 0.0, "o2", true});
    CHECK(q.value("o", 1) == 0.0);
    q_update(q, {"o", 1, 0.0, "o2", false});
    CHECK(q.value("o", 1) == doctest::Approx(4.5));
    QTable optimistic(2, 0.1, 1.0, 100.0);
    CHECK(optimistic.value("never", 1) == 100.0);
    CHECK(optimistic.max_value("never") == 100.0);
}

TEST_CASE("q-learning converges to the value-iteration fixed point on a chain") {
    // s0 --a0 (-1)--> s1 --a0 (+10, done); a1 loops back to s0 with -1 (from s1) or 0 (from s0)
    struct Edge {
        std::string from;
        int a;
        double r;
        std::string to;
        bool done;
    };
    std::vector<Edge> edges{{"s0", 0, -1, "s1", false}, {"s0", 1, 0, "s0", false},
                            {"s1", 0, 10, "end", true}, {"s1", 1, -1, "s0", false}};
    const double gamma = 0.9;
    std::map<std::string, double> v{{"s0", 0}, {"s1", 0}};
    for (int it = 0; it < 2000; ++it) {
        std::map<std::string, double> best{{"s0", -1e9}, {"s1", -1e9}};
        for (const auto& e : edges) best[e.from] = std::max(best[e.from], e.r + (e.done ? 0.0 : gamma * v[e.to]));
        v = best;
    }
    QTable q(2, 0.5, gamma);
    for (int sweep = 0; sweep < 2000; ++sweep) {
        for (const auto& e : edges) q_update(q, {e.from, e.a, e.r, e.to, e.done});
    }
    CHECK(std::abs(q.max_value("s0") - v["s0"]) < 1e-6);
    CHECK(std::abs(q.max_value("s1") - v["s1"]) < 1e-6);
    CHECK(std::abs(q.value("s0", 1) - gamma * v["s0"]) < 1e-6);
}

TEST_CASE("categorical projection on three atoms") {
    Support s{3, -1, 1};
    CHECK(categorical_project(s, {1.0}, {1.0}) == std::vector<double>{0, 0, 1});
    CHECK(categorical_project(s, {0.5}, {1.0}) == std::vector<double>{0, 0.5, 0.5});
    CHECK(categorical_project(s, {-7.0}, {1.0}) == std::vector<double>{1, 0, 0});
    CHECK(categorical_project(s, {0.0}, {1.0}) == std::vector<double>{0, 1, 0});

    CategoricalTable t(2, s, 1.0, 1.0);
    c51_update(t, {"o", 0, 1.0, "x", true});
    CHECK(t.distribution("o", 0) == std::vector<double>{0, 0, 1});
    c51_update(t, {"o", 1, 0.5, "x", true});
    CHECK(t.distribution("o", 1) == std::vector<double>{0, 0.5, 0.5});
    CHECK(t.mean("o", 1) == doctest::Approx(0.5));
    CHECK(t.distribution("unseen", 1) == std::vector<double>{0, 1, 0});
}

TEST_CASE("three-atom updates match a brute-force interpolation oracle") {
    const std::vector<double> atoms{-1, 0, 1};
    Support s{3, -1, 1};
    const std::vector<std::vector<double>> next_dists{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.2, 0.3, 0.5}, {0.5, 0, 0.5}};
    for (double gamma : {0.0, 0.5, 0.9, 1.0}) {
        for (double r = -2.0; r <= 2.0; r += 0.25) {
            for (bool done : {true, false}) {
                for (const auto& nd : next_dists) {
                    CategoricalTable t(1, s, 1.0, gamma);
                    t.set_distribution("n", 0, nd);
                    c51_update(t, {"o", 0, r, "n", done});
                    std::vector<double> expect(3, 0.0);
                    if (done) {
                        expect = hat_project(atoms, r);
                    } else {
                        for (std::size_t j = 0; j < 3; ++j) {
                            auto h = hat_project(atoms, r + gamma * atoms[j]);
                            for (std::size_t i = 0; i < 3; ++i) expect[i] += nd[j] * h[i];
                        }
                    }
                    auto got = t.distribution("o", 0);
                    for (std::size_t i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("categorical mixing step") {
    CategoricalTable t(1, Support{3, -1, 1}, 0.25, 1.0);
    c51_update(t, {"o", 0, 1.0, "x", true});
    auto d = t.distribution("o", 0);
    CHECK(d[0] == doctest::Approx(0.0));
    CHECK(d[1] == doctest::Approx(0.75));
    CHECK(d[2] == doctest::Approx(0.25));
}

TEST_CASE("categorical distributions stay on the simplex") {
    Support s{11, -20, 20};
    CategoricalTable t(3, s, 0.3, 0.95);
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> reward(-40, 40);
    for (int i = 0; i < 20'000; ++i) {
        std::string o = "o" + std::to_string(gen() % 6);
        std::string o2 = "o" + std::to_string(gen() % 6);
        int a = static_cast<int>(gen() % 3);
        c51_update(t, {o, a, reward(gen), o2, gen() % 5 == 0});
        auto d = t.distribution(o, a);
        double sum = 0.0;
        for (double w : d) {
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        double m = t.mean(o, a);
        CHECK(m >= s.v_min - 1e-9);
        CHECK(m <= s.v_max + 1e-9);
    }
}

TEST_CASE("zero budget trains nothing") {
    EmuEnv env(toys::make(toys::kOneHost));
    QTable q(1);
    LearnerConfig cfg;
    Trainer tr(env, q, cfg, 1);
    CHECK(tr.train().empty());
    CHECK(q.size() == 0);
    CHECK(tr.steps() == 0);
}

TEST_CASE("same seed and config give byte-identical metrics") {
    auto s = std::make_shared<const Scenario>(builtin_default());
    for (auto kind : {LearnerKind::Q, LearnerKind::Categorical}) {
        std::string texts[2];
        std::string tables[2];
        for (int i = 0; i < 2; ++i) {
            EmuEnv env(s);
            LearnerConfig cfg;
            cfg.budget_steps = 3000;
            cfg.eval_every = 5;
            cfg.eval_runs = 3;
            auto learner = make_learner(kind, cfg, 16);
            Trainer tr(env, *learner, cfg, 42);
            texts[i] = metrics_text(tr.train());
            std::ostringstream t;
            learner->write_table(t);
            tables[i] = t.str();
        }
        CHECK(texts[0] == texts[1]);
        CHECK(tables[0] == tables[1]);
        CHECK(texts[0].rfind("step,episode,avg_training_reward,avg_episode_length,avg_evaluation_reward,"
                             "unknown_transition_count,virtual_time_s\n",
                             0) == 0);
    }
}

TEST_CASE("metrics rows average over the window") {
    EmuEnv env(toys::make(toys::kOneHost));
    QTable q(1);
    LearnerConfig cfg;
    cfg.budget_episodes = 25;
    cfg.window = 10;
    Trainer tr(env, q, cfg, 3);
    auto rows = tr.train();
    REQUIRE(rows.size() == 25);
    CHECK(rows.back().avg_training_reward == 99.0);
    CHECK(rows.back().avg_episode_length == 1.0);
    CHECK(rows.back().step == 25);
    CHECK(rows.back().virtual_time_s == doctest::Approx(25 * 16.0));
}

TEST_CASE("tabular q in a trace-complete simulator reaches the oracle optimum") {
    auto s = toys::make(toys::three_host_document());
    auto model = std::make_shared<const ActionModel>(s);
    auto g = enumerate(*s);
    auto best = value_iteration(g, s->game).optimal_expected_return;
    auto m = std::make_shared<const EmpiricalMdp>(build_mdp(exhaustive_trace(*s), *s));
    SimEnv sim(m, model);
    LearnerConfig cfg;
    cfg.gamma = 1.0;
    cfg.alpha = 0.1;
    cfg.budget_steps = 200'000;
    cfg.epsilon.decay_steps = 100'000;
    QTable q(sim.num_actions(), cfg.alpha, cfg.gamma);
    Trainer tr(sim, q, cfg, 5);
    tr.train();
    CHECK(policy_value(g, q) == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("evaluation") {
    SUBCASE("deterministic toy gives equal returns") {
        EmuEnv env(toys::make(toys::kOneHost));
        QTable q(1);
        auto res = evaluate(env, q, 7, 1);
        CHECK(res.returns.size() == 7);
        for (double r : res.returns) CHECK(r == 99.0);
        CHECK(res.mean_return == 99.0);
        CHECK(res.mean_length == 1.0);
        CHECK(res.virtual_time_s == doctest::Approx(7 * 16.0));
        CHECK_THROWS_AS(evaluate(env, q, 0, 1), std::invalid_argument);
    }
    SUBCASE("one run equals one rollout") {
        auto s = std::make_shared<const Scenario>(builtin_default());
        EmuEnv env(s);
        QTable q(16);
        q.set("D2|H2.user", 13, 1.0);
        auto res = evaluate(env, q, 1, 9);
        auto o = env.reset(derive_stream(derive_stream(9, streams::kEvalEpisodes), 0));
        while (!env.done()) o = env.step(q.greedy_action(o.key())).observation;
        CHECK(res.mean_return == env.episode_return());
    }
    SUBCASE("oracle policy on the default scenario") {
        auto s = std::make_shared<const Scenario>(builtin_default());
        auto g = enumerate(*s);
        auto r = value_iteration(g, s->game);
        QTable q(16);
        for (const auto& [key, a] : policy_by_key(g, r)) q.set(key, a, 1.0);
        EmuEnv env(s);
        auto res = evaluate(env, q, 50, 1);
        CHECK(std::abs(res.mean_return - r.optimal_expected_return) <= 0.05 * std::abs(r.optimal_expected_return));
    }
}

TEST_CASE("tables round trip through their text form") {
    auto s = std::make_shared<const Scenario>(builtin_default());
    for (auto kind : {LearnerKind::Q, LearnerKind::Categorical}) {
        EmuEnv env(s);
        LearnerConfig cfg;
        cfg.budget_steps = 2000;
        auto learner = make_learner(kind, cfg, 16);
        Trainer tr(env, *learner, cfg, 8);
        tr.train();
        std::ostringstream first;
        learner->write_table(first);
        std::istringstream in(first.str());
        auto back = read_table(in, 16);
        CHECK(back->name() == learner->name());
        std::ostringstream second;
        back->write_table(second);
        CHECK(second.str() == first.str());
        for (const char* key : {"D2|H2.user", "D1|D2|H2.user", "nowhere"}) {
            CHECK(back->greedy_action(key) == learner->greedy_action(key));
        }
    }
    std::istringstream bad("# learner=q\nD2|H2.user,99,1\n");
    CHECK_THROWS_AS(read_table(bad, 16), std::invalid_argument);
    std::istringstream no_header("D2|H2.user,1,1\n");
    CHECK_THROWS_AS(read_table(no_header, 16), std::invalid_argument);
}

TEST_CASE("identical transition streams give identical learners") {
    std::vector<Transition> stream;
    std::mt19937_64 gen(3);
    for (int i = 0; i < 5000; ++i) {
        stream.push_back({"o" + std::to_string(gen() % 20), static_cast<int>(gen() % 4),
                          static_cast<double>(static_cast<int>(gen() % 17)) - 8.0, "o" + std::to_string(gen() % 20),
                          gen() % 7 == 0});
    }
    QTable a(4), b(4);
    for (const auto& t : stream) a.update(t);
    for (const auto& t : stream) b.update(t);
    std::ostringstream ta, tb;
    a.write_table(ta);
    b.write_table(tb);
    CHECK(ta.str() == tb.str());
}
