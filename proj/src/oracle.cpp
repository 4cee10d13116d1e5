#include "cyops/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <memory>

#include "cyops/action_model.hpp"

namespace cyops {

OracleBudgetExceeded::OracleBudgetExceeded(std::size_t nodes, std::size_t frontier)
    : std::runtime_error("state space exceeds budget: " + std::to_string(nodes) + " nodes enumerated, " +
                         std::to_string(frontier) + " still on the frontier"),
      nodes_(nodes),
      frontier_(frontier) {}

namespace {

using FactSet = std::vector<Fact>;

// Distribution over the set of facts added in one step.
std::map<FactSet, double> step_outcomes(const ActionModel& model, const FactSet& facts, int action, double& cost) {
    const auto& game = model.scenario().game;
    std::map<FactSet, double> dist{{FactSet{}, 1.0}};
    cost = 0.0;
    for (const auto& hand : ActionModel::hands_in(facts)) {
        auto plan = model.plan(facts, hand, action);
        cost += plan.executable ? game.cost_valid : game.cost_invalid;
        if (!plan.executable || !plan.guard_ok || plan.success_prob <= 0.0 || !plan.can_change(facts)) continue;
        std::vector<Fact> fresh;
        for (const auto& f : plan.effects) {
            if (!std::binary_search(facts.begin(), facts.end(), f)) fresh.push_back(f);
        }
        std::map<FactSet, double> next;
        const double p = std::min(plan.success_prob, 1.0);
        for (const auto& [added, q] : dist) {
            if (p < 1.0) next[added] += q * (1.0 - p);
            FactSet merged;
            std::set_union(added.begin(), added.end(), fresh.begin(), fresh.end(), std::back_inserter(merged));
            next[merged] += q * p;
        }
        dist = std::move(next);
    }
    return dist;
}

FactSet initial_facts(const Scenario& s) {
    FactSet facts = s.initial_facts;
    std::sort(facts.begin(), facts.end());
    facts.erase(std::unique(facts.begin(), facts.end()), facts.end());
    return facts;
}

}  // namespace

StateGraph enumerate(const Scenario& scenario, std::size_t node_budget) {
    auto ptr = std::make_shared<const Scenario>(scenario);
    ActionModel model(ptr);
    const int A = model.num_actions();
    const auto& game = scenario.game;

    StateGraph g;
    g.num_actions = A;
    g.horizon = game.max_steps;

    std::unordered_map<std::string, std::uint32_t> ids;
    std::vector<FactSet> node_facts;
    std::size_t expanded = 0;
    auto intern = [&](FactSet facts) -> std::uint32_t {
        Observation obs(std::move(facts));
        auto [it, inserted] = ids.emplace(obs.key(), static_cast<std::uint32_t>(g.keys.size()));
        if (inserted) {
            if (g.keys.size() >= node_budget) {
                throw OracleBudgetExceeded(g.keys.size(), g.keys.size() - expanded);
            }
            g.keys.push_back(obs.key());
            g.goal.push_back(model.goal_satisfied(obs.facts()) ? 1 : 0);
            node_facts.push_back(obs.facts());
        }
        return it->second;
    };

    intern(initial_facts(scenario));
    g.edge_begin.push_back(0);
    // Nodes are expanded in id order, which is BFS order.
    for (std::size_t n = 0; n < g.keys.size(); ++n) {
        const FactSet facts = node_facts[n];
        for (int a = 0; a < A; ++a) {
            if (!g.goal[n]) {
                double cost = 0.0;
                auto dist = step_outcomes(model, facts, a, cost);
                for (const auto& [added, p] : dist) {
                    if (p <= 0.0) continue;
                    std::uint32_t next = static_cast<std::uint32_t>(n);
                    if (!added.empty()) {
                        FactSet merged;
                        std::set_union(facts.begin(), facts.end(), added.begin(), added.end(),
                                       std::back_inserter(merged));
                        next = intern(std::move(merged));
                    }
                    const double gain = g.goal[next] ? game.goal_gain : 0.0;
                    g.edges.push_back({next, p, gain - cost});
                }
            }
            g.edge_begin.push_back(static_cast<std::uint32_t>(g.edges.size()));
        }
        FactSet().swap(node_facts[n]);
        expanded = n + 1;
    }
    return g;
}

OracleResult value_iteration(const StateGraph& g, const GameSpec& game) {
    const std::size_t N = g.num_nodes();
    const int A = g.num_actions;
    const int H = std::min(g.horizon, game.max_steps);
    constexpr double kTieEps = 1e-9;

    OracleResult res;
    std::vector<double> v(N, 0.0), v_next(N, 0.0);
    std::vector<double> len(N, 0.0), len_next(N, 0.0);
    res.policy.assign(N, 0);

    for (int k = 1; k <= H; ++k) {
        for (std::size_t n = 0; n < N; ++n) {
            if (g.goal[n]) {
                v_next[n] = 0.0;
                len_next[n] = 0.0;
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            double best_len = 0.0;
            int best_a = 0;
            for (int a = 0; a < A; ++a) {
                double q = 0.0, l = 1.0;
                for (const auto& e : g.outcomes(n, a)) {
                    q += e.prob * (e.reward + v[e.next]);
                    l += e.prob * len[e.next];
                }
                if (q > best + kTieEps) {
                    best = q;
                    best_len = l;
                    best_a = a;
                }
            }
            v_next[n] = best;
            len_next[n] = best_len;
            if (k == H) res.policy[n] = best_a;
        }
        v.swap(v_next);
        len.swap(len_next);
    }
    if (N > 0) {
        res.optimal_expected_return = v[0];
        res.expected_steps = len[0];
    }

    // Fewest steps to any goal node along positive-probability edges.
    std::vector<int> dist(N, -1);
    std::deque<std::uint32_t> queue;
    if (N > 0) {
        dist[0] = 0;
        queue.push_back(0);
    }
    while (!queue.empty()) {
        auto n = queue.front();
        queue.pop_front();
        if (g.goal[n]) {
            res.best_case_steps = dist[n];
            break;
        }
        for (int a = 0; a < A; ++a) {
            for (const auto& e : g.outcomes(n, a)) {
                if (dist[e.next] < 0) {
                    dist[e.next] = dist[n] + 1;
                    queue.push_back(e.next);
                }
            }
        }
    }
    res.goal_reachable = res.best_case_steps >= 0 && res.best_case_steps <= H;
    return res;
}

std::unordered_map<std::string, int> policy_by_key(const StateGraph& g, const OracleResult& r) {
    std::unordered_map<std::string, int> out;
    out.reserve(g.num_nodes());
    for (std::size_t n = 0; n < g.num_nodes(); ++n) {
        if (!g.goal[n]) out.emplace(g.keys[n], r.policy[n]);
    }
    return out;
}

CountIndex exhaustive_trace(const Scenario& scenario, std::uint64_t resolution, std::size_t node_budget) {
    auto g = enumerate(scenario, node_budget);
    CountIndex idx;
    idx.scenario_digest = scenario_digest(scenario);
    for (std::size_t n = 0; n < g.num_nodes(); ++n) {
        for (int a = 0; a < g.num_actions; ++a) {
            for (const auto& e : g.outcomes(n, a)) {
                auto c = static_cast<std::uint64_t>(std::llround(e.prob * static_cast<double>(resolution)));
                idx.add(g.keys[n], a, g.keys[e.next], std::max<std::uint64_t>(c, 1));
            }
        }
    }
    return idx;
}

}  // namespace cyops
