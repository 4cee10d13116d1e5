#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cyops/scenario.hpp"
#include "cyops/trace_store.hpp"

namespace cyops {

struct OracleEdge {
    std::uint32_t next{0};
    double prob{0.0};
    double reward{0.0};
};

/**
 * Closure of the initial state under every action, with stochastic branches
 * expanded exactly. Nodes are canonical fact sets (observation keys); the
 * emulator's hidden state is a function of the fact set, so nothing is lost.
 * Goal nodes are terminal and have no outgoing edges.
 */
struct StateGraph {
    std::vector<std::string> keys;
    std::vector<char> goal;
    std::vector<std::uint32_t> edge_begin;  // nodes * num_actions + 1 offsets into edges
    std::vector<OracleEdge> edges;
    int num_actions{0};
    int horizon{0};

    std::size_t num_nodes() const { return keys.size(); }
    std::size_t num_edges() const { return edges.size(); }
    std::span<const OracleEdge> outcomes(std::size_t node, int action) const {
        auto i = node * static_cast<std::size_t>(num_actions) + static_cast<std::size_t>(action);
        return {edges.data() + edge_begin[i], edges.data() + edge_begin[i + 1]};
    }
};

class OracleBudgetExceeded : public std::runtime_error {
public:
    OracleBudgetExceeded(std::size_t nodes, std::size_t frontier);
    std::size_t nodes() const { return nodes_; }
    std::size_t frontier() const { return frontier_; }

private:
    std::size_t nodes_;
    std::size_t frontier_;
};

struct OracleResult {
    double optimal_expected_return{0.0};
    double expected_steps{0.0};    // expected episode length under the optimal policy
    int best_case_steps{-1};       // fewest steps to the goal when every draw favours the agent; -1 if unreachable
    bool goal_reachable{false};
    std::vector<int> policy;       // per node, optimal action with the full horizon remaining
};

StateGraph enumerate(const Scenario& scenario, std::size_t node_budget = 1'000'000);

/// Undiscounted backward induction over (node, steps remaining) up to the
/// graph horizon. Ties go to the lowest action id.
OracleResult value_iteration(const StateGraph& graph, const GameSpec& game);

/// Optimal full-horizon action per observation key.
std::unordered_map<std::string, int> policy_by_key(const StateGraph& graph, const OracleResult& result);

/// Every reachable (o, a) -> o' with its exact probability scaled to an
/// integer count at `resolution`.
CountIndex exhaustive_trace(const Scenario& scenario, std::uint64_t resolution = 1'000'000,
                            std::size_t node_budget = 1'000'000);

}  // namespace cyops
