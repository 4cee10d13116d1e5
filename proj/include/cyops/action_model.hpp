#pragma once

#include <string>
#include <vector>

#include "cyops/fact.hpp"
#include "cyops/scenario.hpp"

namespace cyops {

/// What one hand would do when an action is dispatched to it.
struct HandPlan {
    HostId host{0};
    Privilege priv{Privilege::User};
    bool executable{false};  // preconditions bound from the agent's facts
    bool guard_ok{false};    // ground truth permits success
    double success_prob{0.0};
    std::vector<Fact> effects;  // facts added on success, sorted

    /// True when a success draw can change the fact set.
    bool can_change(const std::vector<Fact>& facts) const;
};

struct HandRef {
    HostId host{0};
    Privilege priv{Privilege::User};
};

/**
 * Compiled form of a Scenario: answers ground-truth queries and resolves
 * how an action binds for a hand, given the agent's current facts.
 *
 * Binding rule: all precondition matches are ordered lexicographically by
 * the values of their variables (in order of first appearance). The hand
 * takes the first binding that would add new facts and whose guard holds;
 * failing that, the first binding that would add new facts; failing that,
 * the first binding. A hand with no binding is not executable.
 *
 * Fact vectors passed in must be sorted and unique.
 */
class ActionModel {
public:
    explicit ActionModel(ScenarioPtr scenario);

    const Scenario& scenario() const { return *scenario_; }
    const ScenarioPtr& scenario_ptr() const { return scenario_; }
    int num_actions() const { return scenario_->num_actions(); }

    HandPlan plan(const std::vector<Fact>& facts, const HandRef& hand, int action_id) const;
    bool executable(const std::vector<Fact>& facts, const HandRef& hand, int action_id) const;

    /// Σ over hands of cost_valid / cost_invalid.
    double step_cost(const std::vector<Fact>& facts, int action_id) const;
    bool goal_satisfied(const std::vector<Fact>& facts) const;

    /// Hands encoded by HandPresent facts, in fact order.
    static std::vector<HandRef> hands_in(const std::vector<Fact>& facts);

    bool reachable(HostId src, HostId dst) const;
    double latency(int action_id) const;

private:
    struct Value {
        bool is_host{false};
        HostId host{0};
        std::string text;
        auto operator<=>(const Value&) const = default;
        bool operator==(const Value&) const = default;
    };
    struct Binding {
        std::vector<std::pair<std::string, Value>> vars;
        const Value* find(const std::string& name) const;
        std::vector<Value> ordered_values() const;
    };
    struct HostInfo {
        HostSpec spec;
        std::vector<std::string> admin_principals;   // sorted
        std::vector<std::string> cached_principals;  // sorted
    };

    Value resolve(const Term& term, const Binding& binding) const;
    bool instantiate(const FactPattern& pattern, const Binding& binding, Fact& out) const;

    int host_index(HostId id) const;
    const ActionSpec& action(int action_id) const;

    void match(const std::vector<Fact>& facts, const std::vector<FactPattern>& patterns, std::size_t next,
               Binding& binding, std::vector<Binding>& out, bool first_only) const;
    bool eval(const Predicate& pred, const Binding& binding, const std::vector<Fact>& facts) const;
    bool eval_all(const std::vector<Predicate>& preds, const Binding& binding, const std::vector<Fact>& facts) const;
    void expand(const Effect& effect, Binding& binding, const std::vector<Fact>& facts, std::vector<Fact>& out) const;

    ScenarioPtr scenario_;
    std::vector<ActionSpec> actions_;  // indexed by id
    std::vector<HostInfo> hosts_;
    std::vector<int> host_index_;  // host id -> index, -1 if undeclared
    std::vector<std::vector<char>> reach_;
    std::vector<std::string> weak_principals_;
};

}  // namespace cyops
