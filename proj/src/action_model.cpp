#include "cyops/action_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace cyops {

bool HandPlan::can_change(const std::vector<Fact>& facts) const {
    if (!executable || !guard_ok || success_prob <= 0.0) return false;
    return std::any_of(effects.begin(), effects.end(),
                       [&](const Fact& f) { return !std::binary_search(facts.begin(), facts.end(), f); });
}

const ActionModel::Value* ActionModel::Binding::find(const std::string& name) const {
    for (const auto& [k, v] : vars) {
        if (k == name) return &v;
    }
    return nullptr;
}

std::vector<ActionModel::Value> ActionModel::Binding::ordered_values() const {
    std::vector<Value> out;
    out.reserve(vars.size());
    for (const auto& kv : vars) out.push_back(kv.second);
    return out;
}

ActionModel::ActionModel(ScenarioPtr scenario) : scenario_(std::move(scenario)) {
    if (!scenario_) throw std::invalid_argument("null scenario");
    const auto& s = *scenario_;
    actions_.resize(s.actions.size());
    for (const auto& a : s.actions) {
        if (a.id < 0 || a.id >= static_cast<int>(actions_.size())) throw std::invalid_argument("action ids not dense");
        actions_[static_cast<std::size_t>(a.id)] = a;
    }
    HostId max_id = 0;
    for (const auto& h : s.hosts) max_id = std::max(max_id, h.id);
    host_index_.assign(static_cast<std::size_t>(max_id) + 1, -1);
    for (const auto& h : s.hosts) {
        if (h.id < 0) throw std::invalid_argument("negative host id");
        host_index_[static_cast<std::size_t>(h.id)] = static_cast<int>(hosts_.size());
        HostInfo info;
        info.spec = h;
        for (const auto& c : s.credentials) {
            if (std::binary_search(c.admin_on.begin(), c.admin_on.end(), h.id)) info.admin_principals.push_back(c.principal);
            if (std::binary_search(c.cached_on.begin(), c.cached_on.end(), h.id)) info.cached_principals.push_back(c.principal);
        }
        std::sort(info.admin_principals.begin(), info.admin_principals.end());
        std::sort(info.cached_principals.begin(), info.cached_principals.end());
        hosts_.push_back(std::move(info));
    }
    reach_.assign(hosts_.size(), std::vector<char>(hosts_.size(), 0));
    for (std::size_t i = 0; i < hosts_.size(); ++i) {
        for (std::size_t j = 0; j < hosts_.size(); ++j) {
            reach_[i][j] = cyops::reachable(s, hosts_[i].spec.id, hosts_[j].spec.id) ? 1 : 0;
        }
    }
    for (const auto& c : s.credentials) {
        if (c.weak) weak_principals_.push_back(c.principal);
    }
    std::sort(weak_principals_.begin(), weak_principals_.end());
}

int ActionModel::host_index(HostId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= host_index_.size()) return -1;
    return host_index_[static_cast<std::size_t>(id)];
}

const ActionSpec& ActionModel::action(int action_id) const {
    if (action_id < 0 || action_id >= static_cast<int>(actions_.size())) {
        throw std::out_of_range("action id " + std::to_string(action_id) + " out of range");
    }
    return actions_[static_cast<std::size_t>(action_id)];
}

bool ActionModel::reachable(HostId src, HostId dst) const {
    int a = host_index(src);
    int b = host_index(dst);
    if (a < 0 || b < 0) return false;
    return reach_[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] != 0;
}

double ActionModel::latency(int action_id) const { return action(action_id).latency_s; }

ActionModel::Value ActionModel::resolve(const Term& term, const Binding& binding) const {
    switch (term.kind) {
        case Term::Kind::Host: return Value{true, term.host, {}};
        case Term::Kind::Literal: return Value{false, 0, term.text};
        case Term::Kind::Variable:
            if (const auto* v = binding.find(term.text)) return *v;
            throw std::logic_error("unbound variable " + term.text);
    }
    return {};
}

bool ActionModel::instantiate(const FactPattern& pattern, const Binding& binding, Fact& out) const {
    auto host = resolve(pattern.host, binding);
    auto detail = resolve(pattern.detail, binding);
    if (!host.is_host || detail.is_host) return false;
    out.kind = pattern.kind;
    out.host = host.host;
    out.detail = std::move(detail.text);
    return true;
}

namespace {

// Range of facts with the given kind; facts are sorted by kind first.
std::pair<std::vector<Fact>::const_iterator, std::vector<Fact>::const_iterator> kind_range(
    const std::vector<Fact>& facts, FactKind kind) {
    auto lo = std::lower_bound(facts.begin(), facts.end(), kind,
                               [](const Fact& f, FactKind k) { return f.kind < k; });
    auto hi = std::upper_bound(lo, facts.end(), kind, [](FactKind k, const Fact& f) { return k < f.kind; });
    return {lo, hi};
}

}  // namespace

void ActionModel::match(const std::vector<Fact>& facts, const std::vector<FactPattern>& patterns, std::size_t next,
                        Binding& binding, std::vector<Binding>& out, bool first_only) const {
    if (next == patterns.size()) {
        out.push_back(binding);
        return;
    }
    const auto& pat = patterns[next];
    auto [lo, hi] = kind_range(facts, pat.kind);
    for (auto it = lo; it != hi; ++it) {
        std::size_t mark = binding.vars.size();
        bool ok = true;
        // host slot
        Value host_value{true, it->host, {}};
        if (pat.host.is_variable()) {
            if (const auto* v = binding.find(pat.host.text)) {
                ok = *v == host_value;
            } else {
                binding.vars.emplace_back(pat.host.text, host_value);
            }
        } else {
            ok = pat.host.kind == Term::Kind::Host && pat.host.host == it->host;
        }
        // detail slot
        if (ok) {
            Value detail_value{false, 0, it->detail};
            if (pat.detail.is_variable()) {
                if (const auto* v = binding.find(pat.detail.text)) {
                    ok = *v == detail_value;
                } else {
                    binding.vars.emplace_back(pat.detail.text, std::move(detail_value));
                }
            } else {
                ok = pat.detail.kind == Term::Kind::Literal && pat.detail.text == it->detail;
            }
        }
        if (ok) match(facts, patterns, next + 1, binding, out, first_only);
        binding.vars.resize(mark);
        if (first_only && !out.empty()) return;
    }
}

bool ActionModel::eval(const Predicate& pred, const Binding& binding, const std::vector<Fact>& facts) const {
    bool result = false;
    auto host_of = [&](std::size_t i) -> const HostInfo* {
        auto v = resolve(pred.args[i], binding);
        if (!v.is_host) return nullptr;
        int idx = host_index(v.host);
        return idx < 0 ? nullptr : &hosts_[static_cast<std::size_t>(idx)];
    };
    auto text_of = [&](std::size_t i) { return resolve(pred.args[i], binding).text; };
    switch (pred.kind) {
        case PredicateKind::Reachable: {
            auto* a = host_of(0);
            auto* b = host_of(1);
            result = a && b && reachable(a->spec.id, b->spec.id);
            break;
        }
        case PredicateKind::SameSubnet: {
            auto* a = host_of(0);
            auto* b = host_of(1);
            result = a && b && a->spec.subnet == b->spec.subnet;
            break;
        }
        case PredicateKind::IsDc: {
            auto* a = host_of(0);
            result = a && a->spec.is_domain_controller;
            break;
        }
        case PredicateKind::InternetFacing: {
            auto* a = host_of(0);
            result = a && a->spec.internet_facing;
            break;
        }
        case PredicateKind::HasService: {
            auto* a = host_of(0);
            auto svc = text_of(1);
            result = a && std::binary_search(a->spec.services.begin(), a->spec.services.end(), svc);
            break;
        }
        case PredicateKind::Os: {
            auto* a = host_of(0);
            result = a && to_string(a->spec.os) == text_of(1);
            break;
        }
        case PredicateKind::IsWindows: {
            auto* a = host_of(0);
            result = a && a->spec.os != OsKind::Ubuntu18;
            break;
        }
        case PredicateKind::AdminOn: {
            auto principal = text_of(0);
            auto* h = host_of(1);
            result = h && std::binary_search(h->admin_principals.begin(), h->admin_principals.end(), principal);
            break;
        }
        case PredicateKind::Eq: result = resolve(pred.args[0], binding) == resolve(pred.args[1], binding); break;
        case PredicateKind::Known: {
            Fact f;
            result = instantiate(pred.fact, binding, f) && std::binary_search(facts.begin(), facts.end(), f);
            break;
        }
    }
    return pred.negate ? !result : result;
}

bool ActionModel::eval_all(const std::vector<Predicate>& preds, const Binding& binding,
                           const std::vector<Fact>& facts) const {
    return std::all_of(preds.begin(), preds.end(), [&](const Predicate& p) { return eval(p, binding, facts); });
}

void ActionModel::expand(const Effect& effect, Binding& binding, const std::vector<Fact>& facts,
                         std::vector<Fact>& out) const {
    Fact fact;
    if (effect.for_each.empty()) {
        if (instantiate(effect.fact, binding, fact)) out.push_back(std::move(fact));
        return;
    }
    const auto& loop = effect.for_each.front();
    std::vector<Value> domain;
    switch (loop.over) {
        case ForEach::Domain::Hosts:
            for (const auto& h : hosts_) domain.push_back(Value{true, h.spec.id, {}});
            std::sort(domain.begin(), domain.end());
            break;
        case ForEach::Domain::CachedCredentials: {
            auto of = resolve(loop.of, binding);
            int idx = of.is_host ? host_index(of.host) : -1;
            if (idx >= 0) {
                for (const auto& p : hosts_[static_cast<std::size_t>(idx)].cached_principals) domain.push_back(Value{false, 0, p});
            }
            break;
        }
        case ForEach::Domain::WeakCredentials:
            for (const auto& p : weak_principals_) domain.push_back(Value{false, 0, p});
            break;
    }
    for (auto& value : domain) {
        binding.vars.emplace_back(loop.var, std::move(value));
        if (eval_all(loop.where, binding, facts) && instantiate(effect.fact, binding, fact)) out.push_back(fact);
        binding.vars.pop_back();
    }
}

HandPlan ActionModel::plan(const std::vector<Fact>& facts, const HandRef& hand, int action_id) const {
    const auto& spec = action(action_id);
    HandPlan plan;
    plan.host = hand.host;
    plan.priv = hand.priv;
    plan.success_prob = spec.success_prob;

    Binding seed;
    seed.vars.emplace_back("?self", Value{true, hand.host, {}});
    seed.vars.emplace_back("?priv", Value{false, 0, std::string(to_string(hand.priv))});
    std::vector<Binding> bindings;
    match(facts, spec.preconditions, 0, seed, bindings, false);
    if (bindings.empty()) return plan;
    plan.executable = true;

    std::stable_sort(bindings.begin(), bindings.end(), [](const Binding& a, const Binding& b) {
        return a.ordered_values() < b.ordered_values();
    });

    struct Candidate {
        bool guard_ok;
        bool is_new;
        std::vector<Fact> effects;
    };
    std::optional<Candidate> first_any;
    std::optional<Candidate> first_new;
    for (auto& b : bindings) {
        Candidate c;
        for (const auto& e : spec.effects) expand(e, b, facts, c.effects);
        std::sort(c.effects.begin(), c.effects.end());
        c.effects.erase(std::unique(c.effects.begin(), c.effects.end()), c.effects.end());
        c.is_new = std::any_of(c.effects.begin(), c.effects.end(),
                               [&](const Fact& f) { return !std::binary_search(facts.begin(), facts.end(), f); });
        c.guard_ok = eval_all(spec.guard, b, facts);
        if (c.is_new && c.guard_ok) {
            plan.guard_ok = true;
            plan.effects = std::move(c.effects);
            return plan;
        }
        if (c.is_new && !first_new) first_new = c;
        if (!first_any) first_any = std::move(c);
    }
    const auto& chosen = first_new ? *first_new : *first_any;
    plan.guard_ok = chosen.guard_ok;
    plan.effects = chosen.effects;
    return plan;
}

bool ActionModel::executable(const std::vector<Fact>& facts, const HandRef& hand, int action_id) const {
    const auto& spec = action(action_id);
    Binding seed;
    seed.vars.emplace_back("?self", Value{true, hand.host, {}});
    seed.vars.emplace_back("?priv", Value{false, 0, std::string(to_string(hand.priv))});
    std::vector<Binding> bindings;
    match(facts, spec.preconditions, 0, seed, bindings, true);
    return !bindings.empty();
}

std::vector<HandRef> ActionModel::hands_in(const std::vector<Fact>& facts) {
    std::vector<HandRef> hands;
    auto [lo, hi] = kind_range(facts, FactKind::HandPresent);
    for (auto it = lo; it != hi; ++it) {
        if (auto p = privilege_from_string(it->detail)) hands.push_back({it->host, *p});
    }
    return hands;
}

double ActionModel::step_cost(const std::vector<Fact>& facts, int action_id) const {
    const auto& game = scenario_->game;
    double cost = 0.0;
    for (const auto& hand : hands_in(facts)) {
        cost += executable(facts, hand, action_id) ? game.cost_valid : game.cost_invalid;
    }
    return cost;
}

bool ActionModel::goal_satisfied(const std::vector<Fact>& facts) const {
    const auto& goal = scenario_->game.goal;
    return std::all_of(goal.begin(), goal.end(),
                       [&](const Fact& f) { return std::binary_search(facts.begin(), facts.end(), f); });
}

}  // namespace cyops
