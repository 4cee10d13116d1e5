#include "cyops/scenario.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cyops {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, 3> kOsNames = {"win10", "winserver2016", "ubuntu18"};
constexpr std::array<std::string_view, 4> kTacticNames = {"Discovery", "CredentialAccess", "PrivilegeEscalation",
                                                          "LateralMovement"};
constexpr std::array<std::string_view, 10> kPredicateNames = {
    "reachable", "same_subnet", "is_dc", "internet_facing", "has_service", "os", "is_windows", "admin_on", "eq", "known"};
constexpr std::array<std::size_t, 10> kPredicateArity = {2, 2, 1, 1, 2, 2, 1, 2, 2, 0};
constexpr std::array<std::string_view, 3> kDomainNames = {"hosts", "cached_credentials", "weak_credentials"};

template <std::size_t N>
int index_of(const std::array<std::string_view, N>& names, std::string_view name) {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

// Reads a JSON document into a Scenario, collecting every structural error
// rather than stopping at the first.
class DocumentReader {
public:
    std::vector<std::string> errors;

    Scenario read(const json& doc) {
        Scenario s;
        if (!doc.is_object()) {
            fail("", "document must be a JSON object");
            return s;
        }
        s.version = get_int(doc, "version", "", 1, true);
        s.notes = get_string(doc, "notes", "", "", false);
        if (auto* subnets = field(doc, "subnets", "", true)) {
            if (expect_array(*subnets, "subnets")) {
                for (std::size_t i = 0; i < subnets->size(); ++i) {
                    const auto& v = (*subnets)[i];
                    if (!v.is_string()) {
                        fail(path("subnets", i), "expected string");
                        continue;
                    }
                    s.subnets.push_back(v.get<std::string>());
                }
            }
        }
        read_list(doc, "hosts", true, [&](const json& v, const std::string& p) { s.hosts.push_back(read_host(v, p)); });
        read_list(doc, "firewall", false, [&](const json& v, const std::string& p) {
            FirewallRule rule;
            rule.src = read_endpoint(v, "src", p);
            rule.dst = read_endpoint(v, "dst", p);
            rule.allow = get_bool(v, "allow", p, true, false);
            s.firewall.push_back(std::move(rule));
        });
        read_list(doc, "credentials", false, [&](const json& v, const std::string& p) {
            CredentialSpec cred;
            cred.principal = get_string(v, "principal", p, "", true);
            cred.admin_on = get_host_list(v, "admin_on", p);
            cred.cached_on = get_host_list(v, "cached_on", p);
            cred.weak = get_bool(v, "weak", p, false, false);
            s.credentials.push_back(std::move(cred));
        });
        read_list(doc, "actions", true,
                  [&](const json& v, const std::string& p) { s.actions.push_back(read_action(v, p)); });
        if (auto* game = field(doc, "game", "", true)) s.game = read_game(*game, "game");
        read_list(doc, "initial_facts", true,
                  [&](const json& v, const std::string& p) { s.initial_facts.push_back(read_fact(v, p)); });
        return s;
    }

private:
    void fail(const std::string& where, const std::string& message) {
        errors.push_back(where.empty() ? message : where + ": " + message);
    }

    static std::string path(const std::string& base, std::size_t index) {
        return base + "[" + std::to_string(index) + "]";
    }
    static std::string path(const std::string& base, const std::string& key) {
        return base.empty() ? key : base + "." + key;
    }

    const json* field(const json& obj, const std::string& key, const std::string& where, bool required) {
        if (!obj.is_object()) {
            fail(where, "expected object");
            return nullptr;
        }
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) fail(path(where, key), "missing field");
            return nullptr;
        }
        return &*it;
    }

    bool expect_array(const json& v, const std::string& where) {
        if (v.is_array()) return true;
        fail(where, "expected array");
        return false;
    }

    template <typename Fn>
    void read_list(const json& obj, const std::string& key, bool required, Fn&& fn) {
        auto* v = field(obj, key, "", required);
        if (!v || !expect_array(*v, key)) return;
        for (std::size_t i = 0; i < v->size(); ++i) fn((*v)[i], path(key, i));
    }

    int get_int(const json& obj, const std::string& key, const std::string& where, int fallback, bool required) {
        auto* v = field(obj, key, where, required);
        if (!v) return fallback;
        if (!v->is_number_integer()) {
            fail(path(where, key), "expected integer");
            return fallback;
        }
        return v->get<int>();
    }

    double get_number(const json& obj, const std::string& key, const std::string& where, double fallback,
                      bool required) {
        auto* v = field(obj, key, where, required);
        if (!v) return fallback;
        if (!v->is_number()) {
            fail(path(where, key), "expected number");
            return fallback;
        }
        return v->get<double>();
    }

    bool get_bool(const json& obj, const std::string& key, const std::string& where, bool fallback, bool required) {
        auto* v = field(obj, key, where, required);
        if (!v) return fallback;
        if (!v->is_boolean()) {
            fail(path(where, key), "expected boolean");
            return fallback;
        }
        return v->get<bool>();
    }

    std::string get_string(const json& obj, const std::string& key, const std::string& where,
                           const std::string& fallback, bool required) {
        auto* v = field(obj, key, where, required);
        if (!v) return fallback;
        if (!v->is_string()) {
            fail(path(where, key), "expected string");
            return fallback;
        }
        return v->get<std::string>();
    }

    std::vector<HostId> get_host_list(const json& obj, const std::string& key, const std::string& where) {
        std::vector<HostId> out;
        auto* v = field(obj, key, where, false);
        if (!v) return out;
        if (!expect_array(*v, path(where, key))) return out;
        for (std::size_t i = 0; i < v->size(); ++i) {
            if (!(*v)[i].is_number_integer()) {
                fail(path(path(where, key), i), "expected host id");
                continue;
            }
            out.push_back((*v)[i].get<int>());
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    HostSpec read_host(const json& v, const std::string& p) {
        HostSpec h;
        h.id = get_int(v, "id", p, 0, true);
        auto os = get_string(v, "os", p, "win10", true);
        int os_index = index_of(kOsNames, os);
        if (os_index < 0) fail(path(p, "os"), "unknown os '" + os + "'");
        h.os = static_cast<OsKind>(std::max(os_index, 0));
        h.subnet = get_string(v, "subnet", p, "", true);
        if (auto* services = field(v, "services", p, false); services && expect_array(*services, path(p, "services"))) {
            for (const auto& s : *services) {
                if (!s.is_string()) {
                    fail(path(p, "services"), "expected strings");
                    continue;
                }
                h.services.push_back(s.get<std::string>());
            }
        }
        std::sort(h.services.begin(), h.services.end());
        h.is_domain_controller = get_bool(v, "is_domain_controller", p, false, false);
        h.internet_facing = get_bool(v, "internet_facing", p, false, false);
        return h;
    }

    Endpoint read_endpoint(const json& v, const std::string& key, const std::string& p) {
        auto* e = field(v, key, p, true);
        if (!e) return HostId{0};
        if (e->is_number_integer()) return e->get<int>();
        if (e->is_string()) return e->get<std::string>();
        fail(path(p, key), "expected host id or subnet id");
        return HostId{0};
    }

    Term read_term(const json& v, const std::string& where) {
        if (v.is_number_integer()) return Term::host_id(v.get<int>());
        if (v.is_string()) {
            auto text = v.get<std::string>();
            if (!text.empty() && text[0] == '?') return Term::variable(std::move(text));
            return Term::literal(std::move(text));
        }
        fail(where, "expected host id, variable or string literal");
        return Term::literal("");
    }

    FactPattern read_pattern(const json& v, const std::string& p) {
        FactPattern pat;
        auto kind = get_string(v, "kind", p, "HostDiscovered", true);
        if (auto k = fact_kind_from_string(kind)) {
            pat.kind = *k;
        } else {
            fail(path(p, "kind"), "unknown fact kind '" + kind + "'");
        }
        if (auto* host = field(v, "host", p, true)) {
            pat.host = read_term(*host, path(p, "host"));
            if (pat.host.kind == Term::Kind::Literal) fail(path(p, "host"), "expected host id or variable");
        }
        if (auto* detail = field(v, "detail", p, false)) {
            pat.detail = read_term(*detail, path(p, "detail"));
            if (pat.detail.kind == Term::Kind::Host) fail(path(p, "detail"), "expected string or variable");
        } else {
            pat.detail = Term::literal("");
        }
        return pat;
    }

    Fact read_fact(const json& v, const std::string& p) {
        Fact f;
        auto kind = get_string(v, "kind", p, "HostDiscovered", true);
        if (auto k = fact_kind_from_string(kind)) {
            f.kind = *k;
        } else {
            fail(path(p, "kind"), "unknown fact kind '" + kind + "'");
        }
        f.host = get_int(v, "host", p, 0, true);
        f.detail = get_string(v, "detail", p, "", false);
        return f;
    }

    Predicate read_predicate(const json& v, const std::string& p) {
        Predicate pred;
        auto name = get_string(v, "pred", p, "eq", true);
        int idx = index_of(kPredicateNames, name);
        if (idx < 0) {
            fail(path(p, "pred"), "unknown predicate '" + name + "'");
            return pred;
        }
        pred.kind = static_cast<PredicateKind>(idx);
        pred.negate = get_bool(v, "negate", p, false, false);
        if (pred.kind == PredicateKind::Known) {
            if (auto* f = field(v, "fact", p, true)) pred.fact = read_pattern(*f, path(p, "fact"));
            return pred;
        }
        if (auto* args = field(v, "args", p, true); args && expect_array(*args, path(p, "args"))) {
            for (std::size_t i = 0; i < args->size(); ++i) pred.args.push_back(read_term((*args)[i], path(path(p, "args"), i)));
            if (pred.args.size() != kPredicateArity[static_cast<std::size_t>(idx)]) {
                fail(path(p, "args"), "predicate '" + name + "' takes " +
                                          std::to_string(kPredicateArity[static_cast<std::size_t>(idx)]) + " arguments");
            }
        }
        return pred;
    }

    std::vector<Predicate> read_predicates(const json& v, const std::string& key, const std::string& p) {
        std::vector<Predicate> out;
        auto* list = field(v, key, p, false);
        if (!list || !expect_array(*list, path(p, key))) return out;
        for (std::size_t i = 0; i < list->size(); ++i) out.push_back(read_predicate((*list)[i], path(path(p, key), i)));
        return out;
    }

    Effect read_effect(const json& v, const std::string& p) {
        Effect e;
        e.fact = read_pattern(v, p);
        if (auto* fe = field(v, "for_each", p, false)) {
            auto fp = path(p, "for_each");
            ForEach loop;
            loop.var = get_string(*fe, "var", fp, "?u", true);
            if (loop.var.empty() || loop.var[0] != '?') fail(path(fp, "var"), "loop variable must start with '?'");
            auto over = get_string(*fe, "over", fp, "hosts", true);
            int idx = index_of(kDomainNames, over);
            if (idx < 0) fail(path(fp, "over"), "unknown domain '" + over + "'");
            loop.over = static_cast<ForEach::Domain>(std::max(idx, 0));
            if (auto* of = field(*fe, "of", fp, loop.over == ForEach::Domain::CachedCredentials)) {
                loop.of = read_term(*of, path(fp, "of"));
            }
            loop.where = read_predicates(*fe, "where", fp);
            e.for_each.push_back(std::move(loop));
        }
        return e;
    }

    ActionSpec read_action(const json& v, const std::string& p) {
        ActionSpec a;
        a.id = get_int(v, "id", p, -1, true);
        a.name = get_string(v, "name", p, "", false);
        auto tactic = get_string(v, "tactic", p, "Discovery", true);
        int t = index_of(kTacticNames, tactic);
        if (t < 0) fail(path(p, "tactic"), "unknown tactic '" + tactic + "'");
        a.tactic = static_cast<Tactic>(std::max(t, 0));
        if (auto* pre = field(v, "preconditions", p, false); pre && expect_array(*pre, path(p, "preconditions"))) {
            for (std::size_t i = 0; i < pre->size(); ++i) {
                a.preconditions.push_back(read_pattern((*pre)[i], path(path(p, "preconditions"), i)));
            }
        }
        a.guard = read_predicates(v, "guard", p);
        a.success_prob = get_number(v, "success_prob", p, 1.0, true);
        if (auto* eff = field(v, "effects", p, false); eff && expect_array(*eff, path(p, "effects"))) {
            for (std::size_t i = 0; i < eff->size(); ++i) a.effects.push_back(read_effect((*eff)[i], path(path(p, "effects"), i)));
        }
        a.latency_s = get_number(v, "latency_s", p, 16.0, false);
        return a;
    }

    GameSpec read_game(const json& v, const std::string& p) {
        GameSpec g;
        if (auto* goal = field(v, "goal", p, true); goal && expect_array(*goal, path(p, "goal"))) {
            for (std::size_t i = 0; i < goal->size(); ++i) g.goal.push_back(read_fact((*goal)[i], path(path(p, "goal"), i)));
        }
        g.goal_gain = get_number(v, "goal_gain", p, 100.0, false);
        g.cost_valid = get_number(v, "cost_valid", p, 1.0, false);
        g.cost_invalid = get_number(v, "cost_invalid", p, 8.0, false);
        g.max_steps = get_int(v, "max_steps", p, 80, false);
        return g;
    }
};

json term_json(const Term& t) {
    switch (t.kind) {
        case Term::Kind::Host: return t.host;
        case Term::Kind::Variable:
        case Term::Kind::Literal: return t.text;
    }
    return nullptr;
}

json pattern_json(const FactPattern& p) {
    return json{{"kind", to_string(p.kind)}, {"host", term_json(p.host)}, {"detail", term_json(p.detail)}};
}

json fact_json(const Fact& f) { return json{{"kind", to_string(f.kind)}, {"host", f.host}, {"detail", f.detail}}; }

json predicate_json(const Predicate& p) {
    json out{{"pred", to_string(p.kind)}, {"negate", p.negate}};
    if (p.kind == PredicateKind::Known) {
        out["fact"] = pattern_json(p.fact);
    } else {
        out["args"] = json::array();
        for (const auto& a : p.args) out["args"].push_back(term_json(a));
    }
    return out;
}

json endpoint_json(const Endpoint& e) {
    if (const auto* host = std::get_if<HostId>(&e)) return *host;
    return std::get<std::string>(e);
}

// Checks that every variable used in guards/effects is bound.
class VariableScope {
public:
    std::set<std::string> bound{"?self", "?priv"};

    void bind(const Term& t) {
        if (t.is_variable()) bound.insert(t.text);
    }
    bool ok(const Term& t) const { return !t.is_variable() || bound.count(t.text) > 0; }
};

}  // namespace

std::string_view to_string(OsKind os) { return kOsNames[static_cast<std::size_t>(os)]; }
std::string_view to_string(Tactic tactic) { return kTacticNames[static_cast<std::size_t>(tactic)]; }
std::string_view to_string(PredicateKind kind) { return kPredicateNames[static_cast<std::size_t>(kind)]; }

const HostSpec* Scenario::find_host(HostId id) const {
    for (const auto& h : hosts) {
        if (h.id == id) return &h;
    }
    return nullptr;
}

const HostSpec* Scenario::domain_controller() const {
    for (const auto& h : hosts) {
        if (h.is_domain_controller) return &h;
    }
    return nullptr;
}

bool ValidationReport::has_errors() const {
    return std::any_of(issues.begin(), issues.end(),
                       [](const ValidationIssue& i) { return i.severity == ValidationIssue::Severity::Error; });
}

std::vector<std::string> ValidationReport::errors() const {
    std::vector<std::string> out;
    for (const auto& i : issues) {
        if (i.severity == ValidationIssue::Severity::Error) out.push_back(i.where + ": " + i.message);
    }
    return out;
}

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
    std::string out = "invalid scenario";
    for (const auto& e : errors) out += "; " + e;
    return out;
}

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

ValidationReport validate(const Scenario& s) {
    ValidationReport report;
    auto error = [&](std::string where, std::string message) {
        report.issues.push_back({ValidationIssue::Severity::Error, std::move(where), std::move(message)});
    };
    auto warn = [&](std::string where, std::string message) {
        report.issues.push_back({ValidationIssue::Severity::Warning, std::move(where), std::move(message)});
    };

    if (s.version != 1) error("version", "unsupported version " + std::to_string(s.version));

    std::set<std::string> subnets;
    for (const auto& sn : s.subnets) {
        if (!subnets.insert(sn).second) error("subnets", "duplicate subnet '" + sn + "'");
    }

    std::set<HostId> host_ids;
    int dc_count = 0;
    bool any_entry = false;
    for (std::size_t i = 0; i < s.hosts.size(); ++i) {
        const auto& h = s.hosts[i];
        auto where = "hosts[" + std::to_string(i) + "]";
        if (!host_ids.insert(h.id).second) error(where, "duplicate host id " + std::to_string(h.id));
        if (!subnets.count(h.subnet)) error(where, "unknown subnet reference '" + h.subnet + "'");
        for (const auto& svc : h.services) {
            if (svc.empty() || !is_valid_detail(svc)) error(where, "invalid service name '" + svc + "'");
        }
        dc_count += h.is_domain_controller ? 1 : 0;
        any_entry = any_entry || h.internet_facing;
    }
    if (s.hosts.empty()) error("hosts", "at least one host is required");
    if (dc_count > 1) warn("hosts", std::to_string(dc_count) + " domain controllers declared; expected exactly one");
    if (dc_count == 0) warn("hosts", "no domain controller declared");
    if (!any_entry) warn("hosts", "no internet-facing host declared");

    auto host_known = [&](HostId id) { return host_ids.count(id) > 0; };
    auto check_endpoint = [&](const Endpoint& e, const std::string& where) {
        if (const auto* host = std::get_if<HostId>(&e)) {
            if (!host_known(*host)) error(where, "unknown host reference " + std::to_string(*host));
        } else if (!subnets.count(std::get<std::string>(e))) {
            error(where, "unknown subnet reference '" + std::get<std::string>(e) + "'");
        }
    };
    for (std::size_t i = 0; i < s.firewall.size(); ++i) {
        auto where = "firewall[" + std::to_string(i) + "]";
        check_endpoint(s.firewall[i].src, where + ".src");
        check_endpoint(s.firewall[i].dst, where + ".dst");
    }

    std::set<std::string> principals;
    for (std::size_t i = 0; i < s.credentials.size(); ++i) {
        const auto& c = s.credentials[i];
        auto where = "credentials[" + std::to_string(i) + "]";
        if (c.principal.empty() || !is_valid_detail(c.principal)) error(where, "invalid principal '" + c.principal + "'");
        if (!principals.insert(c.principal).second) error(where, "duplicate principal '" + c.principal + "'");
        for (auto h : c.admin_on) {
            if (!host_known(h)) error(where + ".admin_on", "unknown host reference " + std::to_string(h));
        }
        for (auto h : c.cached_on) {
            if (!host_known(h)) error(where + ".cached_on", "unknown host reference " + std::to_string(h));
        }
    }

    auto check_fact = [&](const Fact& f, const std::string& where) {
        if (!host_known(f.host)) error(where, "unknown host reference " + std::to_string(f.host));
        if (!is_valid_detail(f.detail)) error(where, "invalid detail '" + f.detail + "'");
        if (f.kind == FactKind::HandPresent && !privilege_from_string(f.detail)) {
            error(where, "hand privilege must be 'user' or 'elevated'");
        }
    };

    auto check_term_host = [&](const Term& t, const VariableScope& scope, const std::string& where) {
        if (t.kind == Term::Kind::Host && !host_known(t.host)) error(where, "unknown host reference " + std::to_string(t.host));
        if (!scope.ok(t)) error(where, "unbound variable '" + t.text + "'");
    };
    auto check_pattern = [&](const FactPattern& p, const VariableScope& scope, const std::string& where) {
        check_term_host(p.host, scope, where + ".host");
        if (!scope.ok(p.detail)) error(where + ".detail", "unbound variable '" + p.detail.text + "'");
        if (p.detail.kind == Term::Kind::Literal && !is_valid_detail(p.detail.text)) {
            error(where + ".detail", "invalid detail '" + p.detail.text + "'");
        }
        if (p.kind == FactKind::HandPresent && p.detail.kind == Term::Kind::Literal &&
            !privilege_from_string(p.detail.text)) {
            error(where + ".detail", "hand privilege must be 'user' or 'elevated'");
        }
    };
    auto check_predicates = [&](const std::vector<Predicate>& preds, const VariableScope& scope,
                                const std::string& where) {
        for (std::size_t k = 0; k < preds.size(); ++k) {
            auto pw = where + "[" + std::to_string(k) + "]";
            const auto& pred = preds[k];
            if (pred.kind == PredicateKind::Known) {
                check_pattern(pred.fact, scope, pw + ".fact");
                continue;
            }
            for (const auto& arg : pred.args) check_term_host(arg, scope, pw);
        }
    };

    std::set<int> action_ids;
    for (std::size_t i = 0; i < s.actions.size(); ++i) {
        const auto& a = s.actions[i];
        auto where = "actions[" + std::to_string(i) + "]";
        if (!action_ids.insert(a.id).second) error(where, "duplicate action id " + std::to_string(a.id));
        if (!(a.success_prob >= 0.0 && a.success_prob <= 1.0)) error(where + ".success_prob", "probability out of range");
        if (!(a.latency_s >= 0.0)) error(where + ".latency_s", "latency must be non-negative");
        VariableScope scope;
        for (std::size_t k = 0; k < a.preconditions.size(); ++k) {
            scope.bind(a.preconditions[k].host);
            scope.bind(a.preconditions[k].detail);
            check_pattern(a.preconditions[k], scope, where + ".preconditions[" + std::to_string(k) + "]");
        }
        check_predicates(a.guard, scope, where + ".guard");
        for (std::size_t k = 0; k < a.effects.size(); ++k) {
            const auto& e = a.effects[k];
            auto ew = where + ".effects[" + std::to_string(k) + "]";
            VariableScope inner = scope;
            if (e.for_each.size() > 1) error(ew, "at most one for_each clause");
            for (const auto& loop : e.for_each) {
                if (loop.over == ForEach::Domain::CachedCredentials) check_term_host(loop.of, scope, ew + ".for_each.of");
                inner.bound.insert(loop.var);
                check_predicates(loop.where, inner, ew + ".for_each.where");
            }
            check_pattern(e.fact, inner, ew);
        }
    }
    for (int id = 0; id < static_cast<int>(s.actions.size()); ++id) {
        if (!action_ids.count(id)) {
            error("actions", "action ids must be dense 0.." + std::to_string(s.actions.size() - 1) + "; missing " +
                                 std::to_string(id));
            break;
        }
    }

    const auto& g = s.game;
    if (!(g.goal_gain > 0)) error("game.goal_gain", "must be positive");
    if (!(g.cost_valid > 0)) error("game.cost_valid", "must be positive");
    if (!(g.cost_invalid >= g.cost_valid)) error("game.cost_invalid", "must be >= cost_valid");
    if (g.max_steps < 1) error("game.max_steps", "must be >= 1");
    if (g.goal.empty()) error("game.goal", "goal must name at least one fact");
    for (std::size_t i = 0; i < g.goal.size(); ++i) check_fact(g.goal[i], "game.goal[" + std::to_string(i) + "]");

    bool any_hand = false;
    for (std::size_t i = 0; i < s.initial_facts.size(); ++i) {
        check_fact(s.initial_facts[i], "initial_facts[" + std::to_string(i) + "]");
        any_hand = any_hand || s.initial_facts[i].kind == FactKind::HandPresent;
    }
    if (!any_hand) warn("initial_facts", "no initial hand; no action can execute");
    return report;
}

Scenario parse_scenario(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ScenarioError({"syntax error at byte " + std::to_string(e.byte) + ": " + e.what()});
    }
    DocumentReader reader;
    Scenario s = reader.read(doc);
    if (!reader.errors.empty()) throw ScenarioError(reader.errors);
    auto report = validate(s);
    if (report.has_errors()) throw ScenarioError(report.errors());
    return s;
}

Scenario load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string serialize_scenario(const Scenario& s) {
    json doc;
    doc["version"] = s.version;
    doc["notes"] = s.notes;
    doc["subnets"] = s.subnets;
    doc["hosts"] = json::array();
    for (const auto& h : s.hosts) {
        doc["hosts"].push_back({{"id", h.id},
                                {"os", to_string(h.os)},
                                {"subnet", h.subnet},
                                {"services", h.services},
                                {"is_domain_controller", h.is_domain_controller},
                                {"internet_facing", h.internet_facing}});
    }
    doc["firewall"] = json::array();
    for (const auto& r : s.firewall) {
        doc["firewall"].push_back({{"src", endpoint_json(r.src)}, {"dst", endpoint_json(r.dst)}, {"allow", r.allow}});
    }
    doc["credentials"] = json::array();
    for (const auto& c : s.credentials) {
        doc["credentials"].push_back(
            {{"principal", c.principal}, {"admin_on", c.admin_on}, {"cached_on", c.cached_on}, {"weak", c.weak}});
    }
    doc["actions"] = json::array();
    for (const auto& a : s.actions) {
        json action{{"id", a.id},
                    {"name", a.name},
                    {"tactic", to_string(a.tactic)},
                    {"success_prob", a.success_prob},
                    {"latency_s", a.latency_s}};
        action["preconditions"] = json::array();
        for (const auto& p : a.preconditions) action["preconditions"].push_back(pattern_json(p));
        action["guard"] = json::array();
        for (const auto& p : a.guard) action["guard"].push_back(predicate_json(p));
        action["effects"] = json::array();
        for (const auto& e : a.effects) {
            json ej = pattern_json(e.fact);
            for (const auto& loop : e.for_each) {
                json lj{{"var", loop.var}, {"over", kDomainNames[static_cast<std::size_t>(loop.over)]}};
                if (loop.over == ForEach::Domain::CachedCredentials) lj["of"] = term_json(loop.of);
                lj["where"] = json::array();
                for (const auto& p : loop.where) lj["where"].push_back(predicate_json(p));
                ej["for_each"] = lj;
            }
            action["effects"].push_back(ej);
        }
        doc["actions"].push_back(action);
    }
    json game{{"goal_gain", s.game.goal_gain},
              {"cost_valid", s.game.cost_valid},
              {"cost_invalid", s.game.cost_invalid},
              {"max_steps", s.game.max_steps}};
    game["goal"] = json::array();
    for (const auto& f : s.game.goal) game["goal"].push_back(fact_json(f));
    doc["game"] = game;
    doc["initial_facts"] = json::array();
    for (const auto& f : s.initial_facts) doc["initial_facts"].push_back(fact_json(f));
    return doc.dump();
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t scenario_digest(const Scenario& s) { return fnv1a64(serialize_scenario(s)); }

std::string digest_hex(std::uint64_t digest) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
    return buf;
}

bool reachable(const Scenario& s, HostId src, HostId dst) {
    const auto* a = s.find_host(src);
    const auto* b = s.find_host(dst);
    if (!a) throw std::out_of_range("unknown host id " + std::to_string(src));
    if (!b) throw std::out_of_range("unknown host id " + std::to_string(dst));
    if (src == dst) return true;
    if (b->is_domain_controller) return true;
    auto covers = [](const Endpoint& e, const HostSpec& h) {
        if (const auto* id = std::get_if<HostId>(&e)) return *id == h.id;
        return std::get<std::string>(e) == h.subnet;
    };
    bool allowed = a->subnet == b->subnet;
    for (const auto& rule : s.firewall) {
        if (!covers(rule.src, *a) || !covers(rule.dst, *b)) continue;
        if (!rule.allow) return false;
        allowed = true;
    }
    return allowed;
}

// Kept out of the anonymous namespace so the generated translation unit can
// provide it.
extern const char* const kDefaultScenarioDocument;

std::string_view builtin_default_document() { return kDefaultScenarioDocument; }

const Scenario& builtin_default() {
    static const Scenario scenario = parse_scenario(kDefaultScenarioDocument);
    return scenario;
}

}  // namespace cyops
