#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cyops/fact.hpp"

namespace cyops {

enum class OsKind : std::uint8_t { Win10, WinServer2016, Ubuntu18 };
std::string_view to_string(OsKind os);

enum class Tactic : std::uint8_t { Discovery, CredentialAccess, PrivilegeEscalation, LateralMovement };
std::string_view to_string(Tactic tactic);

struct HostSpec {
    HostId id{0};
    OsKind os{OsKind::Win10};
    std::string subnet;
    std::vector<std::string> services;  // sorted
    bool is_domain_controller{false};
    bool internet_facing{false};
};

/// Firewall endpoint: a host id or a subnet id.
using Endpoint = std::variant<HostId, std::string>;

struct FirewallRule {
    Endpoint src;
    Endpoint dst;
    bool allow{true};
};

/// Ground-truth account: where it grants admin rights, where it is cached
/// in memory, and whether it falls to password guessing.
struct CredentialSpec {
    std::string principal;
    std::vector<HostId> admin_on;
    std::vector<HostId> cached_on;
    bool weak{false};
};

/**
 * Argument of a fact pattern or predicate: a variable ("?name"), a host id,
 * or a string literal. `?self` and `?priv` are pre-bound to the executing
 * hand's host and privilege.
 */
struct Term {
    enum class Kind : std::uint8_t { Variable, Host, Literal };
    Kind kind{Kind::Literal};
    HostId host{0};
    std::string text;

    static Term variable(std::string name) { return Term{Kind::Variable, 0, std::move(name)}; }
    static Term host_id(HostId id) { return Term{Kind::Host, id, {}}; }
    static Term literal(std::string value) { return Term{Kind::Literal, 0, std::move(value)}; }

    bool is_variable() const { return kind == Kind::Variable; }
    bool operator==(const Term&) const = default;
};

struct FactPattern {
    FactKind kind{FactKind::HostDiscovered};
    Term host;
    Term detail;
    bool operator==(const FactPattern&) const = default;
};

enum class PredicateKind : std::uint8_t {
    Reachable,       // (src, dst)
    SameSubnet,      // (a, b)
    IsDc,            // (host)
    InternetFacing,  // (host)
    HasService,      // (host, service)
    Os,              // (host, os-name)
    IsWindows,       // (host)
    AdminOn,         // (principal, host)
    Eq,              // (x, y)
    Known,           // fact pattern present in the agent's facts
};
std::string_view to_string(PredicateKind kind);

struct Predicate {
    PredicateKind kind{PredicateKind::Eq};
    std::vector<Term> args;
    FactPattern fact;  // Known only
    bool negate{false};
    bool operator==(const Predicate&) const = default;
};

/// Expands an effect over every value of `var` drawn from `over` that
/// satisfies `where`.
struct ForEach {
    enum class Domain : std::uint8_t { Hosts, CachedCredentials, WeakCredentials };
    std::string var;
    Domain over{Domain::Hosts};
    Term of;  // CachedCredentials: host whose memory is read
    std::vector<Predicate> where;
    bool operator==(const ForEach&) const = default;
};

struct Effect {
    FactPattern fact;
    std::vector<ForEach> for_each;  // zero or one entry
    bool operator==(const Effect&) const = default;
};

struct ActionSpec {
    int id{0};
    std::string name;
    Tactic tactic{Tactic::Discovery};
    std::vector<FactPattern> preconditions;
    std::vector<Predicate> guard;
    double success_prob{1.0};
    std::vector<Effect> effects;
    double latency_s{16.0};
};

struct GameSpec {
    std::vector<Fact> goal;  // all must be present
    double goal_gain{100.0};
    double cost_valid{1.0};
    double cost_invalid{8.0};
    int max_steps{80};
};

struct Scenario {
    int version{1};
    std::string notes;
    std::vector<std::string> subnets;
    std::vector<HostSpec> hosts;
    std::vector<FirewallRule> firewall;
    std::vector<CredentialSpec> credentials;
    std::vector<ActionSpec> actions;
    GameSpec game;
    std::vector<Fact> initial_facts;

    const HostSpec* find_host(HostId id) const;
    const HostSpec* domain_controller() const;
    int num_actions() const { return static_cast<int>(actions.size()); }
};

using ScenarioPtr = std::shared_ptr<const Scenario>;

struct ValidationIssue {
    enum class Severity : std::uint8_t { Warning, Error };
    Severity severity{Severity::Error};
    std::string where;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool empty() const { return issues.empty(); }
    bool has_errors() const;
    std::vector<std::string> errors() const;
};

/// Thrown by parse/load when a scenario document is malformed or invalid.
class ScenarioError : public std::runtime_error {
public:
    explicit ScenarioError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

ValidationReport validate(const Scenario& scenario);

/// Parses and validates a scenario document; throws ScenarioError listing
/// every problem found.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario_file(const std::filesystem::path& path);

/// Canonical serialization: compact JSON with lexicographically sorted keys.
std::string serialize_scenario(const Scenario& scenario);

/// 64-bit FNV-1a over the canonical serialization.
std::uint64_t scenario_digest(const Scenario& scenario);
std::uint64_t fnv1a64(std::string_view bytes);
std::string digest_hex(std::uint64_t digest);

/// Throws std::out_of_range for undeclared hosts.
bool reachable(const Scenario& scenario, HostId src, HostId dst);

/// The shipped example network (data/default_scenario.json).
const Scenario& builtin_default();
std::string_view builtin_default_document();

}  // namespace cyops
