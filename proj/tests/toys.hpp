#pragma once

#include <string>

#include "cyops/scenario.hpp"

namespace toys {

inline const char* kOneHost = R"({
  "version": 1,
  "subnets": ["A"],
  "hosts": [{"id": 1, "os": "win10", "subnet": "A", "services": [], "is_domain_controller": true, "internet_facing": true}],
  "firewall": [],
  "actions": [{
    "id": 0, "name": "elevate", "tactic": "PrivilegeEscalation", "success_prob": 1.0,
    "preconditions": [{"kind": "HandPresent", "host": "?self", "detail": "user"}],
    "guard": [],
    "effects": [{"kind": "HandPresent", "host": "?self", "detail": "elevated"}]
  }],
  "game": {"goal": [{"kind": "HandPresent", "host": 1, "detail": "elevated"}]},
  "initial_facts": [{"kind": "HandPresent", "host": 1, "detail": "user"}]
})";

// One action whose preconditions can never bind.
inline const char* kUnreachable = R"({
  "version": 1,
  "subnets": ["A"],
  "hosts": [{"id": 1, "os": "win10", "subnet": "A", "is_domain_controller": true, "internet_facing": true}],
  "firewall": [],
  "actions": [{
    "id": 0, "name": "use-cred", "tactic": "LateralMovement", "success_prob": 1.0,
    "preconditions": [{"kind": "HandPresent", "host": "?self", "detail": "?priv"},
                      {"kind": "CredentialKnown", "host": "?h", "detail": "?c"}],
    "guard": [],
    "effects": [{"kind": "HandPresent", "host": "?self", "detail": "elevated"}]
  }],
  "game": {"goal": [{"kind": "HandPresent", "host": 1, "detail": "elevated"}]},
  "initial_facts": [{"kind": "HandPresent", "host": 1, "detail": "user"}]
})";

inline std::string three_host_document(int max_steps = 80, double p_lateral = 0.7) {
    return R"({
  "version": 1,
  "subnets": ["A", "B"],
  "hosts": [
    {"id": 1, "os": "win10", "subnet": "A", "services": ["smb"], "internet_facing": true},
    {"id": 2, "os": "win10", "subnet": "A", "services": ["smb"]},
    {"id": 3, "os": "winserver2016", "subnet": "B", "services": ["smb"], "is_domain_controller": true}
  ],
  "firewall": [],
  "credentials": [{"principal": "admin", "admin_on": [3], "cached_on": [2], "weak": false},
                  {"principal": "local", "admin_on": [2], "cached_on": [1], "weak": false}],
  "actions": [
    {"id": 0, "name": "discover", "tactic": "Discovery", "success_prob": 1.0,
     "preconditions": [{"kind": "HandPresent", "host": "?self", "detail": "?priv"}],
     "guard": [],
     "effects": [{"kind": "HostDiscovered", "host": "?u", "detail": "",
                  "for_each": {"var": "?u", "over": "hosts", "where": [{"pred": "reachable", "args": ["?self", "?u"]}]}}]},
    {"id": 1, "name": "elevate", "tactic": "PrivilegeEscalation", "success_prob": 0.8,
     "preconditions": [{"kind": "HandPresent", "host": "?self", "detail": "user"}],
     "guard": [{"pred": "is_windows", "args": ["?self"]}],
     "effects": [{"kind": "HandPresent", "host": "?self", "detail": "elevated"}]},
    {"id": 2, "name": "dump", "tactic": "CredentialAccess", "success_prob": 0.9,
     "preconditions": [{"kind": "HandPresent", "host": "?self", "detail": "elevated"}],
     "guard": [],
     "effects": [{"kind": "CredentialKnown", "host": "?self", "detail": "?c",
                  "for_each": {"var": "?c", "over": "cached_credentials", "of": "?self", "where": []}}]},
    {"id": 3, "name": "lateral", "tactic": "LateralMovement", "success_prob": )" +
           std::to_string(p_lateral) + R"(,
     "preconditions": [{"kind": "HandPresent", "host": "?self", "detail": "?priv"},
                       {"kind": "HostDiscovered", "host": "?t", "detail": ""},
                       {"kind": "CredentialKnown", "host": "?src", "detail": "?cred"}],
     "guard": [{"pred": "reachable", "args": ["?self", "?t"]}, {"pred": "admin_on", "args": ["?cred", "?t"]}],
     "effects": [{"kind": "HandPresent", "host": "?t", "detail": "elevated"}]}
  ],
  "game": {"goal": [{"kind": "HandPresent", "host": 3, "detail": "elevated"}], "max_steps": )" +
           std::to_string(max_steps) + R"(},
  "initial_facts": [{"kind": "HandPresent", "host": 1, "detail": "user"}]
})";
}

// Two routes to the goal: a risky direct jump or a safe two-step path.
inline std::string fork_document(int max_steps = 80, double p_jump = 0.4) {
    return R"({
  "version": 1,
  "subnets": ["A"],
  "hosts": [
    {"id": 1, "os": "ubuntu18", "subnet": "A", "services": ["ssh"], "internet_facing": true},
    {"id": 2, "os": "win10", "subnet": "A", "services": ["smb"], "is_domain_controller": true}
  ],
  "firewall": [],
  "actions": [
    {"id": 0, "name": "jump", "tactic": "LateralMovement", "success_prob": )" +
           std::to_string(p_jump) + R"(,
     "preconditions": [{"kind": "HandPresent", "host": "?self", "detail": "?priv"}],
     "guard": [{"pred": "eq", "args": ["?self", 1]}],
     "effects": [{"kind": "HandPresent", "host": 2, "detail": "elevated"}]},
    {"id": 1, "name": "scan", "tactic": "Discovery", "success_prob": 1.0,
     "preconditions": [{"kind": "HandPresent", "host": "?self", "detail": "?priv"}],
     "guard": [],
     "effects": [{"kind": "ShareKnown", "host": 2, "detail": "admin$"}]},
    {"id": 2, "name": "psexec", "tactic": "LateralMovement", "success_prob": 0.95,
     "preconditions": [{"kind": "HandPresent", "host": "?self", "detail": "?priv"},
                       {"kind": "ShareKnown", "host": "?t", "detail": "admin$"}],
     "guard": [],
     "effects": [{"kind": "HandPresent", "host": "?t", "detail": "elevated"}]}
  ],
  "game": {"goal": [{"kind": "HandPresent", "host": 2, "detail": "elevated"}], "max_steps": )" +
           std::to_string(max_steps) + R"(},
  "initial_facts": [{"kind": "HandPresent", "host": 1, "detail": "user"}]
})";
}

inline cyops::ScenarioPtr make(const std::string& doc) {
    return std::make_shared<const cyops::Scenario>(cyops::parse_scenario(doc));
}

}  // namespace toys
