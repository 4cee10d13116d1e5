#pragma once

#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "cyops/fact.hpp"

namespace cyops {

enum class EnvKind : std::uint8_t { Emulator, Simulator };
std::string_view to_string(EnvKind kind);

struct HandResult {
    int hand_id{0};
    bool executable{false};
    bool succeeded{false};
};

struct StepInfo {
    std::vector<HandResult> per_hand;
    double latency_s{0.0};
    bool unknown_transition{false};  // simulator fallback taken
};

struct StepOutcome {
    Observation observation;
    double reward{0.0};
    bool done{false};
    StepInfo info;
};

/// Thrown on contract violations by callers: bad action id, step after done.
class EnvError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/**
 * Reset/step contract shared by the emulator and the generated simulator.
 * Learners only ever see this interface. One handle is single-threaded.
 */
class Environment {
public:
    virtual ~Environment() = default;

    virtual Observation reset(std::uint64_t seed) = 0;
    virtual StepOutcome step(int action_id) = 0;

    virtual int num_actions() const = 0;
    virtual int max_steps() const = 0;
    virtual EnvKind kind() const = 0;

    /// Current episode's accumulated virtual seconds and return.
    virtual double virtual_time() const = 0;
    virtual double episode_return() const = 0;
    virtual int step_count() const = 0;
    virtual bool done() const = 0;
    virtual const Observation& observation() const = 0;
};

}  // namespace cyops
