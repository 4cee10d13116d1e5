#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "cyops/action_model.hpp"
#include "cyops/environment.hpp"
#include "cyops/scenario.hpp"

namespace cyops {

struct Hand {
    int id{0};
    HostId host{0};
    Privilege priv{Privilege::User};
};

/// Hidden state of the emulated network for one episode.
struct GroundState {
    std::vector<Hand> hands;        // ascending id
    std::vector<Fact> agent_facts;  // sorted, unique
    int step_count{0};
    std::uint64_t rng_key{0};
    double virtual_time_s{0.0};
    double episode_return{0.0};
    bool done{false};
};

/**
 * Ground-truth environment. Each step dispatches the chosen action to every
 * live hand (ascending hand id); executable hands pay cost_valid, others
 * cost_invalid; executable hands whose guard holds succeed with the action's
 * success probability. Success draws come from a counter-based stream keyed
 * by (reset seed, step, hand id), so trajectories depend only on the seed and
 * the action sequence. No real time passes; each step advances a virtual
 * clock by the action's latency.
 */
class EmuEnv final : public Environment {
public:
    explicit EmuEnv(ScenarioPtr scenario);
    explicit EmuEnv(std::shared_ptr<const ActionModel> model);

    Observation reset(std::uint64_t seed) override;
    StepOutcome step(int action_id) override;

    int num_actions() const override { return model_->num_actions(); }
    int max_steps() const override { return model_->scenario().game.max_steps; }
    EnvKind kind() const override { return EnvKind::Emulator; }
    double virtual_time() const override { return state_.virtual_time_s; }
    double episode_return() const override { return state_.episode_return; }
    int step_count() const override { return state_.step_count; }
    bool done() const override { return state_.done; }
    const Observation& observation() const override { return observation_; }

    const GroundState& state() const { return state_; }
    const ActionModel& model() const { return *model_; }
    std::uint64_t scenario_digest() const { return digest_; }

private:
    std::shared_ptr<const ActionModel> model_;
    std::uint64_t digest_{0};
    GroundState state_;
    Observation observation_;
    bool started_{false};
};

}  // namespace cyops
