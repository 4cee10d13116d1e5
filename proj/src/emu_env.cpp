#include "cyops/emu_env.hpp"

#include <algorithm>

#include "cyops/rng.hpp"

namespace cyops {

std::string_view to_string(EnvKind kind) { return kind == EnvKind::Emulator ? "emu" : "sim"; }

EmuEnv::EmuEnv(ScenarioPtr scenario) : EmuEnv(std::make_shared<const ActionModel>(std::move(scenario))) {}

EmuEnv::EmuEnv(std::shared_ptr<const ActionModel> model) : model_(std::move(model)) {
    auto report = validate(model_->scenario());
    if (report.has_errors()) throw ScenarioError(report.errors());
    digest_ = cyops::scenario_digest(model_->scenario());
}

Observation EmuEnv::reset(std::uint64_t seed) {
    const auto& s = model_->scenario();
    state_ = GroundState{};
    state_.rng_key = derive_stream(seed, streams::kEmulator);
    state_.agent_facts = s.initial_facts;
    std::sort(state_.agent_facts.begin(), state_.agent_facts.end());
    state_.agent_facts.erase(std::unique(state_.agent_facts.begin(), state_.agent_facts.end()),
                             state_.agent_facts.end());
    int next_id = 0;
    for (const auto& h : ActionModel::hands_in(state_.agent_facts)) state_.hands.push_back({next_id++, h.host, h.priv});
    state_.done = model_->goal_satisfied(state_.agent_facts);
    observation_ = Observation(state_.agent_facts);
    started_ = true;
    return observation_;
}

StepOutcome EmuEnv::step(int action_id) {
    if (!started_) throw EnvError("step before reset");
    if (state_.done) throw EnvError("step after episode end");
    if (action_id < 0 || action_id >= num_actions()) {
        throw EnvError("action id " + std::to_string(action_id) + " out of range");
    }
    const auto& game = model_->scenario().game;
    const bool goal_before = model_->goal_satisfied(state_.agent_facts);
    const auto step_key = derive_stream(state_.rng_key, static_cast<std::uint64_t>(state_.step_count));

    StepOutcome out;
    double cost = 0.0;
    std::vector<Fact> added;
    for (const auto& hand : state_.hands) {
        auto plan = model_->plan(state_.agent_facts, {hand.host, hand.priv}, action_id);
        HandResult result{hand.id, plan.executable, false};
        cost += plan.executable ? game.cost_valid : game.cost_invalid;
        if (plan.executable && plan.guard_ok) {
            double u = to_unit(derive_stream(step_key, static_cast<std::uint64_t>(hand.id)));
            if (u < plan.success_prob) {
                result.succeeded = true;
                for (auto& f : plan.effects) {
                    if (!std::binary_search(state_.agent_facts.begin(), state_.agent_facts.end(), f) &&
                        std::find(added.begin(), added.end(), f) == added.end()) {
                        added.push_back(std::move(f));
                    }
                }
            }
        }
        out.info.per_hand.push_back(result);
    }

    // New hands take the next ids in the order their facts were produced.
    int next_id = state_.hands.empty() ? 0 : state_.hands.back().id + 1;
    for (const auto& f : added) {
        if (f.kind != FactKind::HandPresent) continue;
        if (auto priv = privilege_from_string(f.detail)) state_.hands.push_back({next_id++, f.host, *priv});
    }
    if (!added.empty()) {
        state_.agent_facts.insert(state_.agent_facts.end(), added.begin(), added.end());
        std::sort(state_.agent_facts.begin(), state_.agent_facts.end());
        observation_ = Observation(state_.agent_facts);
    }

    const bool goal_after = model_->goal_satisfied(state_.agent_facts);
    const double gain = (goal_after && !goal_before) ? game.goal_gain : 0.0;
    out.reward = gain - cost;
    state_.step_count += 1;
    state_.episode_return += out.reward;
    out.info.latency_s = model_->latency(action_id);
    state_.virtual_time_s += out.info.latency_s;
    state_.done = goal_after || state_.step_count >= game.max_steps;
    out.done = state_.done;
    out.observation = observation_;
    return out;
}

}  // namespace cyops
