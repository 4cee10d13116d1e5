#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cyops/action_model.hpp"
#include "cyops/environment.hpp"
#include "cyops/rng.hpp"
#include "cyops/trace_store.hpp"

namespace cyops {

class SimgenError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MdpOutcome {
    std::uint32_t next{0};
    std::uint64_t count{0};
    double prob{0.0};  // count / total
    double cum{0.0};   // running sum of counts / total; the last entry is exactly 1
};

/**
 * Empirical observation MDP: for each logged (o, a), the observed successor
 * observations with P(o' | o, a) = C(o, a, o') / Σ C(o, a, ·). Observations
 * are interned; outcome lists are ordered by o' key. Immutable after build.
 */
class EmpiricalMdp {
public:
    std::size_t num_observations() const { return observations_.size(); }
    std::size_t num_pairs() const { return num_pairs_; }
    int num_actions() const { return num_actions_; }
    std::uint64_t scenario_digest() const { return digest_; }
    std::uint64_t total_transitions() const { return total_; }

    std::uint32_t initial() const { return 0; }
    const std::string& initial_key() const { return observations_[0].key(); }
    const Observation& observation(std::uint32_t id) const { return observations_[id]; }
    std::optional<std::uint32_t> find(const std::string& key) const;

    /// Empty span when (o, a) was never observed.
    std::span<const MdpOutcome> outcomes(std::uint32_t obs, int action) const;
    std::uint64_t pair_total(std::uint32_t obs, int action) const;

    /// Counts reassembled as an index, e.g. for saving.
    CountIndex to_counts() const;

private:
    friend EmpiricalMdp build_mdp(const CountIndex&, const Observation&, int, std::uint64_t);

    std::vector<Observation> observations_;
    std::unordered_map<std::string, std::uint32_t> ids_;
    std::vector<std::uint32_t> offsets_;  // observations * actions + 1
    std::vector<MdpOutcome> outcomes_;
    std::size_t num_pairs_{0};
    int num_actions_{0};
    std::uint64_t digest_{0};
    std::uint64_t total_{0};
};

/// Builds the MDP. `initial` is the reset observation. Throws SimgenError on
/// an empty index, a digest mismatch, an action id outside [0, num_actions),
/// or a key that cannot be decoded into an observation.
EmpiricalMdp build_mdp(const CountIndex& index, const Observation& initial, int num_actions,
                       std::uint64_t scenario_digest);
EmpiricalMdp build_mdp(const CountIndex& index, const Scenario& scenario);

/// Fallback events per (o, a), counted by a simulator handle.
struct UnknownTransitionLedger {
    std::map<PairKey, std::uint64_t> counts;
    std::uint64_t total{0};

    void record(const std::string& o_key, int action_id) {
        counts[{o_key, action_id}] += 1;
        total += 1;
    }
    void merge(const UnknownTransitionLedger& other) {
        for (const auto& [k, c] : other.counts) counts[k] += c;
        total += other.total;
    }
    void clear() {
        counts.clear();
        total = 0;
    }
};

/// Simulator clock advance per step.
inline constexpr double kSimulatorTick = 0.001;

/**
 * Environment backed by an EmpiricalMdp. Known (o, a) pairs sample o' from
 * the stored distribution; unknown pairs leave the observation unchanged and
 * are recorded in the ledger. Rewards are recomputed from the scenario's game
 * rules over o's facts, the same way the emulator charges them.
 */
class SimEnv final : public Environment {
public:
    SimEnv(std::shared_ptr<const EmpiricalMdp> mdp, std::shared_ptr<const ActionModel> model,
           double tick_s = kSimulatorTick);

    Observation reset(std::uint64_t seed) override;
    StepOutcome step(int action_id) override;

    int num_actions() const override { return mdp_->num_actions(); }
    int max_steps() const override { return model_->scenario().game.max_steps; }
    EnvKind kind() const override { return EnvKind::Simulator; }
    double virtual_time() const override { return time_; }
    double episode_return() const override { return return_; }
    int step_count() const override { return steps_; }
    bool done() const override { return done_; }
    const Observation& observation() const override { return mdp_->observation(current_); }

    const UnknownTransitionLedger& ledger() const { return ledger_; }
    void clear_ledger() { ledger_.clear(); }
    const EmpiricalMdp& mdp() const { return *mdp_; }

private:
    struct Charge {
        bool ready{false};
        double cost{0.0};
        std::vector<char> executable;
    };
    const Charge& charge(std::uint32_t obs, int action);
    bool is_goal(std::uint32_t obs);

    std::shared_ptr<const EmpiricalMdp> mdp_;
    std::shared_ptr<const ActionModel> model_;
    double tick_;
    Rng rng_;
    std::uint32_t current_{0};
    int steps_{0};
    double time_{0.0};
    double return_{0.0};
    bool done_{false};
    bool started_{false};
    UnknownTransitionLedger ledger_;
    std::vector<Charge> charges_;   // observations * actions, filled lazily
    std::vector<signed char> goal_;  // -1 unknown
};

struct SufficiencyReport {
    std::size_t distinct_observations{0};
    std::size_t distinct_pairs{0};
    std::uint64_t total_transitions{0};
    std::uint64_t unknown_events{0};
    std::size_t unknown_pairs{0};
    std::size_t eval_runs{0};
    double eval_mean_return{0.0};
};

SufficiencyReport sufficiency_report(const EmpiricalMdp& mdp, const UnknownTransitionLedger& ledger,
                                     const std::vector<double>& eval_returns);
void write_report(const SufficiencyReport& report, const std::filesystem::path& path);

/// CSV `o_key,action_id,unknown_count`, rows in key order.
void export_unknown_histogram(const UnknownTransitionLedger& ledger, const std::filesystem::path& path);

/// `.cgs` simulator file: a JSON header line, then one line per (o, a).
void save_simulator(const EmpiricalMdp& mdp, const std::filesystem::path& path);
EmpiricalMdp load_simulator(const std::filesystem::path& path);

}  // namespace cyops
