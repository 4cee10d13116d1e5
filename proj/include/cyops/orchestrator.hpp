#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cyops/learners.hpp"
#include "cyops/scenario.hpp"
#include "cyops/trace_store.hpp"

namespace cyops {

enum class Segment { Seg1 = 1, Seg2, Seg3, Seg4, Seg5, Seg6 };

struct LearnerSlot {
    LearnerKind kind{LearnerKind::Q};
    LearnerConfig cfg;
};

/// Simulator steps are cheap, so the simulator learner explores for longer.
inline LearnerConfig sim_learner_defaults() {
    LearnerConfig cfg;
    cfg.epsilon.decay_steps = 400'000;
    return cfg;
}

struct LoopConfig {
    std::optional<double> delta_r_t;  // unset: half the magnitude of the first window's mean
    std::optional<double> r_t;        // unset: 95% of the oracle optimum
    int regen_every_k{4};
    int window{10};
    int plateau_patience{3};
    int max_iterations{100};

    LearnerSlot seg1;  // emulator learner
    LearnerSlot seg3{LearnerKind::Q, sim_learner_defaults()};  // fresh at every SEG3 entry
    EpsilonSchedule seg5_epsilon{0.5, 0.05, 400};

    int seg1_max_episodes{2000};
    int sim_eval_every{2000};      // simulator episodes between simulator evaluations
    int sim_eval_runs{20};
    int sim_min_episodes{50'000};
    int sim_max_episodes{100'000};

    int eval_runs{50};            // full emulator gate
    int screen_runs{5};           // short emulator evaluation before the full gate; 0 disables
    bool log_evaluations{true};   // emulator evaluation transitions join the logs
    bool parallel{false};

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

struct SegmentRecord {
    Segment segment{Segment::Seg1};
    EnvKind env{EnvKind::Emulator};
    std::string learner;
    double elapsed_virtual_s{0.0};
    double avg_reward{0.0};
    int best_episode_len{0};  // 0 when no episode ran
    double eval_reward{0.0};
};

struct UnifiedReport {
    std::vector<SegmentRecord> segments;
    double emulator_virtual_s{0.0};
    std::uint64_t emulator_steps{0};
    double simulator_virtual_s{0.0};
    bool completed{false};
    int iterations{0};
    double r_t{0.0};
    EvalResult final_eval;
};

/// True when the mean of the last `window` rewards exceeds the mean of the
/// first `window` by more than delta. Needs at least 2·window entries.
bool seg1_trigger(const std::vector<double>& rewards, int window, double delta);

/// True when none of the last `patience` evaluations beat the best before them.
bool seg3_plateau(const std::vector<double>& evals, int patience);

/// Required return: 95% of the oracle's optimal expected return.
double default_required_return(const Scenario& scenario);

UnifiedReport run_unified(const Scenario& scenario, const LoopConfig& cfg, std::uint64_t seed,
                          TransitionSink* emulator_log = nullptr);

struct BaselineConfig {
    LearnerSlot learner;
    std::optional<double> r_t;
    int eval_every{20};  // emulator episodes between gate checks
    int eval_runs{50};
    int screen_runs{5};
    std::uint64_t budget_episodes{0};
    std::uint64_t budget_steps{0};
};

struct BaselineReport {
    bool completed{false};
    double emulator_virtual_s{0.0};
    std::uint64_t emulator_steps{0};
    std::uint64_t episodes{0};
    double r_t{0.0};
    EvalResult final_eval;
    std::vector<MetricsRow> metrics;
};

BaselineReport run_emulator_only(const Scenario& scenario, const BaselineConfig& cfg, std::uint64_t seed,
                                 TransitionSink* emulator_log = nullptr);

std::string_view to_string(Segment s);
void write_unified_report(std::ostream& out, const UnifiedReport& report);
void write_unified_report(const std::filesystem::path& path, const UnifiedReport& report);

}  // namespace cyops
