#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cyops/environment.hpp"
#include "cyops/rng.hpp"
#include "cyops/trace_store.hpp"

namespace cyops {

struct EpsilonSchedule {
    double start{1.0};
    double end{0.05};
    std::uint64_t decay_steps{20'000};

    /// Linear decay from start to end, then constant.
    double at(std::uint64_t step) const;
};

struct LearnerConfig {
    double alpha{0.1};
    double gamma{0.99};
    EpsilonSchedule epsilon;
    int atoms{51};
    double v_min{-160.0};
    double v_max{100.0};
    double q_init{0.0};  // tabular Q value of unseen pairs
    std::uint64_t budget_steps{0};
    std::uint64_t budget_episodes{0};
    int eval_every{0};  // episodes between greedy evaluations; 0 disables
    int eval_runs{10};
    int window{10};     // episodes averaged in each metrics row

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

struct Transition {
    std::string o_key;
    int action{0};
    double reward{0.0};
    std::string o2_key;
    bool done{false};
};

/// Tabular action-value learner over observation keys.
class Learner {
public:
    explicit Learner(int num_actions) : num_actions_(num_actions) {}
    virtual ~Learner() = default;

    int num_actions() const { return num_actions_; }

    /// Expected-return estimate of each action in o.
    virtual std::vector<double> values(const std::string& o_key) const = 0;
    virtual void update(const Transition& t) = 0;
    virtual std::string_view name() const = 0;
    virtual std::unique_ptr<Learner> clone() const = 0;
    /// Fresh learner with the same configuration and an empty table.
    virtual std::unique_ptr<Learner> fresh() const = 0;
    virtual std::size_t size() const = 0;
    /// Rows in key order.
    virtual void write_table(std::ostream& out) const = 0;

    /// Argmax of values; ties go to the lowest action id.
    int greedy_action(const std::string& o_key) const;
    /// ε-greedy: uniform over actions with probability ε, else greedy.
    int select_action(const std::string& o_key, double epsilon, Rng& rng) const;

private:
    int num_actions_;
};

class QTable final : public Learner {
public:
    QTable(int num_actions, double alpha = 0.1, double gamma = 0.99, double initial = 0.0);

    std::vector<double> values(const std::string& o_key) const override;
    void update(const Transition& t) override;
    std::string_view name() const override { return "q"; }
    std::unique_ptr<Learner> clone() const override { return std::make_unique<QTable>(*this); }
    std::unique_ptr<Learner> fresh() const override { return std::make_unique<QTable>(num_actions(), alpha_, gamma_, initial_); }
    std::size_t size() const override { return table_.size(); }
    void write_table(std::ostream& out) const override;

    double value(const std::string& o_key, int action) const;
    void set(const std::string& o_key, int action, double v);
    double max_value(const std::string& o_key) const;

private:
    std::vector<double>& row(const std::string& o_key);

    double alpha_;
    double gamma_;
    double initial_;
    std::unordered_map<std::string, std::vector<double>> table_;
};

/// Q(o,a) ← Q(o,a) + α·(r + γ·(done ? 0 : max Q(o',·)) − Q(o,a))
void q_update(QTable& table, const Transition& t);

/// Fixed categorical support of N atoms evenly spaced on [v_min, v_max].
struct Support {
    int n{51};
    double v_min{-160.0};
    double v_max{100.0};

    double delta() const { return (v_max - v_min) / static_cast<double>(n - 1); }
    double atom(int i) const { return v_min + delta() * static_cast<double>(i); }
};

/// Projects the distribution that puts probs[j] on values[j] onto the
/// support: each value is clamped to [v_min, v_max] and its mass split
/// between the two neighbouring atoms in proportion to proximity.
std::vector<double> categorical_project(const Support& support, const std::vector<double>& values,
                                        const std::vector<double>& probs);

class CategoricalTable final : public Learner {
public:
    CategoricalTable(int num_actions, Support support = {}, double alpha = 0.1, double gamma = 0.99);

    std::vector<double> values(const std::string& o_key) const override;
    void update(const Transition& t) override;
    std::string_view name() const override { return "c51"; }
    std::unique_ptr<Learner> clone() const override { return std::make_unique<CategoricalTable>(*this); }
    std::unique_ptr<Learner> fresh() const override {
        return std::make_unique<CategoricalTable>(num_actions(), support_, alpha_, gamma_);
    }
    std::size_t size() const override { return table_.size(); }
    void write_table(std::ostream& out) const override;

    const Support& support() const { return support_; }
    /// Weights over the atoms for (o, a); unseen pairs hold the projected point mass at 0.
    std::vector<double> distribution(const std::string& o_key, int action) const;
    double mean(const std::string& o_key, int action) const;
    void set_distribution(const std::string& o_key, int action, const std::vector<double>& weights);

private:
    friend void c51_update(CategoricalTable&, const Transition&);
    std::vector<double>& row(const std::string& o_key);  // actions * atoms

    Support support_;
    double alpha_;
    double gamma_;
    std::vector<double> initial_;
    std::unordered_map<std::string, std::vector<double>> table_;
};

/// Moves the (o, a) distribution toward the projected target r + γz of the
/// next state's argmax-mean action (a point mass at r when done).
void c51_update(CategoricalTable& table, const Transition& t);

enum class LearnerKind { Q, Categorical };
LearnerKind learner_kind_from_string(std::string_view name);
std::unique_ptr<Learner> make_learner(LearnerKind kind, const LearnerConfig& cfg, int num_actions);

/// Reads a table written by Learner::write_table. The result evaluates
/// identically; its step size and discount are the config defaults.
/// Throws std::invalid_argument on malformed input.
std::unique_ptr<Learner> read_table(std::istream& in, int num_actions);
std::unique_ptr<Learner> read_table_file(const std::filesystem::path& path, int num_actions);

struct MetricsRow {
    std::uint64_t step{0};
    std::uint64_t episode{0};
    double avg_training_reward{0.0};
    double avg_episode_length{0.0};
    double avg_evaluation_reward{0.0};
    std::uint64_t unknown_transition_count{0};
    double virtual_time_s{0.0};
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

struct EvalResult {
    double mean_return{0.0};
    double mean_length{0.0};
    std::vector<double> returns;
    std::vector<int> lengths;
    double virtual_time_s{0.0};
    std::uint64_t unknown_transitions{0};
};

/// Greedy rollouts with fresh resets. Seeds for run i derive from (seed, i).
/// Transitions are logged to `sink` only when one is given.
EvalResult evaluate(Environment& env, const Learner& learner, int n_runs, std::uint64_t seed,
                    TransitionSink* sink = nullptr, std::int64_t episode_base = 0);

struct EpisodeSummary {
    double episode_return{0.0};
    int length{0};
    double virtual_time_s{0.0};
    std::uint64_t unknown_transitions{0};
};

/**
 * ε-greedy training driver. Episode seeds and exploration draws derive from
 * one run seed, so identical seeds and configs give identical runs.
 */
class Trainer {
public:
    Trainer(Environment& env, Learner& learner, LearnerConfig cfg, std::uint64_t seed);

    /// Logs every transition of training and evaluation episodes.
    void set_sink(TransitionSink* sink) { sink_ = sink; }
    /// Offset added to episode numbers in logged records.
    void set_episode_base(std::int64_t base) { episode_base_ = base; }
    /// Restarts the exploration schedule.
    void restart_epsilon(const EpsilonSchedule& schedule);

    EpisodeSummary run_episode();
    EvalResult run_evaluation(int n_runs);
    /// Runs until the configured budget is spent; one metrics row per episode.
    std::vector<MetricsRow> train();
    MetricsRow metrics_row() const;

    double epsilon() const { return cfg_.epsilon.at(epsilon_step_); }
    std::uint64_t steps() const { return steps_; }
    std::uint64_t episodes() const { return episodes_; }
    double virtual_time() const { return virtual_time_; }
    std::uint64_t unknown_transitions() const { return unknown_; }
    double last_eval_mean() const { return last_eval_; }
    const LearnerConfig& config() const { return cfg_; }

private:
    Environment& env_;
    Learner& learner_;
    LearnerConfig cfg_;
    std::uint64_t seed_;
    Rng policy_rng_;
    TransitionSink* sink_{nullptr};
    std::int64_t episode_base_{0};
    std::uint64_t steps_{0};
    std::uint64_t epsilon_step_{0};
    std::uint64_t episodes_{0};
    std::uint64_t evals_{0};
    double virtual_time_{0.0};
    std::uint64_t unknown_{0};
    double last_eval_{0.0};
    std::deque<double> recent_returns_;
    std::deque<int> recent_lengths_;
};

}  // namespace cyops
