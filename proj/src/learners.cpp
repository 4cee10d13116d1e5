#include "cyops/learners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cyops/format.hpp"

namespace cyops {

double EpsilonSchedule::at(std::uint64_t step) const {
    if (decay_steps == 0 || step >= decay_steps) return end;
    const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
    return start + (end - start) * frac;
}

void LearnerConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in [0, 1]");
    for (double e : {epsilon.start, epsilon.end}) {
        if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("epsilon must be in [0, 1]");
    }
    if (atoms < 2) throw std::invalid_argument("atoms must be at least 2");
    if (!(v_min < v_max)) throw std::invalid_argument("v_min must be below v_max");
    if (eval_every < 0 || eval_runs < 1 || window < 1) throw std::invalid_argument("eval cadence, eval runs and window must be positive");
}

int Learner::greedy_action(const std::string& o_key) const {
    auto v = values(o_key);
    int best = 0;
    for (int a = 1; a < static_cast<int>(v.size()); ++a) {
        if (v[a] > v[best]) best = a;
    }
    return best;
}

int Learner::select_action(const std::string& o_key, double epsilon, Rng& rng) const {
    if (rng.uniform01() < epsilon) return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(num_actions_)));
    return greedy_action(o_key);
}

QTable::QTable(int num_actions, double alpha, double gamma, double initial)
    : Learner(num_actions), alpha_(alpha), gamma_(gamma), initial_(initial) {}

std::vector<double> QTable::values(const std::string& o_key) const {
    auto it = table_.find(o_key);
    if (it == table_.end()) return std::vector<double>(static_cast<std::size_t>(num_actions()), initial_);
    return it->second;
}

std::vector<double>& QTable::row(const std::string& o_key) {
    auto [it, inserted] = table_.try_emplace(o_key);
    if (inserted) it->second.assign(static_cast<std::size_t>(num_actions()), initial_);
    return it->second;
}

double QTable::value(const std::string& o_key, int action) const {
    auto it = table_.find(o_key);
    return it == table_.end() ? initial_ : it->second.at(static_cast<std::size_t>(action));
}

void QTable::set(const std::string& o_key, int action, double v) { row(o_key).at(static_cast<std::size_t>(action)) = v; }

double QTable::max_value(const std::string& o_key) const {
    auto it = table_.find(o_key);
    if (it == table_.end()) return initial_;
    return *std::max_element(it->second.begin(), it->second.end());
}

void QTable::update(const Transition& t) {
    const double bootstrap = t.done ? 0.0 : max_value(t.o2_key);
    auto& q = row(t.o_key).at(static_cast<std::size_t>(t.action));
    q += alpha_ * (t.reward + gamma_ * bootstrap - q);
}

void QTable::write_table(std::ostream& out) const {
    std::vector<const std::string*> keys;
    keys.reserve(table_.size());
    for (const auto& kv : table_) keys.push_back(&kv.first);
    std::sort(keys.begin(), keys.end(), [](const auto* a, const auto* b) { return *a < *b; });
    out << "# learner=q\n";
    for (const auto* k : keys) {
        const auto& row = table_.at(*k);
        for (std::size_t a = 0; a < row.size(); ++a) out << *k << ',' << a << ',' << format_number(row[a]) << '\n';
    }
}

void q_update(QTable& table, const Transition& t) { table.update(t); }

std::vector<double> categorical_project(const Support& s, const std::vector<double>& values,
                                        const std::vector<double>& probs) {
    std::vector<double> m(static_cast<std::size_t>(s.n), 0.0);
    const double dz = s.delta();
    for (std::size_t j = 0; j < values.size(); ++j) {
        const double tz = std::clamp(values[j], s.v_min, s.v_max);
        const double b = (tz - s.v_min) / dz;
        auto l = static_cast<int>(std::floor(b));
        auto u = static_cast<int>(std::ceil(b));
        l = std::clamp(l, 0, s.n - 1);
        u = std::clamp(u, 0, s.n - 1);
        if (l == u) {
            m[static_cast<std::size_t>(l)] += probs[j];
        } else {
            m[static_cast<std::size_t>(l)] += probs[j] * (static_cast<double>(u) - b);
            m[static_cast<std::size_t>(u)] += probs[j] * (b - static_cast<double>(l));
        }
    }
    return m;
}

CategoricalTable::CategoricalTable(int num_actions, Support support, double alpha, double gamma)
    : Learner(num_actions), support_(support), alpha_(alpha), gamma_(gamma) {
    if (support_.n < 2 || !(support_.v_min < support_.v_max)) throw std::invalid_argument("invalid categorical support");
    initial_ = categorical_project(support_, {0.0}, {1.0});
}

std::vector<double>& CategoricalTable::row(const std::string& o_key) {
    auto [it, inserted] = table_.try_emplace(o_key);
    if (inserted) {
        it->second.reserve(initial_.size() * static_cast<std::size_t>(num_actions()));
        for (int a = 0; a < num_actions(); ++a) it->second.insert(it->second.end(), initial_.begin(), initial_.end());
    }
    return it->second;
}

std::vector<double> CategoricalTable::distribution(const std::string& o_key, int action) const {
    auto it = table_.find(o_key);
    if (it == table_.end()) return initial_;
    auto begin = it->second.begin() + static_cast<std::ptrdiff_t>(action) * support_.n;
    return {begin, begin + support_.n};
}

double CategoricalTable::mean(const std::string& o_key, int action) const {
    auto d = distribution(o_key, action);
    double m = 0.0;
    for (int i = 0; i < support_.n; ++i) m += d[static_cast<std::size_t>(i)] * support_.atom(i);
    return m;
}

void CategoricalTable::set_distribution(const std::string& o_key, int action, const std::vector<double>& weights) {
    if (weights.size() != static_cast<std::size_t>(support_.n)) throw std::invalid_argument("distribution size differs from the support");
    auto& r = row(o_key);
    std::copy(weights.begin(), weights.end(), r.begin() + static_cast<std::ptrdiff_t>(action) * support_.n);
}

std::vector<double> CategoricalTable::values(const std::string& o_key) const {
    std::vector<double> v(static_cast<std::size_t>(num_actions()));
    for (int a = 0; a < num_actions(); ++a) v[static_cast<std::size_t>(a)] = mean(o_key, a);
    return v;
}

void CategoricalTable::update(const Transition& t) { c51_update(*this, t); }

void c51_update(CategoricalTable& table, const Transition& t) {
    const auto& s = table.support_;
    std::vector<double> target;
    if (t.done) {
        target = categorical_project(s, {t.reward}, {1.0});
    } else {
        const int next = table.greedy_action(t.o2_key);
        const auto next_dist = table.distribution(t.o2_key, next);
        std::vector<double> shifted(static_cast<std::size_t>(s.n));
        for (int i = 0; i < s.n; ++i) shifted[static_cast<std::size_t>(i)] = t.reward + table.gamma_ * s.atom(i);
        target = categorical_project(s, shifted, next_dist);
    }
    auto& row = table.row(t.o_key);
    auto* d = row.data() + static_cast<std::ptrdiff_t>(t.action) * s.n;
    double sum = 0.0;
    for (int i = 0; i < s.n; ++i) {
        d[i] = (1.0 - table.alpha_) * d[i] + table.alpha_ * target[static_cast<std::size_t>(i)];
        sum += d[i];
    }
    // Renormalise so rounding never accumulates across updates.
    for (int i = 0; i < s.n; ++i) d[i] /= sum;
}

void CategoricalTable::write_table(std::ostream& out) const {
    std::vector<const std::string*> keys;
    keys.reserve(table_.size());
    for (const auto& kv : table_) keys.push_back(&kv.first);
    std::sort(keys.begin(), keys.end(), [](const auto* a, const auto* b) { return *a < *b; });
    out << "# learner=c51 atoms=" << support_.n << " v_min=" << format_number(support_.v_min)
        << " v_max=" << format_number(support_.v_max) << '\n';
    for (const auto* k : keys) {
        for (int a = 0; a < num_actions(); ++a) {
            auto d = distribution(*k, a);
            out << *k << ',' << a << ',' << format_number(mean(*k, a)) << ',';
            for (std::size_t i = 0; i < d.size(); ++i) out << (i ? ";" : "") << format_number(d[i]);
            out << '\n';
        }
    }
}

LearnerKind learner_kind_from_string(std::string_view name) {
    if (name == "q" || name == "dqn") return LearnerKind::Q;
    if (name == "c51" || name == "categorical") return LearnerKind::Categorical;
    throw std::invalid_argument("unknown learner '" + std::string(name) + "'");
}

std::unique_ptr<Learner> make_learner(LearnerKind kind, const LearnerConfig& cfg, int num_actions) {
    cfg.validate();
    if (kind == LearnerKind::Q) return std::make_unique<QTable>(num_actions, cfg.alpha, cfg.gamma, cfg.q_init);
    return std::make_unique<CategoricalTable>(num_actions, Support{cfg.atoms, cfg.v_min, cfg.v_max}, cfg.alpha,
                                              cfg.gamma);
}

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        auto end = text.find(sep, pos);
        out.push_back(text.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
        if (end == std::string::npos) return out;
        pos = end + 1;
    }
}

double parse_double(const std::string& text, std::size_t line_no) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) {
        throw std::invalid_argument("table line " + std::to_string(line_no) + ": bad number '" + text + "'");
    }
    return v;
}

std::string header_field(const std::string& header, const std::string& name) {
    auto at = header.find(name + "=");
    if (at == std::string::npos) return {};
    auto begin = at + name.size() + 1;
    return header.substr(begin, header.find(' ', begin) - begin);
}

}  // namespace

std::unique_ptr<Learner> read_table(std::istream& in, int num_actions) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("# learner=", 0) != 0) {
        throw std::invalid_argument("table line 1: missing '# learner=' header");
    }
    const auto kind = learner_kind_from_string(header_field(header, "learner"));
    std::unique_ptr<QTable> q;
    std::unique_ptr<CategoricalTable> c;
    if (kind == LearnerKind::Q) {
        q = std::make_unique<QTable>(num_actions);
    } else {
        Support support{static_cast<int>(parse_double(header_field(header, "atoms"), 1)),
                        parse_double(header_field(header, "v_min"), 1), parse_double(header_field(header, "v_max"), 1)};
        c = std::make_unique<CategoricalTable>(num_actions, support);
    }
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != (q ? 3u : 4u)) throw std::invalid_argument("table line " + std::to_string(line_no) + ": wrong field count");
        const double a = parse_double(fields[1], line_no);
        if (a < 0 || a >= num_actions || a != std::floor(a)) {
            throw std::invalid_argument("table line " + std::to_string(line_no) + ": action out of range");
        }
        if (q) {
            q->set(fields[0], static_cast<int>(a), parse_double(fields[2], line_no));
        } else {
            std::vector<double> weights;
            for (const auto& w : split(fields[3], ';')) weights.push_back(parse_double(w, line_no));
            if (weights.size() != static_cast<std::size_t>(c->support().n)) {
                throw std::invalid_argument("table line " + std::to_string(line_no) + ": distribution size differs from the support");
            }
            c->set_distribution(fields[0], static_cast<int>(a), weights);
        }
    }
    if (q) return q;
    return c;
}

std::unique_ptr<Learner> read_table_file(const std::filesystem::path& path, int num_actions) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_table(in, num_actions);
}

void write_metrics_header(std::ostream& out) {
    out << "step,episode,avg_training_reward,avg_episode_length,avg_evaluation_reward,unknown_transition_count,"
           "virtual_time_s\n";
}

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
    out << r.step << ',' << r.episode << ',' << format_number(r.avg_training_reward) << ','
        << format_number(r.avg_episode_length) << ',' << format_number(r.avg_evaluation_reward) << ','
        << r.unknown_transition_count << ',' << format_number(r.virtual_time_s) << '\n';
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_metrics_header(out);
    for (const auto& r : rows) write_metrics_row(out, r);
    if (!out) throw std::runtime_error("I/O failure writing " + path.string());
}

namespace {

TransitionRecord make_record(std::int64_t episode, int step, const std::string& o_key, int action,
                             const StepOutcome& out, double virtual_time) {
    TransitionRecord rec;
    rec.episode = episode;
    rec.step = step;
    rec.o_key = o_key;
    rec.action_id = action;
    rec.o2_key = out.observation.key();
    rec.reward = out.reward;
    rec.per_hand_executable.reserve(out.info.per_hand.size());
    for (const auto& h : out.info.per_hand) rec.per_hand_executable.push_back(h.executable);
    rec.virtual_time_s = virtual_time;
    return rec;
}

}  // namespace

EvalResult evaluate(Environment& env, const Learner& learner, int n_runs, std::uint64_t seed, TransitionSink* sink,
                    std::int64_t episode_base) {
    if (n_runs < 1) throw std::invalid_argument("evaluation needs at least one run");
    EvalResult res;
    const auto eval_key = derive_stream(seed, streams::kEvalEpisodes);
    for (int i = 0; i < n_runs; ++i) {
        auto obs = env.reset(derive_stream(eval_key, static_cast<std::uint64_t>(i)));
        while (!env.done()) {
            const int a = learner.greedy_action(obs.key());
            const std::string o_key = obs.key();
            const int step = env.step_count();
            auto out = env.step(a);
            res.virtual_time_s += out.info.latency_s;
            if (out.info.unknown_transition) ++res.unknown_transitions;
            if (sink) sink->append(make_record(episode_base + i, step, o_key, a, out, res.virtual_time_s));
            obs = out.observation;
        }
        res.returns.push_back(env.episode_return());
        res.lengths.push_back(env.step_count());
    }
    double r = 0.0, l = 0.0;
    for (int i = 0; i < n_runs; ++i) {
        r += res.returns[static_cast<std::size_t>(i)];
        l += res.lengths[static_cast<std::size_t>(i)];
    }
    res.mean_return = r / n_runs;
    res.mean_length = l / n_runs;
    return res;
}

Trainer::Trainer(Environment& env, Learner& learner, LearnerConfig cfg, std::uint64_t seed)
    : env_(env), learner_(learner), cfg_(cfg), seed_(seed), policy_rng_(derive_stream(seed, streams::kPolicy)) {
    cfg_.validate();
    if (learner_.num_actions() != env_.num_actions()) {
        throw std::invalid_argument("learner and environment disagree on the number of actions");
    }
}

void Trainer::restart_epsilon(const EpsilonSchedule& schedule) {
    cfg_.epsilon = schedule;
    epsilon_step_ = 0;
}

EpisodeSummary Trainer::run_episode() {
    const auto ep_seed = derive_stream(derive_stream(seed_, streams::kTrainEpisodes), episodes_);
    const auto episode_id = episode_base_ + static_cast<std::int64_t>(episodes_);
    EpisodeSummary sum;
    auto obs = env_.reset(ep_seed);
    while (!env_.done()) {
        std::string o_key = obs.key();
        const int a = learner_.select_action(o_key, cfg_.epsilon.at(epsilon_step_), policy_rng_);
        const int step = env_.step_count();
        auto out = env_.step(a);
        virtual_time_ += out.info.latency_s;
        sum.virtual_time_s += out.info.latency_s;
        if (out.info.unknown_transition) {
            ++sum.unknown_transitions;
            ++unknown_;
        }
        if (sink_) sink_->append(make_record(episode_id, step, o_key, a, out, virtual_time_));
        learner_.update({std::move(o_key), a, out.reward, out.observation.key(), out.done});
        obs = out.observation;
        ++steps_;
        ++epsilon_step_;
    }
    sum.episode_return = env_.episode_return();
    sum.length = env_.step_count();
    ++episodes_;
    recent_returns_.push_back(sum.episode_return);
    recent_lengths_.push_back(sum.length);
    while (recent_returns_.size() > static_cast<std::size_t>(cfg_.window)) {
        recent_returns_.pop_front();
        recent_lengths_.pop_front();
    }
    return sum;
}

EvalResult Trainer::run_evaluation(int n_runs) {
    const auto eval_seed = derive_stream(seed_, 0x1000 + evals_);
    // Evaluation episodes get ids past any training episode of this run.
    const std::int64_t base = episode_base_ + (std::int64_t{1} << 40) + static_cast<std::int64_t>(evals_) * n_runs;
    auto res = evaluate(env_, learner_, n_runs, eval_seed, sink_, base);
    ++evals_;
    virtual_time_ += res.virtual_time_s;
    unknown_ += res.unknown_transitions;
    last_eval_ = res.mean_return;
    return res;
}

MetricsRow Trainer::metrics_row() const {
    MetricsRow row;
    row.step = steps_;
    row.episode = episodes_;
    if (!recent_returns_.empty()) {
        double r = 0.0, l = 0.0;
        for (std::size_t i = 0; i < recent_returns_.size(); ++i) {
            r += recent_returns_[i];
            l += recent_lengths_[i];
        }
        row.avg_training_reward = r / static_cast<double>(recent_returns_.size());
        row.avg_episode_length = l / static_cast<double>(recent_returns_.size());
    }
    row.avg_evaluation_reward = last_eval_;
    row.unknown_transition_count = unknown_;
    row.virtual_time_s = virtual_time_;
    return row;
}

std::vector<MetricsRow> Trainer::train() {
    std::vector<MetricsRow> rows;
    const auto start_steps = steps_;
    const auto start_episodes = episodes_;
    auto budget_left = [&] {
        if (cfg_.budget_steps == 0 && cfg_.budget_episodes == 0) return false;
        if (cfg_.budget_steps > 0 && steps_ - start_steps >= cfg_.budget_steps) return false;
        if (cfg_.budget_episodes > 0 && episodes_ - start_episodes >= cfg_.budget_episodes) return false;
        return true;
    };
    while (budget_left()) {
        run_episode();
        if (cfg_.eval_every > 0 && (episodes_ - start_episodes) % static_cast<std::uint64_t>(cfg_.eval_every) == 0) {
            run_evaluation(cfg_.eval_runs);
        }
        rows.push_back(metrics_row());
    }
    return rows;
}

}  // namespace cyops
