#include "cyops/simgen.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace cyops {

using json = nlohmann::json;

std::optional<std::uint32_t> EmpiricalMdp::find(const std::string& key) const {
    auto it = ids_.find(key);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

std::span<const MdpOutcome> EmpiricalMdp::outcomes(std::uint32_t obs, int action) const {
    if (obs >= observations_.size() || action < 0 || action >= num_actions_) return {};
    auto i = static_cast<std::size_t>(obs) * static_cast<std::size_t>(num_actions_) + static_cast<std::size_t>(action);
    return {outcomes_.data() + offsets_[i], outcomes_.data() + offsets_[i + 1]};
}

std::uint64_t EmpiricalMdp::pair_total(std::uint32_t obs, int action) const {
    std::uint64_t t = 0;
    for (const auto& o : outcomes(obs, action)) t += o.count;
    return t;
}

CountIndex EmpiricalMdp::to_counts() const {
    CountIndex idx;
    idx.scenario_digest = digest_;
    for (std::uint32_t o = 0; o < observations_.size(); ++o) {
        for (int a = 0; a < num_actions_; ++a) {
            for (const auto& out : outcomes(o, a)) {
                idx.add(observations_[o].key(), a, observations_[out.next].key(), out.count);
            }
        }
    }
    return idx;
}

EmpiricalMdp build_mdp(const CountIndex& index, const Observation& initial, int num_actions,
                       std::uint64_t scenario_digest) {
    if (index.empty()) throw SimgenError("empty count index");
    if (index.scenario_digest && *index.scenario_digest != scenario_digest) {
        throw SimgenError("scenario digest mismatch: counts have " + digest_hex(*index.scenario_digest) +
                          ", scenario has " + digest_hex(scenario_digest));
    }
    EmpiricalMdp m;
    m.num_actions_ = num_actions;
    m.digest_ = scenario_digest;

    auto intern = [&m](const std::string& key) -> std::uint32_t {
        auto it = m.ids_.find(key);
        if (it != m.ids_.end()) return it->second;
        Observation obs;
        try {
            obs = observation_from_key(key);
        } catch (const std::invalid_argument& e) {
            throw SimgenError("missing Observation payload for key '" + key + "': " + e.what());
        }
        auto id = static_cast<std::uint32_t>(m.observations_.size());
        m.observations_.push_back(std::move(obs));
        m.ids_.emplace(key, id);
        return id;
    };

    intern(initial.key());
    std::vector<std::pair<std::size_t, const OutcomeCounts*>> slots;
    slots.reserve(index.pairs().size());
    for (const auto& [pair, counts] : index.pairs()) {
        if (pair.second < 0 || pair.second >= num_actions) {
            throw SimgenError("action id " + std::to_string(pair.second) + " out of range in count index");
        }
        auto o = intern(pair.first);
        for (const auto& kv : counts.counts) intern(kv.first);
        slots.emplace_back(static_cast<std::size_t>(o) * static_cast<std::size_t>(num_actions) +
                               static_cast<std::size_t>(pair.second),
                           &counts);
    }
    std::sort(slots.begin(), slots.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    const std::size_t cells = m.observations_.size() * static_cast<std::size_t>(num_actions);
    m.offsets_.assign(cells + 1, 0);
    std::size_t s = 0;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        m.offsets_[cell] = static_cast<std::uint32_t>(m.outcomes_.size());
        if (s < slots.size() && slots[s].first == cell) {
            const auto& counts = *slots[s].second;
            const auto total = static_cast<double>(counts.total);
            std::uint64_t running = 0;
            for (const auto& [o2, c] : counts.counts) {
                running += c;
                m.outcomes_.push_back({m.ids_.at(o2), c, static_cast<double>(c) / total,
                                       running == counts.total ? 1.0 : static_cast<double>(running) / total});
            }
            m.total_ += counts.total;
            ++m.num_pairs_;
            ++s;
        }
    }
    m.offsets_[cells] = static_cast<std::uint32_t>(m.outcomes_.size());
    return m;
}

EmpiricalMdp build_mdp(const CountIndex& index, const Scenario& scenario) {
    std::vector<Fact> facts = scenario.initial_facts;
    return build_mdp(index, Observation(std::move(facts)), scenario.num_actions(), scenario_digest(scenario));
}

SimEnv::SimEnv(std::shared_ptr<const EmpiricalMdp> mdp, std::shared_ptr<const ActionModel> model, double tick_s)
    : mdp_(std::move(mdp)), model_(std::move(model)), tick_(tick_s) {
    if (mdp_->num_actions() != model_->num_actions()) {
        throw SimgenError("simulator and scenario disagree on the number of actions");
    }
    charges_.resize(mdp_->num_observations() * static_cast<std::size_t>(mdp_->num_actions()));
    goal_.assign(mdp_->num_observations(), -1);
}

const SimEnv::Charge& SimEnv::charge(std::uint32_t obs, int action) {
    auto& c = charges_[static_cast<std::size_t>(obs) * static_cast<std::size_t>(mdp_->num_actions()) +
                       static_cast<std::size_t>(action)];
    if (!c.ready) {
        const auto& facts = mdp_->observation(obs).facts();
        const auto& game = model_->scenario().game;
        for (const auto& hand : ActionModel::hands_in(facts)) {
            bool ok = model_->executable(facts, hand, action);
            c.executable.push_back(ok ? 1 : 0);
            c.cost += ok ? game.cost_valid : game.cost_invalid;
        }
        c.ready = true;
    }
    return c;
}

bool SimEnv::is_goal(std::uint32_t obs) {
    if (goal_[obs] < 0) goal_[obs] = model_->goal_satisfied(mdp_->observation(obs).facts()) ? 1 : 0;
    return goal_[obs] == 1;
}

Observation SimEnv::reset(std::uint64_t seed) {
    rng_ = Rng(derive_stream(seed, streams::kSimulator));
    current_ = mdp_->initial();
    steps_ = 0;
    time_ = 0.0;
    return_ = 0.0;
    done_ = is_goal(current_);
    started_ = true;
    return mdp_->observation(current_);
}

StepOutcome SimEnv::step(int action_id) {
    if (!started_) throw EnvError("step before reset");
    if (done_) throw EnvError("step after episode end");
    if (action_id < 0 || action_id >= num_actions()) {
        throw EnvError("action id " + std::to_string(action_id) + " out of range");
    }
    const auto& game = model_->scenario().game;
    const auto from = current_;
    const auto& ch = charge(from, action_id);

    StepOutcome out;
    for (std::size_t i = 0; i < ch.executable.size(); ++i) {
        out.info.per_hand.push_back({static_cast<int>(i), ch.executable[i] != 0, false});
    }
    auto outs = mdp_->outcomes(from, action_id);
    if (outs.empty()) {
        ledger_.record(mdp_->observation(from).key(), action_id);
        out.info.unknown_transition = true;
    } else if (outs.size() == 1) {
        current_ = outs.front().next;
    } else {
        const double u = rng_.uniform01();
        auto it = std::find_if(outs.begin(), outs.end(), [u](const MdpOutcome& o) { return u < o.cum; });
        current_ = (it == outs.end() ? outs.back() : *it).next;
    }

    const bool goal_before = is_goal(from);
    const bool goal_after = is_goal(current_);
    out.reward = ((goal_after && !goal_before) ? game.goal_gain : 0.0) - ch.cost;
    steps_ += 1;
    return_ += out.reward;
    time_ += tick_;
    done_ = goal_after || steps_ >= game.max_steps;
    out.done = done_;
    out.info.latency_s = tick_;
    out.observation = mdp_->observation(current_);
    return out;
}

SufficiencyReport sufficiency_report(const EmpiricalMdp& mdp, const UnknownTransitionLedger& ledger,
                                     const std::vector<double>& eval_returns) {
    SufficiencyReport r;
    r.distinct_observations = mdp.num_observations();
    r.distinct_pairs = mdp.num_pairs();
    r.total_transitions = mdp.total_transitions();
    r.unknown_events = ledger.total;
    r.unknown_pairs = ledger.counts.size();
    r.eval_runs = eval_returns.size();
    if (!eval_returns.empty()) {
        double sum = 0.0;
        for (double v : eval_returns) sum += v;
        r.eval_mean_return = sum / static_cast<double>(eval_returns.size());
    }
    return r;
}

void write_report(const SufficiencyReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw SimgenError("cannot write " + path.string());
    out << "key,value\n"
        << "distinct_observations," << r.distinct_observations << '\n'
        << "distinct_pairs," << r.distinct_pairs << '\n'
        << "total_transitions," << r.total_transitions << '\n'
        << "unknown_events," << r.unknown_events << '\n'
        << "unknown_pairs," << r.unknown_pairs << '\n'
        << "eval_runs," << r.eval_runs << '\n'
        << "eval_mean_return," << r.eval_mean_return << '\n';
    if (!out) throw SimgenError("I/O failure writing " + path.string());
}

void export_unknown_histogram(const UnknownTransitionLedger& ledger, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw SimgenError("cannot write " + path.string());
    out << "o_key,action_id,unknown_count\n";
    for (const auto& [pair, count] : ledger.counts) out << pair.first << ',' << pair.second << ',' << count << '\n';
    if (!out) throw SimgenError("I/O failure writing " + path.string());
}

void save_simulator(const EmpiricalMdp& mdp, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SimgenError("cannot write " + path.string());
    json header = {{"format_version", 1},
                   {"scenario_digest", digest_hex(mdp.scenario_digest())},
                   {"pair_count", mdp.num_pairs()},
                   {"num_actions", mdp.num_actions()},
                   {"initial_key", mdp.initial_key()}};
    out << header.dump() << '\n';
    const auto index = mdp.to_counts();
    for (const auto& [pair, counts] : index.pairs()) {
        json outcomes = json::array();
        for (const auto& [o2, c] : counts.counts) {
            outcomes.push_back({o2, c, static_cast<double>(c) / static_cast<double>(counts.total)});
        }
        json line = {{"o_key", pair.first}, {"action_id", pair.second}, {"outcomes", std::move(outcomes)}};
        out << line.dump() << '\n';
    }
    if (!out) throw SimgenError("I/O failure writing " + path.string());
}

EmpiricalMdp load_simulator(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SimgenError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    try {
        if (!std::getline(in, line)) throw SimgenError(path.string() + ": missing header");
        ++line_no;
        auto header = json::parse(line);
        if (header.at("format_version").get<int>() != 1) throw SimgenError("unsupported simulator format_version");
        const auto digest_text = header.at("scenario_digest").get<std::string>();
        const auto digest = std::stoull(digest_text, nullptr, 16);
        const auto pair_count = header.at("pair_count").get<std::size_t>();
        const auto num_actions = header.at("num_actions").get<int>();
        const auto initial_key = header.at("initial_key").get<std::string>();

        CountIndex idx;
        idx.scenario_digest = digest;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto j = json::parse(line);
            const auto o = j.at("o_key").get<std::string>();
            const auto a = j.at("action_id").get<int>();
            for (const auto& entry : j.at("outcomes")) {
                idx.add(o, a, entry.at(0).get<std::string>(), entry.at(1).get<std::uint64_t>());
            }
        }
        if (idx.pairs().size() != pair_count) {
            throw SimgenError(path.string() + ": header declares " + std::to_string(pair_count) + " pairs, file has " +
                              std::to_string(idx.pairs().size()));
        }
        return build_mdp(idx, observation_from_key(initial_key), num_actions, digest);
    } catch (const json::exception& e) {
        throw SimgenError(path.string() + ":" + std::to_string(line_no) + ": corrupt simulator file: " + e.what());
    } catch (const std::invalid_argument& e) {
        throw SimgenError(path.string() + ":" + std::to_string(line_no) + ": corrupt simulator file: " + e.what());
    }
}

}  // namespace cyops
