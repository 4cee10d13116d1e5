#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cyops {

/// One logged emulator transition (o, a, o').
struct TransitionRecord {
    std::int64_t episode{0};
    int step{0};
    std::string o_key;
    int action_id{0};
    std::string o2_key;
    double reward{0.0};
    std::vector<bool> per_hand_executable;
    double virtual_time_s{0.0};

    bool operator==(const TransitionRecord&) const = default;
};

struct TraceHeader {
    int format_version{1};
    std::uint64_t scenario_digest{0};
    std::uint64_t seed{0};
    std::string created_by;

    bool operator==(const TraceHeader&) const = default;
};

struct TraceLog {
    TraceHeader header;
    std::vector<TransitionRecord> records;
};

class TraceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Receives transitions as they happen.
class TransitionSink {
public:
    virtual ~TransitionSink() = default;
    virtual void append(const TransitionRecord& record) = 0;
};

/// Outcome counts C for one (o, a) pair, ordered by o' key.
struct OutcomeCounts {
    std::map<std::string, std::uint64_t> counts;
    std::uint64_t total{0};
    bool operator==(const OutcomeCounts&) const = default;
};

using PairKey = std::pair<std::string, int>;

/// Counts of observed (o, a) -> o' transitions, the input of simulator
/// generation. Aggregation is order-insensitive.
class CountIndex final : public TransitionSink {
public:
    void append(const TransitionRecord& record) override { add(record.o_key, record.action_id, record.o2_key); }
    void add(const std::string& o_key, int action_id, const std::string& o2_key, std::uint64_t count = 1);
    void merge(const CountIndex& other);

    const std::map<PairKey, OutcomeCounts>& pairs() const { return pairs_; }
    const OutcomeCounts* find(const std::string& o_key, int action_id) const;
    bool empty() const { return pairs_.empty(); }
    std::uint64_t total_transitions() const { return total_; }

    std::optional<std::uint64_t> scenario_digest;

    /// Equal when every pair has identical outcome counts.
    bool operator==(const CountIndex& other) const { return pairs_ == other.pairs_; }

private:
    std::map<PairKey, OutcomeCounts> pairs_;
    std::uint64_t total_{0};
};

struct TraceStats {
    std::size_t distinct_observations{0};
    std::size_t distinct_pairs{0};
    std::uint64_t total_transitions{0};
    /// number of outcomes -> number of (o, a) pairs with that many outcomes
    std::map<std::size_t, std::size_t> branching;
};

TraceStats stats(const CountIndex& index);

/**
 * Line-delimited trace log writer (`.cgt`). The first line is the header;
 * each following line is one record with a fixed field order. Opening an
 * existing non-empty log appends to it after checking the scenario digest.
 */
class TraceWriter final : public TransitionSink {
public:
    TraceWriter(const std::filesystem::path& path, const TraceHeader& header);
    ~TraceWriter() override;
    TraceWriter(const TraceWriter&) = delete;
    TraceWriter& operator=(const TraceWriter&) = delete;

    void append(const TransitionRecord& record) override;
    void close();
    std::uint64_t records_written() const { return written_; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::uint64_t written_{0};
};

/// Forwards to several sinks.
class TeeSink final : public TransitionSink {
public:
    explicit TeeSink(std::vector<TransitionSink*> sinks) : sinks_(std::move(sinks)) {}
    void append(const TransitionRecord& record) override {
        for (auto* s : sinks_) s->append(record);
    }

private:
    std::vector<TransitionSink*> sinks_;
};

std::string header_line(const TraceHeader& header);
std::string record_line(const TransitionRecord& record);
TraceHeader parse_header_line(const std::string& line);
TransitionRecord parse_record_line(const std::string& line);

TraceLog read_trace(const std::filesystem::path& path);

/// Aggregates logs; all must share one scenario digest.
CountIndex load(const std::vector<std::filesystem::path>& paths);

}  // namespace cyops
