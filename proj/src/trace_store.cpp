#include "cyops/trace_store.hpp"

#include <charconv>
#include <cstdio>
#include <set>

#include "json.hpp"

namespace cyops {

using json = nlohmann::json;

namespace {

void append_escaped(std::string& out, const std::string& text) {
    out.push_back('"');
    for (char c : text) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(c);
                }
        }
    }
    out.push_back('"');
}

void append_number(std::string& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

std::uint64_t parse_hex16(const std::string& text) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, 16);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.size() != 16) {
        throw TraceError("scenario_digest must be 16 hex digits");
    }
    return value;
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

void CountIndex::add(const std::string& o_key, int action_id, const std::string& o2_key, std::uint64_t count) {
    if (count == 0) return;
    auto& entry = pairs_[{o_key, action_id}];
    entry.counts[o2_key] += count;
    entry.total += count;
    total_ += count;
}

void CountIndex::merge(const CountIndex& other) {
    if (scenario_digest && other.scenario_digest && *scenario_digest != *other.scenario_digest) {
        throw TraceError("scenario digest mismatch while merging count indexes");
    }
    if (!scenario_digest) scenario_digest = other.scenario_digest;
    for (const auto& [pair, outcomes] : other.pairs_) {
        for (const auto& [o2, c] : outcomes.counts) add(pair.first, pair.second, o2, c);
    }
}

const OutcomeCounts* CountIndex::find(const std::string& o_key, int action_id) const {
    auto it = pairs_.find({o_key, action_id});
    return it == pairs_.end() ? nullptr : &it->second;
}

TraceStats stats(const CountIndex& index) {
    TraceStats st;
    std::set<std::string> observations;
    for (const auto& [pair, outcomes] : index.pairs()) {
        observations.insert(pair.first);
        for (const auto& kv : outcomes.counts) observations.insert(kv.first);
        st.branching[outcomes.counts.size()] += 1;
    }
    st.distinct_observations = observations.size();
    st.distinct_pairs = index.pairs().size();
    st.total_transitions = index.total_transitions();
    return st;
}

std::string header_line(const TraceHeader& h) {
    std::string out = "{\"format_version\":" + std::to_string(h.format_version) + ",\"scenario_digest\":\"" +
                      hex16(h.scenario_digest) + "\",\"seed\":" + std::to_string(h.seed) + ",\"created_by\":";
    append_escaped(out, h.created_by);
    out.push_back('}');
    return out;
}

std::string record_line(const TransitionRecord& r) {
    std::string out;
    out.reserve(96 + r.o_key.size() + r.o2_key.size());
    out += "{\"episode\":" + std::to_string(r.episode) + ",\"step\":" + std::to_string(r.step) + ",\"o_key\":";
    append_escaped(out, r.o_key);
    out += ",\"action_id\":" + std::to_string(r.action_id) + ",\"o2_key\":";
    append_escaped(out, r.o2_key);
    out += ",\"reward\":";
    append_number(out, r.reward);
    out += ",\"per_hand_executable\":[";
    for (std::size_t i = 0; i < r.per_hand_executable.size(); ++i) {
        if (i > 0) out.push_back(',');
        out += r.per_hand_executable[i] ? "true" : "false";
    }
    out += "],\"virtual_time_s\":";
    append_number(out, r.virtual_time_s);
    out.push_back('}');
    return out;
}

TraceHeader parse_header_line(const std::string& line) {
    try {
        auto j = json::parse(line);
        TraceHeader h;
        h.format_version = j.at("format_version").get<int>();
        h.scenario_digest = parse_hex16(j.at("scenario_digest").get<std::string>());
        h.seed = j.at("seed").get<std::uint64_t>();
        h.created_by = j.at("created_by").get<std::string>();
        if (h.format_version != 1) throw TraceError("unsupported trace format_version " + std::to_string(h.format_version));
        return h;
    } catch (const json::exception& e) {
        throw TraceError(std::string("corrupt trace header: ") + e.what());
    }
}

TransitionRecord parse_record_line(const std::string& line) {
    try {
        auto j = json::parse(line);
        TransitionRecord r;
        r.episode = j.at("episode").get<std::int64_t>();
        r.step = j.at("step").get<int>();
        r.o_key = j.at("o_key").get<std::string>();
        r.action_id = j.at("action_id").get<int>();
        r.o2_key = j.at("o2_key").get<std::string>();
        r.reward = j.at("reward").get<double>();
        for (const auto& b : j.at("per_hand_executable")) r.per_hand_executable.push_back(b.get<bool>());
        r.virtual_time_s = j.at("virtual_time_s").get<double>();
        if (r.step < 0 || r.action_id < 0 || r.o_key.empty() || r.o2_key.empty()) {
            throw TraceError("field out of range");
        }
        return r;
    } catch (const json::exception& e) {
        throw TraceError(e.what());
    }
}

TraceWriter::TraceWriter(const std::filesystem::path& path, const TraceHeader& header) : path_(path) {
    std::error_code ec;
    bool existing = std::filesystem::exists(path, ec) && std::filesystem::file_size(path, ec) > 0;
    if (existing) {
        std::ifstream in(path);
        std::string first;
        std::getline(in, first);
        auto old = parse_header_line(first);
        if (old.scenario_digest != header.scenario_digest) {
            throw TraceError("header mismatch: log " + path.string() + " has scenario digest " +
                             hex16(old.scenario_digest) + ", writer has " + hex16(header.scenario_digest));
        }
        out_.open(path, std::ios::binary | std::ios::app);
    } else {
        out_.open(path, std::ios::binary | std::ios::trunc);
    }
    if (!out_) throw TraceError("cannot open trace log " + path.string() + " for writing");
    if (!existing) out_ << header_line(header) << '\n';
}

TraceWriter::~TraceWriter() {
    try {
        close();
    } catch (...) {
    }
}

void TraceWriter::append(const TransitionRecord& record) {
    if (!out_.is_open()) throw TraceError("append to closed trace log " + path_.string());
    out_ << record_line(record) << '\n';
    ++written_;
}

void TraceWriter::close() {
    if (!out_.is_open()) return;
    out_.flush();
    bool ok = static_cast<bool>(out_);
    out_.close();
    if (!ok) throw TraceError("I/O failure writing trace log " + path_.string());
}

TraceLog read_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TraceError("cannot open trace log " + path.string());
    TraceLog log;
    std::string line;
    if (!std::getline(in, line)) throw TraceError(path.string() + ":1: missing header");
    log.header = parse_header_line(line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            log.records.push_back(parse_record_line(line));
        } catch (const TraceError& e) {
            throw TraceError(path.string() + ":" + std::to_string(line_no) + ": corrupt record: " + e.what());
        }
    }
    return log;
}

CountIndex load(const std::vector<std::filesystem::path>& paths) {
    CountIndex index;
    for (const auto& p : paths) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw TraceError("cannot open trace log " + p.string());
        std::string line;
        if (!std::getline(in, line)) throw TraceError(p.string() + ":1: missing header");
        auto header = parse_header_line(line);
        if (index.scenario_digest && *index.scenario_digest != header.scenario_digest) {
            throw TraceError("scenario digest mismatch: " + p.string() + " has " + hex16(header.scenario_digest) +
                             ", expected " + hex16(*index.scenario_digest));
        }
        index.scenario_digest = header.scenario_digest;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                index.append(parse_record_line(line));
            } catch (const TraceError& e) {
                throw TraceError(p.string() + ":" + std::to_string(line_no) + ": corrupt record: " + e.what());
            }
        }
    }
    return index;
}

}  // namespace cyops
