#include "cyops/fact.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <stdexcept>

namespace cyops {

namespace {

constexpr std::array<std::string_view, 6> kKindNames = {
    "HostDiscovered", "ServiceKnown", "ShareKnown", "CredentialKnown", "HandPresent", "DomainAdminReached"};
constexpr std::array<char, 6> kKindCodes = {'D', 'S', 'F', 'C', 'H', 'A'};

std::string build_key(const std::vector<Fact>& facts) {
    if (facts.empty()) return std::string(kEmptyObservationKey);
    std::string key;
    key.reserve(facts.size() * 8);
    for (std::size_t i = 0; i < facts.size(); ++i) {
        if (i > 0) key.push_back('|');
        key += fact_key(facts[i]);
    }
    return key;
}

}  // namespace

std::string_view to_string(FactKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<FactKind> fact_kind_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (kKindNames[i] == name) return static_cast<FactKind>(i);
    }
    return std::nullopt;
}

std::string_view to_string(Privilege priv) { return priv == Privilege::User ? "user" : "elevated"; }

std::optional<Privilege> privilege_from_string(std::string_view name) {
    if (name == "user") return Privilege::User;
    if (name == "elevated") return Privilege::Elevated;
    return std::nullopt;
}

Fact hand_fact(HostId host, Privilege priv) {
    return Fact{FactKind::HandPresent, host, std::string(to_string(priv))};
}

bool is_valid_detail(std::string_view detail) {
    return std::all_of(detail.begin(), detail.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
               c == '$' || c == '-';
    });
}

std::string fact_key(const Fact& fact) {
    std::string out;
    out.push_back(kKindCodes[static_cast<std::size_t>(fact.kind)]);
    out += std::to_string(fact.host);
    if (!fact.detail.empty()) {
        out.push_back('.');
        out += fact.detail;
    }
    return out;
}

Observation::Observation() : Observation(std::vector<Fact>{}) {}

Observation::Observation(std::vector<Fact> facts) {
    std::sort(facts.begin(), facts.end());
    facts.erase(std::unique(facts.begin(), facts.end()), facts.end());
    auto data = std::make_shared<Data>();
    data->key = build_key(facts);
    data->facts = std::move(facts);
    data_ = std::move(data);
}

bool Observation::contains(const Fact& fact) const {
    return std::binary_search(data_->facts.begin(), data_->facts.end(), fact);
}

std::string observation_key(const Observation& obs) { return obs.key(); }

Observation observation_from_key(std::string_view key) {
    if (key == kEmptyObservationKey) return Observation{};
    if (key.empty()) throw std::invalid_argument("empty observation key");
    std::vector<Fact> facts;
    std::size_t pos = 0;
    while (pos <= key.size()) {
        auto end = key.find('|', pos);
        if (end == std::string_view::npos) end = key.size();
        auto token = key.substr(pos, end - pos);
        if (token.size() < 2) throw std::invalid_argument("malformed fact in observation key: '" + std::string(token) + "'");
        auto code = std::find(kKindCodes.begin(), kKindCodes.end(), token[0]);
        if (code == kKindCodes.end()) throw std::invalid_argument("unknown fact code in key: '" + std::string(token) + "'");
        Fact fact;
        fact.kind = static_cast<FactKind>(code - kKindCodes.begin());
        auto dot = token.find('.');
        auto host_text = token.substr(1, dot == std::string_view::npos ? std::string_view::npos : dot - 1);
        auto [ptr, ec] = std::from_chars(host_text.data(), host_text.data() + host_text.size(), fact.host);
        if (ec != std::errc{} || ptr != host_text.data() + host_text.size()) {
            throw std::invalid_argument("malformed host in observation key: '" + std::string(token) + "'");
        }
        if (dot != std::string_view::npos) {
            fact.detail = std::string(token.substr(dot + 1));
            if (fact.detail.empty() || !is_valid_detail(fact.detail)) {
                throw std::invalid_argument("malformed detail in observation key: '" + std::string(token) + "'");
            }
        }
        if (fact.kind == FactKind::HandPresent && !privilege_from_string(fact.detail)) {
            throw std::invalid_argument("hand without a privilege level in key: '" + std::string(token) + "'");
        }
        facts.push_back(std::move(fact));
        pos = end + 1;
    }
    Observation obs(std::move(facts));
    if (obs.key() != key) throw std::invalid_argument("observation key is not canonical: '" + std::string(key) + "'");
    return obs;
}

}  // namespace cyops
