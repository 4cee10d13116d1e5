#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cyops {

using HostId = int;

enum class FactKind : std::uint8_t {
    HostDiscovered,
    ServiceKnown,
    ShareKnown,
    CredentialKnown,
    HandPresent,
    DomainAdminReached,
};

enum class Privilege : std::uint8_t { User, Elevated };

std::string_view to_string(FactKind kind);
std::optional<FactKind> fact_kind_from_string(std::string_view name);

std::string_view to_string(Privilege priv);
std::optional<Privilege> privilege_from_string(std::string_view name);

/// One piece of red-agent knowledge. Totally ordered by (kind, host, detail).
struct Fact {
    FactKind kind{FactKind::HostDiscovered};
    HostId host{0};
    std::string detail;

    auto operator<=>(const Fact&) const = default;
    bool operator==(const Fact&) const = default;
};

Fact hand_fact(HostId host, Privilege priv);

/// Details are restricted to [A-Za-z0-9_$-] so observation keys stay injective.
bool is_valid_detail(std::string_view detail);

/// Key of the observation with no facts.
inline constexpr std::string_view kEmptyObservationKey = "(none)";

/**
 * Canonical, immutable fact set seen by the red agent.
 *
 * Facts are sorted and de-duplicated on construction. Copies share one
 * buffer, so passing observations around by value is cheap. The key is the
 * canonical serialization: facts joined by '|', each written as a one-letter
 * kind code (D, S, F, C, H, A), the host id, and ".detail" when non-empty,
 * e.g. "D2|H2.user".
 */
class Observation {
public:
    Observation();
    explicit Observation(std::vector<Fact> facts);

    const std::vector<Fact>& facts() const { return data_->facts; }
    const std::string& key() const { return data_->key; }
    bool contains(const Fact& fact) const;
    bool empty() const { return data_->facts.empty(); }
    std::size_t size() const { return data_->facts.size(); }

    friend bool operator==(const Observation& a, const Observation& b) {
        return a.data_ == b.data_ || a.key() == b.key();
    }

private:
    struct Data {
        std::vector<Fact> facts;
        std::string key;
    };
    std::shared_ptr<const Data> data_;
};

std::string observation_key(const Observation& obs);
std::string fact_key(const Fact& fact);

/// Inverse of observation_key. Throws std::invalid_argument on malformed keys.
Observation observation_from_key(std::string_view key);

}  // namespace cyops
