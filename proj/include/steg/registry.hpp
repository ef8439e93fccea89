#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace steg {

struct RegistryEntry {
    std::uint64_t id = 0;  // FNV-1a hash of the summary bytes
    std::string summary;
    std::string source_ref;
    std::string created_at;  // UTC, ISO 8601
};

// Append-only JSON-lines store mapping summary hashes to summaries.  Appends
// take an exclusive file lock, so concurrent writers from separate processes
// serialize cleanly.
class Registry {
public:
    explicit Registry(std::string path);  // loads existing entries; IoFailure on damage

    // Idempotent for an identical summary; a different summary hashing to an
    // existing id is rejected with IdCollision.
    RegistryEntry put(const std::string& summary, const std::string& source_ref);
    std::optional<RegistryEntry> get(std::uint64_t id) const;

    std::size_t size() const { return entries_.size(); }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::map<std::uint64_t, RegistryEntry> entries_;
};

}  // namespace steg
