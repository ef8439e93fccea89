#include "steg/registry.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <ctime>
#include <fstream>
#include <json.hpp>

#include "steg/codec.hpp"
#include "steg/error.hpp"

namespace steg {

namespace {

std::string now_utc() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string id_to_hex(std::uint64_t id) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(id));
    return buf;
}

std::uint64_t hex_to_id(const std::string& s) {
    if (s.size() != 16) throw IoFailure("registry: malformed id field");
    return std::stoull(s, nullptr, 16);
}

}  // namespace

Registry::Registry(std::string path) : path_(std::move(path)) {
    std::ifstream f(path_);
    if (!f) return;  // a fresh registry starts on the first put
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            RegistryEntry e;
            e.id = hex_to_id(j.at("id").get<std::string>());
            e.summary = j.at("summary").get<std::string>();
            e.source_ref = j.at("source_ref").get<std::string>();
            e.created_at = j.at("created_at").get<std::string>();
            entries_[e.id] = std::move(e);
        } catch (const nlohmann::json::exception&) {
            throw IoFailure("registry: bad record at line " + std::to_string(lineno) + " of " +
                            path_);
        }
    }
}

RegistryEntry Registry::put(const std::string& summary, const std::string& source_ref) {
    if (summary.empty()) throw EmptyText("registry: empty summary");
    const std::uint64_t id = fnv1a64(summary);
    const auto it = entries_.find(id);
    if (it != entries_.end()) {
        if (it->second.summary != summary)
            throw IdCollision("registry: id " + id_to_hex(id) + " already maps to a different summary");
        return it->second;
    }

    RegistryEntry e;
    e.id = id;
    e.summary = summary;
    e.source_ref = source_ref;
    e.created_at = now_utc();

    nlohmann::json j{{"id", id_to_hex(id)},
                     {"summary", summary},
                     {"source_ref", source_ref},
                     {"created_at", e.created_at}};
    const std::string line = j.dump() + "\n";

    const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
    if (fd < 0) throw IoFailure("registry: cannot open " + path_);
    if (::flock(fd, LOCK_EX) != 0) {
        ::close(fd);
        throw IoFailure("registry: cannot lock " + path_);
    }
    const ssize_t written = ::write(fd, line.data(), line.size());
    ::flock(fd, LOCK_UN);
    ::close(fd);
    if (written != static_cast<ssize_t>(line.size()))
        throw IoFailure("registry: short write to " + path_);

    entries_[id] = e;
    return e;
}

std::optional<RegistryEntry> Registry::get(std::uint64_t id) const {
    const auto it = entries_.find(id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

}  // namespace steg
