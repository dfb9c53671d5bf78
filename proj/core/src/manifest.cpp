#include "seqfuse/manifest.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "seqfuse/errors.hpp"

namespace seqfuse {

std::string fnv1a64_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : bytes) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
    nlohmann::json j{{"command", manifest.command},
                     {"config_hash", manifest.config_hash},
                     {"seed", manifest.seed},
                     {"version", manifest.version},
                     {"wall_clock_seconds", manifest.wall_clock_seconds},
                     {"outputs", manifest.outputs}};
    const auto path = dir / "manifest.json";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace seqfuse
