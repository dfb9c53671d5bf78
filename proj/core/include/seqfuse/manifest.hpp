#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace seqfuse {

/// Audit record written next to every CLI command's outputs.
struct RunManifest {
    std::string command;
    std::string config_hash;
    std::uint64_t seed{0};
    std::string version;
    double wall_clock_seconds{0.0};
    std::vector<std::string> outputs;
};

[[nodiscard]] std::string fnv1a64_hex(std::string_view bytes);

/// Writes manifest.json into the directory.
void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

}  // namespace seqfuse
