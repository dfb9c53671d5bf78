#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "seqfuse/types.hpp"

namespace seqfuse {

/// Binary frame file layout (little-endian):
///   magic "MSFP", u32 version=1, u32 frame_index, u64 point_count, u8 has_mask,
///   point_count records of 4 x f32 (x, y, z, intensity),
///   then point_count bytes of {0,1} if has_mask.
/// Coordinates are stored as f32; values are truncated on write.
void write_frame(const std::filesystem::path& path, const PointCloudFrame& frame);
[[nodiscard]] PointCloudFrame read_frame(const std::filesystem::path& path);

/// In-memory encoding of the same layout (used for byte-identity checks).
[[nodiscard]] std::vector<std::uint8_t> encode_frame(const PointCloudFrame& frame);
[[nodiscard]] PointCloudFrame decode_frame(const std::vector<std::uint8_t>& bytes);

/// Proposals travel as a JSON array of objects with keys
/// cx, cy, cz, w, l, h, yaw, vx, vy, score.
[[nodiscard]] std::string proposals_to_json(const std::vector<Proposal>& proposals);
[[nodiscard]] std::vector<Proposal> proposals_from_json(const std::string& text);

void write_proposals(const std::filesystem::path& path, const std::vector<Proposal>& proposals);
[[nodiscard]] std::vector<Proposal> read_proposals(const std::filesystem::path& path);

}  // namespace seqfuse
