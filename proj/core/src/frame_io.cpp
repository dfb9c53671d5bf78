#include "seqfuse/frame_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "seqfuse/errors.hpp"

namespace seqfuse {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'F', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    put_u32(out, bits);
}

class Cursor {
public:
    Cursor(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        require(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        require(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }

    std::uint8_t u8() {
        require(1);
        return bytes_[pos_++];
    }

    float f32() { return std::bit_cast<float>(u32()); }

    void require(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw IoError("frame file truncated");
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_{0};
};

}  // namespace

std::vector<std::uint8_t> encode_frame(const PointCloudFrame& frame) {
    std::vector<std::uint8_t> out;
    out.reserve(21 + frame.points.size() * 16);
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(frame.frame_index));
    put_u64(out, frame.points.size());
    out.push_back(frame.foreground_mask ? 1 : 0);
    for (const auto& p : frame.points) {
        put_f32(out, static_cast<float>(p.x));
        put_f32(out, static_cast<float>(p.y));
        put_f32(out, static_cast<float>(p.z));
        put_f32(out, static_cast<float>(p.intensity));
    }
    if (frame.foreground_mask) {
        for (std::uint8_t m : *frame.foreground_mask) out.push_back(m ? 1 : 0);
    }
    return out;
}

PointCloudFrame decode_frame(const std::vector<std::uint8_t>& bytes) {
    Cursor c(bytes);
    c.require(4);
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw IoError("bad frame file magic, expected MSFP");
    c.u32();  // skip magic
    const std::uint32_t version = c.u32();
    if (version != kVersion)
        throw IoError("unsupported frame file version " + std::to_string(version));
    PointCloudFrame frame;
    frame.frame_index = static_cast<std::int32_t>(c.u32());
    const std::uint64_t count = c.u64();
    const bool has_mask = c.u8() != 0;
    frame.points.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        auto& p = frame.points[i];
        p.x = c.f32();
        p.y = c.f32();
        p.z = c.f32();
        p.intensity = c.f32();
    }
    if (has_mask) {
        std::vector<std::uint8_t> mask(count);
        for (std::uint64_t i = 0; i < count; ++i) mask[i] = c.u8();
        frame.foreground_mask = std::move(mask);
    }
    return frame;
}

void write_frame(const std::filesystem::path& path, const PointCloudFrame& frame) {
    const auto bytes = encode_frame(frame);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

PointCloudFrame read_frame(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_frame(bytes);
}

std::string proposals_to_json(const std::vector<Proposal>& proposals) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : proposals) {
        arr.push_back({{"cx", p.cx},
                       {"cy", p.cy},
                       {"cz", p.cz},
                       {"w", p.w},
                       {"l", p.l},
                       {"h", p.h},
                       {"yaw", p.yaw},
                       {"vx", p.vx},
                       {"vy", p.vy},
                       {"score", p.score}});
    }
    return arr.dump(2);
}

std::vector<Proposal> proposals_from_json(const std::string& text) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("proposal JSON parse error: ") + e.what());
    }
    if (!arr.is_array()) throw ConfigError("proposal JSON must be an array");
    std::vector<Proposal> out;
    out.reserve(arr.size());
    for (const auto& j : arr) {
        Proposal p;
        try {
            p.cx = j.at("cx").get<double>();
            p.cy = j.at("cy").get<double>();
            p.cz = j.at("cz").get<double>();
            p.w = j.at("w").get<double>();
            p.l = j.at("l").get<double>();
            p.h = j.at("h").get<double>();
            p.yaw = j.at("yaw").get<double>();
            p.vx = j.at("vx").get<double>();
            p.vy = j.at("vy").get<double>();
            p.score = j.at("score").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("proposal JSON field error: ") + e.what());
        }
        out.push_back(make_proposal(p));
    }
    return out;
}

void write_proposals(const std::filesystem::path& path, const std::vector<Proposal>& proposals) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << proposals_to_json(proposals) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Proposal> read_proposals(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return proposals_from_json(text);
}

}  // namespace seqfuse
