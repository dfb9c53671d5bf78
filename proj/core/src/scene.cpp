#include "seqfuse/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "seqfuse/errors.hpp"
#include "seqfuse/frame_io.hpp"
#include "seqfuse/rng.hpp"

namespace seqfuse {

namespace {

double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

Point3 quantize(const Point3& p) {
    return {quantize(p.x), quantize(p.y), quantize(p.z), quantize(p.intensity)};
}

/// Uniform sample on the box's four vertical faces and top, in world frame.
Point3 sample_surface_point(const ObjectConfig& obj, double cx, double cy, Rng& rng) {
    const double a_side_x = obj.l * obj.h;  // faces normal to local x
    const double a_side_y = obj.w * obj.h;  // faces normal to local y
    const double a_top = obj.w * obj.l;
    const double total = 2.0 * a_side_x + 2.0 * a_side_y + a_top;

    double u = rng.next_double() * total;
    double lx, ly, lz;
    if (u < 2.0 * a_side_x) {
        const double sign = u < a_side_x ? 1.0 : -1.0;
        lx = sign * 0.5 * obj.w;
        ly = (rng.next_double() - 0.5) * obj.l;
        lz = (rng.next_double() - 0.5) * obj.h;
    } else if (u < 2.0 * a_side_x + 2.0 * a_side_y) {
        u -= 2.0 * a_side_x;
        const double sign = u < a_side_y ? 1.0 : -1.0;
        lx = (rng.next_double() - 0.5) * obj.w;
        ly = sign * 0.5 * obj.l;
        lz = (rng.next_double() - 0.5) * obj.h;
    } else {
        lx = (rng.next_double() - 0.5) * obj.w;
        ly = (rng.next_double() - 0.5) * obj.l;
        lz = 0.5 * obj.h;
    }

    const double c = std::cos(obj.yaw);
    const double s = std::sin(obj.yaw);
    return {cx + c * lx - s * ly, cy + s * lx + c * ly, obj.cz + lz, rng.next_double()};
}

nlohmann::json box_to_json(const Proposal& p) {
    return {{"cx", p.cx}, {"cy", p.cy}, {"cz", p.cz}, {"w", p.w},   {"l", p.l},
            {"h", p.h},   {"yaw", p.yaw}, {"vx", p.vx}, {"vy", p.vy}, {"score", p.score}};
}

Proposal box_from_json(const nlohmann::json& j) {
    Proposal p;
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
    return make_proposal(p);
}

std::string frame_file_name(std::int32_t t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d.msfp", t);
    return buf;
}

}  // namespace

SpeedClass speed_class(double vx, double vy) {
    const double speed = std::hypot(vx, vy);
    if (speed < 0.2) return SpeedClass::Stationary;
    if (speed <= 1.0) return SpeedClass::Slow;
    if (speed <= 6.0) return SpeedClass::Medium;
    return SpeedClass::Fast;
}

const char* to_string(SpeedClass c) {
    switch (c) {
        case SpeedClass::Stationary: return "stationary";
        case SpeedClass::Slow: return "slow";
        case SpeedClass::Medium: return "medium";
        case SpeedClass::Fast: return "fast";
    }
    return "unknown";
}

std::string scene_config_to_json(const SceneConfig& config) {
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& o : config.objects) {
        objects.push_back({{"w", o.w},
                           {"l", o.l},
                           {"h", o.h},
                           {"cx", o.cx},
                           {"cy", o.cy},
                           {"cz", o.cz},
                           {"yaw", o.yaw},
                           {"vx", o.vx},
                           {"vy", o.vy},
                           {"velocity_jitter", o.velocity_jitter},
                           {"points_per_frame", o.points_per_frame}});
    }
    nlohmann::json j{{"seed", config.seed},
                     {"frames", config.frames},
                     {"extent", config.extent},
                     {"objects", objects},
                     {"clutter_points_per_frame", config.clutter_points_per_frame},
                     {"velocity_estimate_noise", config.velocity_estimate_noise}};
    return j.dump(2);
}

SceneConfig scene_config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // e.what() carries the byte position of the failure.
        throw ConfigError(std::string("scene config parse error: ") + e.what());
    }
    SceneConfig config;
    try {
        config.seed = j.at("seed").get<std::uint64_t>();
        config.frames = j.at("frames").get<std::int32_t>();
        config.extent = j.at("extent").get<double>();
        config.clutter_points_per_frame = j.value("clutter_points_per_frame", 0);
        config.velocity_estimate_noise = j.value("velocity_estimate_noise", 0.0);
        for (const auto& jo : j.at("objects")) {
            ObjectConfig o;
            o.w = jo.at("w").get<double>();
            o.l = jo.at("l").get<double>();
            o.h = jo.at("h").get<double>();
            o.cx = jo.at("cx").get<double>();
            o.cy = jo.at("cy").get<double>();
            o.cz = jo.value("cz", 1.0);
            o.yaw = jo.value("yaw", 0.0);
            o.vx = jo.value("vx", 0.0);
            o.vy = jo.value("vy", 0.0);
            o.velocity_jitter = jo.value("velocity_jitter", 0.0);
            o.points_per_frame = jo.value("points_per_frame", 100);
            config.objects.push_back(o);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scene config field error: ") + e.what());
    }
    return config;
}

SceneConfig read_scene_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return scene_config_from_json(text);
}

Scene generate(const SceneConfig& config) {
    if (config.frames < 1) throw DomainError("scene config: frames must be >= 1");
    if (!(config.extent > 0.0)) throw DomainError("scene config: extent must be > 0");

    Scene scene;
    const std::int32_t T = config.frames;

    // Jittered center trajectories, advanced frame by frame.
    std::vector<std::vector<std::pair<double, double>>> centers(config.objects.size());
    for (std::size_t o = 0; o < config.objects.size(); ++o) {
        const auto& obj = config.objects[o];
        Rng jitter_rng(mix_key(config.seed, 0xA11, o));
        double cx = obj.cx, cy = obj.cy;
        centers[o].reserve(static_cast<std::size_t>(T));
        centers[o].emplace_back(cx, cy);
        for (std::int32_t t = 2; t <= T; ++t) {
            double jx = 0.0, jy = 0.0;
            if (obj.velocity_jitter > 0.0) {
                jx = jitter_rng.uniform(-obj.velocity_jitter, obj.velocity_jitter);
                jy = jitter_rng.uniform(-obj.velocity_jitter, obj.velocity_jitter);
            }
            cx += obj.vx + jx;
            cy += obj.vy + jy;
            centers[o].emplace_back(cx, cy);
        }
    }

    scene.truth.resize(static_cast<std::size_t>(T));
    for (std::int32_t t = 1; t <= T; ++t) {
        PointCloudFrame frame;
        frame.frame_index = t;
        std::vector<std::uint8_t> mask;

        for (std::size_t o = 0; o < config.objects.size(); ++o) {
            const auto& obj = config.objects[o];
            const auto [cx, cy] = centers[o][static_cast<std::size_t>(t - 1)];
            Rng rng(mix_key(config.seed, 0xB00 + static_cast<std::uint64_t>(t), o));
            for (int i = 0; i < obj.points_per_frame; ++i) {
                frame.points.push_back(quantize(sample_surface_point(obj, cx, cy, rng)));
                mask.push_back(1);
            }
            Proposal box;
            box.cx = cx;
            box.cy = cy;
            box.cz = obj.cz;
            box.w = obj.w;
            box.l = obj.l;
            box.h = obj.h;
            box.yaw = obj.yaw;
            box.vx = obj.vx;
            box.vy = obj.vy;
            box.score = 1.0;
            scene.truth[static_cast<std::size_t>(t - 1)].push_back(
                {static_cast<int>(o), make_proposal(box)});
        }

        Rng clutter_rng(mix_key(config.seed, 0xC00, static_cast<std::uint64_t>(t)));
        for (int i = 0; i < config.clutter_points_per_frame; ++i) {
            Point3 p{clutter_rng.uniform(-config.extent, config.extent),
                     clutter_rng.uniform(-config.extent, config.extent),
                     clutter_rng.uniform(0.0, 3.0), clutter_rng.next_double()};
            frame.points.push_back(quantize(p));
            mask.push_back(0);
        }

        frame.foreground_mask = std::move(mask);
        scene.window.frames.push_back(std::move(frame));
    }

    // Current-frame proposals: true box at frame T with a corrupted velocity
    // estimate. The estimate is never re-fit from data downstream.
    Rng noise_rng(mix_key(config.seed, 0xD00));
    for (std::size_t o = 0; o < config.objects.size(); ++o) {
        const auto& obj = config.objects[o];
        Proposal p;
        const auto [cx, cy] = centers[o][static_cast<std::size_t>(T - 1)];
        p.cx = cx;
        p.cy = cy;
        p.cz = obj.cz;
        p.w = obj.w;
        p.l = obj.l;
        p.h = obj.h;
        p.yaw = obj.yaw;
        const double e = config.velocity_estimate_noise;
        p.vx = obj.vx * (e > 0.0 ? noise_rng.uniform(1.0 - e, 1.0 + e) : 1.0);
        p.vy = obj.vy * (e > 0.0 ? noise_rng.uniform(1.0 - e, 1.0 + e) : 1.0);
        p.score = 1.0;
        scene.proposals.push_back(make_proposal(p));
    }
    return scene;
}

std::vector<std::string> save_scene(const Scene& scene, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::vector<std::string> files;
    for (const auto& frame : scene.window.frames) {
        const std::string name = frame_file_name(frame.frame_index);
        write_frame(dir / name, frame);
        files.push_back(name);
    }
    write_proposals(dir / "proposals.json", scene.proposals);
    files.push_back("proposals.json");

    nlohmann::json frames = nlohmann::json::array();
    for (std::size_t f = 0; f < scene.truth.size(); ++f) {
        nlohmann::json boxes = nlohmann::json::array();
        for (const auto& tb : scene.truth[f]) {
            auto j = box_to_json(tb.box);
            j["object_id"] = tb.object_id;
            boxes.push_back(j);
        }
        frames.push_back({{"t", scene.window.frames[f].frame_index}, {"boxes", boxes}});
    }
    std::ofstream out(dir / "truth_boxes.json", std::ios::trunc);
    if (!out) throw IoError("cannot open " + (dir / "truth_boxes.json").string());
    out << nlohmann::json{{"frames", frames}}.dump(2) << '\n';
    files.push_back("truth_boxes.json");
    return files;
}

Scene load_scene(const std::filesystem::path& dir) {
    Scene scene;
    scene.proposals = read_proposals(dir / "proposals.json");

    std::vector<std::filesystem::path> frame_files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".msfp") frame_files.push_back(entry.path());
    }
    std::sort(frame_files.begin(), frame_files.end());
    if (frame_files.empty()) throw IoError("no .msfp frame files in " + dir.string());
    for (const auto& path : frame_files) scene.window.frames.push_back(read_frame(path));
    std::sort(scene.window.frames.begin(), scene.window.frames.end(),
              [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });

    const auto truth_path = dir / "truth_boxes.json";
    if (std::filesystem::exists(truth_path)) {
        std::ifstream in(truth_path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("truth_boxes.json parse error: ") + e.what());
        }
        scene.truth.resize(scene.window.frames.size());
        for (const auto& jf : j.at("frames")) {
            const auto t = jf.at("t").get<std::int32_t>();
            for (std::size_t f = 0; f < scene.window.frames.size(); ++f) {
                if (scene.window.frames[f].frame_index != t) continue;
                for (const auto& jb : jf.at("boxes"))
                    scene.truth[f].push_back({jb.at("object_id").get<int>(), box_from_json(jb)});
            }
        }
    }
    return scene;
}

Scene tail_scene(const Scene& scene, std::int32_t length) {
    const auto total = static_cast<std::int32_t>(scene.window.frames.size());
    if (length < 1 || length > total)
        throw DomainError("tail_scene: invalid window length " + std::to_string(length));
    Scene out;
    out.proposals = scene.proposals;
    for (std::int32_t i = total - length; i < total; ++i) {
        PointCloudFrame frame = scene.window.frames[static_cast<std::size_t>(i)];
        frame.frame_index = i - (total - length) + 1;
        out.window.frames.push_back(std::move(frame));
        if (!scene.truth.empty()) out.truth.push_back(scene.truth[static_cast<std::size_t>(i)]);
    }
    return out;
}

namespace {

/// Recall split by the speed class of the nearest true box of each foreground
/// point's frame.
void class_recall(const Scene& scene, std::span<const std::vector<CylindricalRegion>> regions,
                  std::array<std::uint64_t, 4>& fg_counts, std::array<std::uint64_t, 4>& hits) {
    fg_counts = {};
    hits = {};
    std::vector<std::vector<const CylindricalRegion*>> by_frame(scene.window.frames.size());
    for (const auto& group : regions) {
        for (const auto& region : group) {
            for (std::size_t f = 0; f < scene.window.frames.size(); ++f) {
                if (scene.window.frames[f].frame_index == region.frame_index)
                    by_frame[f].push_back(&region);
            }
        }
    }
    for (std::size_t f = 0; f < scene.window.frames.size(); ++f) {
        const auto& frame = scene.window.frames[f];
        if (!frame.foreground_mask)
            throw MissingMask("frame " + std::to_string(frame.frame_index) + " has no mask");
        const auto& boxes = scene.truth.at(f);
        const auto& mask = *frame.foreground_mask;
        for (std::size_t i = 0; i < frame.points.size(); ++i) {
            if (!mask[i]) continue;
            const auto& pt = frame.points[i];
            double best = std::numeric_limits<double>::infinity();
            const TrueBox* owner = nullptr;
            for (const auto& tb : boxes) {
                const double dx = pt.x - tb.box.cx;
                const double dy = pt.y - tb.box.cy;
                const double d2 = dx * dx + dy * dy;
                if (d2 < best) {
                    best = d2;
                    owner = &tb;
                }
            }
            if (owner == nullptr) continue;
            const auto cls = static_cast<std::size_t>(speed_class(owner->box.vx, owner->box.vy));
            ++fg_counts[cls];
            for (const CylindricalRegion* region : by_frame[f]) {
                if (point_in_region(pt, *region)) {
                    ++hits[cls];
                    break;
                }
            }
        }
    }
}

}  // namespace

RecallExperimentResult recall_experiment(const Scene& scene, std::span<const double> gammas,
                                         std::span<const std::int32_t> windows) {
    RecallExperimentResult result;
    result.gammas.assign(gammas.begin(), gammas.end());
    result.window_lengths.assign(windows.begin(), windows.end());
    result.class_window = windows.empty()
                              ? 0
                              : *std::max_element(windows.begin(), windows.end());

    for (const double gamma : gammas) {
        std::vector<double> row;
        for (const std::int32_t T : windows) {
            const Scene sub = tail_scene(scene, T);
            std::vector<std::vector<CylindricalRegion>> regions;
            regions.reserve(sub.proposals.size());
            for (std::size_t p = 0; p < sub.proposals.size(); ++p)
                regions.push_back(
                    propagate(sub.proposals[p], {gamma, T}, static_cast<std::int32_t>(p)));
            row.push_back(evaluate_recall(sub.window, regions, gamma).overall);

            // One class row per gamma, taken the first time the largest
            // window comes up (guards against duplicate window entries).
            if (T == result.class_window && result.by_class.size() == result.overall.size()) {
                std::array<std::uint64_t, 4> fg{}, hits{};
                class_recall(sub, regions, fg, hits);
                std::array<double, 4> rates{};
                for (std::size_t c = 0; c < 4; ++c)
                    rates[c] = fg[c] == 0 ? 1.0
                                          : static_cast<double>(hits[c]) /
                                                static_cast<double>(fg[c]);
                result.by_class.push_back(rates);
                result.class_foreground = fg;
            }
        }
        result.overall.push_back(std::move(row));
    }
    return result;
}

RecallExperimentResult recall_experiment(const SceneConfig& config,
                                         std::span<const double> gammas,
                                         std::span<const std::int32_t> windows) {
    return recall_experiment(generate(config), gammas, windows);
}

std::string recall_overall_csv(const RecallExperimentResult& result) {
    std::string csv = "gamma";
    for (const auto T : result.window_lengths) csv += ",T" + std::to_string(T);
    csv += "\n";
    for (std::size_t g = 0; g < result.gammas.size(); ++g) {
        csv += std::to_string(result.gammas[g]);
        for (const double v : result.overall[g]) csv += "," + std::to_string(v);
        csv += "\n";
    }
    return csv;
}

std::string recall_by_class_csv(const RecallExperimentResult& result) {
    std::string csv = "gamma,stationary,slow,medium,fast\n";
    for (std::size_t g = 0; g < result.gammas.size(); ++g) {
        csv += std::to_string(result.gammas[g]);
        for (const double v : result.by_class[g]) csv += "," + std::to_string(v);
        csv += "\n";
    }
    return csv;
}

}  // namespace seqfuse
