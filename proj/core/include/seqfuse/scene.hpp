#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "seqfuse/propagation.hpp"
#include "seqfuse/types.hpp"

namespace seqfuse {

/// Velocity bands in meters per frame-unit (treated 1:1 as m/s).
enum class SpeedClass : int { Stationary = 0, Slow = 1, Medium = 2, Fast = 3 };

[[nodiscard]] SpeedClass speed_class(double vx, double vy);
[[nodiscard]] const char* to_string(SpeedClass c);

struct ObjectConfig {
    double w{2.0}, l{4.0}, h{1.8};
    double cx{0.0}, cy{0.0}, cz{1.0};  // center at frame 1
    double yaw{0.0};
    double vx{0.0}, vy{0.0};           // meters per frame
    double velocity_jitter{0.0};       // per-frame uniform(-j, j) added to each step
    int points_per_frame{100};
};

struct SceneConfig {
    std::uint64_t seed{1};
    std::int32_t frames{8};
    double extent{60.0};  // scene occupies [-extent, extent]^2
    std::vector<ObjectConfig> objects;
    int clutter_points_per_frame{0};
    double velocity_estimate_noise{0.0};  // relative fraction; estimates are
                                          // scaled by uniform(1-e, 1+e) per axis
};

[[nodiscard]] std::string scene_config_to_json(const SceneConfig& config);
[[nodiscard]] SceneConfig scene_config_from_json(const std::string& text);
[[nodiscard]] SceneConfig read_scene_config(const std::filesystem::path& path);

struct TrueBox {
    int object_id{0};
    Proposal box;  // carries the true base velocity
};

struct Scene {
    SequenceWindow window;
    std::vector<Proposal> proposals;         // current-frame boxes, noisy velocity estimates
    std::vector<std::vector<TrueBox>> truth; // aligned with window.frames
};

/// Deterministic generation: object points sampled uniformly on the box's four
/// vertical faces and top, clutter uniform in the extent, foreground mask exact
/// by construction. Coordinates are quantized to f32 so in-memory scenes match
/// their on-disk form bit for bit.
[[nodiscard]] Scene generate(const SceneConfig& config);

/// Writes frame_%04d.msfp files, proposals.json and truth_boxes.json.
[[nodiscard]] std::vector<std::string> save_scene(const Scene& scene,
                                                  const std::filesystem::path& dir);
[[nodiscard]] Scene load_scene(const std::filesystem::path& dir);

/// Last `length` frames reindexed to 1..length; truth follows.
[[nodiscard]] Scene tail_scene(const Scene& scene, std::int32_t length);

struct RecallExperimentResult {
    std::vector<double> gammas;
    std::vector<std::int32_t> window_lengths;
    std::vector<std::vector<double>> overall;          // [gamma][window]
    std::vector<std::array<double, 4>> by_class;       // [gamma][SpeedClass], at class_window
    std::int32_t class_window{0};
    std::array<std::uint64_t, 4> class_foreground{};   // denominators at class_window
};

/// Recall of foreground points over every (gamma, window length) pair, using
/// the stored (possibly corrupted) velocity estimates. The speed-class
/// breakdown attributes each foreground point to the nearest true box of its
/// frame and is evaluated at the largest requested window.
[[nodiscard]] RecallExperimentResult recall_experiment(const Scene& scene,
                                                       std::span<const double> gammas,
                                                       std::span<const std::int32_t> windows);
[[nodiscard]] RecallExperimentResult recall_experiment(const SceneConfig& config,
                                                       std::span<const double> gammas,
                                                       std::span<const std::int32_t> windows);

[[nodiscard]] std::string recall_overall_csv(const RecallExperimentResult& result);
[[nodiscard]] std::string recall_by_class_csv(const RecallExperimentResult& result);

}  // namespace seqfuse
