// Command-line harness: scene generation, pooling verification, latency
// benchmarks, recall experiments and full forward runs. Every command writes
// its outputs plus one manifest.json into --out.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seqfuse/errors.hpp"
#include "seqfuse/frame_io.hpp"
#include "seqfuse/manifest.hpp"
#include "seqfuse/pipeline.hpp"
#include "seqfuse/pooling.hpp"
#include "seqfuse/scene.hpp"
#include "seqfuse/version.hpp"

namespace fs = std::filesystem;
using namespace seqfuse;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyMismatch = 2;
constexpr int kExitConfig = 3;
constexpr int kExitIo = 4;

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

void finish(const fs::path& out_dir, RunManifest manifest, const Stopwatch& watch) {
    manifest.version = kVersion;
    manifest.wall_clock_seconds = watch.seconds();
    write_manifest(out_dir, manifest);
}

int cmd_gen(const fs::path& config_path, const fs::path& out_dir, std::uint64_t seed_override,
            bool has_seed_override) {
    Stopwatch watch;
    const std::string config_text = read_text(config_path);
    SceneConfig config = scene_config_from_json(config_text);
    if (has_seed_override) config.seed = seed_override;

    fs::create_directories(out_dir);
    const Scene scene = generate(config);
    RunManifest manifest;
    manifest.command = "gen";
    manifest.config_hash = fnv1a64_hex(config_text);
    manifest.seed = config.seed;
    manifest.outputs = save_scene(scene, out_dir);
    finish(out_dir, std::move(manifest), watch);
    std::cout << "wrote " << scene.window.frames.size() << " frames, "
              << scene.proposals.size() << " proposals to " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_verify(const fs::path& scene_dir, const fs::path& out_dir, std::uint64_t seed,
               double gamma, std::int32_t k_samples, double voxel_size,
               std::int32_t points_per_voxel, bool dump_pooled) {
    Stopwatch watch;
    const Scene scene = load_scene(scene_dir);
    const VerifyReport report = verify_pooling(scene.window, scene.proposals, gamma, k_samples,
                                               voxel_size, points_per_voxel, seed);
    const std::string json = verify_report_to_json(report);
    std::cout << json << "\n";

    fs::create_directories(out_dir);
    write_text(out_dir / "verify_report.json", json + "\n");
    RunManifest manifest;
    manifest.command = "verify";
    manifest.config_hash = fnv1a64_hex(scene_dir.string());
    manifest.seed = seed;
    manifest.outputs = {"verify_report.json"};

    if (dump_pooled) {
        const auto T = static_cast<std::int32_t>(scene.window.frames.size());
        std::vector<std::vector<CylindricalRegion>> regions;
        for (std::size_t p = 0; p < scene.proposals.size(); ++p)
            regions.push_back(propagate(scene.proposals[p], {gamma, T},
                                        static_cast<std::int32_t>(p)));
        std::vector<VoxelGrid> grids;
        for (const auto& frame : scene.window.frames)
            grids.push_back(build_grid(frame, voxel_size, points_per_voxel));
        const auto pooled =
            pool_optimized(scene.window, grids, regions, scene.proposals, k_samples, seed);
        write_text(out_dir / "pooled.json", pooled_proposals_to_json(pooled) + "\n");
        manifest.outputs.push_back("pooled.json");
    }
    finish(out_dir, std::move(manifest), watch);
    return report.passed() ? kExitOk : kExitVerifyMismatch;
}

int cmd_bench(const std::vector<std::size_t>& sizes, int m_proposals, std::int32_t k_samples,
              int reps, double voxel_size, std::int32_t points_per_voxel, std::uint64_t seed,
              const fs::path& out_dir) {
    Stopwatch watch;
    const BenchReport report = bench_pooling(sizes, m_proposals, k_samples, reps, voxel_size,
                                             points_per_voxel, seed);
    const std::string csv = bench_report_to_csv(report);
    std::cout << csv;

    fs::create_directories(out_dir);
    write_text(out_dir / "bench.csv", csv);
    RunManifest manifest;
    manifest.command = "bench";
    manifest.config_hash = fnv1a64_hex(csv.substr(0, csv.find('\n')));
    manifest.seed = seed;
    manifest.outputs = {"bench.csv"};
    finish(out_dir, std::move(manifest), watch);
    return kExitOk;
}

int cmd_recall(const fs::path& scene_dir, const std::vector<double>& gammas,
               const std::vector<std::int32_t>& windows, const fs::path& out_dir) {
    Stopwatch watch;
    const Scene scene = load_scene(scene_dir);
    const auto result = recall_experiment(scene, gammas, windows);

    const std::string overall_csv = recall_overall_csv(result);
    const std::string class_csv = recall_by_class_csv(result);
    std::cout << overall_csv << "\n" << class_csv;

    // One RecallReport JSON per (gamma, window) pair for downstream tooling.
    std::string reports = "[\n";
    bool first = true;
    for (std::size_t g = 0; g < result.gammas.size(); ++g) {
        for (std::size_t w = 0; w < result.window_lengths.size(); ++w) {
            const Scene sub = tail_scene(scene, result.window_lengths[w]);
            std::vector<std::vector<CylindricalRegion>> regions;
            for (std::size_t p = 0; p < sub.proposals.size(); ++p)
                regions.push_back(propagate(sub.proposals[p],
                                            {result.gammas[g], result.window_lengths[w]},
                                            static_cast<std::int32_t>(p)));
            const auto report = evaluate_recall(sub.window, regions, result.gammas[g]);
            if (!first) reports += ",\n";
            first = false;
            reports += recall_report_to_json(report);
        }
    }
    reports += "\n]\n";

    fs::create_directories(out_dir);
    write_text(out_dir / "recall_overall.csv", overall_csv);
    write_text(out_dir / "recall_by_class.csv", class_csv);
    write_text(out_dir / "recall_reports.json", reports);
    RunManifest manifest;
    manifest.command = "recall";
    manifest.config_hash = fnv1a64_hex(scene_dir.string());
    manifest.seed = 0;
    manifest.outputs = {"recall_overall.csv", "recall_by_class.csv", "recall_reports.json"};
    finish(out_dir, std::move(manifest), watch);
    return kExitOk;
}

int cmd_run(const fs::path& scene_dir, const fs::path& weights_path,
            const fs::path& pipeline_config_path, double gamma, std::int32_t k_samples,
            double voxel_size, std::int32_t points_per_voxel, std::uint64_t seed, int workers,
            bool permute_points, const fs::path& out_dir) {
    Stopwatch watch;
    const Scene scene = load_scene(scene_dir);
    const auto T = static_cast<std::int32_t>(scene.window.frames.size());

    PipelineConfig config;
    if (!pipeline_config_path.empty())
        config = pipeline_config_from_json(read_text(pipeline_config_path));
    config.gamma = gamma;
    config.k_samples = k_samples;
    config.voxel_size = voxel_size;
    config.max_points_per_voxel = points_per_voxel;

    PipelineWeights weights;
    if (!weights_path.empty()) {
        weights = read_pipeline_weights(weights_path);
        config.d_model = weights.d_model;
        config.heads = weights.heads;
        config.blocks = static_cast<int>(weights.blocks.size());
    } else {
        weights = seeded_pipeline_weights(config, T, seed);
    }

    const PipelineResult result = run_pipeline(scene, config, weights, seed, workers,
                                               permute_points);
    const std::string json = pipeline_result_to_json(result, config, T);

    fs::create_directories(out_dir);
    write_text(out_dir / "run_output.json", json + "\n");
    std::cout << json << "\n";
    RunManifest manifest;
    manifest.command = "run";
    manifest.config_hash = fnv1a64_hex(pipeline_config_to_json(config));
    manifest.seed = seed;
    manifest.outputs = {"run_output.json"};
    finish(out_dir, std::move(manifest), watch);
    return kExitOk;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
    if (out.empty()) throw ConfigError("empty size list");
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    if (out.empty()) throw ConfigError("empty value list");
    return out;
}

}  // namespace

int run_main(int argc, char** argv) {
    CLI::App app{"Multi-frame point-cloud region pooling harness"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    double gamma = 1.1;
    double voxel_size = 0.4;
    std::int32_t points_per_voxel = 32;
    std::int32_t points_per_proposal = 128;
    std::string out_dir = "out";

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic scene from a config file");
    std::string gen_config;
    bool gen_seed_set = false;
    gen->add_option("--config", gen_config, "Scene config JSON")->required();
    gen->add_option("--out", out_dir, "Output directory");
    gen->add_option("--seed", seed, "Override the config seed")
        ->each([&](const std::string&) { gen_seed_set = true; });

    // verify
    auto* verify = app.add_subcommand("verify", "Cross-check optimized pooling against the naive oracle");
    std::string verify_scene;
    bool dump_pooled = false;
    verify->add_option("--scene", verify_scene, "Scene directory")->required();
    verify->add_option("--seed", seed, "Sampling seed");
    verify->add_option("--gamma", gamma, "Region growth factor");
    verify->add_option("--points-per-proposal", points_per_proposal, "K points per (proposal, frame)");
    verify->add_option("--voxel-size", voxel_size, "Voxel edge length (m)");
    verify->add_option("--points-per-voxel", points_per_voxel, "Intra-voxel retention cap k");
    verify->add_flag("--dump-pooled", dump_pooled, "Also write the sampled points as pooled.json");
    verify->add_option("--out", out_dir, "Output directory");

    // bench
    auto* bench = app.add_subcommand("bench", "Pooling latency benchmark");
    std::string bench_sizes = "100000,200000,400000,800000,1600000";
    int bench_m = 128;
    int bench_reps = 5;
    bench->add_option("--n", bench_sizes, "Comma-separated point counts");
    bench->add_option("--m", bench_m, "Proposal count");
    bench->add_option("--reps", bench_reps, "Repetitions per size (median reported)");
    bench->add_option("--points-per-proposal", points_per_proposal, "K points per proposal");
    bench->add_option("--voxel-size", voxel_size, "Voxel edge length (m)");
    bench->add_option("--points-per-voxel", points_per_voxel, "Intra-voxel retention cap k");
    bench->add_option("--seed", seed, "Scene seed");
    bench->add_option("--out", out_dir, "Output directory");

    // recall
    auto* recall = app.add_subcommand("recall", "Foreground recall over gamma and window length");
    std::string recall_scene;
    std::string recall_gammas = "1.0,1.1";
    std::string recall_frames = "4,8,16";
    recall->add_option("--scene", recall_scene, "Scene directory")->required();
    recall->add_option("--gamma", recall_gammas, "Comma-separated gamma values");
    recall->add_option("--frames", recall_frames, "Comma-separated window lengths");
    recall->add_option("--out", out_dir, "Output directory");

    // run
    auto* run = app.add_subcommand("run", "Full forward pipeline over a scene");
    std::string run_scene;
    std::string run_weights;
    std::string run_pipeline_config;
    int run_workers = 1;
    bool permute_points = false;
    run->add_option("--scene", run_scene, "Scene directory")->required();
    run->add_option("--weights", run_weights, "Pipeline weights JSON (default: seeded)");
    run->add_option("--pipeline-config", run_pipeline_config, "Pipeline config JSON");
    run->add_option("--gamma", gamma, "Region growth factor");
    run->add_option("--points-per-proposal", points_per_proposal, "K points per (proposal, frame)");
    run->add_option("--voxel-size", voxel_size, "Voxel edge length (m)");
    run->add_option("--points-per-voxel", points_per_voxel, "Intra-voxel retention cap k");
    run->add_option("--seed", seed, "Seed for sampling and default weights");
    run->add_option("--workers", run_workers, "Worker threads");
    run->add_flag("--permute-points", permute_points,
                  "Debug: shuffle pooled points before encoding (outputs must not change)");
    run->add_option("--out", out_dir, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen(gen_config, out_dir, seed, gen_seed_set);
        if (verify->parsed())
            return cmd_verify(verify_scene, out_dir, seed, gamma, points_per_proposal,
                              voxel_size, points_per_voxel, dump_pooled);
        if (bench->parsed())
            return cmd_bench(parse_size_list(bench_sizes), bench_m, points_per_proposal,
                             bench_reps, voxel_size, points_per_voxel, seed, out_dir);
        if (recall->parsed()) {
            const std::vector<double> gammas = parse_double_list(recall_gammas);
            std::vector<std::int32_t> windows;
            for (const auto n : parse_size_list(recall_frames))
                windows.push_back(static_cast<std::int32_t>(n));
            return cmd_recall(recall_scene, gammas, windows, out_dir);
        }
        if (run->parsed())
            return cmd_run(run_scene, run_weights, run_pipeline_config, gamma,
                           points_per_proposal, voxel_size, points_per_voxel, seed, run_workers,
                           permute_points, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}

int main(int argc, char** argv) {
    try {
        return run_main(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (...) {
        std::cerr << "error: unknown failure\n";
        return 1;
    }
}
