// Command-line front end: corpus generation, corruption, the two-step
// denoising pipeline, pose estimation, metric reports, the denoising
// ablation grid and noise statistics.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "posebench/harness.hpp"
#include "posebench/stages.hpp"

namespace {

struct GlobalOptions {
    std::string config_path;
    std::string out_dir;
    bool seed_set = false;
    std::uint64_t seed = 0;
    bool workers_set = false;
    int workers = 1;
};

posebench::ExperimentConfig resolve_config(const GlobalOptions& opt) {
    posebench::ExperimentConfig cfg =
        opt.config_path.empty() ? posebench::default_config()
                                : posebench::load_config(opt.config_path);
    if (opt.seed_set) cfg.seed = opt.seed;
    if (opt.workers_set) cfg.workers = opt.workers;
    if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
    posebench::validate_config(cfg);
    return cfg;
}

std::vector<double> parse_fractions(const std::string& spec) {
    std::vector<double> out;
    std::string token;
    std::istringstream ss(spec);
    while (std::getline(ss, token, ',')) {
        try {
            out.push_back(std::stod(token));
        } catch (const std::exception&) {
            throw posebench::ConfigError("fractions: cannot parse '" + token + "'");
        }
    }
    if (out.empty()) throw posebench::ConfigError("fractions: empty list");
    return out;
}

}  // namespace

int run_cli(int argc, char** argv) {
    using namespace posebench;

    CLI::App app{"synthetic RGB-D 6D pose benchmark with two-step depth denoising"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions opt;
    app.add_option("--config", opt.config_path, "JSON experiment config")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", opt.seed, "override the experiment seed")
        ->each([&](const std::string&) { opt.seed_set = true; });
    app.add_option("--out", opt.out_dir, "override the output directory");
    app.add_option("--workers", opt.workers, "worker thread count")
        ->each([&](const std::string&) { opt.workers_set = true; });

    auto* simulate = app.add_subcommand("simulate", "render the clean scene corpus");
    auto* corrupt = app.add_subcommand("corrupt", "inject sensor noise into the clean corpus");
    auto* denoise =
        app.add_subcommand("denoise", "run the two-step denoising pipeline on the test split");
    auto* estimate = app.add_subcommand("estimate", "fit poses from the denoised patches");
    auto* evaluate = app.add_subcommand("evaluate", "score estimated poses against ground truth");
    auto* ablate = app.add_subcommand("ablate", "run the full denoising ablation grid");
    auto* fractions =
        app.add_subcommand("fractions", "sweep the calibration training fraction");
    auto* stats = app.add_subcommand("stats", "depth reprojection-error statistics");

    std::string fraction_list = "0,0.25,0.5,1";
    fractions->add_option("--list", fraction_list, "comma-separated fractions of the train split");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg = resolve_config(opt);
        const std::string root = cfg.output_dir;

        if (simulate->parsed()) {
            cmd_simulate(cfg, root);
            std::printf("wrote %d clean scenes to %s/clean\n", cfg.scene_count, root.c_str());
        } else if (corrupt->parsed()) {
            cmd_corrupt(cfg, root);
            std::printf("wrote %d corrupted scenes to %s/noisy\n", cfg.scene_count,
                        root.c_str());
        } else if (denoise->parsed()) {
            cmd_denoise(cfg, root);
            std::printf("wrote denoised patches to %s/denoised\n", root.c_str());
        } else if (estimate->parsed()) {
            cmd_estimate(cfg, root);
            std::printf("wrote pose estimates to %s/poses.json\n", root.c_str());
        } else if (evaluate->parsed()) {
            cmd_evaluate(cfg, root);
            std::printf("wrote metric report to %s/report.csv\n", root.c_str());
        } else if (ablate->parsed()) {
            AblationResult result = run_ablation(cfg);
            write_text_file(root + "/ablation.csv", ablation_csv(result));
            json records = json::array();
            for (const auto& rec : result.records)
                records.push_back(instance_record_json(rec));
            write_text_file(root + "/ablation_instances.json", records.dump(2) + "\n");
            json calib = json::array();
            for (const auto& [cls, model] : result.calibrations)
                calib.push_back(calibration_to_json(model));
            write_text_file(root + "/calibration.json", calib.dump(2) + "\n");
            for (const auto& cell : result.cells)
                write_text_file(root + "/ablation_cells/" + cell.cell.tag() + ".csv",
                                metric_report_csv(cell.report));
            std::printf("%s", ablation_csv(result).c_str());
        } else if (fractions->parsed()) {
            auto rows = run_real_fraction_study(cfg, parse_fractions(fraction_list));
            write_text_file(root + "/fractions.csv", fractions_csv(rows));
            std::printf("%s", fractions_csv(rows).c_str());
        } else if (stats->parsed()) {
            NoiseStatsResult result = run_noise_stats(cfg);
            write_text_file(root + "/noise_histogram.csv", "");
            write_histogram_csv(result.pooled.histogram, root + "/noise_histogram.csv");
            write_text_file(root + "/noise_stats.json", noise_stats_json(result).dump(2) + "\n");
            std::printf("%s\n", noise_stats_json(result).dump(2).c_str());
        }
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
