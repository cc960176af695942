#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evtta/binio.hpp"
#include "evtta/experiment.hpp"

using namespace evtta;

int main(int argc, char** argv) {
    CLI::App app{"Event-camera test-time adaptation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string data_dir;
    int threads = 1;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> limit_samples;
    std::optional<std::string> denoise_mode;
    std::optional<std::string> representation;
    std::optional<std::string> anchor_policy;
    std::optional<std::string> baseline;

    app.add_option("--config", config_path, "JSON experiment config file");
    app.add_option("--data-dir", data_dir, "dataset root (default: $EVTTA_DATA_DIR)");
    app.add_option("--seed", seed, "replaces the seed list and dataset/train seeds");
    app.add_option("--threads", threads, "worker threads for independent grid cells")
        ->check(CLI::PositiveNumber);
    app.add_option("--limit-samples", limit_samples,
                   "class-balanced subset size of the target split");
    app.add_option("--denoise-mode", denoise_mode,
                   "off, as-printed or geary-hinkley (non-off enables denoising)")
        ->check(CLI::IsMember({"off", "as-printed", "geary-hinkley"}));
    app.add_option("--representation", representation,
                   "binary, histogram, timestamp, timesurface, sorted or dist");
    app.add_option("--anchor-policy", anchor_policy, "random, min-entropy or majority-vote");
    app.add_option("--baseline", baseline, "restrict the grid to none, tent or evtta");

    auto* gen = app.add_subcommand("gen-data", "generate source train/val and target splits");
    auto* train = app.add_subcommand("train-source",
                                     "train the source model and fit count-ratio statistics");
    auto* adapt = app.add_subcommand("adapt", "run the baselines x protocols x seeds grid");
    auto* sweep = app.add_subcommand("sweep-samples",
                                     "adaptation accuracy as a function of sample count");
    std::vector<std::size_t> counts;
    sweep->add_option("--counts", counts, "comma-separated target sample counts")
        ->required()
        ->delimiter(',');
    auto* denoise = app.add_subcommand("denoise-eval",
                                       "burst verdicts and mask precision against "
                                       "injection ground truth");
    for (CLI::App* sub : {gen, train, adapt, sweep, denoise}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig config = config_path.empty()
                                      ? default_experiment_config()
                                      : config_from_json(read_file(config_path));
        CliOverrides overrides;
        overrides.seed = seed;
        overrides.limit_samples = limit_samples;
        overrides.denoise_mode = denoise_mode;
        if (representation) overrides.representation = rep_kind_from_name(*representation);
        if (anchor_policy) overrides.anchor_policy = anchor_policy_from_name(*anchor_policy);
        if (baseline) overrides.baseline = baseline_from_name(*baseline);
        apply_overrides(config, overrides);

        const std::filesystem::path root = resolve_data_root(data_dir);

        if (gen->parsed()) {
            cmd_gen_data(config, root);
            const auto& d = config.dataset;
            const int train_n = d.regression ? d.train_per_class : d.classes * d.train_per_class;
            const int val_n = d.regression ? d.val_per_class : d.classes * d.val_per_class;
            const int target_n =
                d.regression ? d.target_per_class : d.classes * d.target_per_class;
            std::printf("wrote %d train, %d val and %d target samples under %s\n", train_n,
                        val_n, target_n, root.string().c_str());
        } else if (train->parsed()) {
            const TrainSourceResult result = cmd_train_source(config, root);
            if (config.dataset.regression)
                std::printf("source val rmse: %.6g\n", result.val_accuracy);
            else
                std::printf("source val accuracy: %.6g\n", result.val_accuracy);
            std::printf("checkpoint: %s\nstats: %s\n", result.checkpoint_path.string().c_str(),
                        result.stats_path.string().c_str());
        } else if (adapt->parsed()) {
            std::cout << cmd_adapt(config, root, threads);
        } else if (sweep->parsed()) {
            std::cout << cmd_sweep_samples(config, root, counts, threads);
        } else if (denoise->parsed()) {
            std::cout << cmd_denoise_eval(config, root);
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
