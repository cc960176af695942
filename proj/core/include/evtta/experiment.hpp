#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evtta/adapt.hpp"
#include "evtta/dataset.hpp"
#include "evtta/denoise.hpp"
#include "evtta/train.hpp"

namespace evtta {

/// Optimizer presets for adaptation runs. Reports echo these values in their
/// header so a result file is self-describing.
enum class Preset { large, small, regression };

struct PresetValues {
    std::string name;
    double lr = 0.0;
    int batch_size = 0;
};

PresetValues preset_values(Preset preset);
Preset preset_from_name(const std::string& name);

/// Full recipe for one experiment: dataset, representation, architecture,
/// optimizer preset, adaptation settings and the evaluation grid.
/// Serializable to/from JSON; missing JSON keys keep their defaults.
struct ExperimentConfig {
    DatasetSpec dataset{};
    RepKind representation = RepKind::binary;
    RepParams rep_params{};
    std::string architecture = "conv16-32"; // the one supported trunk
    Preset preset = Preset::large;
    TrainOptions train{};
    AdaptConfig adapt{};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<BaselineMode> baselines{BaselineMode::none, BaselineMode::tent,
                                        BaselineMode::evtta};
    std::vector<Protocol> protocols{Protocol::offline, Protocol::online};
    std::size_t limit_samples = 0; // 0 keeps the full target split
    std::string output_dir;        // empty selects <root>/runs
};

ExperimentConfig default_experiment_config();
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);

/// Throws ValidationError on an inconsistent config (empty seeds, empty grid,
/// unknown architecture, preset/head mismatch).
void validate_experiment_config(const ExperimentConfig& config);

/// Command-line overrides; every engaged field replaces the config value.
struct CliOverrides {
    std::optional<std::uint64_t> seed; // replaces seeds list, dataset and train seeds
    std::optional<std::size_t> limit_samples;
    std::optional<std::string> denoise_mode; // off | as-printed | geary-hinkley
    std::optional<RepKind> representation;
    std::optional<AnchorPolicy> anchor_policy;
    std::optional<BaselineMode> baseline; // restricts the grid to one row
};

void apply_overrides(ExperimentConfig& config, const CliOverrides& overrides);

/// Dataset root resolution: explicit path if non-empty, else $EVTTA_DATA_DIR,
/// else error.
std::filesystem::path resolve_data_root(const std::string& flag_value);

const char* baseline_name(BaselineMode mode);
BaselineMode baseline_from_name(const std::string& name);
const char* protocol_name(Protocol protocol);
Protocol protocol_from_name(const std::string& name);
const char* anchor_policy_name(AnchorPolicy policy);
AnchorPolicy anchor_policy_from_name(const std::string& name);

struct TrainSourceResult {
    double val_accuracy = 0.0; // RMSE for the regression preset
    double final_loss = 0.0;
    std::filesystem::path checkpoint_path;
    std::filesystem::path stats_path;
};

/// gen-data: writes source/train, source/val and target splits under root.
void cmd_gen_data(const ExperimentConfig& config, const std::filesystem::path& root);

/// train-source: trains the source model on one window per training stream,
/// fits the count-ratio statistics on those same windows, and writes
/// checkpoint + stats + metadata under root/models.
TrainSourceResult cmd_train_source(const ExperimentConfig& config,
                                   const std::filesystem::path& root);

/// adapt: runs the configured baselines x protocols x seeds grid on the
/// target split, writes report.json plus one metrics CSV per cell into the
/// output directory, and returns the report text.
std::string cmd_adapt(const ExperimentConfig& config, const std::filesystem::path& root,
                      int threads = 1);

/// sweep-samples: one adaptation run per sample count per seed at the
/// configured baseline/protocol; writes sweep.csv and a report; returns the
/// CSV text.
std::string cmd_sweep_samples(const ExperimentConfig& config, const std::filesystem::path& root,
                              const std::vector<std::size_t>& counts, int threads = 1);

/// denoise-eval: burst-detection verdict counts and pixel-level noise
/// removal / signal retention of the spatial mask against the injection
/// masks, for both ratio-transform formulas; writes and returns
/// denoise_eval.json.
std::string cmd_denoise_eval(const ExperimentConfig& config, const std::filesystem::path& root);

} // namespace evtta
