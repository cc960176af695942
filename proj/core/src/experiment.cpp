#include "evtta/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "evtta/binio.hpp"
#include "evtta/errors.hpp"
#include "evtta/model.hpp"
#include "evtta/representation.hpp"
#include "evtta/rng.hpp"

namespace evtta {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

json shift_json(const ShiftSpec& shift) {
    json j;
    j["speed_factor"] = shift.speed_factor;
    j["burst"] = burst_polarity_name(shift.burst);
    j["burst_rate"] = shift.burst_rate;
    j["drop_rate"] = shift.drop_rate;
    return j;
}

ShiftSpec shift_from(const json& j, const ShiftSpec& base) {
    ShiftSpec shift = base;
    shift.speed_factor = j.value("speed_factor", shift.speed_factor);
    if (j.contains("burst")) shift.burst = burst_polarity_from_name(j.at("burst"));
    shift.burst_rate = j.value("burst_rate", shift.burst_rate);
    shift.drop_rate = j.value("drop_rate", shift.drop_rate);
    return shift;
}

const char* formula_name(RatioFormula formula) {
    return formula == RatioFormula::as_printed ? "as-printed" : "geary-hinkley";
}

RatioFormula formula_from_name(const std::string& name) {
    if (name == "as-printed") return RatioFormula::as_printed;
    if (name == "geary-hinkley") return RatioFormula::geary_hinkley;
    throw ValidationError("unknown ratio formula \"" + name +
                          "\" (expected as-printed or geary-hinkley)");
}

const char* policy_name(InconsistencyPolicy policy) {
    return policy == InconsistencyPolicy::ignore ? "ignore" : "maximize";
}

InconsistencyPolicy policy_from(const std::string& name) {
    if (name == "ignore") return InconsistencyPolicy::ignore;
    if (name == "maximize") return InconsistencyPolicy::maximize;
    throw ValidationError("unknown inconsistency policy \"" + name +
                          "\" (expected ignore or maximize)");
}

std::string model_stem(const ExperimentConfig& config) {
    std::string stem = rep_kind_name(config.representation);
    if (config.preset == Preset::regression) stem += "-reg";
    return stem;
}

fs::path models_dir(const fs::path& root) { return root / "models"; }

fs::path output_dir(const ExperimentConfig& config, const fs::path& root) {
    return config.output_dir.empty() ? root / "runs" : fs::path(config.output_dir);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ParseError("cannot create directory " + dir.string() + ": " + ec.message());
}

/// Window slice plus the index range it covers, so per-event masks can be
/// sliced in parallel with the events.
struct WindowCut {
    EventStream slice;
    std::size_t lo = 0;
    std::size_t hi = 0;
};

WindowCut cut_window(const EventStream& stream, std::uint64_t window_us, std::uint64_t seed) {
    if (stream.duration() < window_us)
        throw ValidationError("stream shorter than the slice window");
    Rng rng(seed);
    const std::uint64_t start = rng.uniform_u64(stream.t_begin, stream.t_end - window_us);
    const std::uint64_t stop = start + window_us;

    WindowCut cut;
    cut.slice.res = stream.res;
    cut.slice.t_begin = start;
    cut.slice.t_end = stop;
    cut.slice.label = stream.label;
    const auto& ev = stream.events;
    std::size_t i = 0;
    while (i < ev.size() && ev[i].t < start) ++i;
    cut.lo = i;
    while (i < ev.size() && ev[i].t <= stop) {
        cut.slice.events.push_back(ev[i]);
        ++i;
    }
    cut.hi = i;
    return cut;
}

struct SourceArtifacts {
    Model model;
    RatioStats stats;
    double val_accuracy = 0.0;
};

SourceArtifacts load_source_artifacts(const ExperimentConfig& config, const fs::path& root) {
    const std::string stem = model_stem(config);
    const fs::path ckpt = models_dir(root) / (stem + ".ckpt");
    const fs::path stats_path = models_dir(root) / (stem + ".stats.json");
    const fs::path meta_path = models_dir(root) / (stem + ".meta.json");
    if (!fs::exists(ckpt))
        throw ValidationError("no checkpoint at " + ckpt.string() +
                              "; run train-source for this configuration first");
    SourceArtifacts art{Model::load(read_file(ckpt.string())),
                        ratio_stats_from_json(read_file(stats_path.string())), 0.0};
    try {
        const json meta = json::parse(read_file(meta_path.string()));
        art.val_accuracy = meta.at("val_accuracy").get<double>();
    } catch (const json::exception& e) {
        throw ParseError("metadata " + meta_path.string() + ": " + e.what());
    }
    return art;
}

/// One grid cell: baseline x protocol x seed.
struct CellSpec {
    BaselineMode baseline = BaselineMode::evtta;
    Protocol protocol = Protocol::offline;
    std::uint64_t seed = 0;
};

struct CellResult {
    double metric = 0.0; // accuracy, or RMSE for regression
    std::vector<MetricsRow> metrics;
};

AdaptConfig cell_adapt_config(const ExperimentConfig& config, const CellSpec& cell) {
    AdaptConfig cfg = config.adapt;
    cfg.baseline_mode = cell.baseline;
    cfg.protocol = cell.protocol;
    cfg.seed = cell.seed;
    cfg.representation = config.representation;
    cfg.rep_params = config.rep_params;
    const PresetValues preset = preset_values(config.preset);
    cfg.lr = preset.lr;
    cfg.batch_size = preset.batch_size;
    return cfg;
}

std::vector<std::size_t> shuffled_order(const std::vector<std::size_t>& subset,
                                        std::uint64_t seed) {
    std::vector<std::size_t> order = subset;
    Rng rng(derive_seed(seed, {seed_tag::shuffle}));
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.index(i)]);
    return order;
}

CellResult run_cell(const Model& base, const LoadedSplit& target,
                    const std::vector<std::size_t>& subset, const ExperimentConfig& config,
                    const RatioStats& stats, const CellSpec& cell) {
    Model model = base.clone();
    const AdaptConfig cfg = cell_adapt_config(config, cell);
    const std::vector<std::size_t> order = shuffled_order(subset, cell.seed);

    std::vector<const EventStream*> dataset;
    dataset.reserve(order.size());
    for (std::size_t idx : order) dataset.push_back(&target.samples[idx].stream);

    RunOutcome outcome;
    if (target.regression) {
        std::vector<double> targets;
        targets.reserve(order.size());
        for (std::size_t idx : order) targets.push_back(target.samples[idx].angle);
        outcome = adapt_regression(model, dataset, targets, cfg);
    } else {
        outcome = cell.protocol == Protocol::offline ? run_offline(model, dataset, cfg, stats)
                                                     : run_online(model, dataset, cfg, stats);
    }
    return CellResult{outcome.accuracy, std::move(outcome.metrics)};
}

/// Runs all cells, distributing them over worker threads. Results land in a
/// fixed slot per cell, so the report is independent of the thread count.
std::vector<CellResult> run_cells(const Model& base, const LoadedSplit& target,
                                  const std::vector<std::size_t>& subset,
                                  const ExperimentConfig& config, const RatioStats& stats,
                                  const std::vector<CellSpec>& cells, int threads) {
    std::vector<CellResult> results(cells.size());
    if (threads < 1) throw ValidationError("thread count must be positive");
    const int workers = std::min<int>(threads, static_cast<int>(cells.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            results[i] = run_cell(base, target, subset, config, stats, cells[i]);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1))
                    results[i] = run_cell(base, target, subset, config, stats, cells[i]);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
    return results;
}

json preset_json(Preset preset) {
    const PresetValues values = preset_values(preset);
    json j;
    j["name"] = values.name;
    j["lr"] = values.lr;
    j["batch_size"] = values.batch_size;
    return j;
}

json report_header(const ExperimentConfig& config, const LoadedSplit& target,
                   const char* kind) {
    json j;
    j["kind"] = kind;
    j["preset"] = preset_json(config.preset);
    j["representation"] = rep_kind_name(config.representation);
    j["architecture"] = config.architecture;
    j["target_shift"] = shift_json(target.shift);
    j["metric"] = target.regression ? "rmse" : "accuracy";
    json seeds = json::array();
    for (std::uint64_t s : config.seeds) seeds.push_back(s);
    j["seeds"] = seeds;
    return j;
}

std::string cell_csv_name(const CellSpec& cell) {
    return std::string("metrics_") + baseline_name(cell.baseline) + "_" +
           protocol_name(cell.protocol) + "_seed" + std::to_string(cell.seed) + ".csv";
}

std::vector<std::size_t> target_subset(const ExperimentConfig& config,
                                       const LoadedSplit& target) {
    std::vector<std::size_t> all(target.samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    if (config.limit_samples == 0 || config.limit_samples == target.samples.size()) return all;
    if (target.regression) {
        if (config.limit_samples > target.samples.size())
            throw ValidationError("subset of " + std::to_string(config.limit_samples) +
                                  " samples requested from a dataset of " +
                                  std::to_string(target.samples.size()));
        all.resize(config.limit_samples);
        return all;
    }
    std::vector<int> labels;
    labels.reserve(target.samples.size());
    for (const auto& s : target.samples) labels.push_back(*s.stream.label);
    return stratified_subset(labels, target.classes, config.limit_samples);
}

} // namespace

PresetValues preset_values(Preset preset) {
    switch (preset) {
    case Preset::large: return {"large", 0.00025, 64};
    case Preset::small: return {"small", 0.001, 128};
    case Preset::regression: return {"regression", 0.000025, 64};
    }
    throw ValidationError("unknown preset");
}

Preset preset_from_name(const std::string& name) {
    if (name == "large") return Preset::large;
    if (name == "small") return Preset::small;
    if (name == "regression") return Preset::regression;
    throw ValidationError("unknown preset \"" + name +
                          "\" (expected large, small or regression)");
}

const char* baseline_name(BaselineMode mode) {
    switch (mode) {
    case BaselineMode::none: return "none";
    case BaselineMode::tent: return "tent";
    case BaselineMode::evtta: return "evtta";
    }
    throw ValidationError("unknown baseline");
}

BaselineMode baseline_from_name(const std::string& name) {
    if (name == "none") return BaselineMode::none;
    if (name == "tent") return BaselineMode::tent;
    if (name == "evtta") return BaselineMode::evtta;
    throw ValidationError("unknown baseline \"" + name + "\" (expected none, tent or evtta)");
}

const char* protocol_name(Protocol protocol) {
    return protocol == Protocol::offline ? "offline" : "online";
}

Protocol protocol_from_name(const std::string& name) {
    if (name == "offline") return Protocol::offline;
    if (name == "online") return Protocol::online;
    throw ValidationError("unknown protocol \"" + name + "\" (expected offline or online)");
}

const char* anchor_policy_name(AnchorPolicy policy) {
    switch (policy) {
    case AnchorPolicy::random: return "random";
    case AnchorPolicy::min_entropy: return "min-entropy";
    case AnchorPolicy::majority_vote: return "majority-vote";
    }
    throw ValidationError("unknown anchor policy");
}

AnchorPolicy anchor_policy_from_name(const std::string& name) {
    if (name == "random") return AnchorPolicy::random;
    if (name == "min-entropy") return AnchorPolicy::min_entropy;
    if (name == "majority-vote") return AnchorPolicy::majority_vote;
    throw ValidationError("unknown anchor policy \"" + name +
                          "\" (expected random, min-entropy or majority-vote)");
}

ExperimentConfig default_experiment_config() { return ExperimentConfig{}; }

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    ExperimentConfig config;
    try {
        if (j.contains("dataset")) {
            const json& d = j.at("dataset");
            DatasetSpec& ds = config.dataset;
            ds.classes = d.value("classes", ds.classes);
            ds.train_per_class = d.value("train_per_class", ds.train_per_class);
            ds.val_per_class = d.value("val_per_class", ds.val_per_class);
            ds.target_per_class = d.value("target_per_class", ds.target_per_class);
            if (d.contains("resolution")) {
                ds.res.height = d.at("resolution").at("height").get<std::uint16_t>();
                ds.res.width = d.at("resolution").at("width").get<std::uint16_t>();
            }
            ds.duration_us = d.value("duration_us", ds.duration_us);
            if (d.contains("source_shift"))
                ds.source_shift = shift_from(d.at("source_shift"), ds.source_shift);
            if (d.contains("target_shift"))
                ds.target_shift = shift_from(d.at("target_shift"), ds.target_shift);
            ds.seed = d.value("seed", ds.seed);
            ds.regression = d.value("regression", ds.regression);
        }
        if (j.contains("representation"))
            config.representation = rep_kind_from_name(j.at("representation"));
        if (j.contains("rep_params")) {
            const json& r = j.at("rep_params");
            config.rep_params.tau_us = r.value("tau_us", config.rep_params.tau_us);
            config.rep_params.dist_radius = r.value("dist_radius", config.rep_params.dist_radius);
            config.rep_params.dist_min_neighbors =
                r.value("dist_min_neighbors", config.rep_params.dist_min_neighbors);
        }
        config.architecture = j.value("architecture", config.architecture);
        if (j.contains("preset")) config.preset = preset_from_name(j.at("preset"));
        if (j.contains("train")) {
            const json& t = j.at("train");
            config.train.epochs = t.value("epochs", config.train.epochs);
            config.train.lr = t.value("lr", config.train.lr);
            config.train.batch_size = t.value("batch_size", config.train.batch_size);
            config.train.seed = t.value("seed", config.train.seed);
        }
        if (j.contains("adapt")) {
            const json& a = j.at("adapt");
            AdaptConfig& ac = config.adapt;
            ac.k = a.value("k", ac.k);
            ac.window_us = a.value("window_us", ac.window_us);
            if (a.contains("anchor_policy"))
                ac.anchor_policy = anchor_policy_from_name(a.at("anchor_policy"));
            if (a.contains("inconsistency_policy"))
                ac.inconsistency_policy = policy_from(a.at("inconsistency_policy"));
            ac.denoise = a.value("denoise", ac.denoise);
            ac.mask_radius = a.value("mask_radius", ac.mask_radius);
            if (a.contains("hypothesis")) {
                const json& h = a.at("hypothesis");
                ac.hypothesis.mu_thres = h.value("mu_thres", ac.hypothesis.mu_thres);
                ac.hypothesis.cdf_hi = h.value("cdf_hi", ac.hypothesis.cdf_hi);
                ac.hypothesis.cdf_lo = h.value("cdf_lo", ac.hypothesis.cdf_lo);
                if (h.contains("formula"))
                    ac.hypothesis.formula = formula_from_name(h.at("formula"));
            }
        }
        if (j.contains("seeds")) {
            config.seeds.clear();
            for (const json& s : j.at("seeds")) config.seeds.push_back(s.get<std::uint64_t>());
        }
        if (j.contains("baselines")) {
            config.baselines.clear();
            for (const json& b : j.at("baselines"))
                config.baselines.push_back(baseline_from_name(b.get<std::string>()));
        }
        if (j.contains("protocols")) {
            config.protocols.clear();
            for (const json& p : j.at("protocols"))
                config.protocols.push_back(protocol_from_name(p.get<std::string>()));
        }
        config.limit_samples = j.value("limit_samples", config.limit_samples);
        config.output_dir = j.value("output_dir", config.output_dir);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    validate_experiment_config(config);
    return config;
}

std::string config_to_json(const ExperimentConfig& config) {
    json j;
    json d;
    d["classes"] = config.dataset.classes;
    d["train_per_class"] = config.dataset.train_per_class;
    d["val_per_class"] = config.dataset.val_per_class;
    d["target_per_class"] = config.dataset.target_per_class;
    d["resolution"] = {{"height", config.dataset.res.height},
                       {"width", config.dataset.res.width}};
    d["duration_us"] = config.dataset.duration_us;
    d["source_shift"] = shift_json(config.dataset.source_shift);
    d["target_shift"] = shift_json(config.dataset.target_shift);
    d["seed"] = config.dataset.seed;
    d["regression"] = config.dataset.regression;
    j["dataset"] = d;
    j["representation"] = rep_kind_name(config.representation);
    j["rep_params"] = {{"tau_us", config.rep_params.tau_us},
                       {"dist_radius", config.rep_params.dist_radius},
                       {"dist_min_neighbors", config.rep_params.dist_min_neighbors}};
    j["architecture"] = config.architecture;
    j["preset"] = preset_values(config.preset).name;
    j["train"] = {{"epochs", config.train.epochs},
                  {"lr", config.train.lr},
                  {"batch_size", config.train.batch_size},
                  {"seed", config.train.seed}};
    j["adapt"] = {{"k", config.adapt.k},
                  {"window_us", config.adapt.window_us},
                  {"anchor_policy", anchor_policy_name(config.adapt.anchor_policy)},
                  {"inconsistency_policy", policy_name(config.adapt.inconsistency_policy)},
                  {"denoise", config.adapt.denoise},
                  {"mask_radius", config.adapt.mask_radius},
                  {"hypothesis",
                   {{"mu_thres", config.adapt.hypothesis.mu_thres},
                    {"cdf_hi", config.adapt.hypothesis.cdf_hi},
                    {"cdf_lo", config.adapt.hypothesis.cdf_lo},
                    {"formula", formula_name(config.adapt.hypothesis.formula)}}}};
    json seeds = json::array();
    for (std::uint64_t s : config.seeds) seeds.push_back(s);
    j["seeds"] = seeds;
    json baselines = json::array();
    for (BaselineMode b : config.baselines) baselines.push_back(baseline_name(b));
    j["baselines"] = baselines;
    json protocols = json::array();
    for (Protocol p : config.protocols) protocols.push_back(protocol_name(p));
    j["protocols"] = protocols;
    j["limit_samples"] = config.limit_samples;
    j["output_dir"] = config.output_dir;
    return j.dump(2) + "\n";
}

void validate_experiment_config(const ExperimentConfig& config) {
    if (config.seeds.empty()) throw ValidationError("seeds list must not be empty");
    if (config.baselines.empty()) throw ValidationError("baselines list must not be empty");
    if (config.protocols.empty()) throw ValidationError("protocols list must not be empty");
    if (config.architecture != "conv16-32")
        throw ValidationError("unknown architecture \"" + config.architecture +
                              "\" (this build provides conv16-32)");
    if (config.preset == Preset::regression && !config.dataset.regression)
        throw ValidationError("the regression preset needs dataset.regression = true");
    if (config.preset != Preset::regression && config.dataset.regression)
        throw ValidationError("a regression dataset needs the regression preset");
    if (config.train.epochs < 1) throw ValidationError("train.epochs must be positive");
    if (config.train.lr <= 0.0) throw ValidationError("train.lr must be positive");
    if (config.train.batch_size < 1) throw ValidationError("train.batch_size must be positive");
}

void apply_overrides(ExperimentConfig& config, const CliOverrides& overrides) {
    if (overrides.seed) {
        config.seeds = {*overrides.seed};
        config.dataset.seed = *overrides.seed;
        config.train.seed = *overrides.seed;
    }
    if (overrides.limit_samples) config.limit_samples = *overrides.limit_samples;
    if (overrides.denoise_mode) {
        const std::string& mode = *overrides.denoise_mode;
        if (mode == "off") {
            config.adapt.denoise = false;
        } else {
            config.adapt.denoise = true;
            config.adapt.hypothesis.formula = formula_from_name(mode);
        }
    }
    if (overrides.representation) config.representation = *overrides.representation;
    if (overrides.anchor_policy) config.adapt.anchor_policy = *overrides.anchor_policy;
    if (overrides.baseline) config.baselines = {*overrides.baseline};
    validate_experiment_config(config);
}

fs::path resolve_data_root(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("EVTTA_DATA_DIR"); env && *env) return env;
    throw ValidationError("no dataset root: pass --data-dir or set EVTTA_DATA_DIR");
}

void cmd_gen_data(const ExperimentConfig& config, const fs::path& root) {
    validate_experiment_config(config);
    generate_dataset(config.dataset, root);
}

TrainSourceResult cmd_train_source(const ExperimentConfig& config, const fs::path& root) {
    validate_experiment_config(config);
    const LoadedSplit train_split = load_split(root / "source" / "train");
    const LoadedSplit val_split = load_split(root / "source" / "val");
    if (train_split.regression != config.dataset.regression)
        throw ValidationError("dataset on disk and config disagree about regression");

    const auto window_rep = [&](const EventStream& stream, std::uint64_t split_id,
                                std::size_t index) {
        const SliceSet set = random_slices(
            stream, 1, config.adapt.window_us,
            derive_seed(config.train.seed, {seed_tag::window, split_id, index}));
        return build(set.slices[0], config.representation, config.rep_params);
    };

    TrainOptions options = config.train;
    const std::uint64_t init_seed = derive_seed(config.train.seed, {seed_tag::init});
    TrainResult trained;
    Model model;
    std::vector<RepTensor> stat_windows;

    if (config.dataset.regression) {
        std::vector<ScalarRep> train_set, val_set;
        for (std::size_t i = 0; i < train_split.samples.size(); ++i) {
            train_set.push_back({window_rep(train_split.samples[i].stream, 0, i),
                                 train_split.samples[i].angle});
            stat_windows.push_back(train_set.back().rep);
        }
        for (std::size_t i = 0; i < val_split.samples.size(); ++i)
            val_set.push_back({window_rep(val_split.samples[i].stream, 1, i),
                               val_split.samples[i].angle});
        model = make_regressor(init_seed);
        trained = train_source_regression(model, train_set, val_set, options);
    } else {
        std::vector<LabeledRep> train_set, val_set;
        for (std::size_t i = 0; i < train_split.samples.size(); ++i) {
            train_set.push_back({window_rep(train_split.samples[i].stream, 0, i),
                                 *train_split.samples[i].stream.label});
            stat_windows.push_back(train_set.back().rep);
        }
        for (std::size_t i = 0; i < val_split.samples.size(); ++i)
            val_set.push_back({window_rep(val_split.samples[i].stream, 1, i),
                               *val_split.samples[i].stream.label});
        model = make_classifier(train_split.classes, init_seed);
        trained = train_source(model, train_set, val_set, options);
    }

    const RatioStats stats = fit_ratio_stats(stat_windows);

    ensure_dir(models_dir(root));
    const std::string stem = model_stem(config);
    TrainSourceResult result;
    result.val_accuracy = trained.val_accuracy;
    result.final_loss = trained.final_loss;
    result.checkpoint_path = models_dir(root) / (stem + ".ckpt");
    result.stats_path = models_dir(root) / (stem + ".stats.json");
    write_file(result.checkpoint_path.string(), model.save());
    write_file(result.stats_path.string(), ratio_stats_to_json(stats));

    json meta;
    meta["representation"] = rep_kind_name(config.representation);
    meta["architecture"] = config.architecture;
    meta["val_accuracy"] = trained.val_accuracy;
    meta["final_loss"] = trained.final_loss;
    meta["epochs"] = options.epochs;
    meta["train_seed"] = options.seed;
    write_file((models_dir(root) / (stem + ".meta.json")).string(), meta.dump(2) + "\n");
    return result;
}

std::string cmd_adapt(const ExperimentConfig& config, const fs::path& root, int threads) {
    validate_experiment_config(config);
    const auto t0 = std::chrono::steady_clock::now();

    const LoadedSplit target = load_split(root / "target");
    if (target.regression != config.dataset.regression)
        throw ValidationError("target split on disk and config disagree about regression");
    const SourceArtifacts source = load_source_artifacts(config, root);
    const std::vector<std::size_t> subset = target_subset(config, target);

    std::vector<CellSpec> cells;
    for (BaselineMode baseline : config.baselines)
        for (Protocol protocol : config.protocols)
            for (std::uint64_t seed : config.seeds) cells.push_back({baseline, protocol, seed});

    const std::vector<CellResult> results =
        run_cells(source.model, target, subset, config, source.stats, cells, threads);

    const fs::path out = output_dir(config, root);
    ensure_dir(out);

    json report = report_header(config, target, "adapt");
    report["source_val_accuracy"] = source.val_accuracy;
    report["samples_used"] = subset.size();
    report["denoise_mode"] =
        config.adapt.denoise ? formula_name(config.adapt.hypothesis.formula) : "off";
    report["anchor_policy"] = anchor_policy_name(config.adapt.anchor_policy);
    report["inconsistency_policy"] = policy_name(config.adapt.inconsistency_policy);

    json cells_json = json::array();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::string csv_name = cell_csv_name(cells[i]);
        write_file((out / csv_name).string(), metrics_to_csv(results[i].metrics));
        json cell;
        cell["baseline"] = baseline_name(cells[i].baseline);
        cell["protocol"] = protocol_name(cells[i].protocol);
        cell["seed"] = cells[i].seed;
        cell["status"] = "ok";
        cell[target.regression ? "rmse" : "accuracy"] = results[i].metric;
        cell["metrics_csv"] = csv_name;
        cells_json.push_back(cell);
    }
    report["cells"] = cells_json;

    json summary = json::array();
    for (BaselineMode baseline : config.baselines)
        for (Protocol protocol : config.protocols) {
            double sum = 0.0;
            int n = 0;
            for (std::size_t i = 0; i < cells.size(); ++i)
                if (cells[i].baseline == baseline && cells[i].protocol == protocol) {
                    sum += results[i].metric;
                    ++n;
                }
            json row;
            row["baseline"] = baseline_name(baseline);
            row["protocol"] = protocol_name(protocol);
            row[target.regression ? "mean_rmse" : "mean_accuracy"] =
                sum / static_cast<double>(n);
            summary.push_back(row);
        }
    report["summary"] = summary;

    const auto t1 = std::chrono::steady_clock::now();
    report["wall_clock_seconds"] = std::chrono::duration<double>(t1 - t0).count();
    const std::string text = report.dump(2) + "\n";
    write_file((out / "report.json").string(), text);
    return text;
}

std::string cmd_sweep_samples(const ExperimentConfig& config, const fs::path& root,
                              const std::vector<std::size_t>& counts, int threads) {
    validate_experiment_config(config);
    if (counts.empty()) throw ValidationError("sweep needs at least one sample count");
    if (config.dataset.regression)
        throw ValidationError("the sample sweep runs on classification targets");
    const auto t0 = std::chrono::steady_clock::now();

    const LoadedSplit target = load_split(root / "target");
    if (target.regression)
        throw ValidationError("the sample sweep runs on classification targets");
    const SourceArtifacts source = load_source_artifacts(config, root);

    std::vector<int> labels;
    for (const auto& s : target.samples) labels.push_back(*s.stream.label);

    // One cell per count x seed at the configured baseline/protocol; the
    // subsets are validated up front so a bad count fails before any work.
    const BaselineMode baseline = config.baselines.front();
    const Protocol protocol = config.protocols.front();
    std::vector<std::vector<std::size_t>> subsets;
    for (std::size_t count : counts)
        subsets.push_back(stratified_subset(labels, target.classes, count));

    std::vector<std::vector<double>> per_count(counts.size());
    for (std::size_t ci = 0; ci < counts.size(); ++ci) {
        std::vector<CellSpec> cells;
        for (std::uint64_t seed : config.seeds) cells.push_back({baseline, protocol, seed});
        const std::vector<CellResult> results =
            run_cells(source.model, target, subsets[ci], config, source.stats, cells, threads);
        for (const CellResult& r : results) per_count[ci].push_back(r.metric);
    }

    std::string csv = "count,mean_accuracy";
    for (std::uint64_t seed : config.seeds) csv += ",seed_" + std::to_string(seed);
    csv += "\n";
    for (std::size_t ci = 0; ci < counts.size(); ++ci) {
        double sum = 0.0;
        for (double a : per_count[ci]) sum += a;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%zu,%.9g", counts[ci],
                      sum / static_cast<double>(per_count[ci].size()));
        csv += buf;
        for (double a : per_count[ci]) {
            std::snprintf(buf, sizeof(buf), ",%.9g", a);
            csv += buf;
        }
        csv += "\n";
    }

    const fs::path out = output_dir(config, root);
    ensure_dir(out);
    write_file((out / "sweep.csv").string(), csv);

    json report = report_header(config, target, "sweep-samples");
    report["baseline"] = baseline_name(baseline);
    report["protocol"] = protocol_name(protocol);
    json counts_json = json::array();
    for (std::size_t c : counts) counts_json.push_back(c);
    report["counts"] = counts_json;
    report["sweep_csv"] = "sweep.csv";
    const auto t1 = std::chrono::steady_clock::now();
    report["wall_clock_seconds"] = std::chrono::duration<double>(t1 - t0).count();
    write_file((out / "sweep_report.json").string(), report.dump(2) + "\n");
    return csv;
}

std::string cmd_denoise_eval(const ExperimentConfig& config, const fs::path& root) {
    validate_experiment_config(config);
    if (config.dataset.regression)
        throw ValidationError("denoise evaluation runs on classification targets");
    const auto t0 = std::chrono::steady_clock::now();

    const LoadedSplit target = load_split(root / "target");
    for (const auto& sample : target.samples)
        if (sample.noise_mask.empty())
            throw ValidationError("target split carries no injection masks; regenerate it "
                                  "with gen-data");
    const std::string stem = model_stem(config);
    const fs::path stats_path = models_dir(root) / (stem + ".stats.json");
    if (!fs::exists(stats_path))
        throw ValidationError("no ratio statistics at " + stats_path.string() +
                              "; run train-source for this configuration first");
    const RatioStats stats = ratio_stats_from_json(read_file(stats_path.string()));

    const std::uint64_t seed = config.seeds.front();
    std::vector<std::size_t> all(target.samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const std::vector<std::size_t> order = shuffled_order(all, seed);

    // One anchor window per sample; the event index span slices the mask.
    struct EvalWindow {
        RepTensor noisy;
        RepTensor signal;
    };
    std::vector<EvalWindow> windows;
    windows.reserve(order.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const LoadedSample& sample = target.samples[order[pos]];
        const WindowCut cut =
            cut_window(sample.stream, config.adapt.window_us,
                       derive_seed(seed, {seed_tag::window, static_cast<std::uint64_t>(pos)}));
        EventStream signal_only;
        signal_only.res = cut.slice.res;
        signal_only.t_begin = cut.slice.t_begin;
        signal_only.t_end = cut.slice.t_end;
        for (std::size_t e = cut.lo; e < cut.hi; ++e)
            if (!sample.noise_mask[e]) signal_only.events.push_back(sample.stream.events[e]);
        windows.push_back({build(cut.slice, config.representation, config.rep_params),
                           build(signal_only, config.representation, config.rep_params)});
    }

    json report = report_header(config, target, "denoise-eval");
    report["batch_size"] = preset_values(config.preset).batch_size;
    report["window_us"] = config.adapt.window_us;
    report["mask_radius"] = config.adapt.mask_radius;

    const int batch_size = preset_values(config.preset).batch_size;
    json formulas = json::array();
    for (RatioFormula formula : {RatioFormula::as_printed, RatioFormula::geary_hinkley}) {
        HypothesisConfig hypothesis = config.adapt.hypothesis;
        hypothesis.formula = formula;

        int verdict_counts[3] = {0, 0, 0};
        int batches = 0;
        int masked_batches = 0;
        int numeric_failures = 0;
        double noise_px = 0.0, noise_removed = 0.0, signal_px = 0.0, signal_kept = 0.0;

        for (std::size_t start = 0; start < windows.size();
             start += static_cast<std::size_t>(batch_size)) {
            const std::size_t stop =
                std::min(windows.size(), start + static_cast<std::size_t>(batch_size));
            if (stop - start < 2) break;
            std::vector<RepTensor> anchors;
            for (std::size_t i = start; i < stop; ++i) anchors.push_back(windows[i].noisy);
            ++batches;
            BurstVerdict verdict;
            try {
                verdict = detect_burst(anchors, stats, hypothesis);
            } catch (const NumericError&) {
                // The literal-form radicand can go negative on real batches;
                // count it instead of aborting so both columns always emit.
                ++numeric_failures;
                continue;
            }
            ++verdict_counts[static_cast<int>(verdict.kind)];
            if (verdict.kind == BurstKind::clean) continue;
            ++masked_batches;
            const int channel = verdict.kind == BurstKind::positive ? 0 : 1;
            for (std::size_t i = start; i < stop; ++i) {
                const RepTensor masked =
                    spatial_mask(windows[i].noisy, channel, config.adapt.mask_radius);
                const RepTensor& noisy = windows[i].noisy;
                const RepTensor& signal = windows[i].signal;
                for (int y = 0; y < noisy.height; ++y)
                    for (int x = 0; x < noisy.width; ++x) {
                        const bool active = noisy.at(y, x, channel) != 0.0;
                        const bool genuine = signal.at(y, x, channel) != 0.0;
                        const bool kept = masked.at(y, x, channel) != 0.0;
                        if (genuine) {
                            signal_px += 1.0;
                            if (kept) signal_kept += 1.0;
                        } else if (active) {
                            noise_px += 1.0;
                            if (!kept) noise_removed += 1.0;
                        }
                    }
            }
        }

        json block;
        block["formula"] = formula_name(formula);
        block["batches"] = batches;
        block["verdicts"] = {{"clean", verdict_counts[0]},
                             {"positive", verdict_counts[1]},
                             {"negative", verdict_counts[2]}};
        block["numeric_failures"] = numeric_failures;
        block["masked_batches"] = masked_batches;
        block["noise_pixels"] = noise_px;
        block["signal_pixels"] = signal_px;
        if (masked_batches > 0 && noise_px > 0.0 && signal_px > 0.0) {
            block["noise_pixel_removal"] = noise_removed / noise_px;
            block["signal_pixel_retention"] = signal_kept / signal_px;
        } else {
            block["noise_pixel_removal"] = nullptr;
            block["signal_pixel_retention"] = nullptr;
        }
        formulas.push_back(block);
    }
    report["formulas"] = formulas;

    const fs::path out = output_dir(config, root);
    ensure_dir(out);
    const auto t1 = std::chrono::steady_clock::now();
    report["wall_clock_seconds"] = std::chrono::duration<double>(t1 - t0).count();
    const std::string text = report.dump(2) + "\n";
    write_file((out / "denoise_eval.json").string(), text);
    return text;
}

} // namespace evtta
