#include "evtta/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "evtta/binio.hpp"
#include "evtta/errors.hpp"
#include "evtta/rng.hpp"

namespace evtta {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr char kMaskMagic[5] = "MSK0";

// Split ids keep the three scene-seed streams disjoint.
enum : std::uint64_t { kTrainSplit = 0, kValSplit = 1, kTargetSplit = 2 };

std::string sample_name(int label, int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "c%02d_%04d.evt", label, index);
    return buf;
}

json shift_to_json(const ShiftSpec& shift) {
    json j;
    j["speed_factor"] = shift.speed_factor;
    j["burst"] = burst_polarity_name(shift.burst);
    j["burst_rate"] = shift.burst_rate;
    j["drop_rate"] = shift.drop_rate;
    return j;
}

ShiftSpec shift_from_json(const json& j) {
    ShiftSpec shift;
    shift.speed_factor = j.at("speed_factor").get<double>();
    shift.burst = burst_polarity_from_name(j.at("burst").get<std::string>());
    shift.burst_rate = j.at("burst_rate").get<double>();
    shift.drop_rate = j.at("drop_rate").get<double>();
    return shift;
}

std::string mask_to_bytes(const std::vector<std::uint8_t>& mask) {
    std::string out;
    for (char c : kMaskMagic) {
        if (c != '\0') out.push_back(c);
    }
    put_u64(out, mask.size());
    for (std::uint8_t m : mask) put_u8(out, m);
    return out;
}

std::vector<std::uint8_t> mask_from_bytes(const std::string& bytes, const std::string& path) {
    ByteReader reader(byte_view(bytes));
    reader.expect_magic(kMaskMagic);
    const std::uint64_t count = reader.get_u64();
    if (count != reader.remaining())
        throw ParseError("mask file " + path + " announces " + std::to_string(count) +
                         " entries but holds " + std::to_string(reader.remaining()));
    std::vector<std::uint8_t> mask(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint8_t m = reader.get_u8();
        if (m > 1)
            throw ParseError("mask file " + path + ": flag " + std::to_string(int(m)) +
                             " is not 0 or 1");
        mask[i] = m;
    }
    return mask;
}

void write_split(const fs::path& dir, const std::string& split_name, const DatasetSpec& spec,
                 const ShiftSpec& shift, int per_class, std::uint64_t split_id,
                 bool with_masks) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ParseError("cannot create directory " + dir.string() + ": " + ec.message());

    json manifest;
    manifest["split"] = split_name;
    manifest["regression"] = spec.regression;
    manifest["classes"] = spec.regression ? 0 : spec.classes;
    manifest["resolution"] = {{"height", spec.res.height}, {"width", spec.res.width}};
    manifest["duration_us"] = spec.duration_us;
    manifest["shift"] = shift_to_json(shift);
    manifest["entries"] = json::array();

    if (spec.regression) {
        Rng angle_rng(derive_seed(spec.seed, {seed_tag::scene, split_id}));
        for (int i = 0; i < per_class; ++i) {
            const double angle = angle_rng.uniform_real(0.0, 360.0);
            const std::uint64_t scene_seed =
                derive_seed(spec.seed, {seed_tag::scene, split_id,
                                        static_cast<std::uint64_t>(i)});
            char buf[32];
            std::snprintf(buf, sizeof(buf), "r%05d.evt", i);
            const EventStream sample =
                synth_scene_angle(angle, shift, spec.res, spec.duration_us, scene_seed);
            write_file((dir / buf).string(), serialize_events(sample, EventFormat::packed));
            manifest["entries"].push_back({{"file", buf}, {"angle", angle}});
        }
    } else {
        for (int label = 0; label < spec.classes; ++label) {
            for (int i = 0; i < per_class; ++i) {
                const std::uint64_t scene_seed =
                    derive_seed(spec.seed, {seed_tag::scene, split_id,
                                            static_cast<std::uint64_t>(label),
                                            static_cast<std::uint64_t>(i)});
                const std::string name = sample_name(label, i);
                if (with_masks) {
                    const MaskedStream sample = synth_scene_masked(
                        label, spec.classes, shift, spec.res, spec.duration_us, scene_seed);
                    write_file((dir / name).string(),
                               serialize_events(sample.stream, EventFormat::packed));
                    fs::path mask_path = dir / name;
                    mask_path.replace_extension(".msk");
                    write_file(mask_path.string(), mask_to_bytes(sample.noise_mask));
                } else {
                    const EventStream sample = synth_scene(label, spec.classes, shift, spec.res,
                                                           spec.duration_us, scene_seed);
                    write_file((dir / name).string(),
                               serialize_events(sample, EventFormat::packed));
                }
                manifest["entries"].push_back({{"file", name}, {"label", label}});
            }
        }
    }
    write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

} // namespace

ShiftSpec default_target_shift() {
    ShiftSpec shift;
    shift.speed_factor = 4.0;
    shift.burst = BurstPolarity::negative;
    shift.burst_rate = 0.27;
    return shift;
}

const char* burst_polarity_name(BurstPolarity polarity) {
    switch (polarity) {
    case BurstPolarity::none: return "none";
    case BurstPolarity::positive: return "positive";
    case BurstPolarity::negative: return "negative";
    }
    throw ValidationError("unknown burst polarity");
}

BurstPolarity burst_polarity_from_name(const std::string& name) {
    if (name == "none") return BurstPolarity::none;
    if (name == "positive") return BurstPolarity::positive;
    if (name == "negative") return BurstPolarity::negative;
    throw ValidationError("unknown burst polarity \"" + name +
                          "\" (expected none, positive or negative)");
}

void generate_dataset(const DatasetSpec& spec, const fs::path& root) {
    if (!spec.regression && spec.classes < 1)
        throw ValidationError("dataset needs at least one class");
    if (spec.train_per_class < 1 || spec.val_per_class < 1 || spec.target_per_class < 1)
        throw ValidationError("per-class sample counts must be positive");

    write_split(root / "source" / "train", "source/train", spec, spec.source_shift,
                spec.train_per_class, kTrainSplit, false);
    write_split(root / "source" / "val", "source/val", spec, spec.source_shift,
                spec.val_per_class, kValSplit, false);
    write_split(root / "target", "target", spec, spec.target_shift, spec.target_per_class,
                kTargetSplit, true);
}

LoadedSplit load_split(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path))
        throw ValidationError("no dataset manifest at " + manifest_path.string() +
                              "; generate the dataset first (gen-data)");

    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path.string()));
    } catch (const json::exception& e) {
        throw ParseError("manifest " + manifest_path.string() + ": " + e.what());
    }

    LoadedSplit split;
    try {
        split.regression = manifest.value("regression", false);
        split.classes = manifest.at("classes").get<int>();
        split.res.height = manifest.at("resolution").at("height").get<std::uint16_t>();
        split.res.width = manifest.at("resolution").at("width").get<std::uint16_t>();
        split.duration_us = manifest.at("duration_us").get<std::uint64_t>();
        split.shift = shift_from_json(manifest.at("shift"));

        for (const json& entry : manifest.at("entries")) {
            const std::string name = entry.at("file").get<std::string>();
            int label = 0;
            double angle = 0.0;
            if (split.regression) {
                angle = entry.at("angle").get<double>();
            } else {
                label = entry.at("label").get<int>();
                if (label < 0 || label >= split.classes)
                    throw ValidationError("manifest entry " + name + " has label " +
                                          std::to_string(label) + " outside [0, " +
                                          std::to_string(split.classes) + ")");
            }

            LoadedSample sample;
            sample.angle = angle;
            const std::string bytes = read_file((dir / name).string());
            sample.stream = parse_events(byte_view(bytes), EventFormat::packed);
            if (sample.stream.res.height != split.res.height ||
                sample.stream.res.width != split.res.width)
                throw ParseError("sample " + name + " resolution disagrees with manifest");
            // Files store the event span; restore the generated window so
            // slicing sees the full stream duration.
            sample.stream.t_begin = 0;
            sample.stream.t_end = split.duration_us;
            if (!split.regression) sample.stream.label = label;

            fs::path mask_path = dir / name;
            mask_path.replace_extension(".msk");
            if (fs::exists(mask_path)) {
                sample.noise_mask = mask_from_bytes(read_file(mask_path.string()),
                                                    mask_path.string());
                if (sample.noise_mask.size() != sample.stream.events.size())
                    throw ParseError("mask " + mask_path.string() + " covers " +
                                     std::to_string(sample.noise_mask.size()) +
                                     " events, stream has " +
                                     std::to_string(sample.stream.events.size()));
            }
            split.samples.push_back(std::move(sample));
        }
    } catch (const json::exception& e) {
        throw ParseError("manifest " + manifest_path.string() + ": " + e.what());
    }
    if (split.samples.empty())
        throw ValidationError("split " + dir.string() + " lists no samples");
    return split;
}

std::vector<std::size_t> stratified_subset(const std::vector<int>& labels, int classes,
                                           std::size_t count) {
    if (count == 0) throw ValidationError("subset size must be positive");
    if (count > labels.size())
        throw ValidationError("subset of " + std::to_string(count) +
                              " samples requested from a dataset of " +
                              std::to_string(labels.size()));
    if (classes < 1) throw ValidationError("subset needs at least one class");

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= classes)
            throw ValidationError("label " + std::to_string(labels[i]) + " outside [0, " +
                                  std::to_string(classes) + ")");
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }

    const std::size_t base = count / static_cast<std::size_t>(classes);
    const std::size_t extra = count % static_cast<std::size_t>(classes);
    std::vector<std::size_t> picked;
    for (int c = 0; c < classes; ++c) {
        const std::size_t want = base + (static_cast<std::size_t>(c) < extra ? 1 : 0);
        const auto& pool = by_class[static_cast<std::size_t>(c)];
        if (want > pool.size())
            throw ValidationError("class " + std::to_string(c) + " holds " +
                                  std::to_string(pool.size()) + " samples, subset wants " +
                                  std::to_string(want));
        picked.insert(picked.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(want));
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

} // namespace evtta
