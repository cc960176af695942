#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evtta/events.hpp"
#include "evtta/synth.hpp"

namespace evtta {

/// Headline distribution shift: 4x playback speed plus a negative-polarity
/// noise burst sized to roughly triple the negative event count.
ShiftSpec default_target_shift();

/// Generation recipe for one dataset tree:
///   root/source/train, root/source/val, root/target
/// Every split holds packed event files plus a manifest.json; a
/// classification target split also stores a per-event noise mask beside
/// each sample. With regression set, samples are oriented scenes labeled by
/// a continuous angle and the per-class counts are read as split totals.
struct DatasetSpec {
    int classes = 10;
    int train_per_class = 200;
    int val_per_class = 50;
    int target_per_class = 50;
    Resolution res{32, 32};
    std::uint64_t duration_us = 100000;
    ShiftSpec source_shift{};
    ShiftSpec target_shift = default_target_shift();
    std::uint64_t seed = 0;
    bool regression = false;
};

struct LoadedSample {
    EventStream stream;
    std::vector<std::uint8_t> noise_mask; // empty when the split carries no masks
    double angle = 0.0;                   // regression splits only
};

struct LoadedSplit {
    std::vector<LoadedSample> samples; // manifest order (class-major)
    ShiftSpec shift;
    int classes = 0;
    Resolution res{};
    std::uint64_t duration_us = 0;
    bool regression = false;
};

/// Writes all three splits under root. Deterministic: the same spec always
/// produces byte-identical files. Filesystem failures surface as ParseError
/// naming the path.
void generate_dataset(const DatasetSpec& spec, const std::filesystem::path& root);

/// Reads one split directory written by generate_dataset. Throws
/// ValidationError when the directory or manifest is missing (pointing at
/// gen-data), ParseError on corrupt files.
LoadedSplit load_split(const std::filesystem::path& dir);

/// Class-balanced index subset in ascending order: count split as evenly as
/// possible across classes (earlier class ids absorb the remainder). count
/// equal to labels.size() returns every index. Throws ValidationError when
/// count is zero, exceeds the dataset, or a class runs out of samples.
std::vector<std::size_t> stratified_subset(const std::vector<int>& labels, int classes,
                                           std::size_t count);

const char* burst_polarity_name(BurstPolarity polarity);
BurstPolarity burst_polarity_from_name(const std::string& name);

} // namespace evtta
