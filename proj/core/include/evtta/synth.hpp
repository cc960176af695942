#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "evtta/events.hpp"

namespace evtta {

/// Stream plus a per-event flag marking injected noise (1) vs signal (0).
/// The flag vector is index-aligned with stream.events.
struct MaskedStream {
    EventStream stream;
    std::vector<std::uint8_t> noise_mask;
};

/// Renders a class-specific oscillating edge pattern as events, then applies
/// the shift: timestamps divided by speed_factor (event count preserved),
/// events dropped with probability drop_rate, and a uniform noise burst of
/// the requested polarity injected at burst_rate expected events per pixel
/// per stream window. Deterministic in (class_id, num_classes, shift, seed).
EventStream synth_scene(int class_id, int num_classes, const ShiftSpec& shift, Resolution res,
                        std::uint64_t duration_us, std::uint64_t seed);

/// synth_scene variant that also returns the injected-noise flags.
MaskedStream synth_scene_masked(int class_id, int num_classes, const ShiftSpec& shift,
                                Resolution res, std::uint64_t duration_us, std::uint64_t seed);

/// Continuous-label variant: a bar at the given orientation, for regression
/// targets. angle_deg is the ground-truth label.
EventStream synth_scene_angle(double angle_deg, const ShiftSpec& shift, Resolution res,
                              std::uint64_t duration_us, std::uint64_t seed);

/// Adds uniformly distributed single-polarity noise events. The injected
/// count is Poisson with mean rate * height * width, positions uniform over
/// the frame, timestamps uniform over [t_begin, t_end]. The returned mask
/// flags injected events in the merged stream.
MaskedStream inject_noise_burst(const EventStream& stream, BurstPolarity polarity, double rate,
                                std::uint64_t seed);

} // namespace evtta
