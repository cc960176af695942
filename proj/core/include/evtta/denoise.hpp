#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "evtta/representation.hpp"

namespace evtta {

/// Source-domain statistics of per-window active pixel counts: means and
/// sample standard deviations (n-1) of (N_pos, N_neg) and their Pearson
/// correlation.
struct RatioStats {
    double mu_pos = 0.0;
    double mu_neg = 0.0;
    double sigma_pos = 0.0;
    double sigma_neg = 0.0;
    double rho = 0.0;
};

enum class RatioFormula {
    as_printed,    // sigma_pos^2 scaled by R^2 in the radicand
    geary_hinkley, // standard form; T(R) is approximately standard normal
};

struct HypothesisConfig {
    double mu_thres = 0.25;
    double cdf_hi = 0.9;
    double cdf_lo = 0.1;
    RatioFormula formula = RatioFormula::geary_hinkley;
};

enum class BurstKind { clean, positive, negative };

const char* burst_kind_name(BurstKind kind);

struct BurstVerdict {
    BurstKind kind = BurstKind::clean;
    double z_statistic = 0.0; // sqrt(N) * batch_mean / batch_std
    double batch_mean = 0.0;  // mean of transformed ratios
    double batch_std = 0.0;   // sample std (n-1) of transformed ratios
};

/// Fits RatioStats from per-window representations via rep_stats. Throws
/// NumericError with fewer than 2 samples or when either count has zero
/// variance.
RatioStats fit_ratio_stats(const std::vector<RepTensor>& windows);

/// Count-pair variant of fit_ratio_stats, pairs are (N_pos, N_neg).
RatioStats fit_ratio_stats_counts(const std::vector<std::pair<double, double>>& counts);

/// Maps the count ratio R = N_pos/N_neg to an approximately standard normal
/// statistic under the fitted source stats. Throws NumericError when the
/// radicand is not positive.
double transform_ratio(double r, const RatioStats& stats, RatioFormula formula);

/// Standard normal CDF via the complementary error function.
double normal_cdf(double x);

/// Batch-level two-sided shift test on the transformed ratios of the anchor
/// windows. Positive verdict needs batch_mean > mu_thres and
/// Phi(sqrt(N)|mean - mu_thres|/std) > cdf_hi; the negative side mirrors it
/// around -mu_thres. Zero-count channels enter the ratio as count 1 so R
/// stays finite. Throws ValidationError for N < 2 and NumericError when the
/// batch std is zero.
BurstVerdict detect_burst(const std::vector<RepTensor>& anchors, const RatioStats& stats,
                          const HypothesisConfig& config);

/// Zeroes active pixels of the noisy channel that have no active pixel in the
/// opposite channel within Chebyshev distance radius (distance 0 counts).
/// The opposite channel is returned unmodified.
RepTensor spatial_mask(const RepTensor& rep, int noisy_channel, int radius);

struct DenoiseResult {
    std::vector<RepTensor> anchors;
    BurstVerdict verdict;
};

/// detect_burst, then spatial_mask on the burst channel of every anchor when
/// the verdict is not Clean. Clean batches are returned unchanged.
DenoiseResult conditional_denoise(std::vector<RepTensor> anchors, const RatioStats& stats,
                                  const HypothesisConfig& config, int radius = 1);

std::string ratio_stats_to_json(const RatioStats& stats);
RatioStats ratio_stats_from_json(const std::string& json_text);

} // namespace evtta
