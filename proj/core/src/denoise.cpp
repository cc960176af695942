#include "evtta/denoise.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "evtta/errors.hpp"

namespace evtta {

RatioStats fit_ratio_stats_counts(const std::vector<std::pair<double, double>>& counts) {
    const std::size_t n = counts.size();
    if (n < 2)
        throw NumericError("ratio statistics need at least 2 windows, got " + std::to_string(n));

    double sum_p = 0.0, sum_n = 0.0;
    for (const auto& [p, q] : counts) {
        sum_p += p;
        sum_n += q;
    }
    const double mu_p = sum_p / static_cast<double>(n);
    const double mu_n = sum_n / static_cast<double>(n);

    double ss_p = 0.0, ss_n = 0.0, ss_pn = 0.0;
    for (const auto& [p, q] : counts) {
        ss_p += (p - mu_p) * (p - mu_p);
        ss_n += (q - mu_n) * (q - mu_n);
        ss_pn += (p - mu_p) * (q - mu_n);
    }
    const double denom = static_cast<double>(n - 1);
    RatioStats stats;
    stats.mu_pos = mu_p;
    stats.mu_neg = mu_n;
    stats.sigma_pos = std::sqrt(ss_p / denom);
    stats.sigma_neg = std::sqrt(ss_n / denom);
    if (stats.sigma_pos == 0.0 || stats.sigma_neg == 0.0)
        throw NumericError("count variance is zero, ratio statistics are degenerate");
    stats.rho = (ss_pn / denom) / (stats.sigma_pos * stats.sigma_neg);
    return stats;
}

RatioStats fit_ratio_stats(const std::vector<RepTensor>& windows) {
    std::vector<std::pair<double, double>> counts;
    counts.reserve(windows.size());
    for (const RepTensor& w : windows) {
        const auto [pos, neg] = rep_stats(w);
        counts.push_back({static_cast<double>(pos), static_cast<double>(neg)});
    }
    return fit_ratio_stats_counts(counts);
}

double transform_ratio(double r, const RatioStats& stats, RatioFormula formula) {
    const double sp = stats.sigma_pos, sn = stats.sigma_neg;
    const double pos_term = formula == RatioFormula::as_printed ? sp * sp * r * r : sp * sp;
    const double radicand = pos_term - 2.0 * stats.rho * sp * sn * r + sn * sn * r * r;
    if (!(radicand > 0.0))
        throw NumericError("ratio transform radicand is not positive (" +
                           std::to_string(radicand) + ") at R=" + std::to_string(r));
    return (stats.mu_neg * r - stats.mu_pos) / std::sqrt(radicand);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730950488); }

BurstVerdict detect_burst(const std::vector<RepTensor>& anchors, const RatioStats& stats,
                          const HypothesisConfig& config) {
    const std::size_t n = anchors.size();
    if (n < 2)
        throw ValidationError("burst detection needs a batch of >= 2 anchors, got " +
                              std::to_string(n));

    std::vector<double> t_values;
    t_values.reserve(n);
    for (const RepTensor& a : anchors) {
        const auto [pos, neg] = rep_stats(a);
        const double r = std::max<double>(static_cast<double>(pos), 1.0) /
                         std::max<double>(static_cast<double>(neg), 1.0);
        t_values.push_back(transform_ratio(r, stats, config.formula));
    }

    double mean = 0.0;
    for (double t : t_values) mean += t;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double t : t_values) ss += (t - mean) * (t - mean);
    const double stdev = std::sqrt(ss / static_cast<double>(n - 1));
    if (stdev == 0.0)
        throw NumericError("transformed ratios have zero batch std, shift test undefined");

    const double root_n = std::sqrt(static_cast<double>(n));
    BurstVerdict v;
    v.batch_mean = mean;
    v.batch_std = stdev;
    v.z_statistic = root_n * mean / stdev;
    if (mean > config.mu_thres &&
        normal_cdf(root_n * std::abs(mean - config.mu_thres) / stdev) > config.cdf_hi) {
        v.kind = BurstKind::positive;
    } else if (mean < -config.mu_thres &&
               normal_cdf(root_n * std::abs(mean + config.mu_thres) / stdev) > config.cdf_hi) {
        v.kind = BurstKind::negative;
    } else {
        v.kind = BurstKind::clean;
    }
    return v;
}

RepTensor spatial_mask(const RepTensor& rep, int noisy_channel, int radius) {
    if (noisy_channel != 0 && noisy_channel != 1)
        throw ValidationError("noisy_channel must be 0 or 1, got " +
                              std::to_string(noisy_channel));
    if (radius < 1) throw ValidationError("mask radius must be >= 1");

    const int h = rep.height, w = rep.width;
    const int other = 1 - noisy_channel;
    RepTensor out = rep;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t idx =
                (static_cast<std::size_t>(y) * w + x) * 2 + static_cast<std::size_t>(noisy_channel);
            if (rep.data[idx] == 0.0) continue;
            bool supported = false;
            for (int dy = -radius; dy <= radius && !supported; ++dy) {
                const int ny = y + dy;
                if (ny < 0 || ny >= h) continue;
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int nx = x + dx;
                    if (nx < 0 || nx >= w) continue;
                    if (rep.at(ny, nx, other) != 0.0) {
                        supported = true;
                        break;
                    }
                }
            }
            if (!supported) out.data[idx] = 0.0;
        }
    return out;
}

DenoiseResult conditional_denoise(std::vector<RepTensor> anchors, const RatioStats& stats,
                                  const HypothesisConfig& config, int radius) {
    DenoiseResult result;
    result.verdict = detect_burst(anchors, stats, config);
    if (result.verdict.kind != BurstKind::clean) {
        const int channel = result.verdict.kind == BurstKind::positive ? 0 : 1;
        for (RepTensor& a : anchors) a = spatial_mask(a, channel, radius);
    }
    result.anchors = std::move(anchors);
    return result;
}

std::string ratio_stats_to_json(const RatioStats& stats) {
    nlohmann::ordered_json j;
    j["mu_pos"] = stats.mu_pos;
    j["mu_neg"] = stats.mu_neg;
    j["sigma_pos"] = stats.sigma_pos;
    j["sigma_neg"] = stats.sigma_neg;
    j["rho"] = stats.rho;
    return j.dump(2) + "\n";
}

RatioStats ratio_stats_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("ratio stats JSON: ") + e.what());
    }
    RatioStats stats;
    try {
        stats.mu_pos = j.at("mu_pos").get<double>();
        stats.mu_neg = j.at("mu_neg").get<double>();
        stats.sigma_pos = j.at("sigma_pos").get<double>();
        stats.sigma_neg = j.at("sigma_neg").get<double>();
        stats.rho = j.at("rho").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("ratio stats JSON: ") + e.what());
    }
    return stats;
}

const char* burst_kind_name(BurstKind kind) {
    switch (kind) {
        case BurstKind::clean: return "clean";
        case BurstKind::positive: return "positive";
        case BurstKind::negative: return "negative";
    }
    throw ValidationError("unknown burst kind");
}

} // namespace evtta
