#include "evtta/tta_losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evtta/errors.hpp"

namespace evtta {

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p) {
        if (v < 0.0) throw ValidationError("entropy input has a negative entry");
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

void entropy_grad(std::span<const double> p, double scale, std::span<double> gp) {
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) gp[i] -= scale * (std::log(p[i]) + 1.0);
}

double symmetric_kl(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size())
        throw ValidationError("symmetric_kl got vectors of length " + std::to_string(p.size()) +
                              " and " + std::to_string(q.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) s += p[i] * std::log(p[i] / std::max(q[i], kProbFloor));
        if (q[i] > 0.0) s += q[i] * std::log(q[i] / std::max(p[i], kProbFloor));
    }
    return s;
}

void symmetric_kl_grad(std::span<const double> p, std::span<const double> q, double scale,
                       std::span<double> gp, std::span<double> gq) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pf = std::max(p[i], kProbFloor);
        const double qf = std::max(q[i], kProbFloor);
        if (p[i] > 0.0) {
            gp[i] += scale * (std::log(p[i] / qf) + 1.0);
            if (q[i] > 0.0 && p[i] > kProbFloor) gp[i] -= scale * q[i] / p[i];
        }
        if (q[i] > 0.0) {
            gq[i] += scale * (std::log(q[i] / pf) + 1.0);
            if (p[i] > 0.0 && q[i] > kProbFloor) gq[i] -= scale * p[i] / q[i];
        }
    }
}

double prediction_similarity_loss(const std::vector<std::vector<double>>& probs,
                                  std::size_t anchor_index) {
    if (probs.size() < 2)
        throw ValidationError("prediction similarity needs at least 2 slices, got " +
                              std::to_string(probs.size()));
    if (anchor_index >= probs.size())
        throw ValidationError("anchor index " + std::to_string(anchor_index) +
                              " out of range for " + std::to_string(probs.size()) + " slices");
    double s = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k)
        if (k != anchor_index) s += symmetric_kl(probs[anchor_index], probs[k]);
    return 0.5 * s;
}

namespace {

int argmax(std::span<const double> p) {
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

} // namespace

VoteRecord consistency_vote(const std::vector<std::vector<double>>& probs,
                            std::size_t anchor_index) {
    if (probs.size() < 2)
        throw ValidationError("consistency vote needs at least 2 slices, got " +
                              std::to_string(probs.size()));
    if (anchor_index >= probs.size())
        throw ValidationError("anchor index " + std::to_string(anchor_index) +
                              " out of range for " + std::to_string(probs.size()) + " slices");
    VoteRecord record;
    record.anchor_index = anchor_index;
    record.votes.reserve(probs.size());
    for (const auto& p : probs) record.votes.push_back(argmax(p));

    std::vector<int> others;
    for (std::size_t k = 0; k < record.votes.size(); ++k)
        if (k != anchor_index) others.push_back(record.votes[k]);
    for (int candidate : others) {
        const auto n = std::count(others.begin(), others.end(), candidate);
        if (2 * static_cast<std::size_t>(n) > others.size()) {
            record.majority = candidate;
            break;
        }
    }
    record.consistent = record.majority >= 0 && record.votes[anchor_index] == record.majority;
    return record;
}

double selective_entropy_loss(std::span<const double> anchor_prob, const VoteRecord& vote,
                              InconsistencyPolicy policy) {
    if (vote.consistent) return entropy(anchor_prob);
    return policy == InconsistencyPolicy::ignore ? 0.0 : -entropy(anchor_prob);
}

double gaussian_symmetric_kl(double mu1, double sigma1, double muk, double sigmak) {
    if (sigma1 <= 0.0 || sigmak <= 0.0)
        throw NumericError("gaussian divergence needs positive sigmas");
    const double a = sigma1 * sigma1, b = sigmak * sigmak;
    const double d = mu1 - muk;
    return (a * a + b * b + (a + b) * d * d) / (2.0 * a * b);
}

void gaussian_symmetric_kl_grad(double mu1, double sigma1, double muk, double sigmak,
                                double scale, double* dmu1, double* dsigma1, double* dmuk,
                                double* dsigmak) {
    if (sigma1 <= 0.0 || sigmak <= 0.0)
        throw NumericError("gaussian divergence needs positive sigmas");
    const double a = sigma1 * sigma1, b = sigmak * sigmak;
    const double d = mu1 - muk;
    const double g = (a * a + b * b + (a + b) * d * d) / (2.0 * a * b);
    const double dmu = (a + b) * d / (a * b);
    const double da = (2.0 * a + d * d) / (2.0 * a * b) - g / a;
    const double db = (2.0 * b + d * d) / (2.0 * a * b) - g / b;
    *dmu1 += scale * dmu;
    *dmuk -= scale * dmu;
    *dsigma1 += scale * da * 2.0 * sigma1;
    *dsigmak += scale * db * 2.0 * sigmak;
}

double gaussian_entropy(double, double sigma) {
    if (sigma <= 0.0) throw NumericError("gaussian entropy needs sigma > 0");
    constexpr double kPi = 3.14159265358979323846;
    return std::log(sigma) + 0.5 * (std::log(2.0 * kPi) + 1.0); // 0.5 log(2 pi e)
}

bool variance_consistency(const std::vector<std::pair<double, double>>& outs,
                          std::size_t anchor_index) {
    if (outs.size() < 2)
        throw ValidationError("variance consistency needs at least 2 slices, got " +
                              std::to_string(outs.size()));
    if (anchor_index >= outs.size())
        throw ValidationError("anchor index " + std::to_string(anchor_index) +
                              " out of range for " + std::to_string(outs.size()) + " slices");
    for (const auto& [mu, sigma] : outs) {
        (void)mu;
        if (sigma <= 0.0) throw NumericError("variance consistency needs positive sigmas");
    }
    const double va = outs[anchor_index].second * outs[anchor_index].second;
    for (std::size_t k = 0; k < outs.size(); ++k) {
        if (k == anchor_index) continue;
        const double ratio = va / (outs[k].second * outs[k].second);
        if (ratio < 0.1 || ratio > 10.0) return false;
    }
    return true;
}

} // namespace evtta
