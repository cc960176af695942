#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace evtta {

/// Floor applied to probabilities inside KL denominators so exact zeros stay
/// finite.
inline constexpr double kProbFloor = 1e-7;

/// How a sample whose slice votes disagree contributes to the entropy term:
/// drop it, or push its anchor entropy up instead of down.
enum class InconsistencyPolicy { ignore, maximize };

/// Per-sample slice votes. majority is the strict majority class of the
/// non-anchor votes, or -1 when no class clears half of them; a tie therefore
/// counts as inconsistent.
struct VoteRecord {
    std::vector<int> votes;
    std::size_t anchor_index = 0;
    int majority = -1;
    bool consistent = false;
};

/// Natural-log entropy with 0 log 0 = 0. Entries must be non-negative.
double entropy(std::span<const double> p);

/// Accumulates scale * dH/dp into gp (zero entries contribute nothing).
void entropy_grad(std::span<const double> p, double scale, std::span<double> gp);

/// KL(p||q) + KL(q||p) with denominators floored at kProbFloor. Symmetric and
/// non-negative.
double symmetric_kl(std::span<const double> p, std::span<const double> q);

/// Accumulates scale * d(symmetric_kl)/dp and /dq into gp and gq.
void symmetric_kl_grad(std::span<const double> p, std::span<const double> q, double scale,
                       std::span<double> gp, std::span<double> gq);

/// Half-sum of symmetric KLs between the anchor prediction and each other
/// slice prediction.
double prediction_similarity_loss(const std::vector<std::vector<double>>& probs,
                                  std::size_t anchor_index);

/// Argmax vote per slice plus the strict-majority consistency gate over the
/// non-anchor votes.
VoteRecord consistency_vote(const std::vector<std::vector<double>>& probs,
                            std::size_t anchor_index);

/// Entropy of the anchor prediction, gated by the vote: consistent samples
/// contribute +H, inconsistent ones 0 (ignore) or -H (maximize).
double selective_entropy_loss(std::span<const double> anchor_prob, const VoteRecord& vote,
                              InconsistencyPolicy policy);

/// (s1^4 + sk^4 + (s1^2 + sk^2)(mu1 - muk)^2) / (2 s1^2 sk^2). Equals 1, not
/// 0, for identical Gaussians; the additive constant is gradient-free so the
/// printed form is kept.
double gaussian_symmetric_kl(double mu1, double sigma1, double muk, double sigmak);

/// Accumulates scale times the partials into (dmu1, dsigma1) and
/// (dmuk, dsigmak).
void gaussian_symmetric_kl_grad(double mu1, double sigma1, double muk, double sigmak,
                                double scale, double* dmu1, double* dsigma1, double* dmuk,
                                double* dsigmak);

/// log(sigma) + 0.5 log(2 pi e); independent of mu.
double gaussian_entropy(double mu, double sigma);

/// True iff sigma_anchor^2 / sigma_k^2 lies in [0.1, 10] (inclusive) for
/// every non-anchor k.
bool variance_consistency(const std::vector<std::pair<double, double>>& outs,
                          std::size_t anchor_index = 0);

} // namespace evtta
