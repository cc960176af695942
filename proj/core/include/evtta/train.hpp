#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "evtta/model.hpp"
#include "evtta/representation.hpp"

namespace evtta {

struct LabeledRep {
    RepTensor rep;
    int label = 0;
};

struct ScalarRep {
    RepTensor rep;
    double target = 0.0;
};

/// Packs representations into a [N, 2, H, W] model batch (RepTensor stores
/// channel-minor pixels, the model wants planar channels).
Tensor rep_batch(const std::vector<const RepTensor*>& reps);

/// Mean negative log-likelihood of the labels under the predicted
/// probabilities, clamped at 1e-12. grad fills d(loss)/d(probs).
double cross_entropy(const Tensor& probs, const std::vector<int>& labels);
Tensor cross_entropy_grad(const Tensor& probs, const std::vector<int>& labels);

/// Negated Gaussian log-likelihood: log(sigma) + (target - mu)^2 / (2 sigma^2).
double gaussian_nll(double mu, double sigma, double target);

/// Mean NLL over a [N, 2] (mu, sigma) batch; grad is w.r.t. that batch.
double gaussian_nll_batch(const Tensor& out, const std::vector<double>& targets);
Tensor gaussian_nll_batch_grad(const Tensor& out, const std::vector<double>& targets);

struct TrainOptions {
    int epochs = 12;
    double lr = 1e-3;
    int batch_size = 64;
    std::uint64_t seed = 0;
};

struct TrainResult {
    double val_accuracy = 0.0; // RMSE for the regression variant
    double final_loss = 0.0;
};

/// Supervised cross-entropy training of every parameter; returns held-out
/// accuracy. Deterministic given the seed.
TrainResult train_source(Model& model, const std::vector<LabeledRep>& train,
                         const std::vector<LabeledRep>& val, const TrainOptions& options);

/// Gaussian-NLL training for the (mu, sigma) head; val_accuracy field holds
/// the held-out RMSE of mu.
TrainResult train_source_regression(Model& model, const std::vector<ScalarRep>& train,
                                    const std::vector<ScalarRep>& val,
                                    const TrainOptions& options);

/// Eval-mode argmax predictions, batched.
std::vector<int> predict_labels(Model& model, const std::vector<const RepTensor*>& reps,
                                int batch_size);

double classification_accuracy(Model& model, const std::vector<LabeledRep>& data, int batch_size);
double regression_rmse(Model& model, const std::vector<ScalarRep>& data, int batch_size);

} // namespace evtta
