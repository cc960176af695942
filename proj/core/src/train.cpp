#include "evtta/train.hpp"

#include <algorithm>
#include <cmath>

#include "evtta/errors.hpp"
#include "evtta/optim.hpp"
#include "evtta/rng.hpp"

namespace evtta {

Tensor rep_batch(const std::vector<const RepTensor*>& reps) {
    if (reps.empty()) throw ValidationError("rep_batch needs at least one representation");
    const std::uint16_t h = reps[0]->height, w = reps[0]->width;
    Tensor batch = Tensor::zeros({reps.size(), 2, h, w});
    for (std::size_t n = 0; n < reps.size(); ++n) {
        const RepTensor& rep = *reps[n];
        if (rep.height != h || rep.width != w)
            throw ValidationError("representation " + std::to_string(n) +
                                  " has mismatched resolution");
        double* pos = &batch.data[(n * 2 + 0) * h * w];
        double* neg = &batch.data[(n * 2 + 1) * h * w];
        for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) {
            pos[i] = rep.data[i * 2 + 0];
            neg[i] = rep.data[i * 2 + 1];
        }
    }
    return batch;
}

double cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
    const std::size_t n = probs.shape[0], c = probs.shape[1];
    if (labels.size() != n)
        throw ValidationError("cross_entropy got " + std::to_string(labels.size()) +
                              " labels for " + std::to_string(n) + " rows");
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            throw ValidationError("label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(c) + ")");
        loss -= std::log(std::max(probs.data[i * c + y], 1e-12));
    }
    return loss / static_cast<double>(n);
}

Tensor cross_entropy_grad(const Tensor& probs, const std::vector<int>& labels) {
    const std::size_t n = probs.shape[0], c = probs.shape[1];
    Tensor grad = Tensor::zeros(probs.shape);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = std::max(probs.data[i * c + labels[i]], 1e-12);
        grad.data[i * c + labels[i]] = -1.0 / (p * static_cast<double>(n));
    }
    return grad;
}

double gaussian_nll(double mu, double sigma, double target) {
    if (sigma <= 0.0) throw NumericError("gaussian_nll needs sigma > 0");
    const double d = target - mu;
    return std::log(sigma) + d * d / (2.0 * sigma * sigma);
}

double gaussian_nll_batch(const Tensor& out, const std::vector<double>& targets) {
    const std::size_t n = out.shape[0];
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        loss += gaussian_nll(out.data[i * 2], out.data[i * 2 + 1], targets[i]);
    return loss / static_cast<double>(n);
}

Tensor gaussian_nll_batch_grad(const Tensor& out, const std::vector<double>& targets) {
    const std::size_t n = out.shape[0];
    Tensor grad = Tensor::zeros(out.shape);
    for (std::size_t i = 0; i < n; ++i) {
        const double mu = out.data[i * 2], sigma = out.data[i * 2 + 1];
        const double d = targets[i] - mu;
        grad.data[i * 2] = -d / (sigma * sigma * static_cast<double>(n));
        grad.data[i * 2 + 1] =
            (1.0 / sigma - d * d / (sigma * sigma * sigma)) / static_cast<double>(n);
    }
    return grad;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.index(i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

} // namespace

TrainResult train_source(Model& model, const std::vector<LabeledRep>& train,
                         const std::vector<LabeledRep>& val, const TrainOptions& options) {
    if (train.empty()) throw ValidationError("training dataset is empty");
    if (options.epochs < 1 || options.batch_size < 1)
        throw ValidationError("epochs and batch size must be positive");
    AdamState adam = AdamState::init(model.params(), options.lr);
    Rng rng(derive_seed(options.seed, {seed_tag::train}));
    TrainResult result;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const auto order = shuffled_indices(train.size(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t stop = std::min(order.size(), start + options.batch_size);
            std::vector<const RepTensor*> reps;
            std::vector<int> labels;
            reps.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                reps.push_back(&train[order[i]].rep);
                labels.push_back(train[order[i]].label);
            }
            const Tensor probs = model.forward(rep_batch(reps), true);
            epoch_loss += cross_entropy(probs, labels);
            ++batches;
            model.zero_grad();
            model.backward(cross_entropy_grad(probs, labels));
            adam_step(model.params(), adam);
        }
        result.final_loss = epoch_loss / static_cast<double>(batches);
    }
    result.val_accuracy =
        val.empty() ? 0.0 : classification_accuracy(model, val, options.batch_size);
    return result;
}

TrainResult train_source_regression(Model& model, const std::vector<ScalarRep>& train,
                                    const std::vector<ScalarRep>& val,
                                    const TrainOptions& options) {
    if (train.empty()) throw ValidationError("training dataset is empty");
    if (options.epochs < 1 || options.batch_size < 1)
        throw ValidationError("epochs and batch size must be positive");
    AdamState adam = AdamState::init(model.params(), options.lr);
    Rng rng(derive_seed(options.seed, {seed_tag::train}));
    TrainResult result;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const auto order = shuffled_indices(train.size(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t stop = std::min(order.size(), start + options.batch_size);
            std::vector<const RepTensor*> reps;
            std::vector<double> targets;
            reps.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                reps.push_back(&train[order[i]].rep);
                targets.push_back(train[order[i]].target);
            }
            const Tensor out = model.forward(rep_batch(reps), true);
            epoch_loss += gaussian_nll_batch(out, targets);
            ++batches;
            model.zero_grad();
            model.backward(gaussian_nll_batch_grad(out, targets));
            adam_step(model.params(), adam);
        }
        result.final_loss = epoch_loss / static_cast<double>(batches);
    }
    result.val_accuracy = val.empty() ? 0.0 : regression_rmse(model, val, options.batch_size);
    return result;
}

std::vector<int> predict_labels(Model& model, const std::vector<const RepTensor*>& reps,
                                int batch_size) {
    std::vector<int> out;
    out.reserve(reps.size());
    for (std::size_t start = 0; start < reps.size(); start += batch_size) {
        const std::size_t stop = std::min(reps.size(), start + batch_size);
        const std::vector<const RepTensor*> slice(reps.begin() + start, reps.begin() + stop);
        const Tensor probs = model.forward(rep_batch(slice), false);
        const std::size_t c = probs.shape[1];
        for (std::size_t i = 0; i < slice.size(); ++i) {
            const double* row = &probs.data[i * c];
            out.push_back(static_cast<int>(std::max_element(row, row + c) - row));
        }
    }
    return out;
}

double classification_accuracy(Model& model, const std::vector<LabeledRep>& data, int batch_size) {
    if (data.empty()) throw ValidationError("accuracy over an empty dataset is undefined");
    std::vector<const RepTensor*> reps;
    reps.reserve(data.size());
    for (const auto& item : data) reps.push_back(&item.rep);
    const auto preds = predict_labels(model, reps, batch_size);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (preds[i] == data[i].label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

double regression_rmse(Model& model, const std::vector<ScalarRep>& data, int batch_size) {
    if (data.empty()) throw ValidationError("rmse over an empty dataset is undefined");
    double sq = 0.0;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t stop = std::min(data.size(), start + batch_size);
        std::vector<const RepTensor*> slice;
        slice.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) slice.push_back(&data[i].rep);
        const Tensor out = model.forward(rep_batch(slice), false);
        for (std::size_t i = start; i < stop; ++i) {
            const double d = out.data[(i - start) * 2] - data[i].target;
            sq += d * d;
        }
    }
    return std::sqrt(sq / static_cast<double>(data.size()));
}

} // namespace evtta
