#include "evtta/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "evtta/errors.hpp"
#include "evtta/rng.hpp"
#include "evtta/train.hpp"

namespace evtta {

void validate_config(const AdaptConfig& config) {
    if (config.k < 2)
        throw ValidationError("slice count must be >= 2, got " + std::to_string(config.k));
    if (config.lr <= 0.0) throw ValidationError("learning rate must be positive");
    if (config.batch_size < 2)
        throw ValidationError("batch size must be >= 2 (the burst test needs a batch), got " +
                              std::to_string(config.batch_size));
    if (config.window_us == 0) throw ValidationError("slice window must be positive");
    if (config.mask_radius < 1) throw ValidationError("mask radius must be >= 1");
}

namespace {

std::vector<const RepTensor*> rep_pointers(const std::vector<RepTensor>& reps) {
    std::vector<const RepTensor*> out;
    out.reserve(reps.size());
    for (const RepTensor& r : reps) out.push_back(&r);
    return out;
}

std::vector<const RepTensor*> anchor_pointers(const BatchPlan& plan, int k) {
    std::vector<const RepTensor*> out;
    out.reserve(plan.anchors.size());
    for (std::size_t n = 0; n < plan.anchors.size(); ++n)
        out.push_back(&plan.reps[n * k + plan.anchors[n]]);
    return out;
}

std::size_t pick_min_entropy_softmax(const Tensor& probs, std::size_t n, int k) {
    const std::size_t c = probs.shape[1];
    std::size_t best = 0;
    double best_h = 0.0;
    for (int j = 0; j < k; ++j) {
        const double* row = &probs.data[(n * k + j) * c];
        const double h = entropy({row, c});
        if (j == 0 || h < best_h) {
            best_h = h;
            best = static_cast<std::size_t>(j);
        }
    }
    return best;
}

std::size_t pick_majority_softmax(const Tensor& probs, std::size_t n, int k) {
    const std::size_t c = probs.shape[1];
    std::vector<int> votes(k);
    for (int j = 0; j < k; ++j) {
        const double* row = &probs.data[(n * k + j) * c];
        votes[j] = static_cast<int>(std::max_element(row, row + c) - row);
    }
    // Modal class, smallest class id on ties; anchor is its first voter.
    int modal = votes[0];
    std::ptrdiff_t modal_count = 0;
    for (int candidate = 0; candidate < static_cast<int>(c); ++candidate) {
        const auto count = std::count(votes.begin(), votes.end(), candidate);
        if (count > modal_count) {
            modal = candidate;
            modal_count = count;
        }
    }
    for (int j = 0; j < k; ++j)
        if (votes[j] == modal) return static_cast<std::size_t>(j);
    return 0;
}

std::size_t pick_min_sigma(const Tensor& out, std::size_t n, int k) {
    std::size_t best = 0;
    double best_sigma = 0.0;
    for (int j = 0; j < k; ++j) {
        const double sigma = out.data[(n * k + j) * 2 + 1];
        if (j == 0 || sigma < best_sigma) {
            best_sigma = sigma;
            best = static_cast<std::size_t>(j);
        }
    }
    return best;
}

} // namespace

BatchPlan plan_batch(Model& model, const std::vector<const EventStream*>& batch,
                     std::size_t first_index, const AdaptConfig& config,
                     const RatioStats& stats) {
    validate_config(config);
    if (batch.empty()) throw ValidationError("cannot plan an empty batch");
    const int k = config.k;

    BatchPlan plan;
    plan.reps.reserve(batch.size() * k);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto global = static_cast<std::uint64_t>(first_index + i);
        const SliceSet set = random_slices(*batch[i], k, config.window_us,
                                           derive_seed(config.seed, {seed_tag::slices, global}));
        for (const EventStream& slice : set.slices)
            plan.reps.push_back(build(slice, config.representation, config.rep_params));
    }

    plan.anchors.resize(batch.size());
    if (config.anchor_policy == AnchorPolicy::random) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto global = static_cast<std::uint64_t>(first_index + i);
            Rng rng(derive_seed(config.seed, {seed_tag::anchor, global}));
            plan.anchors[i] = rng.index(static_cast<std::size_t>(k));
        }
    } else {
        // Ranking policies need predictions before the anchor exists.
        const bool train = config.baseline_mode != BaselineMode::none;
        const Tensor out = model.forward(rep_batch(rep_pointers(plan.reps)), train);
        const bool gaussian = model.head() == HeadKind::gaussian;
        for (std::size_t n = 0; n < batch.size(); ++n) {
            if (config.anchor_policy == AnchorPolicy::min_entropy)
                plan.anchors[n] = gaussian ? pick_min_sigma(out, n, k)
                                           : pick_min_entropy_softmax(out, n, k);
            else if (gaussian)
                throw ValidationError(
                    "majority-vote anchors need class votes; use random or min_entropy for "
                    "regression");
            else
                plan.anchors[n] = pick_majority_softmax(out, n, k);
        }
    }

    if (config.denoise) {
        std::vector<RepTensor> anchors;
        anchors.reserve(batch.size());
        for (std::size_t n = 0; n < batch.size(); ++n)
            anchors.push_back(plan.reps[n * k + plan.anchors[n]]);
        DenoiseResult result =
            conditional_denoise(std::move(anchors), stats, config.hypothesis, config.mask_radius);
        plan.verdict = result.verdict.kind;
        plan.burst_tested = true;
        for (std::size_t n = 0; n < batch.size(); ++n)
            plan.reps[n * k + plan.anchors[n]] = std::move(result.anchors[n]);
    }
    return plan;
}

namespace {

LossEval eval_softmax_loss(Model& model, const BatchPlan& plan, const AdaptConfig& config) {
    const int k = config.k;
    const std::size_t n_samples = plan.anchors.size();
    const double inv_n = 1.0 / static_cast<double>(n_samples);
    LossEval eval;

    if (config.baseline_mode == BaselineMode::none) {
        const Tensor probs = model.forward(rep_batch(anchor_pointers(plan, k)), false);
        const std::size_t c = probs.shape[1];
        for (std::size_t n = 0; n < n_samples; ++n) {
            const double* row = &probs.data[n * c];
            eval.anchor_votes.push_back(static_cast<int>(std::max_element(row, row + c) - row));
        }
        eval.dout = Tensor::zeros({0});
        return eval;
    }

    if (config.baseline_mode == BaselineMode::tent) {
        const Tensor probs = model.forward(rep_batch(anchor_pointers(plan, k)), true);
        const std::size_t c = probs.shape[1];
        eval.dout = Tensor::zeros(probs.shape);
        double h_sum = 0.0;
        for (std::size_t n = 0; n < n_samples; ++n) {
            const std::span<const double> row{&probs.data[n * c], c};
            h_sum += entropy(row);
            entropy_grad(row, inv_n, {&eval.dout.data[n * c], c});
            eval.anchor_votes.push_back(
                static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
        }
        eval.report.l_se = h_sum * inv_n;
        eval.report.total = eval.report.l_se;
        return eval;
    }

    const Tensor probs = model.forward(rep_batch(rep_pointers(plan.reps)), true);
    const std::size_t c = probs.shape[1];
    eval.dout = Tensor::zeros(probs.shape);
    double ps_sum = 0.0, se_sum = 0.0;
    std::size_t consistent = 0;
    for (std::size_t n = 0; n < n_samples; ++n) {
        const std::size_t a = plan.anchors[n];
        std::vector<std::vector<double>> sample(k);
        for (int j = 0; j < k; ++j) {
            const double* row = &probs.data[(n * k + j) * c];
            sample[j].assign(row, row + c);
        }
        const std::span<const double> anchor_row{&probs.data[(n * k + a) * c], c};
        const std::span<double> anchor_grad{&eval.dout.data[(n * k + a) * c], c};

        for (int j = 0; j < k; ++j) {
            if (static_cast<std::size_t>(j) == a) continue;
            ps_sum += 0.5 * symmetric_kl(sample[a], sample[j]);
            symmetric_kl_grad(sample[a], sample[j], 0.5 * inv_n, anchor_grad,
                              {&eval.dout.data[(n * k + j) * c], c});
        }

        const VoteRecord vote = consistency_vote(sample, a);
        eval.anchor_votes.push_back(vote.votes[a]);
        if (vote.consistent) {
            ++consistent;
            se_sum += entropy(anchor_row);
            entropy_grad(anchor_row, inv_n, anchor_grad);
        } else if (config.inconsistency_policy == InconsistencyPolicy::maximize) {
            se_sum -= entropy(anchor_row);
            entropy_grad(anchor_row, -inv_n, anchor_grad);
        }
    }
    eval.report.l_ps = ps_sum * inv_n;
    eval.report.l_se = se_sum * inv_n;
    eval.report.total = eval.report.l_ps + eval.report.l_se;
    eval.report.consistent_fraction = static_cast<double>(consistent) / static_cast<double>(n_samples);
    return eval;
}

LossEval eval_gaussian_loss(Model& model, const BatchPlan& plan, const AdaptConfig& config) {
    const int k = config.k;
    const std::size_t n_samples = plan.anchors.size();
    const double inv_n = 1.0 / static_cast<double>(n_samples);
    LossEval eval;

    if (config.baseline_mode == BaselineMode::none) {
        const Tensor out = model.forward(rep_batch(anchor_pointers(plan, k)), false);
        for (std::size_t n = 0; n < n_samples; ++n)
            eval.anchor_values.push_back(out.data[n * 2]);
        eval.dout = Tensor::zeros({0});
        return eval;
    }

    if (config.baseline_mode == BaselineMode::tent) {
        const Tensor out = model.forward(rep_batch(anchor_pointers(plan, k)), true);
        eval.dout = Tensor::zeros(out.shape);
        double h_sum = 0.0;
        for (std::size_t n = 0; n < n_samples; ++n) {
            const double sigma = out.data[n * 2 + 1];
            h_sum += gaussian_entropy(out.data[n * 2], sigma);
            eval.dout.data[n * 2 + 1] += inv_n / sigma;
            eval.anchor_values.push_back(out.data[n * 2]);
        }
        eval.report.l_se = h_sum * inv_n;
        eval.report.total = eval.report.l_se;
        return eval;
    }

    const Tensor out = model.forward(rep_batch(rep_pointers(plan.reps)), true);
    eval.dout = Tensor::zeros(out.shape);
    double ps_sum = 0.0, se_sum = 0.0;
    std::size_t consistent = 0;
    for (std::size_t n = 0; n < n_samples; ++n) {
        const std::size_t a = plan.anchors[n];
        std::vector<std::pair<double, double>> sample(k);
        for (int j = 0; j < k; ++j)
            sample[j] = {out.data[(n * k + j) * 2], out.data[(n * k + j) * 2 + 1]};
        eval.anchor_values.push_back(sample[a].first);

        for (int j = 0; j < k; ++j) {
            if (static_cast<std::size_t>(j) == a) continue;
            ps_sum += 0.5 * gaussian_symmetric_kl(sample[a].first, sample[a].second,
                                                  sample[j].first, sample[j].second);
            gaussian_symmetric_kl_grad(sample[a].first, sample[a].second, sample[j].first,
                                       sample[j].second, 0.5 * inv_n,
                                       &eval.dout.data[(n * k + a) * 2],
                                       &eval.dout.data[(n * k + a) * 2 + 1],
                                       &eval.dout.data[(n * k + j) * 2],
                                       &eval.dout.data[(n * k + j) * 2 + 1]);
        }

        if (variance_consistency(sample, a)) {
            ++consistent;
            se_sum += gaussian_entropy(sample[a].first, sample[a].second);
            eval.dout.data[(n * k + a) * 2 + 1] += inv_n / sample[a].second;
        } else if (config.inconsistency_policy == InconsistencyPolicy::maximize) {
            se_sum -= gaussian_entropy(sample[a].first, sample[a].second);
            eval.dout.data[(n * k + a) * 2 + 1] -= inv_n / sample[a].second;
        }
    }
    eval.report.l_ps = ps_sum * inv_n;
    eval.report.l_se = se_sum * inv_n;
    eval.report.total = eval.report.l_ps + eval.report.l_se;
    eval.report.consistent_fraction = static_cast<double>(consistent) / static_cast<double>(n_samples);
    return eval;
}

} // namespace

LossEval eval_adapt_loss(Model& model, const BatchPlan& plan, const AdaptConfig& config) {
    if (plan.anchors.empty()) throw ValidationError("cannot evaluate an empty batch plan");
    return model.head() == HeadKind::gaussian ? eval_gaussian_loss(model, plan, config)
                                              : eval_softmax_loss(model, plan, config);
}

BatchResult adapt_batch(Model& model, AdamState& optimizer,
                        const std::vector<const EventStream*>& batch, std::size_t first_index,
                        const AdaptConfig& config, const RatioStats& stats) {
    if (batch.size() < 2)
        throw ValidationError("adaptation batch needs at least 2 samples, got " +
                              std::to_string(batch.size()));
    const BatchPlan plan = plan_batch(model, batch, first_index, config, stats);
    const LossEval eval = eval_adapt_loss(model, plan, config);
    if (config.baseline_mode != BaselineMode::none) {
        model.zero_grad();
        model.backward(eval.dout);
        adam_step(model.bn_params(), optimizer);
    }
    BatchResult result;
    result.report = eval.report;
    result.verdict = plan.verdict;
    result.burst_tested = plan.burst_tested;
    result.anchor_predictions = eval.anchor_votes;
    return result;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
    std::string out = "batch_index,l_ps,l_se,total,consistent_fraction,burst_verdict,running_accuracy\n";
    char buf[160];
    for (const MetricsRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%s,%.9g\n", row.batch_index,
                      row.report.l_ps, row.report.l_se, row.report.total,
                      row.report.consistent_fraction, row.burst_verdict.c_str(),
                      row.running_accuracy);
        out += buf;
    }
    return out;
}

namespace {

std::vector<int> require_labels(const std::vector<const EventStream*>& dataset) {
    std::vector<int> labels;
    labels.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (!dataset[i]->label)
            throw ValidationError("target stream " + std::to_string(i) + " has no label");
        labels.push_back(*dataset[i]->label);
    }
    return labels;
}

RepTensor score_rep(const EventStream& stream, std::size_t index, const AdaptConfig& config) {
    const SliceSet set =
        random_slices(stream, 1, config.window_us,
                      derive_seed(config.seed, {seed_tag::score, static_cast<std::uint64_t>(index)}));
    return build(set.slices[0], config.representation, config.rep_params);
}

/// Second-phase inference over fresh slices. Adapted modes keep normalizing
/// by batch statistics (the adaptation convention); the none baseline is
/// plain eval-mode inference.
Tensor score_forward(Model& model, const std::vector<const EventStream*>& dataset,
                     std::size_t start, std::size_t stop, const AdaptConfig& config) {
    std::vector<RepTensor> reps;
    reps.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) reps.push_back(score_rep(*dataset[i], i, config));
    const bool train = config.baseline_mode != BaselineMode::none;
    return model.forward(rep_batch(rep_pointers(reps)), train);
}

} // namespace

RunOutcome run_offline(Model& model, const std::vector<const EventStream*>& dataset,
                       const AdaptConfig& config, const RatioStats& stats) {
    validate_config(config);
    if (dataset.empty()) throw ValidationError("target dataset is empty");
    const std::vector<int> labels = require_labels(dataset);
    const auto bs = static_cast<std::size_t>(config.batch_size);

    AdamState optimizer = AdamState::init(model.bn_params(), config.lr);
    RunOutcome out;
    std::size_t hits = 0, seen = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < dataset.size(); start += bs) {
        const std::size_t stop = std::min(dataset.size(), start + bs);
        if (stop - start < 2) break; // a single trailing sample cannot form a batch
        const std::vector<const EventStream*> chunk(dataset.begin() + start,
                                                    dataset.begin() + stop);
        const BatchResult result = adapt_batch(model, optimizer, chunk, start, config, stats);
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            ++seen;
            if (result.anchor_predictions[i] == labels[start + i]) ++hits;
        }
        MetricsRow row;
        row.batch_index = batch_index++;
        row.report = result.report;
        if (result.burst_tested) row.burst_verdict = burst_kind_name(result.verdict);
        row.running_accuracy = static_cast<double>(hits) / static_cast<double>(seen);
        out.metrics.push_back(std::move(row));
    }

    std::size_t score_hits = 0;
    for (std::size_t start = 0; start < dataset.size(); start += bs) {
        const std::size_t stop = std::min(dataset.size(), start + bs);
        const Tensor probs = score_forward(model, dataset, start, stop, config);
        const std::size_t c = probs.shape[1];
        for (std::size_t i = start; i < stop; ++i) {
            const double* row = &probs.data[(i - start) * c];
            const int pred = static_cast<int>(std::max_element(row, row + c) - row);
            if (pred == labels[i]) ++score_hits;
        }
    }
    out.accuracy = static_cast<double>(score_hits) / static_cast<double>(dataset.size());
    return out;
}

RunOutcome run_online(Model& model, const std::vector<const EventStream*>& dataset,
                      const AdaptConfig& config, const RatioStats& stats) {
    validate_config(config);
    if (dataset.empty()) throw ValidationError("target dataset is empty");
    const std::vector<int> labels = require_labels(dataset);
    const auto bs = static_cast<std::size_t>(config.batch_size);

    AdamState optimizer = AdamState::init(model.bn_params(), config.lr);
    RunOutcome out;
    std::size_t hits = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < dataset.size(); start += bs) {
        const std::size_t stop = std::min(dataset.size(), start + bs);
        const std::vector<const EventStream*> chunk(dataset.begin() + start,
                                                    dataset.begin() + stop);
        MetricsRow row;
        row.batch_index = batch_index++;
        if (chunk.size() >= 2) {
            const BatchResult result = adapt_batch(model, optimizer, chunk, start, config, stats);
            for (std::size_t i = 0; i < chunk.size(); ++i)
                if (result.anchor_predictions[i] == labels[start + i]) ++hits;
            row.report = result.report;
            if (result.burst_tested) row.burst_verdict = burst_kind_name(result.verdict);
        } else {
            // Trailing single sample: scored with current parameters, no update.
            AdaptConfig solo = config;
            solo.denoise = false;
            const BatchPlan plan = plan_batch(model, chunk, start, solo, stats);
            const LossEval eval = eval_adapt_loss(model, plan, solo);
            row.report = eval.report;
            if (eval.anchor_votes[0] == labels[start]) ++hits;
        }
        row.running_accuracy = static_cast<double>(hits) / static_cast<double>(stop);
        out.metrics.push_back(std::move(row));
    }
    out.accuracy = static_cast<double>(hits) / static_cast<double>(dataset.size());
    return out;
}

RunOutcome adapt_regression(Model& model, const std::vector<const EventStream*>& dataset,
                            const std::vector<double>& targets, const AdaptConfig& config) {
    validate_config(config);
    if (dataset.empty()) throw ValidationError("target dataset is empty");
    if (targets.size() != dataset.size())
        throw ValidationError("got " + std::to_string(targets.size()) + " targets for " +
                              std::to_string(dataset.size()) + " streams");
    if (model.head() != HeadKind::gaussian)
        throw ValidationError("regression adaptation needs a gaussian-head model");

    AdaptConfig cfg = config;
    cfg.denoise = false; // the burst test is a polarity-count construct
    const RatioStats unused{};
    const auto bs = static_cast<std::size_t>(cfg.batch_size);

    AdamState optimizer = AdamState::init(model.bn_params(), cfg.lr);
    RunOutcome out;
    double sq_sum = 0.0;
    std::size_t seen = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < dataset.size(); start += bs) {
        const std::size_t stop = std::min(dataset.size(), start + bs);
        const std::vector<const EventStream*> chunk(dataset.begin() + start,
                                                    dataset.begin() + stop);
        const bool adaptable = chunk.size() >= 2 && cfg.baseline_mode != BaselineMode::none;
        const BatchPlan plan = plan_batch(model, chunk, start, cfg, unused);
        const LossEval eval = eval_adapt_loss(model, plan, cfg);
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            const double d = eval.anchor_values[i] - targets[start + i];
            sq_sum += d * d;
            ++seen;
        }
        if (adaptable) {
            model.zero_grad();
            model.backward(eval.dout);
            adam_step(model.bn_params(), optimizer);
        }
        MetricsRow row;
        row.batch_index = batch_index++;
        row.report = eval.report;
        row.running_accuracy = std::sqrt(sq_sum / static_cast<double>(seen)); // running RMSE
        out.metrics.push_back(std::move(row));
    }

    if (cfg.protocol == Protocol::online) {
        out.accuracy = std::sqrt(sq_sum / static_cast<double>(dataset.size()));
        return out;
    }
    double score_sq = 0.0;
    for (std::size_t start = 0; start < dataset.size(); start += bs) {
        const std::size_t stop = std::min(dataset.size(), start + bs);
        const Tensor pred = score_forward(model, dataset, start, stop, cfg);
        for (std::size_t i = start; i < stop; ++i) {
            const double d = pred.data[(i - start) * 2] - targets[i];
            score_sq += d * d;
        }
    }
    out.accuracy = std::sqrt(score_sq / static_cast<double>(dataset.size()));
    return out;
}

} // namespace evtta
