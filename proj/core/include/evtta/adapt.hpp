#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evtta/denoise.hpp"
#include "evtta/events.hpp"
#include "evtta/model.hpp"
#include "evtta/optim.hpp"
#include "evtta/representation.hpp"
#include "evtta/tta_losses.hpp"

namespace evtta {

/// How the anchor slice is picked: uniformly at random, by smallest
/// prediction entropy, or as the first slice agreeing with the modal vote.
enum class AnchorPolicy { random, min_entropy, majority_vote };

/// evtta: similarity + selective entropy; tent: anchor entropy only;
/// none: no updates at all.
enum class BaselineMode { evtta, tent, none };

enum class Protocol { offline, online };

struct AdaptConfig {
    int k = 4;                       // slices per sample
    std::uint64_t window_us = 10000; // slice length
    AnchorPolicy anchor_policy = AnchorPolicy::random;
    InconsistencyPolicy inconsistency_policy = InconsistencyPolicy::ignore;
    BaselineMode baseline_mode = BaselineMode::evtta;
    bool denoise = false;
    double lr = 2.5e-4;
    int batch_size = 64;
    std::uint64_t seed = 0;
    Protocol protocol = Protocol::offline;
    RepKind representation = RepKind::binary;
    RepParams rep_params{};
    int mask_radius = 1;          // denoise neighborhood
    HypothesisConfig hypothesis{}; // burst-test thresholds
};

/// Throws ValidationError unless k >= 2, lr > 0 and batch_size >= 2 (the
/// burst hypothesis test needs a batch of anchors).
void validate_config(const AdaptConfig& config);

/// Slice/anchor/denoise workup for one batch, before any gradient math.
/// reps is sample-major: reps[n * k + j] is slice j of sample n.
struct BatchPlan {
    std::vector<RepTensor> reps;
    std::vector<std::size_t> anchors; // per-sample anchor slice index
    BurstKind verdict = BurstKind::clean;
    bool burst_tested = false;
};

/// Cuts k windows per sample, picks anchors per policy (non-random policies
/// run a preliminary forward pass through the model), and conditionally
/// denoises the anchor representations as one batch when config.denoise is
/// set. first_index is the position of batch[0] in the full dataset; slice
/// and anchor draws are keyed to it so runs are reproducible batch by batch.
BatchPlan plan_batch(Model& model, const std::vector<const EventStream*>& batch,
                     std::size_t first_index, const AdaptConfig& config, const RatioStats& stats);

struct LossReport {
    double l_ps = 0.0;
    double l_se = 0.0;
    double total = 0.0; // always l_ps + l_se
    /// Fraction of samples whose anchor vote matched the non-anchor majority;
    /// 1 in modes that cast no votes (nothing was rejected).
    double consistent_fraction = 1.0;
};

/// Forward pass over the planned slices plus the batch-mean loss and its
/// gradient w.r.t. the model output. Rows of dout follow the forwarded
/// batch: all k slices sample-major in evtta mode, anchors only in tent
/// mode. Baseline none forwards anchors in eval mode and reports zero loss.
struct LossEval {
    LossReport report;
    Tensor dout;
    std::vector<int> anchor_votes;     // per-sample anchor argmax (classification)
    std::vector<double> anchor_values; // per-sample anchor mu (regression)
};

LossEval eval_adapt_loss(Model& model, const BatchPlan& plan, const AdaptConfig& config);

struct BatchResult {
    LossReport report;
    BurstKind verdict = BurstKind::clean;
    bool burst_tested = false;
    std::vector<int> anchor_predictions;
};

/// One adaptation step: plan, forward, loss, backward, one Adam step on the
/// batch-norm parameters. optimizer must be initialized on model.bn_params().
BatchResult adapt_batch(Model& model, AdamState& optimizer,
                        const std::vector<const EventStream*>& batch, std::size_t first_index,
                        const AdaptConfig& config, const RatioStats& stats);

struct MetricsRow {
    int batch_index = 0;
    LossReport report;
    std::string burst_verdict = "n/a"; // "n/a" when the burst test did not run
    double running_accuracy = 0.0;
};

/// Header plus one row per batch:
/// batch_index,l_ps,l_se,total,consistent_fraction,burst_verdict,running_accuracy
std::string metrics_to_csv(const std::vector<MetricsRow>& rows);

struct RunOutcome {
    double accuracy = 0.0; // RMSE for the regression run
    std::vector<MetricsRow> metrics;
};

/// One adaptation epoch over the whole dataset, then a second inference pass
/// with the adapted parameters. Labels are read only for scoring. Batches are
/// consecutive chunks in caller order; a trailing chunk of one sample is
/// scored but skipped for adaptation.
RunOutcome run_offline(Model& model, const std::vector<const EventStream*>& dataset,
                       const AdaptConfig& config, const RatioStats& stats);

/// Single pass: each batch is scored by its pre-update anchor predictions and
/// then used for one adaptation step.
RunOutcome run_online(Model& model, const std::vector<const EventStream*>& dataset,
                      const AdaptConfig& config, const RatioStats& stats);

/// The regression variant: Gaussian divergence replaces the categorical one,
/// Gaussian entropy replaces the vote-gated entropy, and the variance-ratio
/// bound replaces the majority vote. No denoising (the hypothesis test is a
/// polarity-count construct). Returns the RMSE of mu against targets.
RunOutcome adapt_regression(Model& model, const std::vector<const EventStream*>& dataset,
                            const std::vector<double>& targets, const AdaptConfig& config);

} // namespace evtta
