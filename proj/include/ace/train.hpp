#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ace/metrics.hpp"
#include "ace/model.hpp"
#include "ace/tasks.hpp"

namespace ace {

enum class LossVariant { kAceCe, kAceRegression, kCtc };

const char* to_string(LossVariant variant);
/// Accepts "ace-ce", "ace-reg" / "ace-regression", "ctc" (underscores too).
LossVariant parse_loss_variant(const std::string& name);
/// 0.1 for ACE-CE and CTC, 0.01 for ACE regression.
double default_learning_rate(LossVariant variant);

struct TrainConfig {
  LossVariant loss = LossVariant::kAceCe;
  double learning_rate = 0.1;
  int epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  int eval_every = 1;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;  ///< mean training loss over the epoch
  bool evaluated = false;
  double cer = 0.0;
  double seq_acc = 0.0;
  double count_acc = 0.0;

  nlohmann::json to_json() const;
  bool operator==(const EpochMetrics&) const = default;
};

struct EvalMetrics {
  double loss = 0.0;
  double cer = 0.0;
  double seq_acc = 0.0;
  double count_acc = 0.0;
  CountingScores counting;
};

struct TrainResult {
  ToyModel model;
  std::vector<EpochMetrics> log;
};

/// Loss of one sample under `variant`; writes dL/dlogits (rows in the
/// sample's own order) into `grad_logits`.
double sample_loss(LossVariant variant, const ProbGrid& probs, const Sample& sample,
                   Matrix& grad_logits);

/// Mean loss over `indices` and the matching mean parameter gradient.
double batch_loss_and_grad(const ToyModel& model, const Dataset& data,
                           std::span<const std::size_t> indices, LossVariant variant,
                           ToyModel& grad);

/// Worker count for evaluation: hardware concurrency capped by the
/// ACE_SEQ_THREADS environment variable.
std::size_t evaluation_threads();

/// Decodes every sample greedily. `loss_variant` selects the loss reported
/// alongside the metrics. Parallel across samples; results do not depend on
/// the thread count.
EvalMetrics evaluate(const ToyModel& model, const Dataset& data,
                     LossVariant loss_variant = LossVariant::kAceCe, std::size_t threads = 0);

/// Plain minibatch SGD. Metrics are computed on `eval_set` when given,
/// otherwise on the training set. Throws TrainingFailure on a non-finite loss.
TrainResult train(const TrainConfig& config, const Dataset& train_set, ToyModel model,
                  const Dataset* eval_set = nullptr);

void write_metrics_log(std::ostream& out, const std::vector<EpochMetrics>& log);

}  // namespace ace
