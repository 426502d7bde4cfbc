#pragma once

// Desk-scale experiments built from the task generators and the trainer.
// Each is a pure function of its config, so runs reproduce bitwise.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "ace/train.hpp"

namespace ace::experiments {

// Annotation-order corruption -----------------------------------------------

struct ShuffleExpConfig {
  std::vector<double> ratios = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<LossVariant> losses = {LossVariant::kAceCe, LossVariant::kCtc};
  std::size_t seeds = 3;
  std::uint64_t seed = 1;  ///< run i uses seed + i
  std::size_t train_count = 1000;
  std::size_t test_count = 200;
  std::size_t timesteps = 20;
  std::size_t max_len = 8;
  double noise_sigma = 0.3;
  int epochs = 20;
  std::size_t batch_size = 16;

  nlohmann::json to_json() const;
};

struct ShuffleCell {
  LossVariant loss = LossVariant::kAceCe;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> log;  ///< evaluated on the unshuffled test set
};

struct ShuffleExpResult {
  std::vector<ShuffleCell> cells;
  /// Every ACE variant that ran produced the same log at every ratio, per seed.
  bool ace_logs_identical = true;
  /// Final test CER of CTC averaged over seeds, at the smallest and largest ratio.
  double ctc_cer_low = 0.0;
  double ctc_cer_high = 0.0;
  bool ran_ctc = false;
};

ShuffleExpResult run_shuffle_experiment(const ShuffleExpConfig& config);
/// CSV: loss,ratio,seed,epoch,loss_value,cer,seq_acc,count_acc for the last epoch.
void write_shuffle_table(std::ostream& out, const ShuffleExpResult& result);

// ACE vs CTC on the same data and model ---------------------------------------

struct ParityConfig {
  std::uint64_t seed = 1;
  std::size_t train_count = 2000;
  std::size_t test_count = 500;
  std::size_t timesteps = 20;
  std::size_t max_len = 8;
  int epochs = 30;
  std::size_t batch_size = 16;
};

struct ParityRun {
  LossVariant loss = LossVariant::kAceCe;
  TrainResult trained;
  EvalMetrics test;
  double seconds = 0.0;
};

struct ParityResult {
  ParityRun ace;
  ParityRun ctc;
};

ParityResult run_parity_experiment(const ParityConfig& config);

// Large-vocabulary gradient suppression -------------------------------------

struct VanishingConfig {
  std::uint64_t seed = 1;
  std::size_t num_classes = 1001;
  std::size_t small_classes = 2;
  /// Timesteps of the uniform-prediction probe; every step is labelled class 1.
  std::size_t probe_timesteps = 2;
  std::size_t train_count = 200;
  std::size_t timesteps = 20;
  std::size_t max_len = 8;
  std::size_t feature_dim = 64;
  int epochs = 5;
  std::size_t batch_size = 16;
};

struct VanishingResult {
  double ce_grad = 0.0;   ///< mean |dL/da| at uniform predictions, large K
  double reg_grad = 0.0;
  double ce_grad_small = 0.0;  ///< same probe, small K
  double reg_grad_small = 0.0;
  /// Training loss at the last epoch, each under its own objective.
  double ce_train_loss = 0.0;
  double reg_train_loss = 0.0;
  /// Both trained models scored with the ACE-CE objective on the training set.
  double ce_model_ce_loss = 0.0;
  double reg_model_ce_loss = 0.0;
  double initial_ce_loss = 0.0;
};

VanishingResult run_vanishing_experiment(const VanishingConfig& config);

// Counting ------------------------------------------------------------------

struct CountingConfig {
  std::uint64_t seed = 1;
  std::size_t train_count = 1000;
  std::size_t test_count = 300;
  std::size_t height = 4;
  std::size_t width = 6;
  std::size_t max_objects = 6;
  double noise_sigma = 0.3;
  int epochs = 100;
  std::size_t batch_size = 16;
};

struct CountingResult {
  CountingScores model;
  CountingScores baseline;  ///< per-class modal count for every image
};

CountingResult run_counting_experiment(const CountingConfig& config);

}  // namespace ace::experiments
