#include "ace/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <ostream>

#include "ace/ace.hpp"

namespace ace::experiments {

namespace {

// Test sets come from a seed disjoint from any training seed in practice.
constexpr std::uint64_t kTestSeedSalt = 0x7e57000000000000ULL;

Dataset sequence_set(std::uint64_t seed, std::size_t count, std::size_t timesteps,
                     std::size_t max_len, double sigma, const Alphabet& alphabet,
                     std::size_t feature_dim = 0) {
  SequenceParams p;
  p.seed = seed;
  p.count = count;
  p.timesteps = timesteps;
  p.max_len = max_len;
  p.noise_sigma = sigma;
  p.feature_dim = feature_dim;
  return gen_sequences(p, alphabet);
}

TrainConfig config_for(LossVariant loss, int epochs, std::size_t batch, std::uint64_t seed) {
  TrainConfig c;
  c.loss = loss;
  c.learning_rate = default_learning_rate(loss);
  c.epochs = epochs;
  c.batch_size = batch;
  c.seed = seed;
  return c;
}

bool is_ace(LossVariant v) { return v != LossVariant::kCtc; }

}  // namespace

nlohmann::json ShuffleExpConfig::to_json() const {
  std::vector<std::string> names;
  for (auto l : losses) names.emplace_back(to_string(l));
  return {{"ratios", ratios},         {"losses", names},
          {"seeds", seeds},           {"seed", seed},
          {"train_count", train_count}, {"test_count", test_count},
          {"timesteps", timesteps},   {"max_len", max_len},
          {"noise_sigma", noise_sigma}, {"epochs", epochs},
          {"batch_size", batch_size}};
}

ShuffleExpResult run_shuffle_experiment(const ShuffleExpConfig& config) {
  if (config.ratios.empty() || config.losses.empty() || config.seeds == 0) {
    throw InvalidInputError("shuffle experiment needs ratios, losses and seeds");
  }
  for (double r : config.ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidInputError("shuffle ratio outside [0, 1]");
  }
  const Alphabet alphabet = Alphabet::digits();
  const std::size_t k = alphabet.size();
  ShuffleExpResult result;

  double lo_ratio = config.ratios.front();
  double hi_ratio = config.ratios.front();
  for (double r : config.ratios) {
    lo_ratio = std::min(lo_ratio, r);
    hi_ratio = std::max(hi_ratio, r);
  }
  double cer_lo = 0.0;
  double cer_hi = 0.0;

  for (std::size_t i = 0; i < config.seeds; ++i) {
    const std::uint64_t seed = config.seed + i;
    const Dataset train_base = sequence_set(seed, config.train_count, config.timesteps,
                                            config.max_len, config.noise_sigma, alphabet);
    const Dataset test = sequence_set(seed ^ kTestSeedSalt, config.test_count, config.timesteps,
                                      config.max_len, config.noise_sigma, alphabet);
    const ToyModel init = ToyModel::random(k, k, 0, seed);

    for (LossVariant loss : config.losses) {
      std::optional<std::vector<EpochMetrics>> reference;
      for (double ratio : config.ratios) {
        const Dataset shuffled = apply_shuffle(train_base, ShuffleSpec{ratio}, seed);
        TrainResult tr =
            train(config_for(loss, config.epochs, config.batch_size, seed), shuffled, init, &test);
        result.cells.push_back({loss, ratio, seed, std::move(tr.log)});
        const auto& log = result.cells.back().log;
        if (is_ace(loss)) {
          if (!reference) {
            reference = log;
          } else if (log != *reference) {
            result.ace_logs_identical = false;
          }
        } else {
          result.ran_ctc = true;
          if (ratio == lo_ratio) cer_lo += log.back().cer;
          if (ratio == hi_ratio) cer_hi += log.back().cer;
        }
      }
    }
  }
  result.ctc_cer_low = cer_lo / static_cast<double>(config.seeds);
  result.ctc_cer_high = cer_hi / static_cast<double>(config.seeds);
  return result;
}

void write_shuffle_table(std::ostream& out, const ShuffleExpResult& result) {
  out << "loss,ratio,seed,epoch,train_loss,cer,seq_acc,count_acc\n";
  const auto precision = out.precision(10);
  for (const auto& c : result.cells) {
    const EpochMetrics& m = c.log.back();
    out << to_string(c.loss) << ',' << c.ratio << ',' << c.seed << ',' << m.epoch << ','
        << m.loss << ',' << m.cer << ',' << m.seq_acc << ',' << m.count_acc << '\n';
  }
  out.precision(precision);
}

ParityResult run_parity_experiment(const ParityConfig& config) {
  const Alphabet alphabet = Alphabet::digits();
  const std::size_t k = alphabet.size();
  const Dataset train_set =
      sequence_set(config.seed, config.train_count, config.timesteps, config.max_len, 0.0, alphabet);
  const Dataset test = sequence_set(config.seed ^ kTestSeedSalt, config.test_count,
                                    config.timesteps, config.max_len, 0.0, alphabet);
  const ToyModel init = ToyModel::random(k, k, 0, config.seed);

  auto run = [&](LossVariant loss) {
    ParityRun r;
    r.loss = loss;
    TrainConfig tc = config_for(loss, config.epochs, config.batch_size, config.seed);
    tc.eval_every = config.epochs;
    const auto start = std::chrono::steady_clock::now();
    r.trained = train(tc, train_set, init, &test);
    r.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.test = evaluate(r.trained.model, test, loss);
    return r;
  };
  return {run(LossVariant::kAceCe), run(LossVariant::kCtc)};
}

VanishingResult run_vanishing_experiment(const VanishingConfig& config) {
  VanishingResult r;

  auto probe = [&](std::size_t classes, double& ce, double& reg) {
    const std::size_t t = config.probe_timesteps;
    const ProbGrid uniform(Matrix(t, classes, 1.0 / static_cast<double>(classes)));
    const CountAnnotation ann = counts_from_sequence(Labels(t, 1), classes, t);
    ce = gradient_magnitude_profile(uniform, ann, AceVariant::kCrossEntropy);
    reg = gradient_magnitude_profile(uniform, ann, AceVariant::kRegression);
  };
  probe(config.num_classes, r.ce_grad, r.reg_grad);
  probe(config.small_classes, r.ce_grad_small, r.reg_grad_small);

  const Alphabet alphabet = Alphabet::numbered(config.num_classes - 1);
  const Dataset data = sequence_set(config.seed, config.train_count, config.timesteps,
                                    config.max_len, 0.0, alphabet, config.feature_dim);
  const ToyModel init = ToyModel::random(config.feature_dim, config.num_classes, 0, config.seed);
  r.initial_ce_loss = evaluate(init, data, LossVariant::kAceCe).loss;

  auto run = [&](LossVariant loss) {
    TrainConfig tc = config_for(loss, config.epochs, config.batch_size, config.seed);
    tc.eval_every = config.epochs;
    return train(tc, data, init);
  };
  const TrainResult ce = run(LossVariant::kAceCe);
  const TrainResult reg = run(LossVariant::kAceRegression);
  r.ce_train_loss = ce.log.back().loss;
  r.reg_train_loss = reg.log.back().loss;
  r.ce_model_ce_loss = evaluate(ce.model, data, LossVariant::kAceCe).loss;
  r.reg_model_ce_loss = evaluate(reg.model, data, LossVariant::kAceCe).loss;
  return r;
}

CountingResult run_counting_experiment(const CountingConfig& config) {
  const Alphabet alphabet = Alphabet::digits();
  const std::size_t k = alphabet.size();
  GridParams p;
  p.seed = config.seed;
  p.count = config.train_count;
  p.height = config.height;
  p.width = config.width;
  p.max_objects = config.max_objects;
  p.noise_sigma = config.noise_sigma;
  const Dataset train_set = gen_grids(p, alphabet, TaskKind::kCount);
  p.seed = config.seed ^ kTestSeedSalt;
  p.count = config.test_count;
  const Dataset test = gen_grids(p, alphabet, TaskKind::kCount);

  TrainConfig tc = config_for(LossVariant::kAceCe, config.epochs, config.batch_size, config.seed);
  tc.eval_every = config.epochs;
  const TrainResult tr = train(tc, train_set, ToyModel::random(k, k, 0, config.seed), &test);

  CountingResult r;
  r.model = evaluate(tr.model, test, LossVariant::kAceCe).counting;

  std::vector<std::vector<std::int64_t>> train_truth;
  for (const auto& s : train_set.samples) train_truth.push_back(class_counts(s.annotation, k));
  const std::vector<std::int64_t> modal = modal_counts(train_truth);
  std::vector<std::vector<std::int64_t>> truth;
  for (const auto& s : test.samples) truth.push_back(class_counts(s.annotation, k));
  r.baseline = rmse_metrics(std::vector<std::vector<std::int64_t>>(truth.size(), modal), truth);
  return r;
}

}  // namespace ace::experiments
