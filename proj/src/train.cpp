#include "ace/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "ace/ace.hpp"
#include "ace/ctc.hpp"

namespace ace {

const char* to_string(LossVariant variant) {
  switch (variant) {
    case LossVariant::kAceCe: return "ace-ce";
    case LossVariant::kAceRegression: return "ace-reg";
    case LossVariant::kCtc: return "ctc";
  }
  return "?";
}

LossVariant parse_loss_variant(const std::string& raw) {
  std::string name = raw;
  std::replace(name.begin(), name.end(), '_', '-');
  if (name == "ace-ce" || name == "ace") return LossVariant::kAceCe;
  if (name == "ace-reg" || name == "ace-regression") return LossVariant::kAceRegression;
  if (name == "ctc") return LossVariant::kCtc;
  throw InvalidInputError("unknown loss '" + raw + "'");
}

double default_learning_rate(LossVariant variant) {
  return variant == LossVariant::kAceRegression ? 0.01 : 0.1;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidInputError("learning_rate must be positive");
  if (epochs < 1) throw InvalidInputError("epochs must be at least 1");
  if (batch_size < 1) throw InvalidInputError("batch_size must be at least 1");
  if (eval_every < 1) throw InvalidInputError("eval_every must be at least 1");
}

nlohmann::json EpochMetrics::to_json() const {
  nlohmann::json j = {{"epoch", epoch}, {"loss", loss}};
  if (evaluated) {
    j["cer"] = cer;
    j["seq_acc"] = seq_acc;
    j["count_acc"] = count_acc;
  } else {
    j["cer"] = nullptr;
    j["seq_acc"] = nullptr;
    j["count_acc"] = nullptr;
  }
  return j;
}

double sample_loss(LossVariant variant, const ProbGrid& probs, const Sample& sample,
                   Matrix& grad_logits) {
  const std::size_t classes = probs.classes();
  switch (variant) {
    case LossVariant::kAceCe: {
      const CountAnnotation ann = sample.counts(classes);
      if (!probs.shape()) return ace_ce_loss_into(probs, ann, grad_logits);
      LossGrad lg = ace_ce_loss_2d(probs, ann);
      grad_logits = std::move(*lg.grad_logits);
      return lg.loss;
    }
    case LossVariant::kAceRegression:
      // Row order does not enter the regression loss, so grids need no flattening.
      return ace_regression_loss_into(probs, sample.counts(classes), grad_logits);
    case LossVariant::kCtc: {
      const CtcTarget target(sample.annotation);
      if (!probs.shape()) return ctc_loss_into(probs, target, grad_logits);
      LossGrad lg = ctc_loss(flatten_2d(probs), target);
      grad_logits = unflatten_2d(*lg.grad_logits, *probs.shape());
      return lg.loss;
    }
  }
  throw InvalidInputError("unknown loss variant");
}

double batch_loss_and_grad(const ToyModel& model, const Dataset& data,
                           std::span<const std::size_t> indices, LossVariant variant,
                           ToyModel& grad) {
  grad = ToyModel::zeros(model.input_dim, model.num_classes, model.hidden_units);
  double total = 0.0;
  for (std::size_t i : indices) {
    const Sample& s = data.samples.at(i);
    ForwardCache cache;
    const ProbGrid probs = softmax(forward(model, s.features, s.grid, &cache));
    Matrix grad_logits(probs.timesteps(), probs.classes());
    total += sample_loss(variant, probs, s, grad_logits);
    backward(model, s.features, cache, grad_logits, grad);
  }
  const double scale = 1.0 / static_cast<double>(indices.size());
  for (auto block : grad.parameters()) {
    for (double& v : block) v *= scale;
  }
  return total * scale;
}

std::size_t evaluation_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("ACE_SEQ_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(cap, &end, 10);
    if (end != cap && v >= 1) n = std::min(n, static_cast<std::size_t>(v));
  }
  return n;
}

namespace {

struct SampleResult {
  double loss = 0.0;
  double cer = 0.0;
  bool seq_ok = false;
  bool count_ok = false;
  std::vector<std::int64_t> predicted;
  std::vector<std::int64_t> truth;
};

SampleResult evaluate_sample(const ToyModel& model, const Sample& s, LossVariant variant) {
  SampleResult r;
  const ProbGrid probs = softmax(forward(model, s.features, s.grid));
  Matrix grad(probs.timesteps(), probs.classes());
  r.loss = sample_loss(variant, probs, s, grad);
  const Labels decoded = greedy_decode(probs.shape() ? flatten_2d(probs) : probs);
  r.cer = cer(decoded, s.annotation);
  r.seq_ok = sequence_match(decoded, s.annotation);
  r.count_ok = count_match(decoded, s.annotation);
  r.predicted = predicted_counts(probs);
  r.truth = class_counts(s.annotation, probs.classes());
  return r;
}

}  // namespace

EvalMetrics evaluate(const ToyModel& model, const Dataset& data, LossVariant loss_variant,
                     std::size_t threads) {
  const std::size_t n = data.samples.size();
  if (n == 0) throw InvalidInputError("cannot evaluate on an empty dataset");
  if (threads == 0) threads = evaluation_threads();
  threads = std::min(threads, n);

  std::vector<SampleResult> results(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      results[i] = evaluate_sample(model, data.samples[i], loss_variant);
    }
  };
  if (threads <= 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t b = 0; b < n; b += chunk) pool.emplace_back(work, b, std::min(n, b + chunk));
    for (auto& th : pool) th.join();
  }

  EvalMetrics m;
  std::vector<std::vector<std::int64_t>> predicted;
  std::vector<std::vector<std::int64_t>> truth;
  predicted.reserve(n);
  truth.reserve(n);
  for (auto& r : results) {
    m.loss += r.loss;
    m.cer += r.cer;
    m.seq_acc += r.seq_ok ? 1.0 : 0.0;
    m.count_acc += r.count_ok ? 1.0 : 0.0;
    predicted.push_back(std::move(r.predicted));
    truth.push_back(std::move(r.truth));
  }
  const double inv = 1.0 / static_cast<double>(n);
  m.loss *= inv;
  m.cer *= inv;
  m.seq_acc *= inv;
  m.count_acc *= inv;
  m.counting = rmse_metrics(predicted, truth);
  return m;
}

TrainResult train(const TrainConfig& config, const Dataset& train_set, ToyModel model,
                  const Dataset* eval_set) {
  config.validate();
  if (train_set.samples.empty()) throw InvalidInputError("training set is empty");
  if (train_set.feature_dim != model.input_dim || train_set.alphabet.size() != model.num_classes) {
    throw InvalidInputError("model shape does not match the training set");
  }
  const Dataset& eval_data = eval_set ? *eval_set : train_set;

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.samples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  ToyModel grad;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + b, e - b);
      double loss = 0.0;
      try {
        loss = batch_loss_and_grad(model, train_set, batch, config.loss, grad);
      } catch (const InvalidInputError&) {
        // shapes were checked above, so this is overflow in the activations
        throw TrainingFailure(epoch, "non-finite activations");
      }
      if (!std::isfinite(loss)) throw TrainingFailure(epoch, "non-finite training loss");
      epoch_loss += loss * static_cast<double>(batch.size());

      auto params = model.parameters();
      auto grads = grad.parameters();
      for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t j = 0; j < params[p].size(); ++j) {
          params[p][j] -= config.learning_rate * grads[p][j];
        }
        if (!all_finite(params[p])) throw TrainingFailure(epoch, "non-finite parameters");
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.loss = epoch_loss / static_cast<double>(order.size());
    if (epoch % config.eval_every == 0 || epoch == config.epochs) {
      const EvalMetrics ev = evaluate(model, eval_data, config.loss);
      m.evaluated = true;
      m.cer = ev.cer;
      m.seq_acc = ev.seq_acc;
      m.count_acc = ev.count_acc;
    }
    result.log.push_back(m);
  }
  result.model = std::move(model);
  return result;
}

void write_metrics_log(std::ostream& out, const std::vector<EpochMetrics>& log) {
  for (const auto& m : log) out << m.to_json().dump() << '\n';
}

}  // namespace ace
