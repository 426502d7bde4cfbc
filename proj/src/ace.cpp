#include "ace/ace.hpp"

#include <algorithm>
#include <cmath>
#include <memory_resource>
#include <numeric>

namespace ace {

CountAnnotation::CountAnnotation(std::vector<std::int64_t> counts, std::size_t total_timesteps)
    : counts_(std::move(counts)), total_timesteps_(total_timesteps) {
  if (counts_.size() < 2) throw InvalidInputError("count annotation needs at least two classes");
  if (total_timesteps_ == 0) throw InvalidInputError("count annotation needs T >= 1");
  std::int64_t sum = 0;
  for (auto c : counts_) {
    if (c < 0) throw CapacityError("negative class count");
    sum += c;
  }
  if (sum != static_cast<std::int64_t>(total_timesteps_)) {
    throw InvalidInputError("counts sum to " + std::to_string(sum) + ", expected T = " +
                            std::to_string(total_timesteps_));
  }
}

std::vector<double> CountAnnotation::normalized() const {
  std::vector<double> out(counts_.size());
  const double t = static_cast<double>(total_timesteps_);
  for (std::size_t k = 0; k < counts_.size(); ++k) out[k] = static_cast<double>(counts_[k]) / t;
  return out;
}

CountAnnotation CountAnnotation::with_timesteps(std::size_t total_timesteps) const {
  std::vector<std::int64_t> counts = counts_;
  const std::int64_t labels = static_cast<std::int64_t>(total_timesteps_) - counts[Alphabet::kBlank];
  if (labels > static_cast<std::int64_t>(total_timesteps)) {
    throw CapacityError(std::to_string(labels) + " labels do not fit in " +
                        std::to_string(total_timesteps) + " timesteps");
  }
  counts[Alphabet::kBlank] = static_cast<std::int64_t>(total_timesteps) - labels;
  return CountAnnotation(std::move(counts), total_timesteps);
}

CountAnnotation counts_from_sequence(std::span<const int> labels, std::size_t num_classes,
                                     std::size_t total_timesteps) {
  if (labels.size() > total_timesteps) {
    throw CapacityError("annotation of length " + std::to_string(labels.size()) +
                        " exceeds " + std::to_string(total_timesteps) + " timesteps");
  }
  std::vector<std::int64_t> counts(num_classes, 0);
  for (int label : labels) {
    if (label <= Alphabet::kBlank || static_cast<std::size_t>(label) >= num_classes) {
      throw VocabularyError("label index " + std::to_string(label) + " not a non-blank class");
    }
    ++counts[static_cast<std::size_t>(label)];
  }
  counts[Alphabet::kBlank] = static_cast<std::int64_t>(total_timesteps - labels.size());
  return CountAnnotation(std::move(counts), total_timesteps);
}

CountAnnotation counts_from_sequence(std::string_view annotation, const Alphabet& alphabet,
                                     std::size_t total_timesteps) {
  const Labels labels = alphabet.parse(annotation);
  return counts_from_sequence(labels, alphabet.size(), total_timesteps);
}

namespace {

void check_pair(const ProbGrid& probs, const CountAnnotation& ann) {
  if (ann.total_timesteps() != probs.timesteps()) {
    throw InvalidInputError("annotation is for T = " + std::to_string(ann.total_timesteps()) +
                            " but the prediction has " + std::to_string(probs.timesteps()) +
                            " timesteps");
  }
  if (ann.classes() != probs.classes()) {
    throw InvalidInputError("annotation has " + std::to_string(ann.classes()) +
                            " classes but the prediction has " +
                            std::to_string(probs.classes()));
  }
}

void check_grad(const ProbGrid& probs, const Matrix& grad) {
  if (grad.rows() != probs.timesteps() || grad.cols() != probs.classes()) {
    throw InvalidInputError("gradient buffer has the wrong shape");
  }
}

// Column sums in t-major order so every caller reproduces the same bits.
void accumulate_columns(const ProbGrid& probs, std::span<double> totals) {
  std::fill(totals.begin(), totals.end(), 0.0);
  const std::size_t classes = probs.classes();
  for (std::size_t t = 0; t < probs.timesteps(); ++t) {
    const double* row = probs.row(t).data();
    for (std::size_t k = 0; k < classes; ++k) totals[k] += row[k];
  }
}

}  // namespace

Aggregate aggregate(const ProbGrid& probs) {
  Aggregate agg;
  agg.totals.resize(probs.classes());
  accumulate_columns(probs, agg.totals);
  agg.normalized.resize(probs.classes());
  const double t = static_cast<double>(probs.timesteps());
  for (std::size_t k = 0; k < agg.totals.size(); ++k) agg.normalized[k] = agg.totals[k] / t;
  return agg;
}

double ace_ce_loss_into(const ProbGrid& probs, const CountAnnotation& ann, Matrix& grad_logits) {
  check_pair(probs, ann);
  check_grad(probs, grad_logits);
  const std::size_t steps = probs.timesteps();
  const std::size_t classes = probs.classes();
  const double t_inv = 1.0 / static_cast<double>(steps);

  std::pmr::vector<double> totals(classes);
  std::pmr::vector<double> weights(classes, 0.0);
  accumulate_columns(probs, totals);

  // Only classes with N_k > 0 contribute to the loss or to <w, y^t>.
  double loss = 0.0;
  const auto& counts = ann.counts();
  for (std::size_t k = 0; k < classes; ++k) {
    if (counts[k] == 0) continue;
    const double target = static_cast<double>(counts[k]) * t_inv;
    const double ybar = std::max(totals[k] * t_inv, kLogClamp);
    loss -= target * std::log(ybar);
    weights[k] = target / ybar;
  }

  std::size_t active_count = 0;
  for (std::size_t k = 0; k < classes; ++k) active_count += counts[k] != 0;
  std::pmr::vector<std::size_t> active;
  active.reserve(active_count);
  for (std::size_t k = 0; k < classes; ++k) {
    if (counts[k] != 0) active.push_back(k);
  }

  const double* w = weights.data();
  for (std::size_t t = 0; t < steps; ++t) {
    const double* y = probs.row(t).data();
    double* g = grad_logits.row(t).data();
    double s = 0.0;
    for (std::size_t k : active) s += w[k] * y[k];
    for (std::size_t k = 0; k < classes; ++k) g[k] = -t_inv * y[k] * (w[k] - s);
  }
  return loss;
}

LossGrad ace_ce_loss(const ProbGrid& probs, const CountAnnotation& ann) {
  Matrix grad(probs.timesteps(), probs.classes());
  LossGrad out;
  out.loss = ace_ce_loss_into(probs, ann, grad);
  out.grad_logits = std::move(grad);
  return out;
}

LossGrad ace_ce_loss_2d(const ProbGrid& probs, const CountAnnotation& ann) {
  if (!probs.shape()) throw InvalidInputError("ace_ce_loss_2d: prediction has no 2D shape");
  LossGrad flat = ace_ce_loss(flatten_2d(probs), ann);
  flat.grad_logits = unflatten_2d(*flat.grad_logits, *probs.shape());
  return flat;
}

double ace_regression_loss_into(const ProbGrid& probs, const CountAnnotation& ann,
                                Matrix& grad_logits) {
  check_pair(probs, ann);
  check_grad(probs, grad_logits);
  const std::size_t classes = probs.classes();
  std::pmr::vector<double> totals(classes);
  std::pmr::vector<double> delta(classes);
  accumulate_columns(probs, totals);

  double loss = 0.0;
  for (std::size_t k = 0; k < classes; ++k) {
    delta[k] = totals[k] - static_cast<double>(ann.counts()[k]);
    loss += 0.5 * delta[k] * delta[k];
  }
  for (std::size_t t = 0; t < probs.timesteps(); ++t) {
    softmax_jacobian_apply(probs.row(t), delta, grad_logits.row(t));
  }
  return loss;
}

LossGrad ace_regression_loss(const ProbGrid& probs, const CountAnnotation& ann) {
  Matrix grad_logits(probs.timesteps(), probs.classes());
  LossGrad out;
  out.loss = ace_regression_loss_into(probs, ann, grad_logits);

  Matrix grad_probs(probs.timesteps(), probs.classes());
  const Aggregate agg = aggregate(probs);
  for (std::size_t t = 0; t < probs.timesteps(); ++t) {
    auto row = grad_probs.row(t);
    for (std::size_t k = 0; k < row.size(); ++k) {
      row[k] = agg.totals[k] - static_cast<double>(ann.counts()[k]);
    }
  }
  out.grad_logits = std::move(grad_logits);
  out.grad_probs = std::move(grad_probs);
  return out;
}

double gradient_magnitude_profile(const ProbGrid& probs, const CountAnnotation& ann,
                                  AceVariant variant) {
  const LossGrad lg = variant == AceVariant::kRegression ? ace_regression_loss(probs, ann)
                                                         : ace_ce_loss(probs, ann);
  const auto g = lg.grad_logits->data();
  if (g.empty()) return 0.0;
  double sum = 0.0;
  for (double v : g) sum += std::abs(v);
  return sum / static_cast<double>(g.size());
}

}  // namespace ace
