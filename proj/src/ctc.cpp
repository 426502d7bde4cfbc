#include "ace/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory_resource>

namespace ace {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void check_target(const ProbGrid& probs, const CtcTarget& target) {
  if (probs.timesteps() == 0) throw InvalidInputError("CTC needs at least one timestep");
  for (int label : target.labels()) {
    if (static_cast<std::size_t>(label) >= probs.classes()) {
      throw VocabularyError("target label " + std::to_string(label) + " outside " +
                            std::to_string(probs.classes()) + " classes");
    }
  }
  if (target.labels().size() > probs.timesteps() ||
      target.min_timesteps() > probs.timesteps()) {
    throw CapacityError("target needs at least " + std::to_string(target.min_timesteps()) +
                        " timesteps, prediction has " + std::to_string(probs.timesteps()));
  }
}

}  // namespace

CtcTarget::CtcTarget(Labels labels) : labels_(std::move(labels)) {
  extended_.reserve(2 * labels_.size() + 1);
  extended_.push_back(Alphabet::kBlank);
  for (int label : labels_) {
    if (label <= Alphabet::kBlank) {
      throw VocabularyError("CTC target contains a blank or negative label");
    }
    extended_.push_back(label);
    extended_.push_back(Alphabet::kBlank);
  }
}

std::size_t CtcTarget::min_timesteps() const noexcept {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < labels_.size(); ++i) repeats += labels_[i] == labels_[i - 1];
  return labels_.size() + repeats;
}

Labels ctc_collapse(std::span<const int> path) {
  Labels out;
  int prev = -1;
  for (int c : path) {
    if (c != prev && c != Alphabet::kBlank) out.push_back(c);
    prev = c;
  }
  return out;
}

double ctc_loss_into(const ProbGrid& probs, const CtcTarget& target, Matrix& grad_logits) {
  check_target(probs, target);
  if (grad_logits.rows() != probs.timesteps() || grad_logits.cols() != probs.classes()) {
    throw InvalidInputError("gradient buffer has the wrong shape");
  }
  const std::size_t steps = probs.timesteps();
  const std::size_t classes = probs.classes();
  const Labels& ext = target.extended();
  const std::size_t u_len = ext.size();

  // Emission, alpha and beta tables, T x U each, all log space.
  std::pmr::vector<double> emit(steps * u_len);
  std::pmr::vector<double> alpha(steps * u_len, kNegInf);
  std::pmr::vector<double> beta(steps * u_len, kNegInf);
  auto at = [u_len](std::pmr::vector<double>& v, std::size_t t, std::size_t s) -> double& {
    return v[t * u_len + s];
  };

  for (std::size_t t = 0; t < steps; ++t) {
    const auto row = probs.row(t);
    for (std::size_t s = 0; s < u_len; ++s) at(emit, t, s) = std::log(row[ext[s]]);
  }

  // A skip from s-2 is allowed onto a label that differs from the previous label.
  auto can_skip = [&ext](std::size_t s) {
    return s >= 2 && ext[s] != Alphabet::kBlank && ext[s] != ext[s - 2];
  };

  at(alpha, 0, 0) = at(emit, 0, 0);
  if (u_len > 1) at(alpha, 0, 1) = at(emit, 0, 1);
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t s = 0; s < u_len; ++s) {
      double acc = at(alpha, t - 1, s);
      if (s >= 1) acc = log_add(acc, at(alpha, t - 1, s - 1));
      if (can_skip(s)) acc = log_add(acc, at(alpha, t - 1, s - 2));
      at(alpha, t, s) = acc == kNegInf ? kNegInf : acc + at(emit, t, s);
    }
  }

  at(beta, steps - 1, u_len - 1) = at(emit, steps - 1, u_len - 1);
  if (u_len > 1) at(beta, steps - 1, u_len - 2) = at(emit, steps - 1, u_len - 2);
  for (std::size_t t = steps - 1; t-- > 0;) {
    for (std::size_t s = 0; s < u_len; ++s) {
      double acc = at(beta, t + 1, s);
      if (s + 1 < u_len) acc = log_add(acc, at(beta, t + 1, s + 1));
      if (s + 2 < u_len && can_skip(s + 2)) acc = log_add(acc, at(beta, t + 1, s + 2));
      at(beta, t, s) = acc == kNegInf ? kNegInf : acc + at(emit, t, s);
    }
  }

  double log_p = at(alpha, steps - 1, u_len - 1);
  if (u_len > 1) log_p = log_add(log_p, at(alpha, steps - 1, u_len - 2));
  if (log_p == kNegInf) {
    std::fill(grad_logits.data().begin(), grad_logits.data().end(), 0.0);
    return std::numeric_limits<double>::infinity();
  }

  // alpha_t(s) * beta_t(s) counts y^t_{ext[s]} twice, so
  // dL/dy_k^t = -(1 / (P (y_k^t)^2)) sum_{s: ext[s] = k} alpha_t(s) beta_t(s).
  std::pmr::vector<double> log_ab(classes);
  std::pmr::vector<double> upstream(classes);
  for (std::size_t t = 0; t < steps; ++t) {
    std::fill(log_ab.begin(), log_ab.end(), kNegInf);
    for (std::size_t s = 0; s < u_len; ++s) {
      const auto k = static_cast<std::size_t>(ext[s]);
      log_ab[k] = log_add(log_ab[k], at(alpha, t, s) + at(beta, t, s));
    }
    const auto row = probs.row(t);
    for (std::size_t k = 0; k < classes; ++k) {
      upstream[k] =
          log_ab[k] == kNegInf ? 0.0 : -std::exp(log_ab[k] - log_p - 2.0 * std::log(row[k]));
    }
    softmax_jacobian_apply(row, upstream, grad_logits.row(t));
  }
  return -log_p;
}

LossGrad ctc_loss(const ProbGrid& probs, const CtcTarget& target) {
  Matrix grad(probs.timesteps(), probs.classes());
  LossGrad out;
  out.loss = ctc_loss_into(probs, target, grad);
  out.grad_logits = std::move(grad);
  return out;
}

double ctc_brute_force(const ProbGrid& probs, const CtcTarget& target) {
  const std::size_t steps = probs.timesteps();
  const std::size_t classes = probs.classes();
  if (steps > 8 || classes > 8) {
    throw SizeError("brute-force CTC is limited to T <= 8 and K <= 8");
  }
  check_target(probs, target);

  std::vector<int> path(steps, 0);
  double total = 0.0;
  while (true) {
    if (ctc_collapse(path) == target.labels()) {
      double p = 1.0;
      for (std::size_t t = 0; t < steps; ++t) p *= probs(t, static_cast<std::size_t>(path[t]));
      total += p;
    }
    // Odometer increment, last timestep fastest.
    std::size_t t = steps;
    while (t > 0) {
      --t;
      if (++path[t] < static_cast<int>(classes)) break;
      path[t] = 0;
      if (t == 0) return -std::log(total);
    }
  }
}

}  // namespace ace
