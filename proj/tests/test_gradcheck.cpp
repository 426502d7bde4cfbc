#include <doctest.h>

#include <cmath>

#include "ace/ctc.hpp"
#include "ace/gradcheck.hpp"

using namespace ace;
using namespace ace::gradcheck;

TEST_CASE("relative error and the tiny-entry rule") {
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1.0, 0.5) == 0.5);
  CHECK(relative_error(-2.0, 2.0) == 2.0);
  const Tolerance tol{1e-6, 1e-8};
  CHECK(entry_ok(1.0, 1.0 + 1e-7, tol));
  CHECK_FALSE(entry_ok(1.0, 1.0 + 1e-5, tol));
  // Both tiny: compared absolutely even though the relative error is huge.
  CHECK(entry_ok(1e-12, -1e-12, tol));
  CHECK_FALSE(entry_ok(1e-12, 5e-8, tol));
}

TEST_CASE("compare counts entries and failures") {
  Matrix a(2, 2, std::vector<double>{1.0, 2.0, 1e-12, 3.0});
  Matrix n(2, 2, std::vector<double>{1.0, 2.1, 0.0, 3.0});
  const Comparison c = compare(a, n, Tolerance{});
  CHECK(c.entries == 4);
  CHECK(c.failures == 1);
  CHECK(c.max_rel_error == doctest::Approx(0.1 / 2.1));
  CHECK(c.max_abs_tiny == 1e-12);
}

TEST_CASE("reference losses agree with the library") {
  std::mt19937_64 rng(81);
  for (int trial = 0; trial < 50; ++trial) {
    const Instance in = random_instance(rng, 1, 10, 2, 8, true);
    const LogitGrid logits(in.logits);
    const ProbGrid probs = softmax(logits);
    const std::size_t t = in.logits.rows(), k = in.logits.cols();
    const CountAnnotation ann = counts_from_sequence(in.labels, k, t);
    CHECK(reference_ace_ce(in.logits, ann) == doctest::Approx(ace_ce_loss(probs, ann).loss).epsilon(1e-12));
    CHECK(reference_ace_regression(in.logits, ann) ==
          doctest::Approx(ace_regression_loss(probs, ann).loss).epsilon(1e-12));
    const CtcTarget target(in.labels);
    CHECK(reference_ctc(in.logits, in.labels) ==
          doctest::Approx(ctc_loss(probs, target).loss).epsilon(1e-10));
  }
}

TEST_CASE("random instances respect their bounds") {
  std::mt19937_64 rng(82);
  for (int trial = 0; trial < 200; ++trial) {
    const Instance in = random_instance(rng, 2, 7, 3, 9, true);
    CHECK(in.logits.rows() >= 2);
    CHECK(in.logits.rows() <= 7);
    CHECK(in.logits.cols() >= 3);
    CHECK(in.logits.cols() <= 9);
    for (double v : in.logits.data()) CHECK(std::abs(v) <= 3.0);
    for (int l : in.labels) {
      CHECK(l >= 1);
      CHECK(l < static_cast<int>(in.logits.cols()));
    }
    CHECK(CtcTarget(in.labels).min_timesteps() <= in.logits.rows());
  }
}

TEST_CASE("grad check passes and catches a planted error") {
  CheckOptions opt;
  opt.trials = 10;
  opt.t_max = 8;
  opt.k_max = 10;
  for (LossVariant v : {LossVariant::kAceCe, LossVariant::kAceRegression, LossVariant::kCtc}) {
    CAPTURE(to_string(v));
    const CheckReport ok = run_grad_check(v, opt);
    CHECK(ok.passed);
    CHECK(ok.trials == 10);
    CHECK(ok.failed_trials == 0);
    CHECK(ok.max_rel_error < 1e-6);
    CheckOptions bad = opt;
    bad.perturb = 1e-3;
    const CheckReport broken = run_grad_check(v, bad);
    CHECK_FALSE(broken.passed);
    CHECK(broken.failed_trials == 10);
  }
  const CheckReport ctc = run_grad_check(LossVariant::kCtc, opt);
  CHECK(ctc.oracle_cases == 100);
  CHECK(ctc.oracle_passed);
  CHECK(ctc.oracle_max_diff < 1e-10);
}
