#include "ace/bench.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <thread>

#include "ace/ace.hpp"
#include "ace/ctc.hpp"

namespace ace::bench {

void BenchSpec::validate() const {
  if (timesteps == 0 || classes < 2 || batch == 0 || repeats == 0 || seq_len == 0) {
    throw InvalidInputError("bench settings must be positive (classes >= 2)");
  }
  if (seq_len > timesteps) {
    throw CapacityError("seq_len " + std::to_string(seq_len) + " exceeds T = " +
                        std::to_string(timesteps));
  }
  if (classes < 3 && seq_len > 1) {
    // With one non-blank class every label repeats, needing 2|S|-1 steps.
    if (2 * seq_len - 1 > timesteps) throw CapacityError("CTC target infeasible for these settings");
  }
}

void* CountingResource::do_allocate(std::size_t bytes, std::size_t align) {
  void* p = upstream_->allocate(bytes, align);
  current_ += bytes;
  peak_ = std::max(peak_, current_);
  return p;
}

void CountingResource::do_deallocate(void* p, std::size_t bytes, std::size_t align) {
  upstream_->deallocate(p, bytes, align);
  current_ -= bytes;
}

namespace {

struct Workload {
  std::vector<ProbGrid> probs;
  std::vector<CountAnnotation> counts;
  std::vector<CtcTarget> targets;
  std::vector<Matrix> grads;
};

Workload make_workload(const BenchSpec& spec) {
  Workload w;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> logit(-3.0, 3.0);
  std::uniform_int_distribution<int> label(1, static_cast<int>(spec.classes) - 1);
  for (std::size_t b = 0; b < spec.batch; ++b) {
    Matrix a(spec.timesteps, spec.classes);
    for (double& v : a.data()) v = logit(rng);
    w.probs.push_back(softmax(LogitGrid(std::move(a))));

    // Avoid adjacent repeats so any seq_len <= T is feasible for CTC.
    Labels labels;
    while (labels.size() < spec.seq_len) {
      const int c = label(rng);
      if (!labels.empty() && c == labels.back() && spec.classes > 2) continue;
      labels.push_back(c);
    }
    w.counts.push_back(counts_from_sequence(labels, spec.classes, spec.timesteps));
    w.targets.emplace_back(std::move(labels));
    w.grads.emplace_back(spec.timesteps, spec.classes);
  }
  return w;
}

using SampleFn = std::function<double(std::size_t)>;

void run_batch(const BenchSpec& spec, const SampleFn& fn) {
  const std::size_t n = spec.batch;
  std::size_t threads = spec.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                          : spec.threads;
  threads = std::min(threads, n);
  if (!spec.parallel || threads <= 1) {
    for (std::size_t b = 0; b < n; ++b) fn(b);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t start = 0; start < n; start += chunk) {
    pool.emplace_back([&fn, start, end = std::min(n, start + chunk)] {
      for (std::size_t b = start; b < end; ++b) fn(b);
    });
  }
  for (auto& th : pool) th.join();
}

BenchResult time_loss(const BenchSpec& spec, const std::string& name, const SampleFn& fn,
                      std::size_t aux_per_sample) {
  BenchResult r;
  r.loss_name = name;
  r.timesteps = spec.timesteps;
  r.classes = spec.classes;
  r.batch = spec.batch;
  r.aux_bytes_per_sample = aux_per_sample;
  r.aux_bytes = aux_per_sample * spec.batch;

  {
    CountingResource counter;
    ScopedDefaultResource scope(&counter);
    fn(0);
    r.measured_aux_bytes = counter.peak();
  }

  for (std::size_t i = 0; i < spec.warmup; ++i) run_batch(spec, fn);
  for (std::size_t i = 0; i < spec.repeats; ++i) {
    const auto start = std::chrono::steady_clock::now();
    run_batch(spec, fn);
    const auto stop = std::chrono::steady_clock::now();
    r.times_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  std::vector<double> sorted = r.times_ms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  r.median_ms = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return r;
}

std::size_t active_classes(const CountAnnotation& ann) {
  return static_cast<std::size_t>(
      std::count_if(ann.counts().begin(), ann.counts().end(), [](auto c) { return c != 0; }));
}

}  // namespace

std::vector<BenchResult> run_bench(const BenchSpec& spec) {
  spec.validate();
  Workload w = make_workload(spec);
  std::vector<BenchResult> out;

  out.push_back(time_loss(
      spec, "ace-ce",
      [&w](std::size_t b) { return ace_ce_loss_into(w.probs[b], w.counts[b], w.grads[b]); },
      ace_workspace_bytes(spec.classes, active_classes(w.counts[0]))));
  out.push_back(time_loss(
      spec, "ace-reg",
      [&w](std::size_t b) {
        return ace_regression_loss_into(w.probs[b], w.counts[b], w.grads[b]);
      },
      2 * spec.classes * sizeof(double)));
  out.push_back(time_loss(
      spec, "ctc",
      [&w](std::size_t b) { return ctc_loss_into(w.probs[b], w.targets[b], w.grads[b]); },
      ctc_workspace_bytes(spec.timesteps, spec.seq_len, spec.classes)));
  return out;
}

void write_table(std::ostream& out, const std::vector<BenchResult>& results) {
  out << std::left << std::setw(9) << "loss" << std::right << std::setw(6) << "T"
      << std::setw(8) << "K" << std::setw(7) << "batch" << std::setw(13) << "median_ms"
      << std::setw(14) << "aux_bytes" << std::setw(16) << "measured_aux" << std::setw(8)
      << "params" << '\n';
  for (const auto& r : results) {
    out << std::left << std::setw(9) << r.loss_name << std::right << std::setw(6)
        << r.timesteps << std::setw(8) << r.classes << std::setw(7) << r.batch
        << std::setw(13) << std::fixed << std::setprecision(3) << r.median_ms
        << std::setw(14) << r.aux_bytes << std::setw(16) << r.measured_aux_bytes
        << std::setw(8) << r.params << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

void write_csv(std::ostream& out, const std::vector<BenchResult>& results) {
  out << "loss,T,K,batch,median_ms,aux_bytes,params,measured_aux_bytes\n";
  for (const auto& r : results) {
    out << r.loss_name << ',' << r.timesteps << ',' << r.classes << ',' << r.batch << ','
        << std::setprecision(6) << r.median_ms << ',' << r.aux_bytes << ',' << r.params << ','
        << r.measured_aux_bytes << '\n';
  }
}

}  // namespace ace::bench
