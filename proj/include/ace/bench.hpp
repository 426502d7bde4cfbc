#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory_resource>
#include <string>
#include <vector>

namespace ace::bench {

struct BenchSpec {
  std::size_t timesteps = 144;
  std::size_t classes = 37;
  std::size_t batch = 64;
  std::size_t repeats = 9;
  std::size_t seq_len = 10;
  std::size_t warmup = 2;
  std::uint64_t seed = 1;
  /// Spread the samples of a batch over worker threads.
  bool parallel = false;
  std::size_t threads = 0;

  void validate() const;
};

struct BenchResult {
  std::string loss_name;
  std::size_t timesteps = 0;
  std::size_t classes = 0;
  std::size_t batch = 0;
  double median_ms = 0.0;  ///< per batch, loss plus logit gradient
  std::vector<double> times_ms;
  std::size_t aux_bytes_per_sample = 0;  ///< analytic workspace
  std::size_t aux_bytes = 0;             ///< analytic, whole batch
  std::size_t measured_aux_bytes = 0;    ///< peak allocation seen for one sample
  std::size_t params = 0;
};

/// Times ACE-CE, ACE regression and CTC on identical random inputs.
std::vector<BenchResult> run_bench(const BenchSpec& spec);

void write_table(std::ostream& out, const std::vector<BenchResult>& results);
void write_csv(std::ostream& out, const std::vector<BenchResult>& results);

/// Pass-through memory resource recording current and peak bytes.
class CountingResource : public std::pmr::memory_resource {
 public:
  explicit CountingResource(std::pmr::memory_resource* upstream = std::pmr::new_delete_resource())
      : upstream_(upstream) {}

  std::size_t peak() const noexcept { return peak_; }
  std::size_t current() const noexcept { return current_; }
  void reset_peak() noexcept { peak_ = current_; }

 private:
  void* do_allocate(std::size_t bytes, std::size_t align) override;
  void do_deallocate(void* p, std::size_t bytes, std::size_t align) override;
  bool do_is_equal(const std::pmr::memory_resource& other) const noexcept override {
    return this == &other;
  }

  std::pmr::memory_resource* upstream_;
  std::size_t current_ = 0;
  std::size_t peak_ = 0;
};

/// Installs a resource as the std::pmr default for the current scope.
class ScopedDefaultResource {
 public:
  explicit ScopedDefaultResource(std::pmr::memory_resource* r)
      : previous_(std::pmr::set_default_resource(r)) {}
  ~ScopedDefaultResource() { std::pmr::set_default_resource(previous_); }
  ScopedDefaultResource(const ScopedDefaultResource&) = delete;
  ScopedDefaultResource& operator=(const ScopedDefaultResource&) = delete;

 private:
  std::pmr::memory_resource* previous_;
};

}  // namespace ace::bench
