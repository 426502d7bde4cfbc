#include <doctest.h>

#include <sstream>

#include "ace/ace.hpp"
#include "ace/bench.hpp"
#include "ace/ctc.hpp"

using namespace ace;
using namespace ace::bench;

namespace {

BenchSpec tiny(std::size_t t = 30, std::size_t k = 12, std::size_t seq = 5) {
  BenchSpec s;
  s.timesteps = t;
  s.classes = k;
  s.batch = 4;
  s.repeats = 3;
  s.warmup = 1;
  s.seq_len = seq;
  return s;
}

const BenchResult& find(const std::vector<BenchResult>& rs, const std::string& name) {
  for (const auto& r : rs) {
    if (r.loss_name == name) return r;
  }
  FAIL("missing " << name);
  return rs.front();
}

}  // namespace

TEST_CASE("bench reports all three losses with zero parameters") {
  const auto rs = run_bench(tiny());
  REQUIRE(rs.size() == 3);
  for (const auto& r : rs) {
    CHECK(r.params == 0);
    CHECK(r.median_ms > 0.0);
    CHECK(r.times_ms.size() == 3);
    CHECK(r.aux_bytes == r.aux_bytes_per_sample * 4);
  }
}

TEST_CASE("measured allocations agree with the analytic workspace") {
  for (const auto& r : run_bench(tiny(50, 20, 8))) {
    CAPTURE(r.loss_name);
    CHECK(r.measured_aux_bytes == r.aux_bytes_per_sample);
  }
}

TEST_CASE("ACE workspace is below CTC at T = 144, K = 37") {
  BenchSpec s = tiny(144, 37, 10);
  s.batch = 64;
  s.repeats = 1;
  s.warmup = 0;
  const auto rs = run_bench(s);
  CHECK(find(rs, "ace-ce").aux_bytes < find(rs, "ctc").aux_bytes);
}

TEST_CASE("workspace scaling across a grid of sizes") {
  for (std::size_t t : {50, 100, 200}) {
    for (std::size_t k : {10, 100, 1000}) {
      for (std::size_t s : {5, 10, 20}) {
        // ACE: linear in K, no dependence on T.
        CHECK(ace_workspace_bytes(k, s) == 2 * k * sizeof(double) + s * sizeof(std::size_t));
        CHECK(ace_workspace_bytes(2 * k, s) - ace_workspace_bytes(k, s) == 2 * k * sizeof(double));
        // CTC: the T x (2S+1) tables dominate and scale with both.
        const std::size_t tables = ctc_workspace_bytes(t, s, k) - 2 * k * sizeof(double);
        CHECK(tables == 3 * t * (2 * s + 1) * sizeof(double));
        CHECK(ctc_workspace_bytes(2 * t, s, k) - ctc_workspace_bytes(t, s, k) == tables);
      }
    }
  }
}

TEST_CASE("CTC time grows with the target length") {
  std::vector<double> medians;
  for (std::size_t seq : {2, 30, 70}) {
    BenchSpec s = tiny(144, 37, seq);
    s.batch = 16;
    s.repeats = 9;
    s.warmup = 2;
    medians.push_back(find(run_bench(s), "ctc").median_ms);
  }
  CHECK(medians[0] <= medians[1]);
  CHECK(medians[1] <= medians[2]);
}

TEST_CASE("parallel mode runs") {
  BenchSpec s = tiny();
  s.parallel = true;
  s.threads = 2;
  CHECK(run_bench(s).size() == 3);
}

TEST_CASE("bench settings are validated") {
  CHECK_THROWS_AS(run_bench(tiny(5, 12, 6)), CapacityError);
  BenchSpec s = tiny();
  s.repeats = 0;
  CHECK_THROWS_AS(run_bench(s), InvalidInputError);
  s = tiny();
  s.classes = 1;
  CHECK_THROWS_AS(run_bench(s), InvalidInputError);
}

TEST_CASE("table and CSV output") {
  const auto rs = run_bench(tiny());
  std::ostringstream csv;
  write_csv(csv, rs);
  std::istringstream in(csv.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "loss,T,K,batch,median_ms,aux_bytes,params,measured_aux_bytes");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 3);

  std::ostringstream table;
  write_table(table, rs);
  CHECK(table.str().find("ace-ce") != std::string::npos);
  CHECK(table.str().find("median_ms") != std::string::npos);
}

TEST_CASE("counting resource tracks the peak") {
  CountingResource counter;
  {
    ScopedDefaultResource scope(&counter);
    std::pmr::vector<double> a(100);
    { std::pmr::vector<double> b(50); }
  }
  CHECK(counter.peak() == 150 * sizeof(double));
  CHECK(counter.current() == 0);
}
