#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "ace/metrics.hpp"
#include "ace/tasks.hpp"
#include "oracles.hpp"

using namespace ace;

namespace {

SequenceParams small_sequences(std::uint64_t seed = 1, std::size_t count = 50) {
  SequenceParams p;
  p.seed = seed;
  p.count = count;
  return p;
}

std::string serialize(const Dataset& ds) {
  std::ostringstream out;
  write_dataset(out, ds);
  return out.str();
}

// Nearest prototype per row, then CTC collapse.
Labels nearest_prototype_decode(const Matrix& features, const Matrix& protos) {
  Labels path;
  for (std::size_t t = 0; t < features.rows(); ++t) {
    double best = INFINITY;
    int arg = 0;
    for (std::size_t k = 0; k < protos.rows(); ++k) {
      double d = 0.0;
      for (std::size_t j = 0; j < protos.cols(); ++j) {
        d += (features(t, j) - protos(k, j)) * (features(t, j) - protos(k, j));
      }
      if (d < best) best = d, arg = static_cast<int>(k);
    }
    path.push_back(arg);
  }
  Labels out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path[i] != 0 && (i == 0 || path[i] != path[i - 1])) out.push_back(path[i]);
  }
  return out;
}

}  // namespace

TEST_CASE("sequence generation is deterministic") {
  const auto a = gen_sequences(small_sequences(1, 2), Alphabet::digits());
  const auto b = gen_sequences(small_sequences(1, 2), Alphabet::digits());
  CHECK(a.samples == b.samples);
  CHECK(serialize(a) == serialize(b));
  CHECK_FALSE(gen_sequences(small_sequences(2, 2), Alphabet::digits()).samples == a.samples);
}

TEST_CASE("noise-free sequences decode exactly by nearest prototype") {
  for (std::size_t dim : {std::size_t{0}, std::size_t{32}}) {
    SequenceParams p = small_sequences(3, 200);
    p.feature_dim = dim;
    const Dataset ds = gen_sequences(p, Alphabet::digits());
    const Matrix protos = make_prototypes(11, ds.feature_dim);
    for (const auto& s : ds.samples) {
      CHECK(nearest_prototype_decode(s.features, protos) == s.annotation);
    }
  }
}

TEST_CASE("sequence counts match the annotation histogram") {
  SequenceParams p = small_sequences(4, 200);
  p.noise_sigma = 0.5;
  const Dataset ds = gen_sequences(p, Alphabet::digits());
  for (const auto& s : ds.samples) {
    CHECK(s.annotation.size() >= p.min_len);
    CHECK(s.annotation.size() <= p.max_len);
    CHECK(all_finite(s.features.data()));
    const CountAnnotation ann = s.counts(11);
    CHECK(std::vector<std::int64_t>(ann.counts().begin(), ann.counts().end()) ==
          oracle::histogram(s.annotation, 11, 20));
    std::int64_t total = 0;
    for (auto c : ann.counts()) total += c;
    CHECK(total == 20);
  }
}

TEST_CASE("sequence generation parameter errors") {
  SequenceParams p = small_sequences();
  p.max_len = 21;
  CHECK_THROWS_AS(gen_sequences(p, Alphabet::digits()), CapacityError);
  p = small_sequences();
  p.min_len = 9;
  CHECK_THROWS_AS(gen_sequences(p, Alphabet::digits()), InvalidInputError);
}

TEST_CASE("line layout places row-contiguous runs") {
  GridParams p;
  p.height = 2;
  p.width = 6;
  p.max_objects = 8;
  p.count = 200;
  p.layout = Layout::kLines;
  const Dataset ds = gen_grids(p, Alphabet::digits());
  for (const auto& s : ds.samples) {
    std::map<std::size_t, std::vector<std::size_t>> rows;
    for (const auto& pl : s.placements) rows[pl.row].push_back(pl.col);
    for (auto& [row, cols] : rows) {
      std::sort(cols.begin(), cols.end());
      CHECK(cols.back() - cols.front() + 1 == cols.size());
    }
  }
}

TEST_CASE("curve layout keeps objects inside the grid without overlap") {
  GridParams p;
  p.height = 5;
  p.width = 8;
  p.max_objects = 12;
  p.count = 200;
  p.layout = Layout::kCurve;
  for (const auto& s : gen_grids(p, Alphabet::digits()).samples) {
    std::set<std::pair<std::size_t, std::size_t>> cells;
    for (const auto& pl : s.placements) {
      CHECK(pl.row < 5);
      CHECK(pl.col < 8);
      cells.insert({pl.row, pl.col});
    }
    CHECK(cells.size() == s.placements.size());
  }
}

TEST_CASE("empty scenes are all blank") {
  GridParams p;
  p.max_objects = 0;
  p.count = 20;
  for (const auto& s : gen_grids(p, Alphabet::digits()).samples) {
    CHECK(s.annotation.empty());
    CHECK(s.counts(11).counts()[0] == 24);
  }
}

TEST_CASE("grid annotations agree with placements") {
  GridParams p;
  p.count = 100;
  p.max_objects = 10;
  for (Layout layout : {Layout::kRandom, Layout::kLines, Layout::kCurve}) {
    p.layout = layout;
    for (const auto& s : gen_grids(p, Alphabet::digits(), TaskKind::kCount).samples) {
      REQUIRE(s.grid);
      std::vector<int> from_placements;
      for (const auto& pl : s.placements) from_placements.push_back(pl.label);
      CHECK(class_counts(from_placements, 11) == class_counts(s.annotation, 11));
      std::int64_t total = 0;
      const CountAnnotation ann = s.counts(11);
      for (auto c : ann.counts()) total += c;
      CHECK(total == static_cast<std::int64_t>(s.grid->cells()));
      // annotation in column-major reading order
      std::vector<std::pair<std::size_t, int>> order;
      for (const auto& pl : s.placements) order.emplace_back(flat_index(*s.grid, pl.row, pl.col), pl.label);
      std::sort(order.begin(), order.end());
      Labels reading;
      for (auto& o : order) reading.push_back(o.second);
      CHECK(reading == s.annotation);
    }
  }
}

TEST_CASE("random layout class counts follow the sampling law") {
  GridParams p;
  p.count = 500;
  p.max_objects = 5;
  const Dataset ds = gen_grids(p, Alphabet::digits());
  std::vector<double> per_class(11, 0.0);
  double objects = 0.0;
  for (const auto& s : ds.samples) {
    objects += static_cast<double>(s.placements.size());
    for (const auto& pl : s.placements) per_class[static_cast<std::size_t>(pl.label)] += 1.0;
  }
  // Object count per image is uniform on {0..5}: mean 2.5, variance 35/12.
  const double n = 500.0;
  CHECK(std::abs(objects / n - 2.5) <= 3.0 * std::sqrt(35.0 / 12.0 / n));
  // Given the total, each class count is Binomial(objects, 1/10).
  const double sd = std::sqrt(objects * 0.1 * 0.9);
  for (std::size_t k = 1; k < 11; ++k) CHECK(std::abs(per_class[k] - objects * 0.1) <= 3.0 * sd);
}

TEST_CASE("overfull grids are rejected") {
  GridParams p;
  p.height = 2;
  p.width = 2;
  p.max_objects = 5;
  CHECK_THROWS_AS(gen_grids(p, Alphabet::digits()), CapacityError);
}

TEST_CASE("shuffle ratio zero is the identity") {
  const Dataset ds = gen_sequences(small_sequences(5, 100), Alphabet::digits());
  CHECK(apply_shuffle(ds, {0.0}, 9).samples == ds.samples);
}

TEST_CASE("full shuffle permutes annotations and keeps counts") {
  const Dataset ds = gen_sequences(small_sequences(6, 200), Alphabet::digits());
  const Dataset sh = apply_shuffle(ds, {1.0}, 9);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& a = ds.samples[i];
    const Sample& b = sh.samples[i];
    CHECK(a.features == b.features);
    CHECK(a.counts(11) == b.counts(11));
    Labels x = a.annotation, y = b.annotation;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    CHECK(x == y);
    changed += a.annotation != b.annotation;
  }
  CHECK(changed > 100);
}

TEST_CASE("partial shuffle picks the same subset for the same seed") {
  const Dataset ds = gen_sequences(small_sequences(7, 200), Alphabet::digits());
  const Dataset a = apply_shuffle(ds, {0.5}, 4);
  const Dataset b = apply_shuffle(ds, {0.5}, 4);
  CHECK(a.samples == b.samples);
  CHECK_THROWS_AS(apply_shuffle(ds, {1.5}, 4), InvalidInputError);
}

TEST_CASE("shuffle commutes with counting") {
  GridParams p;
  p.count = 100;
  const Dataset ds = gen_grids(p, Alphabet::digits());
  const Dataset sh = apply_shuffle(ds, {0.75}, 11);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(ds.samples[i].counts(11) == sh.samples[i].counts(11));
  }
}

TEST_CASE("datasets round-trip through line-delimited JSON") {
  SequenceParams sp = small_sequences(8, 30);
  sp.noise_sigma = 0.3;
  const Dataset seq = gen_sequences(sp, Alphabet::numbered(12));
  GridParams gp;
  gp.count = 30;
  gp.noise_sigma = 0.3;
  const Dataset grid = gen_grids(gp, Alphabet::digits(), TaskKind::kCount);
  for (const Dataset* ds : {&seq, &grid}) {
    const std::string text = serialize(*ds);
    CHECK(std::count(text.begin(), text.end(), '\n') == 31);
    std::istringstream in(text);
    const Dataset back = read_dataset(in);
    CHECK(back.task == ds->task);
    CHECK(back.alphabet == ds->alphabet);
    CHECK(back.feature_dim == ds->feature_dim);
    CHECK(back.samples == ds->samples);
    CHECK(serialize(back) == text);
  }
}

TEST_CASE("malformed dataset files raise I/O errors") {
  std::istringstream empty("");
  CHECK_THROWS_AS(read_dataset(empty), IoError);
  std::istringstream wrong("{\"schema\":\"other/1\"}\n");
  CHECK_THROWS_AS(read_dataset(wrong), IoError);
  std::istringstream broken(serialize(gen_sequences(small_sequences(1, 1), Alphabet::digits())) +
                            "{not json\n");
  CHECK_THROWS_AS(read_dataset(broken), IoError);
  CHECK_THROWS_AS(read_dataset(std::string("/nonexistent/path.jsonl")), IoError);
}
