#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ace/ace.hpp"
#include "ace/core.hpp"
#include "oracles.hpp"

using namespace ace;

TEST_CASE("alphabet keeps blank at index 0") {
  const Alphabet a = Alphabet::digits();
  CHECK(a.size() == 11);
  CHECK(a.symbol(0) == "_");
  CHECK(a.index_of("7") == 8);
  CHECK(a.parse("0907") == Labels{1, 10, 1, 8});
  CHECK(a.format(Labels{1, 10, 1, 8}) == "0907");

  const Alphabet n = Alphabet::numbered(3);
  CHECK_FALSE(n.single_char());
  CHECK(n.parse("c2 c0") == Labels{3, 1});
  CHECK(n.format(Labels{3, 1}) == "c2 c0");
}

TEST_CASE("alphabet rejects malformed symbol sets and annotations") {
  CHECK_THROWS_AS(Alphabet(std::vector<std::string>{"_"}), InvalidInputError);
  CHECK_THROWS_AS(Alphabet(std::vector<std::string>{"_", "a", "a"}), InvalidInputError);
  const Alphabet a = Alphabet::digits();
  CHECK_THROWS_AS(a.parse("12x"), VocabularyError);
  CHECK_THROWS_AS(a.parse("1_2"), VocabularyError);
  CHECK_THROWS_AS(a.symbol(11), VocabularyError);
}

TEST_CASE("grid constructors validate their invariants") {
  Matrix bad(1, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(LogitGrid{bad}, InvalidInputError);
  CHECK_THROWS_AS(LogitGrid(Matrix(6, 2), GridShape{2, 2}), InvalidInputError);
  CHECK_THROWS_AS(LogitGrid(Matrix(0, 2), GridShape{0, 3}), InvalidInputError);
  CHECK_NOTHROW(LogitGrid(Matrix(6, 2), GridShape{2, 3}));

  CHECK_THROWS_AS(ProbGrid(Matrix(1, 2, std::vector<double>{0.6, 0.6})), InvalidInputError);
  CHECK_THROWS_AS(ProbGrid(Matrix(1, 2, std::vector<double>{1.5, -0.5})), InvalidInputError);
  CHECK_NOTHROW(ProbGrid(Matrix(1, 2, std::vector<double>{0.25, 0.75})));
}

TEST_CASE("softmax small cases") {
  const ProbGrid p = softmax(LogitGrid(Matrix(1, 2, std::vector<double>{0.0, 0.0})));
  CHECK(p(0, 0) == 0.5);
  CHECK(p(0, 1) == 0.5);

  const ProbGrid q =
      softmax(LogitGrid(Matrix(1, 2, std::vector<double>{std::log(1.0), std::log(3.0)})));
  CHECK(q(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(q(0, 1) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("softmax matches an extended-precision reference") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = oracle::random_logits(rng, 1, 50, -10.0, 10.0);
    const ProbGrid p = softmax(LogitGrid(a));
    const auto ref = oracle::softmax_row(std::vector<double>(a.data().begin(), a.data().end()));
    for (std::size_t k = 0; k < 50; ++k) {
      CHECK(std::abs(p(0, k) - static_cast<double>(ref[k])) < 1e-12);
    }
  }
}

TEST_CASE("softmax is stable for large logits and keeps 2D provenance") {
  Matrix a(2, 3, std::vector<double>{1000.0, 999.0, -1000.0, -800.0, -800.0, -800.0});
  const ProbGrid p = softmax(LogitGrid(a));
  CHECK(all_finite(p.values().data()));
  CHECK(p(1, 2) == doctest::Approx(1.0 / 3.0));

  const ProbGrid g = softmax(LogitGrid(Matrix(6, 4), GridShape{2, 3}));
  REQUIRE(g.shape());
  CHECK(*g.shape() == GridShape{2, 3});
}

TEST_CASE("softmax rejects non-finite logits") {
  Matrix a(1, 2);
  a(0, 0) = std::numeric_limits<double>::infinity();
  LogitGrid g;
  g.values = a;  // bypass the constructor check
  CHECK_THROWS_AS(softmax(g), InvalidInputError);
}

TEST_CASE("jacobian apply small cases") {
  const std::vector<double> vertex{1.0, 0.0};
  const auto v = softmax_jacobian_apply(vertex, std::vector<double>{3.0, -7.0});
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 0.0);

  const auto w =
      softmax_jacobian_apply(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0});
  CHECK(w[0] == doctest::Approx(0.25));
  CHECK(w[1] == doctest::Approx(-0.25));

  CHECK_THROWS_AS(softmax_jacobian_apply(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0}),
                  InvalidInputError);
}

TEST_CASE("jacobian apply matches the dense Jacobian product") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const ProbGrid p = oracle::random_probs(rng, 1, 10);
    const std::vector<double> y(p.row(0).begin(), p.row(0).end());
    std::vector<double> u(10);
    for (double& x : u) x = n(rng);
    const auto fast = softmax_jacobian_apply(y, u);
    const auto dense = oracle::dense_jacobian_apply(y, u);
    for (std::size_t j = 0; j < 10; ++j) CHECK(std::abs(fast[j] - dense[j]) < 1e-12);
  }
}

TEST_CASE("flatten reads columns left to right, each top to bottom") {
  // Label each cell's single non-blank probability mass with its (h, w).
  const GridShape shape{2, 2};
  Matrix cells(4, 5);
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t w = 0; w < 2; ++w) cells(h * 2 + w, 1 + h * 2 + w) = 1.0;
  }
  const ProbGrid flat = flatten_2d(ProbGrid(cells, shape));
  CHECK_FALSE(flat.shape());
  // (0,0) (1,0) (0,1) (1,1) carry classes 1, 3, 2, 4
  CHECK(flat(0, 1) == 1.0);
  CHECK(flat(1, 3) == 1.0);
  CHECK(flat(2, 2) == 1.0);
  CHECK(flat(3, 4) == 1.0);
}

TEST_CASE("flatten of a single row is the identity ordering") {
  std::mt19937_64 rng(2);
  const ProbGrid g = oracle::random_probs(rng, 7, 4);
  const ProbGrid grid(g.values(), GridShape{1, 7});
  CHECK(flatten_2d(grid).values() == g.values());
}

TEST_CASE("flatten preserves the multiset of rows and the ACE loss") {
  std::mt19937_64 rng(3);
  const Matrix cells = oracle::random_probs(rng, 12, 6).values();
  const ProbGrid grid(cells, GridShape{3, 4});
  const ProbGrid flat = flatten_2d(grid);

  auto sorted_rows = [](const Matrix& m) {
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < m.rows(); ++r) rows.emplace_back(m.row(r).begin(), m.row(r).end());
    std::sort(rows.begin(), rows.end());
    return rows;
  };
  CHECK(sorted_rows(cells) == sorted_rows(flat.values()));

  const CountAnnotation ann = counts_from_sequence(Labels{1, 2, 5, 5}, 6, 12);
  CHECK(ace_ce_loss_2d(grid, ann).loss == ace_ce_loss(flat, ann).loss);
}

TEST_CASE("flatten requires 2D provenance") {
  std::mt19937_64 rng(4);
  CHECK_THROWS_AS(flatten_2d(oracle::random_probs(rng, 4, 3)), InvalidInputError);
}

// ---------------------------------------------------------------------------
// Properties

TEST_CASE("softmax rows sum to one for any finite input") {
  std::mt19937_64 rng(21);
  for (double spread : {1e-3, 1.0, 30.0, 300.0}) {
    const ProbGrid p = oracle::random_probs(rng, 40, 37, spread);
    for (std::size_t t = 0; t < p.timesteps(); ++t) {
      const auto r = p.row(t);
      CHECK(std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("softmax is bitwise shift invariant") {
  // Dyadic logits and integer shifts keep a + c exact in binary64.
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<int> num(-2560, 2560);
  std::uniform_int_distribution<int> shift(-100, 100);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix a(3, 9);
    for (double& v : a.data()) v = num(rng) / 256.0;
    const double c = shift(rng);
    Matrix b = a;
    for (double& v : b.data()) v += c;
    CHECK(softmax(LogitGrid(a)).values() == softmax(LogitGrid(b)).values());
  }
}

TEST_CASE("jacobian apply output lies in the tangent space") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + trial % 60;
    const ProbGrid p = oracle::random_probs(rng, 1, k);
    std::vector<double> u(k);
    for (double& x : u) x = n(rng);
    const auto v = softmax_jacobian_apply(p.row(0), u);
    CHECK(std::abs(std::accumulate(v.begin(), v.end(), 0.0)) < 1e-12);
  }
}

TEST_CASE("flatten is a bijection and idempotent through a column reshape") {
  std::mt19937_64 rng(24);
  std::uniform_int_distribution<std::size_t> side(1, 9);
  for (int trial = 0; trial < 50; ++trial) {
    const GridShape shape{side(rng), side(rng)};
    std::vector<bool> hit(shape.cells(), false);
    for (std::size_t h = 0; h < shape.height; ++h) {
      for (std::size_t w = 0; w < shape.width; ++w) {
        const std::size_t t = flat_index(shape, h, w);
        REQUIRE(t < shape.cells());
        CHECK_FALSE(hit[t]);
        hit[t] = true;
      }
    }

    const ProbGrid grid(oracle::random_probs(rng, shape.cells(), 3).values(), shape);
    const ProbGrid once = flatten_2d(grid);
    const ProbGrid column(once.values(), GridShape{shape.cells(), 1});
    CHECK(flatten_2d(column).values() == once.values());
    CHECK(unflatten_2d(once.values(), shape) == grid.values());
  }
}
