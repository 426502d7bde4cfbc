#include <doctest.h>

#include <sstream>

#include "ace/gradcheck.hpp"
#include "ace/model.hpp"
#include "ace/tasks.hpp"
#include "oracles.hpp"

using namespace ace;

TEST_CASE("zero model gives uniform predictions") {
  const ToyModel m = ToyModel::zeros(5, 4);
  std::mt19937_64 rng(61);
  const LogitGrid logits = forward(m, oracle::random_logits(rng, 7, 5));
  for (double v : logits.values.data()) CHECK(v == 0.0);
  const ProbGrid probs = softmax(logits);
  for (double p : probs.values().data()) CHECK(p == 0.25);
}

TEST_CASE("identity weights recover planted classes") {
  SequenceParams p;
  p.count = 20;
  const Dataset ds = gen_sequences(p, Alphabet::digits());
  ToyModel m = ToyModel::zeros(11, 11);
  for (std::size_t k = 0; k < 11; ++k) m.weights(k, k) = 1.0;
  const Matrix protos = make_prototypes(11, 11);
  for (const auto& s : ds.samples) {
    const LogitGrid logits = forward(m, s.features);
    for (std::size_t t = 0; t < s.timesteps(); ++t) {
      const auto row = logits.values.row(t);
      const auto arg = std::max_element(row.begin(), row.end()) - row.begin();
      CHECK(s.features(t, static_cast<std::size_t>(arg)) == 1.0);
    }
  }
}

TEST_CASE("forward keeps grid provenance and checks dimensions") {
  const ToyModel m = ToyModel::random(3, 4, 0, 1);
  const LogitGrid g = forward(m, Matrix(6, 3), GridShape{2, 3});
  REQUIRE(g.shape);
  CHECK(*g.shape == GridShape{2, 3});
  CHECK_THROWS_AS(forward(m, Matrix(6, 4)), InvalidInputError);
  CHECK_THROWS_AS(ToyModel::zeros(0, 4), InvalidInputError);
}

TEST_CASE("parameter gradients match finite differences") {
  SequenceParams sp;
  sp.count = 6;
  sp.timesteps = 8;
  sp.max_len = 3;
  sp.noise_sigma = 0.4;
  sp.feature_dim = 6;
  const Dataset seq = gen_sequences(sp, Alphabet::with_blank({"a", "b", "c", "d"}));
  GridParams gp;
  gp.count = 4;
  gp.height = 3;
  gp.width = 3;
  gp.max_objects = 3;
  gp.noise_sigma = 0.4;
  const Dataset grid = gen_grids(gp, Alphabet::with_blank({"a", "b", "c"}), TaskKind::kGrid2d);

  const std::vector<std::size_t> batch{0, 1, 2, 3};
  for (const Dataset* ds : {&seq, &grid}) {
    for (std::size_t hidden : {std::size_t{0}, std::size_t{5}}) {
      const ToyModel m = ToyModel::random(ds->feature_dim, ds->alphabet.size(), hidden, 3);
      for (LossVariant v : {LossVariant::kAceCe, LossVariant::kAceRegression, LossVariant::kCtc}) {
        CAPTURE(to_string(v));
        CAPTURE(hidden);
        const auto c = gradcheck::check_model_gradient(m, *ds, batch, v, {1e-6, 1e-8});
        CHECK(c.failures == 0);
        CHECK(c.entries == m.parameter_count());
      }
    }
  }
}

TEST_CASE("checkpoints round-trip exactly") {
  for (std::size_t hidden : {std::size_t{0}, std::size_t{7}}) {
    const ToyModel m = ToyModel::random(9, 5, hidden, 42);
    std::stringstream buf;
    save_model(buf, m);
    CHECK(load_model(buf) == m);
  }
  std::stringstream bad("{\"format\":\"something-else\"}");
  CHECK_THROWS_AS(load_model(bad), IoError);
  std::stringstream junk("not json");
  CHECK_THROWS_AS(load_model(junk), IoError);
}

TEST_CASE("parameter views cover every parameter once") {
  ToyModel m = ToyModel::random(4, 3, 2, 5);
  std::size_t total = 0;
  for (auto block : m.parameters()) total += block.size();
  CHECK(total == m.parameter_count());
  CHECK(total == 4 * 2 + 2 + 2 * 3 + 3);
}
