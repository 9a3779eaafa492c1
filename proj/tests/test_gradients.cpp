#include <doctest.h>

#include "binsd/embedder.hpp"
#include "binsd/rng.hpp"
#include "helpers.hpp"

using namespace binsd;
using binsd::testing::finite_difference_check;
using binsd::testing::make_graph;
using binsd::testing::random_graph;

TEST_CASE("identical +1 pair sits at a stationary point with zero gradients") {
  EmbeddingConfig cfg;
  cfg.d_feat = 2;
  cfg.d_embed = 4;
  cfg.T = 2;
  cfg.sigma_depth = 2;
  cfg.seed = 4;
  const auto params = init_params(cfg);
  SplitMix64 rng(19);
  const auto g = random_graph(rng, 3, 5, 2);

  const auto grads = pair_gradients(g, g, +1, params, cfg);
  auto all_zero = [](const Mat& m) {
    for (double x : m.data())
      if (x != 0.0) return false;
    return true;
  };
  CHECK(all_zero(grads.W1));
  CHECK(all_zero(grads.P[0]));
  CHECK(all_zero(grads.P[1]));
  CHECK(all_zero(grads.W2));
}

TEST_CASE("pair gradients are symmetric in the pair arguments") {
  EmbeddingConfig cfg;
  cfg.d_feat = 3;
  cfg.d_embed = 4;
  cfg.T = 2;
  cfg.sigma_depth = 2;
  cfg.seed = 12;
  const auto params = init_params(cfg);
  SplitMix64 rng(31);
  const auto a = random_graph(rng, 2, 6, 3, "src:a");
  const auto b = random_graph(rng, 2, 6, 3, "src:b");

  const auto gab = pair_gradients(a, b, -1, params, cfg);
  const auto gba = pair_gradients(b, a, -1, params, cfg);
  for (std::size_t k = 0; k < gab.W1.data().size(); ++k)
    CHECK(gab.W1.data()[k] == doctest::Approx(gba.W1.data()[k]).epsilon(1e-13));
  for (std::size_t k = 0; k < gab.W2.data().size(); ++k)
    CHECK(gab.W2.data()[k] == doctest::Approx(gba.W2.data()[k]).epsilon(1e-13));
}

TEST_CASE("analytic gradients match central finite differences on 50 seeded instances") {
  long total_checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    EmbeddingConfig cfg;
    cfg.d_feat = 3;
    cfg.d_embed = 4;
    cfg.T = 2;
    cfg.sigma_depth = 2;
    cfg.use_prev_term = trial % 2 == 1;  // exercise the U term on half the runs
    cfg.seed = static_cast<std::uint64_t>(1000 + trial);
    const auto params = init_params(cfg);

    SplitMix64 rng(static_cast<std::uint64_t>(500 + trial));
    const auto a = random_graph(rng, 1, 6, 3, "src:a");
    const auto b = random_graph(rng, 1, 6, 3, "src:b");
    const int label = trial % 3 == 0 ? +1 : -1;

    const auto stats = finite_difference_check(a, b, label, params, cfg, 1e-5, 1e-8);
    total_checked += stats.checked;
    worst = std::max(worst, stats.worst_rel_err);
    INFO("trial ", trial, " worst rel err ", stats.worst_rel_err);
    CHECK(stats.worst_rel_err <= 1e-4);
  }
  // The sweep must actually exercise parameters, not vacuously pass.
  CHECK(total_checked > 1000);
  MESSAGE("checked ", total_checked, " entries, worst relative error ", worst);
}

TEST_CASE("gradients flow through the previous-state carry term") {
  EmbeddingConfig cfg;
  cfg.d_feat = 2;
  cfg.d_embed = 3;
  cfg.T = 3;
  cfg.sigma_depth = 1;
  cfg.use_prev_term = true;
  cfg.seed = 77;
  const auto params = init_params(cfg);
  const auto a = make_graph("a", "sa", {{1.0, -0.5}, {0.25, 0.75}}, {{0, 1}});
  const auto b = make_graph("b", "sb", {{-1.0, 0.5}}, {});

  const auto grads = pair_gradients(a, b, -1, params, cfg);
  double u_mag = 0.0;
  for (double x : grads.U.data()) u_mag += std::abs(x);
  CHECK(u_mag > 0.0);

  const auto stats = binsd::testing::finite_difference_check(a, b, -1, params, cfg, 1e-5, 1e-8);
  CHECK(stats.worst_rel_err <= 1e-4);
}
