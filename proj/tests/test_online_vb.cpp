#include <doctest.h>

#include <cmath>

#include "cbpfa/elbo.hpp"
#include "cbpfa/generative.hpp"
#include "cbpfa/gibbs.hpp"
#include "cbpfa/online_vb.hpp"
#include "test_support.hpp"

using namespace cbpfa;

namespace {

Hyperparameters test_hypers(int K) {
  Hyperparameters h;
  h.c0 = 2.0;
  h.eta0 = 0.5;
  h.c = h.d = h.e = h.f = 2.0;
  h.K = K;
  return h;
}

}  // namespace

TEST_SUITE("online_vb") {

TEST_CASE("step size values and shape") {
  LearningSchedule unit(0.0, 1.0, 10, 100);
  CHECK(step_size(1, unit) == doctest::Approx(1.0));

  LearningSchedule paper(3.0, 0.501, 10, 100);
  // 4^(-0.501), evaluated independently.
  CHECK(step_size(1, paper) ==
        doctest::Approx(0.49930733305051445).epsilon(1e-12));

  double prev = 2.0;
  for (int t = 1; t <= 2000; ++t) {
    double rho = step_size(t, paper);
    CHECK(rho > 0.0);
    CHECK(rho < prev);
    prev = rho;
  }
}

TEST_CASE("schedule construction rejects kappa outside (0.5, 1]") {
  CHECK_THROWS_AS(LearningSchedule(3.0, 0.5, 10, 100), ModelError);
  CHECK_THROWS_AS(LearningSchedule(3.0, 0.499, 10, 100), ModelError);
  CHECK_THROWS_AS(LearningSchedule(3.0, 1.01, 10, 100), ModelError);
  CHECK_NOTHROW(LearningSchedule(3.0, 0.501, 10, 100));
  CHECK_NOTHROW(LearningSchedule(3.0, 1.0, 10, 100));
  CHECK_THROWS_AS(LearningSchedule(-1.0, 0.7, 10, 100), ModelError);
}

TEST_CASE("blend endpoints") {
  Hyperparameters h = test_hypers(3);
  GenerativeDraw draw = sample_generative(h, 3, 10, 41);
  auto [g, l] = gibbs_init(draw.x, h, 2, 41);
  GlobalVariationalState target =
      compute_global_update(g, l, draw.x, h, 10.0);

  GlobalVariationalState same = blend_natural(g, target, 0.0);
  CHECK((same.phi - g.phi).cwiseAbs().maxCoeff() == 0.0);
  CHECK(same.lambda2 == g.lambda2);

  GlobalVariationalState jumped = blend_natural(g, target, 1.0);
  CHECK((jumped.phi - target.phi).cwiseAbs().maxCoeff() == 0.0);
  CHECK(jumped.eps2 == target.eps2);
}

TEST_CASE("two half steps approach the target monotonically") {
  Hyperparameters h = test_hypers(4);
  GenerativeDraw draw = sample_generative(h, 3, 12, 43);
  auto [g, l] = gibbs_init(draw.x, h, 2, 43);
  GlobalVariationalState target =
      compute_global_update(g, l, draw.x, h, 12.0);

  GlobalVariationalState once = blend_natural(g, target, 0.5);
  GlobalVariationalState twice = blend_natural(once, target, 0.5);

  auto closer = [&](double a, double b, double t) {
    return std::abs(b - t) <= std::abs(a - t) + 1e-12 * std::abs(t);
  };
  for (Eigen::Index k = 0; k < 4; ++k) {
    CHECK(closer(once.tau1[k], twice.tau1[k], target.tau1[k]));
    CHECK(closer(once.tau2[k], twice.tau2[k], target.tau2[k]));
    CHECK(closer(1.0 / once.Phi[k], 1.0 / twice.Phi[k],
                 1.0 / target.Phi[k]));
    for (Eigen::Index j = 0; j < g.M(); ++j)
      CHECK(closer(once.phi(j, k) / once.Phi[k],
                   twice.phi(j, k) / twice.Phi[k],
                   target.phi(j, k) / target.Phi[k]));
  }
  CHECK(closer(once.lambda2, twice.lambda2, target.lambda2));
  CHECK(closer(once.eps1, twice.eps1, target.eps1));
}

TEST_CASE("blending preserves positivity invariants") {
  Hyperparameters h = test_hypers(5);
  GenerativeDraw draw = sample_generative(h, 4, 15, 47);
  auto [g, l] = gibbs_init(draw.x, h, 2, 47);
  GlobalVariationalState target =
      compute_global_update(g, l, draw.x, h, 1500.0);
  for (double rho : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    GlobalVariationalState mixed = blend_natural(g, target, rho);
    CHECK_NOTHROW(mixed.validate());
  }
}

TEST_CASE("degenerate schedule reproduces one batch global update") {
  Hyperparameters h = test_hypers(6);
  GenerativeDraw draw = sample_generative(h, 4, 60, 53);
  auto [g, l0] = gibbs_init(draw.x, h, 3, 53);

  LocalFitOptions fit;
  fit.seed = 99;
  LocalState l = fit_local_state(g, draw.x, h, fit);
  GlobalVariationalState batch = compute_global_update(
      g, l, draw.x, h, static_cast<double>(draw.x.count()));

  LearningSchedule sched(0.0, 0.9, draw.x.count(), draw.x.count());
  OnlineStepOptions opts;
  opts.local_fit = fit;
  GlobalVariationalState online = online_step(g, draw.x, 1, sched, h, opts);

  auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max(1e-300, std::abs(b));
  };
  CHECK(((online.phi - batch.phi).cwiseAbs().maxCoeff() /
         batch.phi.cwiseAbs().maxCoeff()) < 1e-10);
  CHECK(rel(online.lambda2, batch.lambda2) < 1e-10);
  CHECK(rel(online.eps2, batch.eps2) < 1e-10);
  CHECK((online.tau1 - batch.tau1).cwiseAbs().maxCoeff() /
            batch.tau1.maxCoeff() < 1e-10);
}

TEST_CASE("sufficient statistics scale linearly in the dataset size") {
  Hyperparameters h = test_hypers(4);
  GenerativeDraw draw = sample_generative(h, 3, 20, 59);
  auto [g, l] = gibbs_init(draw.x, h, 2, 59);

  SUBCASE("tau and eps with arbitrary locals") {
    GlobalVariationalState g1 = compute_global_update(g, l, draw.x, h, 40.0);
    GlobalVariationalState g2 = compute_global_update(g, l, draw.x, h, 80.0);
    for (Eigen::Index k = 0; k < 4; ++k)
      CHECK(g2.tau1[k] - h.pi_a() ==
            doctest::Approx(2.0 * (g1.tau1[k] - h.pi_a())).epsilon(1e-12));
    CHECK(g2.eps2 - h.f ==
          doctest::Approx(2.0 * (g1.eps2 - h.f)).epsilon(1e-12));
  }

  SUBCASE("lambda with silent codes") {
    LocalState quiet = l;
    quiet.nu.setZero();  // dictionary update then scale-independent
    GlobalVariationalState g1 =
        compute_global_update(g, quiet, draw.x, h, 40.0);
    GlobalVariationalState g2 =
        compute_global_update(g, quiet, draw.x, h, 80.0);
    CHECK(g2.lambda2 - h.d ==
          doctest::Approx(2.0 * (g1.lambda2 - h.d)).epsilon(1e-12));
  }
}

TEST_CASE("run_online_vb is seed deterministic") {
  Hyperparameters h = test_hypers(5);
  GenerativeDraw draw = sample_generative(h, 4, 90, 61);
  LearningSchedule sched(3.0, 0.501, 30, 0);
  OnlineVbOptions opts;
  opts.passes = 1;
  opts.seed = 17;
  OnlineRunResult a = run_online_vb(draw.x, h, sched, opts);
  OnlineRunResult b = run_online_vb(draw.x, h, sched, opts);
  CHECK((a.g.phi - b.g.phi).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.trace.size() == b.trace.size());
  REQUIRE(a.trace.size() == 3);
  CHECK(a.trace[0].rho == doctest::Approx(std::pow(4.0, -0.501)));
  CHECK(a.trace[1].t == 2);
}

TEST_CASE("online run tracks a synthetic dictionary") {
  // Stream from a fixed dictionary; after 20 mini-batch steps the
  // learned columns must cosine-match the truth.
  Hyperparameters truth_h = test_hypers(3);
  GenerativeOptions gen;
  gen.fixed_gamma = 1600.0;
  gen.fixed_alpha = 1.0;
  GenerativeDraw draw = sample_generative(truth_h, 8, 2500, 67, gen);

  Hyperparameters fit_h = test_hypers(8);
  fit_h.c = fit_h.d = fit_h.e = fit_h.f = 1e-6;
  LearningSchedule sched(3.0, 0.501, 500, 0);
  OnlineVbOptions opts;
  opts.passes = 4;  // 5 steps per pass
  opts.seed = 3;
  OnlineRunResult run = run_online_vb(draw.x, fit_h, sched, opts);
  CHECK(run.estimate.method == "online");
  CHECK(run.trace.size() == 20);
  double match = testsupport::mean_matched_abs_cosine(
      draw.dictionary.data, run.estimate.dictionary.data);
  INFO("online cosine match " << match);
  CHECK(match >= 0.85);
}

}  // TEST_SUITE
