#include <cmath>
#include <limits>

#include <doctest.h>

#include "owe/error.hpp"
#include "owe/optimizer.hpp"

using namespace owe;

namespace {

const Feasibility kAlways = [](const Vector&) { return true; };

AnnealSchedule quick(std::uint64_t seed = 1) {
  AnnealSchedule s;
  s.rng_seed = seed;
  s.restarts = 1;
  return s;
}

ChannelMatrix pair(double c) {
  Matrix m(2, 2);
  m << 0.0, c, c, 0.0;
  return ChannelMatrix(m);
}

}  // namespace

TEST_CASE("constant objective keeps the start value") {
  GainBounds b;
  const Vector g0 = Vector::Constant(3, 10.0);
  const OptResult r = anneal_once([](const Vector&) { return 4.2; }, g0, quick(), b, kAlways);
  CHECK(r.best_objective == 4.2);
}

TEST_CASE("1-D quadratic reaches the analytic minimum") {
  GainBounds b;
  b.g_max = 1.0;
  const Objective f = [](const Vector& g) { return (g[0] - 0.3) * (g[0] - 0.3); };
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const OptResult r = anneal_once(f, Vector::Constant(1, 0.9), quick(seed), b, kAlways);
    CHECK(std::abs(r.best_gains[0] - 0.3) < 1e-3);
  }
}

TEST_CASE("non-finite candidates are rejected") {
  GainBounds b;
  b.g_max = 1.0;
  const Objective f = [](const Vector& g) {
    return g[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : -g[0];
  };
  const OptResult r = anneal_once(f, Vector::Constant(1, 0.1), quick(), b, kAlways);
  CHECK(r.best_gains[0] <= 0.5);
  CHECK(r.best_objective == doctest::Approx(-0.5).epsilon(1e-2));
}

TEST_CASE("start point must be feasible and in bounds") {
  GainBounds b;
  const Objective f = [](const Vector&) { return 0.0; };
  CHECK_THROWS_AS(anneal_once(f, Vector::Constant(1, 1.0), quick(), b, [](const Vector&) { return false; }),
                  InstabilityError);
  CHECK_THROWS_AS(anneal_once(f, Vector::Constant(1, -1.0), quick(), b, kAlways), DomainError);
  AnnealSchedule bad = quick();
  bad.alpha = 1.0;
  CHECK_THROWS_AS(anneal_once(f, Vector::Constant(1, 1.0), bad, b, kAlways), DomainError);
}

TEST_CASE("neighbor stays inside bounds and moves the requested coordinates") {
  GainBounds b;
  b.g_max = 1.0;
  b.coords_per_move = 2;
  AnnealSchedule s = quick();
  Rng rng(5);
  const Vector g = Vector::Constant(6, 0.5);
  for (int i = 0; i < 200; ++i) {
    const Vector c = neighbor(g, s, b, kAlways, rng);
    CHECK((c.array() >= 0.0).all());
    CHECK((c.array() <= 1.0).all());
    CHECK((c.array() != g.array()).count() <= 2);
  }
  const Vector stuck = neighbor(g, s, b, [](const Vector&) { return false; }, rng);
  CHECK(stuck == g);
}

TEST_CASE("restarts are deterministic") {
  GainBounds b;
  b.g_max = 1.0;
  AnnealSchedule s = quick(9);
  s.restarts = 4;
  const Objective f = [](const Vector& g) { return std::sin(7 * g[0]) + (g[1] - 0.2) * (g[1] - 0.2); };
  const OptResult a = anneal(f, Vector::Constant(2, 0.5), s, b, kAlways);
  const OptResult c = anneal(f, Vector::Constant(2, 0.5), s, b, kAlways);
  CHECK(a.best_gains == c.best_gains);
  CHECK(a.best_objective == c.best_objective);
  CHECK(a.best_restart == c.best_restart);
  CHECK(a.accepted_moves == c.accepted_moves);
}

TEST_CASE("max equal gain") {
  CHECK(max_equal_gain(pair(1e-5), 0.0) == doctest::Approx(1e5).epsilon(1e-9));
  CHECK(max_equal_gain(pair(1e-5), 0.05) == doctest::Approx(0.95e5).epsilon(1e-9));
  const double g = max_equal_gain(pair(1e-5), 0.05);
  CHECK(spectral_radius(pair(1e-5), Vector::Constant(2, g)) < 0.95);
  CHECK_THROWS_AS(max_equal_gain(ChannelMatrix(Matrix::Zero(2, 2)), 0.0), DomainError);
  Matrix nil = Matrix::Zero(2, 2);
  nil(0, 1) = 1e-5;
  CHECK(std::isinf(max_equal_gain(ChannelMatrix(nil), 0.0)));
}

TEST_CASE("single-BSS on a relay chain") {
  // AP on EA2, entry EA0; EA1 is the only route.
  Matrix m = Matrix::Zero(3, 3);
  m(0, 1) = m(1, 0) = 5e-6;
  m(1, 2) = m(2, 1) = 5e-6;
  SingleBssProblem p{ChannelMatrix(m), BssLink::single(3, 0, 26e-6, 2),
                     NoiseVectors::uniform(3, noise_budget(52e-6, EaCircuitParams{})), NoiseCombination::Coherent,
                     GainBounds{}, quick(), std::nullopt};
  p.schedule.restarts = 2;
  const SingleBssResult r = optimize_single_bss(p);
  CHECK(r.snr > r.baseline_snr);
  CHECK(r.opt.best_gains[2] < 0.01 * p.bounds.g_max);
  CHECK(r.opt.best_gains[1] > 0.0);
  CHECK(is_stable(p.h, r.opt.best_gains, p.bounds.margin));
}

TEST_CASE("multi-BSS on decoupled networks has no degradation") {
  Matrix m = Matrix::Zero(4, 4);
  m(0, 1) = m(1, 0) = 5e-6;
  m(2, 3) = m(3, 2) = 5e-6;
  MultiBssProblem p{ChannelMatrix(m),
                    {BssLink::single(4, 0, 26e-6, 1), BssLink::single(4, 2, 26e-6, 3)},
                    NoiseVectors::uniform(4, noise_budget(52e-6, EaCircuitParams{})),
                    NoiseCombination::Coherent,
                    GainBounds{},
                    quick()};
  p.schedule.restarts = 2;
  const MultiBssResult r = optimize_multi_bss(p);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(to_db(r.sinr.sinr[i] / r.gamma_star[i])) < 0.01);
    CHECK(r.sinr.interference_power[i] == 0.0);
  }
  CHECK_THROWS_AS(optimize_multi_bss(MultiBssProblem{p.h, {p.links[0]}, p.noise}), ValidationError);
}
