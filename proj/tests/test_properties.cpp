#include <algorithm>
#include <numeric>

#include <doctest.h>

#include "owe/error.hpp"
#include "property_checks.hpp"

using namespace owe;

namespace {

ChannelMatrix small_room() {
  std::vector<Pose> poses;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) poses.push_back(Pose{Vec3(1.25 + 1.25 * c, 1.25 + 1.25 * r, 2.5)});
  FloorModel f;
  f.integration_cell_m = 0.05;
  return build_channel_matrix(poses, props::table_emitter(), props::table_receiver(), f, EaCircuitParams{});
}

void check(const props::Outcome& o) {
  INFO(o.detail);
  CHECK(o.pass);
}

}  // namespace

TEST_CASE("solve agrees with the Neumann series") { check(props::neumann_agreement()); }
TEST_CASE("determinant stays positive inside the stable region") { check(props::positive_determinant()); }
TEST_CASE("2-EA stability boundary") { check(props::stability_flip()); }
TEST_CASE("diffuse channel reciprocity, convergence and decay") { check(props::diffuse_properties()); }
TEST_CASE("linearity in power and reflectivity") { check(props::diffuse_linearity()); }
TEST_CASE("hemisphere normalisation") { check(props::hemisphere_normalisation()); }
TEST_CASE("LED noise is affine in gain") { check(props::affine_led_noise()); }
TEST_CASE("annealer determinism") { check(props::annealer_determinism(small_room())); }
TEST_CASE("probe exactness and blockage emission bound") { check(props::probe_protocol()); }
TEST_CASE("design angles") { check(props::design_angles()); }

TEST_CASE("SNR is invariant under relabelling the EAs") {
  const ChannelMatrix h = small_room();
  const int n = h.n();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(4);
  const NoiseVectors noise = NoiseVectors::uniform(n, noise_budget(52e-6, EaCircuitParams{}));
  Vector g(n);
  g << 3e4, 1e4, 0.0, 2e4, 5e3, 0.0;
  const BssLink link = BssLink::single(n, 0, 26e-6, n - 1);
  const double ref = snr_sa(h, g, link, noise);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix hp(n, n);
    Vector gp(n);
    for (int i = 0; i < n; ++i) {
      gp[perm[i]] = g[i];
      for (int j = 0; j < n; ++j) hp(perm[i], perm[j]) = h.h(i, j);
    }
    const BssLink lp = BssLink::single(n, perm[0], 26e-6, perm[n - 1]);
    CHECK(snr_sa(ChannelMatrix(hp), gp, lp, noise) == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("power-iteration branch handles large nonnegative systems") {
  std::mt19937_64 rng(8);
  auto [h, g] = props::random_stable(rng, 8);
  Matrix big = Matrix::Zero(72, 72);
  for (int b = 0; b < 9; ++b) big.block(8 * b, 8 * b, 8, 8) = loop_matrix(h, g);
  CHECK(spectral_radius(big) == doctest::Approx(spectral_radius(loop_matrix(h, g))).epsilon(1e-8));
}
