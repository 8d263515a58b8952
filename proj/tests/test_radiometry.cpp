#include <cmath>
#include <numbers>

#include <doctest.h>

#include "owe/error.hpp"
#include "owe/radiometry.hpp"

using namespace owe;

namespace {

const double kHalfPower = deg2rad(19.65);
const double kFov = deg2rad(34.21);

EmitterParams table_emitter(double p = 1.0) { return EmitterParams::from_half_power_angle(p, kHalfPower); }

ReceiverParams table_receiver() {
  ReceiverParams r;
  r.area_m2 = 1e-4;
  r.acceptance_angle_rad = kFov;
  r.refractive_index = 1.5;
  return r;
}

Transmitter tx_at(double x, double y, double z = 2.5) { return {Pose{Vec3(x, y, z)}, table_emitter()}; }
Receiver rx_at(double x, double y, double z = 2.5) { return {Pose{Vec3(x, y, z)}, table_receiver()}; }

}  // namespace

TEST_CASE("lambertian order") {
  CHECK(lambertian_order(deg2rad(60.0)) == doctest::Approx(1.0).epsilon(1e-12));
  // −ln2/ln(cos 19.65°)
  CHECK(lambertian_order(kHalfPower) == doctest::Approx(11.552416988482).epsilon(1e-10));
  CHECK_THROWS_AS(lambertian_order(0.0), DomainError);
  CHECK_THROWS_AS(lambertian_order(kMinHalfPowerAngleRad / 2), DomainError);
  CHECK_THROWS_AS(lambertian_order(std::numbers::pi / 2), DomainError);
}

TEST_CASE("radiant intensity") {
  EmitterParams e{1.0, deg2rad(60.0), 1.0};
  CHECK(radiant_intensity(e, 0.0) == doctest::Approx(1.0 / std::numbers::pi));
  const auto t = table_emitter(8.1);
  CHECK(radiant_intensity(t, 0.0) == doctest::Approx(8.1 * (t.lambertian_order + 1) / (2 * std::numbers::pi)));
  CHECK(radiant_intensity(t, 0.0) == doctest::Approx(16.19).epsilon(2e-3));
  CHECK(radiant_intensity(t, kHalfPower) == doctest::Approx(0.5 * radiant_intensity(t, 0.0)).epsilon(1e-12));
  CHECK(radiant_intensity(t, 2.0) == 0.0);
}

TEST_CASE("concentrator gain") {
  const auto r = table_receiver();
  CHECK(concentrator_gain(kFov + 1e-6, r) == 0.0);
  CHECK(concentrator_gain(0.0, r) == doctest::Approx(7.118000374248618).epsilon(1e-10));
  ReceiverParams bare;
  bare.acceptance_angle_rad = std::numbers::pi / 2;
  CHECK(concentrator_gain(0.3, bare) == doctest::Approx(1.0));
}

TEST_CASE("line-of-sight gain") {
  const auto rx = table_receiver();
  Transmitter station{Pose{Vec3(0, 0, 0), Vec3(0, 0, 1)}, table_emitter()};
  Receiver ea{Pose{Vec3(0, 0, 2.5)}, rx};
  const double m = station.emitter.lambertian_order;
  const double expect = (m + 1) / (2 * std::numbers::pi) * rx.area_m2 * concentrator_gain(0.0, rx) / 6.25;
  CHECK(los_power_gain(station, ea) == doctest::Approx(expect).epsilon(1e-12));

  // Doubling distance on the axis quarters the gain.
  Receiver far{Pose{Vec3(0, 0, 5.0)}, rx};
  CHECK(los_power_gain(station, far) == doctest::Approx(los_power_gain(station, ea) / 4).epsilon(1e-12));

  Receiver off{Pose{Vec3(3.0, 0, 2.5)}, rx};
  CHECK(los_power_gain(station, off) == 0.0);
  CHECK_THROWS_AS(los_power_gain(station, Receiver{station.pose, rx}), DomainError);
}

TEST_CASE("diffuse gain against an independent grid integration") {
  FloorModel open;
  // Reference values from a vectorised midpoint sum over the same lattice.
  CHECK(diffuse_power_gain(tx_at(0, 0), rx_at(0, 0), open) == doctest::Approx(1.0523087972e-05).epsilon(1e-8));
  CHECK(diffuse_power_gain(tx_at(0, 0), rx_at(1.25, 0), open) == doctest::Approx(6.3967683864e-06).epsilon(1e-8));
  CHECK(diffuse_power_gain(tx_at(0, 0), rx_at(1.25, 1.25), open) == doctest::Approx(3.4953865750e-06).epsilon(1e-8));

  // Cells straddling a wall count by their covered share.
  FloorModel room;
  room.bounds = FloorBounds{0.0, 5.0, 0.0, 5.0};
  const double self = diffuse_power_gain(tx_at(1.25, 1.25), rx_at(1.25, 1.25), room);
  const double fwd = diffuse_power_gain(tx_at(1.25, 1.25), rx_at(2.5, 1.25), room);
  const double back = diffuse_power_gain(tx_at(2.5, 1.25), rx_at(1.25, 1.25), room);
  CHECK(self == doctest::Approx(1.0147870534e-05).epsilon(1e-8));
  CHECK(fwd == doctest::Approx(6.3128145885e-06).epsilon(1e-8));
  CHECK(back == doctest::Approx(6.3066316010e-06).epsilon(1e-8));

  // Against a 1 mm wall-aligned lattice.
  CHECK(self == doctest::Approx(1.0147665698e-05).epsilon(1e-4));
  CHECK(fwd == doctest::Approx(6.3146985277e-06).epsilon(5e-4));
  CHECK(back == doctest::Approx(6.3085139735e-06).epsilon(5e-4));
}

TEST_CASE("diffuse gain basics") {
  FloorModel f;
  f.reflectivity = 0.0;
  CHECK(diffuse_power_gain(tx_at(0, 0), rx_at(1, 0), f) == 0.0);

  FloorModel bad;
  bad.integration_cell_m = 6.0;
  CHECK_THROWS_AS(diffuse_power_gain(tx_at(0, 0), rx_at(1, 0), bad), DomainError);
  CHECK_THROWS_AS(diffuse_power_gain(tx_at(0, 0, -1.0), rx_at(1, 0), FloorModel{}), DomainError);

  // Fine-grid check at the self-channel geometry.
  FloorModel fine;
  fine.integration_cell_m = 0.005;
  const double coarse = diffuse_power_gain(tx_at(0, 0), rx_at(0, 0), FloorModel{});
  CHECK(std::abs(coarse / diffuse_power_gain(tx_at(0, 0), rx_at(0, 0), fine) - 1.0) < 0.01);
}

TEST_CASE("design angles") {
  CHECK(rad2deg(half_power_angle_for_grid(1.25, 1.75)) == doctest::Approx(19.65).epsilon(0.01 / 19.65));
  CHECK(rad2deg(half_power_angle_for_grid(2.0, 1.0)) == doctest::Approx(45.0));
  CHECK(half_power_angle_for_grid(0.5, 1.0) == doctest::Approx(std::atan(0.25)));
  CHECK(rad2deg(acceptance_angle_for_coverage(0.884, 1.3)) == doctest::Approx(34.21).epsilon(0.01 / 34.21));
  CHECK(rad2deg(acceptance_angle_for_coverage(1.3, 1.3)) == doctest::Approx(45.0));
  CHECK(acceptance_angle_for_coverage(0.65, 1.3) == doctest::Approx(std::atan(0.5)));
}
