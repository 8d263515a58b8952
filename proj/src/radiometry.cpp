#include "owe/radiometry.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "owe/error.hpp"

namespace owe {

namespace {

constexpr double kPi = std::numbers::pi;

// pow(c, m) with the clamping convention used throughout: a cosine at or
// below zero means the surface faces away.
inline double lobe(double cos_phi, double m) {
  if (cos_phi <= 0.0) return 0.0;
  return std::pow(cos_phi, m);
}

}  // namespace

double deg2rad(double deg) { return deg * kPi / 180.0; }
double rad2deg(double rad) { return rad * 180.0 / kPi; }

void Pose::validate() const {
  if (!position.allFinite() || !orientation.allFinite())
    throw DomainError("pose has non-finite components");
  if (std::abs(orientation.norm() - 1.0) > 1e-9)
    throw DomainError(fmt::format("orientation norm {} is not 1", orientation.norm()));
}

EmitterParams EmitterParams::from_half_power_angle(double optical_power_w, double half_power_angle_rad) {
  EmitterParams e;
  e.optical_power_w = optical_power_w;
  e.half_power_angle_rad = half_power_angle_rad;
  e.lambertian_order = owe::lambertian_order(half_power_angle_rad);
  e.validate();
  return e;
}

void EmitterParams::validate() const {
  if (!(optical_power_w >= 0.0)) throw DomainError("optical power must be >= 0");
  if (!(half_power_angle_rad > 0.0 && half_power_angle_rad < kPi / 2))
    throw DomainError("half-power angle must lie in (0, pi/2)");
  if (std::abs(lambertian_order - owe::lambertian_order(half_power_angle_rad)) > 1e-9)
    throw DomainError("Lambertian order does not match the half-power angle");
}

void ReceiverParams::validate() const {
  if (!(area_m2 > 0.0)) throw DomainError("receiver area must be > 0");
  if (!(acceptance_angle_rad > 0.0 && acceptance_angle_rad <= kPi / 2))
    throw DomainError("acceptance angle must lie in (0, pi/2]");
  if (!(refractive_index >= 1.0)) throw DomainError("refractive index must be >= 1");
  if (filter_gain != 1.0) throw DomainError("filter gain is fixed at 1");
}

void FloorModel::validate() const {
  if (!(reflectivity >= 0.0 && reflectivity <= 1.0))
    throw DomainError("reflectivity must lie in [0, 1]");
  if (!(integration_cell_m > 0.0)) throw DomainError("integration cell must be > 0");
  if (integration_cell_m >= integration_extent_m)
    throw DomainError(fmt::format("integration cell {} m must be smaller than the extent {} m",
                                  integration_cell_m, integration_extent_m));
  if (bounds && !(bounds->x_max > bounds->x_min && bounds->y_max > bounds->y_min))
    throw DomainError("floor bounds are empty");
}

double lambertian_order(double half_power_angle_rad) {
  if (!(half_power_angle_rad >= kMinHalfPowerAngleRad && half_power_angle_rad < kPi / 2))
    throw DomainError(fmt::format("half-power angle {} rad outside [{}, pi/2)", half_power_angle_rad,
                                  kMinHalfPowerAngleRad));
  return -std::log(2.0) / std::log(std::cos(half_power_angle_rad));
}

double radiant_intensity(const EmitterParams& emitter, double phi) {
  phi = std::abs(phi);
  if (phi > kPi / 2) return 0.0;
  const double m = emitter.lambertian_order;
  return emitter.optical_power_w * (m + 1.0) / (2.0 * kPi) * lobe(std::cos(phi), m);
}

double concentrator_gain(double psi, const ReceiverParams& rx) {
  if (psi < 0.0 || psi > rx.acceptance_angle_rad) return 0.0;
  const double s = std::sin(rx.acceptance_angle_rad);
  return rx.refractive_index * rx.refractive_index / (s * s);
}

double los_power_gain(const Transmitter& tx, const Receiver& rx) {
  const Vec3 d = rx.pose.position - tx.pose.position;
  const double dist = d.norm();
  if (dist == 0.0) throw DomainError("transmitter and receiver are co-located");
  const Vec3 u = d / dist;
  const double cos_phi = tx.pose.orientation.dot(u);
  const double cos_psi = -rx.pose.orientation.dot(u);
  if (cos_phi <= 0.0 || cos_psi <= 0.0) return 0.0;
  const double psi = std::acos(std::min(1.0, cos_psi));
  const double gc = concentrator_gain(psi, rx.params);
  if (gc == 0.0) return 0.0;
  const double m = tx.emitter.lambertian_order;
  return (m + 1.0) / (2.0 * kPi) * lobe(cos_phi, m) * rx.params.area_m2 * cos_psi * gc *
         rx.params.filter_gain / (dist * dist);
}

namespace {

// Share of the cell [c - w/2, c + w/2] inside [lo, hi].
double overlap(double c, double w, double lo, double hi) {
  const double a = std::max(c - 0.5 * w, lo);
  const double b = std::min(c + 0.5 * w, hi);
  return b > a ? (b - a) / w : 0.0;
}

}  // namespace

double diffuse_power_gain(const Transmitter& tx, const Receiver& rx, const FloorModel& floor) {
  floor.validate();
  if (tx.pose.position.z() <= floor.z_plane || rx.pose.position.z() <= floor.z_plane)
    throw DomainError("transmitter and receiver must sit above the floor");
  if (floor.reflectivity == 0.0) return 0.0;

  const double cell = floor.integration_cell_m;
  const int n = static_cast<int>(std::floor(2.0 * floor.integration_extent_m / cell + 1e-9));
  const double cx = 0.5 * (tx.pose.position.x() + rx.pose.position.x());
  const double cy = 0.5 * (tx.pose.position.y() + rx.pose.position.y());
  // Cell centres are placed symmetrically about the midpoint.
  const double start = -0.5 * (n - 1) * cell;

  const double m = tx.emitter.lambertian_order;
  const double cos_cut = std::cos(rx.params.acceptance_angle_rad);
  const double gc = concentrator_gain(0.0, rx.params);
  const double h_tx = tx.pose.position.z() - floor.z_plane;
  const double h_rx = rx.pose.position.z() - floor.z_plane;
  const Vec3& a_tx = tx.pose.orientation;
  const Vec3& a_rx = rx.pose.orientation;

  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = cx + start + i * cell;
    const double wx = floor.bounds ? overlap(x, cell, floor.bounds->x_min, floor.bounds->x_max) : 1.0;
    if (wx == 0.0) continue;
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      const double y = cy + start + j * cell;
      const double wy = floor.bounds ? overlap(y, cell, floor.bounds->y_min, floor.bounds->y_max) : 1.0;
      if (wy == 0.0) continue;
      // Floor point to receiver.
      const double rx2x = rx.pose.position.x() - x;
      const double rx2y = rx.pose.position.y() - y;
      const double d2sq = rx2x * rx2x + rx2y * rx2y + h_rx * h_rx;
      const double d2 = std::sqrt(d2sq);
      const double cos_psi = -(a_rx.x() * rx2x + a_rx.y() * rx2y + a_rx.z() * h_rx) / d2;
      if (cos_psi <= 0.0 || cos_psi < cos_cut) continue;
      // Transmitter to floor point.
      const double t2x = x - tx.pose.position.x();
      const double t2y = y - tx.pose.position.y();
      const double d1sq = t2x * t2x + t2y * t2y + h_tx * h_tx;
      const double d1 = std::sqrt(d1sq);
      const double cos_phi = (a_tx.x() * t2x + a_tx.y() * t2y - a_tx.z() * h_tx) / d1;
      if (cos_phi <= 0.0) continue;
      const double cos_ti = h_tx / d1;
      const double cos_tr = h_rx / d2;
      row += wy * lobe(cos_phi, m) * cos_ti * cos_tr * cos_psi / (d1sq * d2sq);
    }
    sum += wx * row;
  }
  return sum * (m + 1.0) / (2.0 * kPi) * floor.reflectivity / kPi * rx.params.area_m2 * gc *
         rx.params.filter_gain * cell * cell;
}

double half_power_angle_for_grid(double spacing_m, double height_above_workplane_m) {
  if (!(spacing_m > 0.0 && height_above_workplane_m > 0.0))
    throw DomainError("spacing and height must be > 0");
  return std::atan(0.5 * spacing_m / height_above_workplane_m);
}

double acceptance_angle_for_coverage(double radius_m, double height_above_device_m) {
  if (!(radius_m > 0.0 && height_above_device_m > 0.0))
    throw DomainError("radius and height must be > 0");
  return std::atan(radius_m / height_above_device_m);
}

}  // namespace owe
