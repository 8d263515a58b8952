#pragma once

#include <optional>

#include <Eigen/Dense>

namespace owe {

using Vec3 = Eigen::Vector3d;

/// Position plus optical axis of a transmitter or receiver.
struct Pose {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3(0.0, 0.0, -1.0);

  /// Validates that the axis is a unit vector (tolerance 1e-9).
  void validate() const;
};

struct EmitterParams {
  double optical_power_w = 1.0;
  double half_power_angle_rad = 0.0;
  double lambertian_order = 1.0;

  /// Fills the Lambertian order from the half-power angle.
  static EmitterParams from_half_power_angle(double optical_power_w, double half_power_angle_rad);
  void validate() const;
};

struct ReceiverParams {
  double area_m2 = 1e-4;
  double acceptance_angle_rad = 0.0;
  double refractive_index = 1.0;
  double filter_gain = 1.0;

  void validate() const;
};

/// Axis-aligned floor rectangle; cells outside it are skipped.
struct FloorBounds {
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
};

struct FloorModel {
  double reflectivity = 0.4;
  double z_plane = 0.0;
  double integration_cell_m = 0.02;
  double integration_extent_m = 5.0;
  std::optional<FloorBounds> bounds;

  void validate() const;
};

struct Transmitter {
  Pose pose;
  EmitterParams emitter;
};

struct Receiver {
  Pose pose;
  ReceiverParams params;
};

/// Smallest half-power angle accepted by lambertian_order.
inline constexpr double kMinHalfPowerAngleRad = 1e-4;

double lambertian_order(double half_power_angle_rad);

/// Radiant intensity in W/sr at angle phi off the optical axis.
double radiant_intensity(const EmitterParams& emitter, double phi);

double concentrator_gain(double psi, const ReceiverParams& rx);

/// Received power over transmitted power for a direct path.
double los_power_gain(const Transmitter& tx, const Receiver& rx);

/// Received power over transmitted power for a single bounce off the floor.
/// The integration window is centred on the midpoint of tx and rx.
double diffuse_power_gain(const Transmitter& tx, const Receiver& rx, const FloorModel& floor);

double half_power_angle_for_grid(double spacing_m, double height_above_workplane_m);
double acceptance_angle_for_coverage(double radius_m, double height_above_device_m);

double deg2rad(double deg);
double rad2deg(double rad);

}  // namespace owe
