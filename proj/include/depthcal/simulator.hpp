// Synthetic lidar oracle: planar scenes, ray casting with ground-truth bias
// injection, pose-noise injection, and point-to-plane evaluation metrics.
//
// Bias is injected as the exact inverse of the correction transform: the
// measured depth d solves d = d_true + eps(d, gamma), so correcting a
// noiseless scan with the injected model recovers d_true to round-off.
// Ground truth (d_true, gamma_true, patch id) travels in a separate sidecar
// and is never consumed by training.
#pragma once

#include <cstdint>
#include <vector>

#include "depthcal/depth_model.hpp"
#include "depthcal/geometry.hpp"
#include "depthcal/types.hpp"

namespace depthcal {

// Finite rectangle: center, unit normal, and two orthonormal in-plane axes
// with half-extents. Rays hitting the back face (beam along the normal) are
// discarded.
struct Patch {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  double half_u = 1.0;
  double half_v = 1.0;

  void validate() const;
};

struct Scene {
  std::vector<Patch> patches;

  void validate() const;
};

// Indoor corridor: 70 m long, 4 m wide, 3 m high — floor, ceiling, two side
// walls and two end walls, normals facing inward.
Scene corridor_scene();

// Ten stop-and-go sensor poses spaced 2 m along the corridor axis at 1.5 m
// height, yaw alternating +/-5 deg so every patch is seen from several
// well-separated viewpoints.
std::vector<RigidTransform> corridor_poses();

// Single 0.50 m x 1.15 m board centered `distance` meters down the +x axis
// of the sensor, yawed so a ray through its center arrives at
// `incidence_deg` degrees.
Scene board_scene(double distance, double incidence_deg);

struct SensorModel {
  int elevation_rays = 64;
  int azimuth_rays = 256;
  double elevation_fov = deg2rad(90.0);
  double azimuth_fov = 2.0 * kPi;
  double max_range = 30.0;       // meters
  double noise_std = 0.0;        // Gaussian depth noise, meters
  BiasModel bias;                // injected ground-truth bias
  uint64_t seed = 0;

  void validate() const;
};

// Per-point ground truth, row-aligned with the scan it accompanies.
struct GroundTruth {
  std::vector<double> d_true;
  std::vector<double> gamma_true;
  std::vector<uint32_t> patch_id;

  std::size_t size() const { return d_true.size(); }
};

struct SimulatedScan {
  ScanCloud scan;     // measured depths; gamma left unset (NaN)
  GroundTruth truth;
};

// Casts the full sensor grid from `pose` (rays in the sensor frame, scene in
// the global frame). Missed rays yield no point. `scan_index` splits the
// noise stream so multi-scan datasets are deterministic regardless of the
// order scans are generated in.
SimulatedScan cast_scan(const Scene& scene, const RigidTransform& pose,
                        const SensorModel& sensor, uint64_t scan_index = 0);

// Independent Gaussian perturbations composed on the right of each pose:
// T' = T * exp([t, theta]). Zero stds leave the poses bit-identical.
std::vector<RigidTransform> perturb_poses(
    const std::vector<RigidTransform>& poses, double translation_std,
    double rotation_std, uint64_t seed);

struct AngleBin {
  double gamma_lo = 0.0;   // radians
  double gamma_hi = 0.0;
  std::size_t count = 0;
  double mean = 0.0;       // signed residual, meters
  double rms = 0.0;
};

struct PlaneReport {
  std::vector<AngleBin> bins;
  std::size_t attributed = 0;
  std::size_t unattributed = 0;
};

// Signed point-to-plane residual of each global-frame point against its
// nearest scene patch, measured along the beam (positive = the sensor
// overestimated the range), binned by the patch-derived incidence angle.
// Points farther than `assignment_cap` from every patch plane (or outside
// all patch extents) are counted and excluded.
PlaneReport point_to_plane_report(const std::vector<Vec3>& points,
                                  const std::vector<Vec3>& beam_dirs,
                                  const Scene& scene, int bin_count,
                                  double gamma_max = kPi / 2.0,
                                  double assignment_cap = 0.5);

struct BoardCurvePoint {
  double distance = 0.0;       // meters
  double angle_deg = 0.0;      // nominal board incidence
  double uncorrected = 0.0;    // mean residual before correction
  double corrected = 0.0;      // mean residual after the learned correction
  std::size_t samples = 0;
};

// The synthetic board experiment: for each (distance, angle) placement, cast
// a dense scan with `gt` bias injected and report the mean point-to-plane
// residual before and after correcting with `learned` (using the recorded
// ground-truth incidence angles; this is an evaluation oracle).
std::vector<BoardCurvePoint> board_experiment(
    const std::vector<double>& distances, const std::vector<double>& angles_deg,
    const BiasModel& gt, const BiasModel& learned);

}  // namespace depthcal
