#include "depthcal/simulator.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "depthcal/error.hpp"

namespace depthcal {

void Patch::validate() const {
  if (std::abs(normal.norm() - 1.0) > 1e-9 ||
      std::abs(axis_u.norm() - 1.0) > 1e-9 ||
      std::abs(axis_v.norm() - 1.0) > 1e-9) {
    throw InvalidParameterError("patch axes must be unit length");
  }
  if (std::abs(normal.dot(axis_u)) > 1e-9 ||
      std::abs(normal.dot(axis_v)) > 1e-9 ||
      std::abs(axis_u.dot(axis_v)) > 1e-9) {
    throw InvalidParameterError("patch axes must be orthogonal");
  }
  if (!(half_u > 0.0 && half_v > 0.0)) {
    throw InvalidParameterError("patch extents must be positive");
  }
}

void Scene::validate() const {
  if (patches.empty()) throw InvalidParameterError("scene has no patches");
  for (const Patch& p : patches) p.validate();
}

void SensorModel::validate() const {
  if (elevation_rays < 1 || azimuth_rays < 1) {
    throw InvalidParameterError("sensor needs at least one ray per axis");
  }
  if (!(elevation_fov > 0.0 && azimuth_fov > 0.0)) {
    throw InvalidParameterError("sensor field of view must be positive");
  }
  if (!(max_range > 0.0)) {
    throw InvalidParameterError("sensor max range must be positive");
  }
  if (!(noise_std >= 0.0)) {
    throw InvalidParameterError("sensor noise std must be >= 0");
  }
}

namespace {

Patch make_patch(const Vec3& center, const Vec3& normal, const Vec3& axis_u,
                 double half_u, double half_v) {
  Patch p;
  p.center = center;
  p.normal = normal;
  p.axis_u = axis_u;
  p.axis_v = normal.cross(axis_u);
  p.half_u = half_u;
  p.half_v = half_v;
  return p;
}

constexpr double kCorridorLength = 70.0;
constexpr double kCorridorWidth = 4.0;
constexpr double kCorridorHeight = 3.0;
constexpr double kCorridorEdgeGap = 0.3;

}  // namespace

Scene corridor_scene() {
  const double hx = kCorridorLength / 2.0;
  const double hy = kCorridorWidth / 2.0;
  const double hz = kCorridorHeight / 2.0;
  // Faces stop short of the box edges by more than the default neighborhood
  // radius, so no neighborhood ever mixes points from two planes (a mixed
  // neighborhood has an irreducible thickness no bias model can remove).
  const double g = kCorridorEdgeGap;

  Scene scene;
  // Floor and ceiling.
  scene.patches.push_back(make_patch(Vec3(hx, hy, 0.0), Vec3::UnitZ(),
                                     Vec3::UnitX(), hx - g, hy - g));
  scene.patches.push_back(make_patch(Vec3(hx, hy, kCorridorHeight),
                                     -Vec3::UnitZ(), Vec3::UnitX(), hx - g,
                                     hy - g));
  // Side walls.
  scene.patches.push_back(make_patch(Vec3(hx, 0.0, hz), Vec3::UnitY(),
                                     Vec3::UnitX(), hx - g, hz - g));
  scene.patches.push_back(make_patch(Vec3(hx, kCorridorWidth, hz),
                                     -Vec3::UnitY(), Vec3::UnitX(), hx - g,
                                     hz - g));
  // End walls (close the box so motion along the axis is observable).
  scene.patches.push_back(make_patch(Vec3(0.0, hy, hz), Vec3::UnitX(),
                                     Vec3::UnitY(), hy - g, hz - g));
  scene.patches.push_back(make_patch(Vec3(kCorridorLength, hy, hz),
                                     -Vec3::UnitX(), Vec3::UnitY(), hy - g,
                                     hz - g));
  return scene;
}

std::vector<RigidTransform> corridor_poses() {
  std::vector<RigidTransform> poses;
  for (int k = 0; k < 10; ++k) {
    const double yaw = deg2rad(k % 2 == 0 ? 5.0 : -5.0);
    RigidTransform t;
    t.rotation = rodrigues(Vec3(0.0, 0.0, yaw));
    t.translation = Vec3(5.0 + 2.0 * k, kCorridorWidth / 2.0, 1.5);
    poses.push_back(t);
  }
  return poses;
}

Scene board_scene(double distance, double incidence_deg) {
  if (!(distance > 0.0)) {
    throw InvalidParameterError("board distance must be positive");
  }
  if (!(incidence_deg >= 0.0 && incidence_deg < 90.0)) {
    throw InvalidParameterError("board incidence must be in [0, 90) degrees");
  }
  const double phi = deg2rad(incidence_deg);
  // Board facing the sensor, yawed about the vertical axis by phi.
  Patch board;
  board.center = Vec3(distance, 0.0, 0.0);
  board.normal = Vec3(-std::cos(phi), -std::sin(phi), 0.0);
  board.axis_u = Vec3(-std::sin(phi), std::cos(phi), 0.0);  // width, 0.50 m
  board.axis_v = Vec3::UnitZ();                             // height, 1.15 m
  board.half_u = 0.25;
  board.half_v = 0.575;

  Scene scene;
  scene.patches.push_back(board);
  return scene;
}

namespace {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  double gamma = 0.0;
  uint32_t patch = 0;
  bool found = false;
};

// Nearest front-face in-extent intersection of the global-frame ray
// (origin, unit dir) with the scene.
Hit intersect(const Scene& scene, const Vec3& origin, const Vec3& dir,
              double max_range) {
  Hit best;
  for (std::size_t p = 0; p < scene.patches.size(); ++p) {
    const Patch& patch = scene.patches[p];
    const double denom = patch.normal.dot(dir);
    if (denom >= -1e-12) continue;  // back face or parallel
    const double t = patch.normal.dot(patch.center - origin) / denom;
    if (!(t > 1e-9 && t <= max_range) || t >= best.t) continue;
    const Vec3 q = origin + t * dir - patch.center;
    if (std::abs(q.dot(patch.axis_u)) > patch.half_u ||
        std::abs(q.dot(patch.axis_v)) > patch.half_v) {
      continue;
    }
    best.t = t;
    best.gamma = std::acos(std::clamp(-denom, -1.0, 1.0));
    best.patch = static_cast<uint32_t>(p);
    best.found = true;
  }
  return best;
}

// Measured depth solving d = d_true + eps(d, gamma). Returns <= 0 when the
// model admits no positive return (the ray is then dropped).
double inject_bias(const BiasModel& bias, double d_true, double gamma) {
  if (bias.kind == BiasKind::Polynomial) {
    return d_true + eval_bias(bias, d_true, gamma);
  }
  const double q = eval_bias(bias, 1.0, gamma);  // per-meter scale factor
  if (1.0 - q <= 1e-9) return -1.0;
  return d_true / (1.0 - q);
}

}  // namespace

SimulatedScan cast_scan(const Scene& scene, const RigidTransform& pose,
                        const SensorModel& sensor, uint64_t scan_index) {
  scene.validate();
  sensor.validate();

  std::seed_seq seq{sensor.seed, scan_index};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> noise(0.0, 1.0);

  const double el_step = sensor.elevation_fov / sensor.elevation_rays;
  const double az_step = sensor.azimuth_fov / sensor.azimuth_rays;
  const double el_lo = -sensor.elevation_fov / 2.0;
  const double az_lo = -sensor.azimuth_fov / 2.0;

  SimulatedScan out;
  for (int ei = 0; ei < sensor.elevation_rays; ++ei) {
    const double el = el_lo + (ei + 0.5) * el_step;
    for (int ai = 0; ai < sensor.azimuth_rays; ++ai) {
      const double az = az_lo + (ai + 0.5) * az_step;
      const Vec3 r(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                   std::sin(el));
      const Vec3 dir = pose.rotation * r;
      const Hit hit = intersect(scene, pose.translation, dir, sensor.max_range);
      if (!hit.found) continue;

      double d = inject_bias(sensor.bias, hit.t, hit.gamma);
      if (sensor.noise_std > 0.0) d += sensor.noise_std * noise(rng);
      if (d <= 0.0) continue;

      out.scan.push_back(Vec3::Zero(), r, d);
      out.truth.d_true.push_back(hit.t);
      out.truth.gamma_true.push_back(hit.gamma);
      out.truth.patch_id.push_back(hit.patch);
    }
  }
  return out;
}

std::vector<RigidTransform> perturb_poses(
    const std::vector<RigidTransform>& poses, double translation_std,
    double rotation_std, uint64_t seed) {
  if (translation_std < 0.0 || rotation_std < 0.0) {
    throw InvalidParameterError("pose-noise stds must be >= 0");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<RigidTransform> out;
  out.reserve(poses.size());
  for (const RigidTransform& pose : poses) {
    PoseCorrection delta = PoseCorrection::Zero();
    if (translation_std > 0.0) {
      for (int a = 0; a < 3; ++a) delta[a] = translation_std * unit(rng);
    }
    if (rotation_std > 0.0) {
      for (int a = 3; a < 6; ++a) delta[a] = rotation_std * unit(rng);
    }
    out.push_back(compose(pose, exp_correction(delta)));
  }
  return out;
}

PlaneReport point_to_plane_report(const std::vector<Vec3>& points,
                                  const std::vector<Vec3>& beam_dirs,
                                  const Scene& scene, int bin_count,
                                  double gamma_max, double assignment_cap) {
  scene.validate();
  if (points.size() != beam_dirs.size()) {
    throw InvalidParameterError(
        "point_to_plane_report: point/beam counts differ");
  }
  if (bin_count < 1 || !(gamma_max > 0.0) || !(assignment_cap > 0.0)) {
    throw InvalidParameterError("point_to_plane_report: bad binning");
  }

  PlaneReport report;
  report.bins.resize(static_cast<std::size_t>(bin_count));
  const double bin_width = gamma_max / bin_count;
  for (int b = 0; b < bin_count; ++b) {
    report.bins[b].gamma_lo = b * bin_width;
    report.bins[b].gamma_hi = (b + 1) * bin_width;
  }
  std::vector<double> sum(report.bins.size(), 0.0);
  std::vector<double> sum_sq(report.bins.size(), 0.0);

  for (std::size_t i = 0; i < points.size(); ++i) {
    // Nearest patch by perpendicular distance, in-extent and under the cap.
    double best_abs = assignment_cap;
    const Patch* best = nullptr;
    for (const Patch& patch : scene.patches) {
      const double perp = patch.normal.dot(points[i] - patch.center);
      if (std::abs(perp) > best_abs) continue;
      const Vec3 q = points[i] - patch.center - perp * patch.normal;
      if (std::abs(q.dot(patch.axis_u)) > patch.half_u ||
          std::abs(q.dot(patch.axis_v)) > patch.half_v) {
        continue;
      }
      best_abs = std::abs(perp);
      best = &patch;
    }
    const double denom = best ? best->normal.dot(beam_dirs[i]) : 0.0;
    if (best == nullptr || denom >= -1e-6) {
      ++report.unattributed;
      continue;
    }

    // Residual along the beam: positive = range overestimate.
    const double residual = best->normal.dot(points[i] - best->center) / denom;
    const double gamma = std::acos(std::clamp(-denom, -1.0, 1.0));
    const int b = std::min(static_cast<int>(gamma / bin_width), bin_count - 1);
    ++report.bins[b].count;
    sum[b] += residual;
    sum_sq[b] += residual * residual;
    ++report.attributed;
  }

  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    if (report.bins[b].count == 0) continue;
    const double n = static_cast<double>(report.bins[b].count);
    report.bins[b].mean = sum[b] / n;
    report.bins[b].rms = std::sqrt(sum_sq[b] / n);
  }
  return report;
}

std::vector<BoardCurvePoint> board_experiment(
    const std::vector<double>& distances, const std::vector<double>& angles_deg,
    const BiasModel& gt, const BiasModel& learned) {
  if (distances.empty() || angles_deg.empty()) {
    throw InvalidParameterError("board_experiment: empty sweep");
  }
  for (double a : angles_deg) {
    if (!(a >= 0.0 && a <= 85.0)) {
      throw InvalidParameterError("board_experiment: angles must be in [0, 85]");
    }
  }

  // Dense narrow-field sensor so the board stays well sampled even when
  // foreshortened at grazing angles.
  SensorModel sensor;
  sensor.elevation_rays = 128;
  sensor.azimuth_rays = 128;
  sensor.elevation_fov = deg2rad(16.0);
  sensor.azimuth_fov = deg2rad(16.0);
  sensor.max_range = 50.0;
  sensor.bias = gt;

  const RigidTransform identity;
  std::vector<BoardCurvePoint> curve;
  for (double distance : distances) {
    for (double angle : angles_deg) {
      const Scene scene = board_scene(distance, angle);
      const SimulatedScan sim = cast_scan(scene, identity, sensor);

      BoardCurvePoint point;
      point.distance = distance;
      point.angle_deg = angle;
      point.samples = sim.scan.size();
      if (sim.scan.size() == 0) {
        curve.push_back(point);
        continue;
      }

      double raw_sum = 0.0;
      double fixed_sum = 0.0;
      for (std::size_t i = 0; i < sim.scan.size(); ++i) {
        const double d = sim.scan.depths[i];
        const double gamma = sim.truth.gamma_true[i];
        raw_sum += d - sim.truth.d_true[i];
        fixed_sum += corrected_depth(learned, d, gamma) - sim.truth.d_true[i];
      }
      point.uncorrected = raw_sum / static_cast<double>(sim.scan.size());
      point.corrected = fixed_sum / static_cast<double>(sim.scan.size());
      curve.push_back(point);
    }
  }
  return curve;
}

}  // namespace depthcal
