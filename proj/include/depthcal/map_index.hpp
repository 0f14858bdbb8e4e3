// Fused global map: corrected scan points in one frame, frozen fixed-radius
// neighborhoods, per-point PCA statistics and the three point filters.
//
// The map is a value type holding everything needed to re-evaluate point
// positions under new model weights and pose corrections: raw sensor-frame
// beams, per-point incidence angles used for the last correction, and the
// initial poses. Neighborhoods are frozen once (index lists into the map)
// while positions, statistics and the filter mask are refreshed every
// optimizer iteration.
#pragma once

#include <cstdint>
#include <vector>

#include "depthcal/depth_model.hpp"
#include "depthcal/geometry.hpp"
#include "depthcal/types.hpp"

namespace depthcal {

struct FilterConfig {
  double radius = 0.25;   // neighborhood radius [m]
  uint32_t n_min = 10;    // minimum neighbor count
  double c0 = 0.25;       // lambda1/lambda2 upper bound (flatness)
  double c1 = 0.25;       // lambda2/lambda3 lower bound
  double c2 = 1.0;        // lambda2/lambda3 upper bound
  double sigma_min = 0.36;  // viewpoint dispersion lower bound [m^2]

  void validate() const;
};

// Per-point local PCA statistics over the (valid members of the) frozen
// neighborhood. Eigenvalues are sorted ascending and clamped to >= 0.
struct LocalStats {
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Zero();
  Vec3 eigenvalues = Vec3::Zero();     // lambda1 <= lambda2 <= lambda3
  Vec3 min_direction = Vec3::Zero();   // u1
  Vec3 normal = Vec3::Zero();          // u1 oriented toward the sensor
  double gamma = 0.0;                  // incidence angle, [0, pi/2]
  double sigma = 0.0;                  // viewpoint dispersion trace [m^2]
  uint32_t neighbor_count = 0;         // valid members incl. the point
  bool available = false;              // neighbor_count >= 3
};

class GlobalMap {
 public:
  // Scan-level inputs (index k = scan id).
  std::vector<RigidTransform> poses;

  // Per-point arrays, all of size size().
  std::vector<Vec3> positions;       // current global-frame position
  std::vector<Vec3> origins;         // current sensor origin, global frame
  std::vector<Vec3> beam_dirs;       // current beam direction, global frame
  std::vector<uint32_t> scan_ids;
  std::vector<uint32_t> source_index;   // row in the source scan
  std::vector<Vec3> sensor_origins;     // v, sensor frame
  std::vector<Vec3> sensor_dirs;        // r, sensor frame (unit)
  std::vector<double> raw_depths;       // measured d before correction
  std::vector<double> gamma_used;       // gamma applied in last refresh
  std::vector<uint8_t> valid;

  // Frozen fixed-radius neighborhoods (CSR over point indices, each list
  // sorted ascending and containing the point itself).
  std::vector<std::size_t> neighbor_offsets;
  std::vector<uint32_t> neighbor_indices;
  double frozen_radius = 0.0;

  std::vector<LocalStats> stats;
  std::vector<uint8_t> mask;

  std::size_t size() const { return positions.size(); }
  bool neighborhoods_frozen() const { return !neighbor_offsets.empty(); }

  std::size_t neighbor_count(std::size_t i) const {
    return neighbor_offsets[i + 1] - neighbor_offsets[i];
  }
  const uint32_t* neighbors_begin(std::size_t i) const {
    return neighbor_indices.data() + neighbor_offsets[i];
  }
};

// Fuses the scans into one map: every valid corrected point of scan k is
// transformed by poses[k] * exp_correction(corrections[k]). Scan gamma
// fields seed gamma_used. Throws ConfigError for fewer than two scans.
GlobalMap build_map(const std::vector<ScanCloud>& scans,
                    const std::vector<RigidTransform>& poses,
                    const std::vector<PoseCorrection>& corrections,
                    const BiasModel& model);

// Recomputes positions/origins/beam directions from the stored sensor-frame
// beams under new weights and corrections, using each point's gamma_used.
// Points whose corrected depth falls to <= 0 are flagged invalid (counted in
// the return value); previously invalidated points are revived when their
// corrected depth is positive again.
std::size_t refresh_map(GlobalMap& map,
                        const std::vector<PoseCorrection>& corrections,
                        const BiasModel& model);

// Exact fixed-radius search over current positions; freezes the result.
void freeze_neighborhoods(GlobalMap& map, const FilterConfig& cfg);

// Mean, covariance (unbiased 1/(n-1)), eigenpairs, oriented normal,
// incidence angle and viewpoint dispersion per point, over the valid
// members of the frozen neighborhoods.
void compute_local_stats(GlobalMap& map);

// Statistics for one point: the per-point body of compute_local_stats.
// The parallel kernel and the serial reference both call this, so the two
// schedules differ only in loop order and stay bit-identical.
LocalStats point_local_stats(const GlobalMap& map, std::size_t i);

// Copies the freshly estimated incidence angles into gamma_used so the next
// refresh corrects with them.
void adopt_estimated_gamma(GlobalMap& map);

// mask_i = valid_i && neighbor filter && flatness filter && dispersion
// filter, per the documented predicates. Stores and returns the mask.
std::vector<uint8_t> apply_filters(GlobalMap& map, const FilterConfig& cfg);

// Exact brute-force O(n^2) radius query for one point (shared by the
// reference implementation and edge-case tests).
std::vector<uint32_t> brute_force_neighbors(const std::vector<Vec3>& points,
                                            std::size_t i, double radius);

}  // namespace depthcal
