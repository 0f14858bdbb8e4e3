// Parametric depth-bias models and the depth-correction transform of a scan.
//
// A lidar return at depth d with beam incidence angle gamma carries a
// systematic range error eps(d, gamma). Two parametric forms are supported:
//
//   Polynomial:        eps = w1 g^2 + w2 g^4            [meters]
//   ScaledPolynomial:  eps = d (w1 g^2 + w2 g^4)        [meters]
//
// Correction subtracts the modeled bias: d_hat = d - eps(d, gamma), moving
// the point along its beam. eps > 0 means the sensor overestimates depth.
#pragma once

#include <string>
#include <vector>

#include "depthcal/types.hpp"

namespace depthcal {

enum class BiasKind { Polynomial, ScaledPolynomial };

std::string to_string(BiasKind kind);
BiasKind bias_kind_from_string(const std::string& name);

struct BiasModel {
  BiasKind kind = BiasKind::ScaledPolynomial;
  Vec2 w = Vec2::Zero();

  bool is_zero() const { return w.x() == 0.0 && w.y() == 0.0; }
};

// One lidar scan in the sensor frame, stored per-point as
// (origin v, unit direction r, depth d). The measured point is v + d r.
// gamma holds the incidence angle used for correction (NaN = unavailable,
// the point passes through correction unchanged). source_index is the row
// of the point in the file it was loaded from, so ground-truth sidecars
// stay joinable after the loader drops points.
struct ScanCloud {
  std::vector<Vec3> origins;
  std::vector<Vec3> directions;
  std::vector<double> depths;
  std::vector<double> gamma;
  std::vector<uint8_t> valid;
  std::vector<uint32_t> source_index;

  std::size_t size() const { return depths.size(); }

  Vec3 point(std::size_t i) const {
    return origins[i] + depths[i] * directions[i];
  }

  void push_back(const Vec3& origin, const Vec3& direction, double depth);
  void check_consistent() const;
};

// eps(d, gamma). Throws DomainError for gamma outside [0, pi/2].
double eval_bias(const BiasModel& m, double depth, double gamma);

// d eps / d (w1, w2) holding gamma (and depth) fixed.
Vec2 d_bias_d_weights(const BiasModel& m, double depth, double gamma);

// d - eps(d, gamma); returns d unchanged when gamma is NaN.
double corrected_depth(const BiasModel& m, double depth, double gamma);

struct CorrectionSummary {
  std::size_t corrected = 0;    // points with a usable gamma
  std::size_t passed = 0;       // gamma unavailable or already invalid
  std::size_t invalidated = 0;  // corrected depth fell to <= 0
};

// Applies d_hat = d - eps(d, gamma) to every valid point with a finite
// gamma. Points whose corrected depth would be <= 0 are flagged invalid.
CorrectionSummary correct_scan(ScanCloud& scan, const BiasModel& m);

// Jacobian of the corrected point v + (d - eps) r with respect to the two
// model weights: -r (outer) d eps/d w. gamma is treated as a constant.
Mat32 d_corrected_point_d_weights(const ScanCloud& scan, const BiasModel& m,
                                  std::size_t i);

// Model (de)serialization: a key = value text file with kind, w1, w2.
void save_model(const BiasModel& m, const std::string& path);
BiasModel load_model(const std::string& path);

}  // namespace depthcal
