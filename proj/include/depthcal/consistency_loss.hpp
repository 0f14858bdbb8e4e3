// Map-consistency losses and their exact analytic gradients.
//
// The loss is the mean, over the filtered point set, of a per-point crispness
// penalty derived from the neighborhood sample covariance Q:
//
//   MinEigenvalue:  lambda1(Q)   (thickness of the local surface)
//   Trace:          tr(Q)        (total local scatter)
//
// Gradients flow from the penalty through the point positions to the bias
// weights and the per-scan pose corrections. Neighborhoods, the incidence
// angles used for correction, and the filter mask are treated as constants
// of the current iteration.
#pragma once

#include <string>
#include <vector>

#include "depthcal/depth_model.hpp"
#include "depthcal/geometry.hpp"
#include "depthcal/map_index.hpp"
#include "depthcal/types.hpp"

namespace depthcal {

enum class LossKind { MinEigenvalue, Trace };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

// Neighborhoods whose two smallest eigenvalues are closer than this are
// excluded from MinEigenvalue gradients (the eigenvector is ill-defined
// there); their loss value still counts.
constexpr double kEigengapMin = 1e-8;

struct LossValue {
  double value = 0.0;
  std::size_t selected = 0;  // points in the filter mask
};

// Per-point penalty from already-computed statistics.
double point_loss(const LocalStats& st, LossKind kind);

// Mean penalty over the masked points (compensated summation in point-index
// order). Throws EmptySelectionError when the mask selects nothing.
LossValue map_loss(const GlobalMap& map, LossKind kind);

// Per-point contributions: the penalty for masked points, NaN elsewhere.
// The mean of the non-NaN entries equals map_loss within 1e-12.
std::vector<double> point_losses(const GlobalMap& map, LossKind kind);

struct GradientRequest {
  bool weights = true;
  bool poses = true;
};

struct LossGradients {
  double value = 0.0;
  std::size_t selected = 0;
  std::size_t skipped_eigengap = 0;      // neighborhoods without a gradient
  Vec2 d_weights = Vec2::Zero();
  std::vector<Vec6> d_corrections;       // one per scan
};

// Loss plus gradients with respect to the bias weights and the per-scan pose
// corrections. The map's positions, statistics and mask must be current for
// exactly (model, corrections).
LossGradients map_loss_gradients(const GlobalMap& map, const BiasModel& model,
                                 const std::vector<PoseCorrection>& corrections,
                                 LossKind kind,
                                 const GradientRequest& request = {});

}  // namespace depthcal
