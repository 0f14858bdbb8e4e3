// The self-supervised training loop: jointly updates bias-model weights and
// per-scan pose corrections by gradient descent on a map-consistency loss,
// and returns the snapshot with the best validation loss.
//
// Iteration structure: positions are refreshed under the current parameters
// (using the incidence angles adopted from the previous iteration's normal
// estimates), statistics and filters are recomputed over the frozen
// neighborhoods, loss and gradients are evaluated, the snapshot is scored on
// a held-out validation map, and only then are the parameters updated. The
// one-iteration lag on the incidence angles keeps each evaluated loss an
// exact, finite-difference-checkable function of (w, p).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "depthcal/consistency_loss.hpp"
#include "depthcal/depth_model.hpp"
#include "depthcal/geometry.hpp"
#include "depthcal/map_index.hpp"

namespace depthcal {

enum class PoseMode { Frozen, PerScan, Shared };
enum class UpdateRule { Plain, Momentum, AdaptiveMoments };

std::string to_string(PoseMode mode);
PoseMode pose_mode_from_string(const std::string& name);
std::string to_string(UpdateRule rule);
UpdateRule update_rule_from_string(const std::string& name);

struct OptimizationConfig {
  int iterations = 200;
  LossKind loss = LossKind::MinEigenvalue;
  PoseMode pose_mode = PoseMode::Frozen;
  UpdateRule update = UpdateRule::AdaptiveMoments;

  double weight_step = 1e-3;     // step size for (w1, w2)
  double pose_step = 1e-4;       // step size for correction translations
  double rotation_scale = 0.1;   // pose_step multiplier for rotations

  double momentum = 0.9;         // Momentum decay; AdaptiveMoments beta1
  double beta2 = 0.999;          // AdaptiveMoments second-moment decay
  double epsilon = 1e-8;         // AdaptiveMoments denominator guard

  bool learn_bias = true;        // false: keep the initial weights frozen

  // Scan ids scored for model selection; empty selects the default split
  // (the last ~25% of scans, at least two).
  std::vector<uint32_t> validation_scans;

  uint64_t seed = 0;             // recorded for reproducibility bookkeeping

  void validate() const;
};

struct IterationRecord {
  double train_loss = 0.0;
  double validation_loss = 0.0;
  std::size_t train_selected = 0;        // masked points, training map
  std::size_t validation_selected = 0;
  std::size_t skipped_eigengap = 0;      // gradient-skipped neighborhoods
  std::size_t mask_flips = 0;            // mask changes vs previous iteration
  std::size_t invalidated = 0;           // points with corrected depth <= 0
};

struct TrainingResult {
  BiasModel model;                          // validation-best weights
  std::vector<PoseCorrection> corrections;  // validation-best, one per scan
  std::vector<IterationRecord> history;     // one record per iteration
  std::size_t selected_iteration = 0;       // argmin of validation loss
  std::vector<uint32_t> validation_ids;     // split actually used
};

// The default validation split: the last max(2, ceil(K/4)) scan ids.
std::vector<uint32_t> default_validation_ids(std::size_t scan_count);

// Sum of the per-scan correction gradients — the chain rule of tying every
// scan to one shared correction.
Vec6 shared_correction_gradient(const std::vector<Vec6>& per_scan);

// Runs exactly cfg.iterations iterations from w = model0.w, p = 0. Aborts
// with EmptySelectionError (empty filter mask) or NumericalError (non-finite
// loss), naming the iteration.
TrainingResult train(const std::vector<ScanCloud>& scans,
                     const std::vector<RigidTransform>& poses,
                     const OptimizationConfig& cfg, const FilterConfig& fcfg,
                     const BiasModel& model0);

// One-shot validation loss: builds a map from the validation scans only
// (with their current corrections applied), estimates incidence angles from
// that geometry, re-applies the depth correction with them, filters the map
// and evaluates the loss. Fewer than two validation scans is a
// configuration error.
double validation_loss(const std::vector<ScanCloud>& scans,
                       const std::vector<RigidTransform>& poses,
                       const BiasModel& model,
                       const std::vector<PoseCorrection>& corrections,
                       const std::vector<uint32_t>& validation_ids,
                       const FilterConfig& fcfg, LossKind kind);

}  // namespace depthcal
