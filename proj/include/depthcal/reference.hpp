// Serial reference implementations of the parallel kernels.
//
// These are deliberately plain, single-threaded restatements used to pin the
// behavior of the production kernels in tests and to serve as the baseline
// in the benchmark target. They take independent code paths where it buys
// cross-validation: brute-force neighbor search instead of the grid,
// scatter-style gradient accumulation instead of the gather, and full
// per-point Jacobian matrices instead of the factored per-scan chain.
#pragma once

#include <vector>

#include "depthcal/consistency_loss.hpp"
#include "depthcal/map_index.hpp"

namespace depthcal::reference {

// Frozen neighborhoods by exhaustive O(n^2) distance tests.
void freeze_neighborhoods(GlobalMap& map, const FilterConfig& cfg);

// Per-point statistics, one point at a time. Deliberately reuses the
// per-point kernel: parallelization is over points, so the serial schedule
// is required to match bit for bit (checked in the tests).
void compute_local_stats(GlobalMap& map);

// Filter mask evaluated point by point, straight from the predicates.
std::vector<uint8_t> apply_filters(GlobalMap& map, const FilterConfig& cfg);

// Mean masked penalty via one ordered compensated sum.
LossValue map_loss(const GlobalMap& map, LossKind kind);

// Gradients via scatter accumulation and explicit Jacobian matrices.
LossGradients map_loss_gradients(
    const GlobalMap& map, const BiasModel& model,
    const std::vector<PoseCorrection>& corrections, LossKind kind,
    const GradientRequest& request = {});

}  // namespace depthcal::reference
