// One key-value configuration file covering everything a run needs: the
// bias-model kind, the loader depth cutoff, the neighborhood filters and the
// optimizer schedule. Every key has a default; absent keys keep it, unknown
// keys are rejected.
#pragma once

#include <string>

#include "depthcal/depth_model.hpp"
#include "depthcal/map_index.hpp"
#include "depthcal/optimizer.hpp"

namespace depthcal {

struct RunConfig {
  BiasKind model_kind = BiasKind::ScaledPolynomial;
  double d_min = 0.5;  // loader minimum depth [m]
  FilterConfig filter;
  OptimizationConfig optimize;
};

RunConfig default_run_config();

// Serializes every key with its current value, defaults annotated as
// comments. save_run_config followed by load_run_config reproduces the
// config exactly.
std::string format_run_config(const RunConfig& cfg);
void save_run_config(const std::string& path, const RunConfig& cfg);

// Loads `key = value` lines; validates all module invariants.
RunConfig load_run_config(const std::string& path);

}  // namespace depthcal
