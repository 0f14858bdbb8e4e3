// Worker-count control for the OpenMP kernels.
//
// The cap comes from the DEPTHCAL_THREADS environment variable:
// unset or 0 means "use all hardware threads", 1 selects the fully
// deterministic single-worker mode. Tests may override programmatically.
#pragma once

namespace depthcal {

// Number of workers parallel kernels are allowed to spawn (>= 1).
int worker_count();

// Overrides the environment-derived value. n <= 0 restores auto mode.
void set_worker_count(int n);

}  // namespace depthcal
