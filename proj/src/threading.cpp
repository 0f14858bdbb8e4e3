#include "depthcal/threading.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace depthcal {

namespace {
int g_override = 0;  // 0 = follow environment

int hardware_workers() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int env_workers() {
  const char* v = std::getenv("DEPTHCAL_THREADS");
  if (v == nullptr || *v == '\0') return 0;
  try {
    return std::max(0, std::stoi(std::string(v)));
  } catch (...) {
    return 0;
  }
}
}  // namespace

int worker_count() {
  int n = g_override > 0 ? g_override : env_workers();
  if (n <= 0) n = hardware_workers();
  return n < 1 ? 1 : n;
}

void set_worker_count(int n) { g_override = n > 0 ? n : 0; }

}  // namespace depthcal
