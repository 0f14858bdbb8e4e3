// Exception hierarchy. Each category maps to one class so callers can
// distinguish bad inputs from bad files from numerical blow-ups.
#pragma once

#include <stdexcept>
#include <string>

namespace depthcal {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite or out-of-range parameter handed to a library function.
struct InvalidParameterError : Error {
  using Error::Error;
};

// Input outside a documented mathematical domain (e.g. incidence angle).
struct DomainError : Error {
  using Error::Error;
};

// Inconsistent run configuration (scan counts, validation split, thresholds).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed file content (PLY, CSV, config, model files).
struct FormatError : Error {
  using Error::Error;
};

// Non-finite loss or gradient during optimization.
struct NumericalError : Error {
  using Error::Error;
};

// Filter mask selected zero points; the loss mean is undefined.
struct EmptySelectionError : Error {
  using Error::Error;
};

}  // namespace depthcal
