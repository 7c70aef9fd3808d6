#pragma once

#include <stdexcept>
#include <string>

namespace cocoa {

/// Base class for all errors raised by the toolkit.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: incompatible shapes, bad hyperparameters, bad manifests.
struct config_error : error {
  using error::error;
};

/// Invalid user-supplied data (labels out of range, malformed files, ...).
struct input_error : error {
  using error::error;
};

/// API misuse: consumed tape, mixed tapes, non-scalar backward seed.
struct usage_error : error {
  using error::error;
};

/// Numerical degeneracy, e.g. a zero-norm vector fed to cosine similarity.
struct numeric_error : error {
  using error::error;
};

/// Batch sampler could not satisfy its constraints.
struct sampling_error : error {
  using error::error;
};

/// Filesystem / serialization failure.
struct io_error : error {
  using error::error;
};

}  // namespace cocoa
