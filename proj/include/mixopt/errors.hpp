// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mixopt {

// Bad shapes, out-of-range parameters, missing required data.
using InvalidArgument = std::invalid_argument;

// Dense spectral work requested above the configured size cap.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A matrix family or operator has no positive spectrum where one is required.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Constraint data admits no feasible point, or a generator cannot hit its targets.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterates left the safe region.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File missing, unreadable or malformed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sweep with too few successful points for a slope fit.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mixopt
