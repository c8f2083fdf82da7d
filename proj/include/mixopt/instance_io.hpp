// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "mixopt/problems.hpp"

namespace mixopt {

// JSON instance documents. Matrices are nested row arrays, vectors flat arrays.
// Fields: n, A, b, C, c, C_tilde, c_tilde, W, objective; absent groups are
// omitted. Only quadratic objectives (built by quadratic_oracle) are serializable.
//
// Per-node dimensions come from A_i or C_i columns, then from C_tilde columns
// and the objective size. An optional x_dims array is written only when these
// rules cannot recover the split.
MixedProblemData instance_from_json(const std::string& text);
std::string instance_to_json(const MixedProblemData& data);

// Throw IoError when the file cannot be read or written.
MixedProblemData read_instance(const std::string& path);
void write_instance(const MixedProblemData& data, const std::string& path);

}  // namespace mixopt
