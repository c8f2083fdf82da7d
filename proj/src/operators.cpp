// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mixopt/operators.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace mixopt {

Mat read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError(path + ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows[0].size()) throw IoError(path + ": ragged rows");
    rows.push_back(std::move(row));
  }
  Mat m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void write_csv(const std::string& path, const Mat& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

}  // namespace mixopt
