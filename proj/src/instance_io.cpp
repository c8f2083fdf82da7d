// Copyright The mixopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mixopt/instance_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mixopt {

namespace {

using json = nlohmann::json;

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vec_to_json(const Vec& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

// cols is used for matrices with no rows.
Mat mat_from_json(const json& j, Index cols, const std::string& where) {
  if (!j.is_array()) throw IoError(where + ": expected a nested array");
  const Index rows = static_cast<Index>(j.size());
  if (rows == 0) return Mat(0, std::max<Index>(cols, 0));
  if (!j[0].is_array()) throw IoError(where + ": expected a nested array");
  const Index c = static_cast<Index>(j[0].size());
  Mat m(rows, c);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != c) throw IoError(where + ": ragged matrix");
    for (Index k = 0; k < c; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

Vec vec_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw IoError(where + ": expected an array");
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

void read_group(const json& doc, const char* mat_key, const char* vec_key, Index n, std::vector<Mat>& mats,
                std::vector<Vec>& vecs) {
  const bool has_m = doc.contains(mat_key), has_v = doc.contains(vec_key);
  if (!has_m && !has_v) return;
  if (has_m != has_v) throw IoError(std::string("instance: ") + mat_key + " and " + vec_key + " must appear together");
  const json& jm = doc[mat_key];
  const json& jv = doc[vec_key];
  if (!jm.is_array() || !jv.is_array() || static_cast<Index>(jm.size()) != n || static_cast<Index>(jv.size()) != n)
    throw IoError(std::string("instance: ") + mat_key + " needs one block per node");
  for (Index i = 0; i < n; ++i) {
    const std::string where = std::string(mat_key) + "[" + std::to_string(i) + "]";
    mats.push_back(mat_from_json(jm[static_cast<std::size_t>(i)], -1, where));
    vecs.push_back(vec_from_json(jv[static_cast<std::size_t>(i)], std::string(vec_key) + "[" + std::to_string(i) + "]"));
  }
}

// x_dims and shared_dim from the constraint blocks and objective sizes.
void derive_dims(const std::vector<Mat>& a, const std::vector<Mat>& c, const std::vector<Mat>& ct,
                 const std::vector<Index>& q_dims, std::vector<Index>& x_dims, Index& shared_dim) {
  const std::size_t n = q_dims.size();
  x_dims.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!a.empty() && (a[i].rows() > 0 || a[i].cols() > 0)) x_dims[i] = a[i].cols();
    if (x_dims[i] < 0 && !c.empty() && c[i].rows() > 0) x_dims[i] = c[i].cols();
  }
  shared_dim = -1;
  if (!ct.empty()) {
    for (const Mat& m : ct) {
      if (m.rows() > 0) shared_dim = m.cols();
    }
  }
  if (shared_dim < 0) {
    // Only x blocks are constrained; the rest of each objective is the shared part.
    bool known = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (x_dims[i] >= 0) {
        shared_dim = q_dims[i] - x_dims[i];
        known = true;
        break;
      }
    }
    if (!known) shared_dim = a.empty() && c.empty() ? (n ? q_dims[0] : 0) : 0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (x_dims[i] < 0) x_dims[i] = q_dims[i] - shared_dim;
  }
}

}  // namespace

MixedProblemData instance_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("instance: malformed JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("n")) throw IoError("instance: missing field n");
    MixedProblemData d;
    d.n = doc["n"].get<Index>();
    if (d.n < 1) throw IoError("instance: n must be at least 1");
    if (!doc.contains("W")) throw IoError("instance: missing field W");
    d.W = mat_from_json(doc["W"], d.n, "W");
    if (!doc.contains("objective")) throw IoError("instance: missing field objective");
    const json& obj = doc["objective"];
    if (!obj.is_array() || static_cast<Index>(obj.size()) != d.n)
      throw IoError("instance: objective needs one entry per node");
    std::vector<Index> q_dims;
    for (Index i = 0; i < d.n; ++i) {
      const json& o = obj[static_cast<std::size_t>(i)];
      if (o.value("type", std::string()) != "quadratic")
        throw IoError("instance: objective " + std::to_string(i) + " is not of type quadratic");
      const Vec q = vec_from_json(o.at("q"), "objective q");
      const Mat Q = mat_from_json(o.at("Q"), q.size(), "objective Q");
      const double shift = o.value("mu_shift", 0.0);
      d.f.push_back(quadratic_oracle(Q, q, shift));
      q_dims.push_back(q.size());
    }
    read_group(doc, "A", "b", d.n, d.A, d.b);
    read_group(doc, "C", "c", d.n, d.C, d.c);
    read_group(doc, "C_tilde", "c_tilde", d.n, d.C_tilde, d.c_tilde);
    if (doc.contains("x_dims")) {
      d.x_dims = doc["x_dims"].get<std::vector<Index>>();
      if (static_cast<Index>(d.x_dims.size()) != d.n) throw IoError("instance: x_dims needs n entries");
      d.shared_dim = q_dims[0] - d.x_dims[0];
    } else {
      derive_dims(d.A, d.C, d.C_tilde, q_dims, d.x_dims, d.shared_dim);
    }
    // Zero-row blocks lose their width in JSON.
    for (Index i = 0; i < d.n; ++i) {
      if (!d.A.empty() && d.A[i].rows() == 0) d.A[i].resize(0, d.x_dims[i]);
      if (!d.C.empty() && d.C[i].rows() == 0) d.C[i].resize(0, d.x_dims[i]);
      if (!d.C_tilde.empty() && d.C_tilde[i].rows() == 0) d.C_tilde[i].resize(0, d.shared_dim);
    }
    d.validate();
    return d;
  } catch (const json::exception& e) {
    throw IoError(std::string("instance: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(e.what());
  }
}

std::string instance_to_json(const MixedProblemData& data) {
  data.validate();
  json doc;
  doc["n"] = data.n;
  json obj = json::array();
  for (const auto& f : data.f) {
    if (!f.spec) throw InvalidArgument("instance_to_json: only quadratic_oracle objectives can be written");
    obj.push_back({{"type", "quadratic"}, {"Q", mat_to_json(f.spec->Q)}, {"q", vec_to_json(f.spec->q)},
                   {"mu_shift", f.spec->mu_shift}});
  }
  doc["objective"] = obj;
  doc["W"] = mat_to_json(data.W);
  auto group = [&](const char* mk, const char* vk, const std::vector<Mat>& mats, const std::vector<Vec>& vecs) {
    if (mats.empty()) return;
    json jm = json::array(), jv = json::array();
    for (const Mat& m : mats) jm.push_back(mat_to_json(m));
    for (const Vec& v : vecs) jv.push_back(vec_to_json(v));
    doc[mk] = jm;
    doc[vk] = jv;
  };
  group("A", "b", data.A, data.b);
  group("C", "c", data.C, data.c);
  group("C_tilde", "c_tilde", data.C_tilde, data.c_tilde);
  std::vector<Index> q_dims, x_dims;
  for (const auto& f : data.f) q_dims.push_back(f.dim);
  Index shared = 0;
  derive_dims(data.A, data.C, data.C_tilde, q_dims, x_dims, shared);
  if (x_dims != data.x_dims || shared != data.shared_dim) doc["x_dims"] = data.x_dims;
  return doc.dump(1);
}

MixedProblemData read_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open instance file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return instance_from_json(ss.str());
}

void write_instance(const MixedProblemData& data, const std::string& path) {
  const std::string text = instance_to_json(data);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write instance file '" + path + "'");
  out << text << '\n';
  if (!out) throw IoError("failed writing instance file '" + path + "'");
}

}  // namespace mixopt
