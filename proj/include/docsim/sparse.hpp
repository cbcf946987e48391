#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "docsim/error.hpp"

namespace docsim {

/// Sparse feature vector: parallel arrays of strictly increasing indices and
/// nonzero values over a fixed dimensionality. The unit of all similarity
/// math in this library.
struct SparseVector {
  int32_t dim = 0;
  std::vector<int32_t> idx;
  std::vector<double> val;

  size_t nnz() const { return idx.size(); }
  bool empty() const { return idx.empty(); }

  bool operator==(const SparseVector& o) const {
    return dim == o.dim && idx == o.idx && val == o.val;
  }

  // Checks the structural invariants: indices strictly increasing and in
  // range, no stored zeros.
  void validate() const {
    if (dim < 0) throw ParamError("sparse vector: negative dim");
    if (idx.size() != val.size())
      throw ParamError("sparse vector: idx/val length mismatch");
    for (size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= dim)
        throw ParamError("sparse vector: index out of range");
      if (i > 0 && idx[i] <= idx[i - 1])
        throw ParamError("sparse vector: indices not strictly increasing");
      if (val[i] == 0.0)
        throw ParamError("sparse vector: explicit zero value");
    }
  }

  std::vector<double> to_dense() const {
    std::vector<double> out(static_cast<size_t>(dim), 0.0);
    for (size_t i = 0; i < idx.size(); ++i)
      out[static_cast<size_t>(idx[i])] = val[i];
    return out;
  }

  static SparseVector from_dense(const std::vector<double>& dense) {
    SparseVector v;
    v.dim = static_cast<int32_t>(dense.size());
    for (size_t i = 0; i < dense.size(); ++i) {
      if (dense[i] != 0.0) {
        v.idx.push_back(static_cast<int32_t>(i));
        v.val.push_back(dense[i]);
      }
    }
    return v;
  }

  // Builds a vector from unordered (index, value) pairs, summing duplicates
  // and dropping zero sums.
  static SparseVector from_pairs(int32_t dim,
                                 std::vector<std::pair<int32_t, double>> pairs) {
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    SparseVector v;
    v.dim = dim;
    for (size_t i = 0; i < pairs.size();) {
      size_t j = i;
      double sum = 0.0;
      while (j < pairs.size() && pairs[j].first == pairs[i].first)
        sum += pairs[j++].second;
      if (sum != 0.0) {
        v.idx.push_back(pairs[i].first);
        v.val.push_back(sum);
      }
      i = j;
    }
    return v;
  }
};

inline double dot(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  size_t i = 0, j = 0;
  while (i < a.idx.size() && j < b.idx.size()) {
    if (a.idx[i] == b.idx[j]) {
      s += a.val[i] * b.val[j];
      ++i;
      ++j;
    } else if (a.idx[i] < b.idx[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return s;
}

inline double norm_sq(const SparseVector& a) {
  double s = 0.0;
  for (double v : a.val) s += v * v;
  return s;
}

inline double norm(const SparseVector& a) { return std::sqrt(norm_sq(a)); }

// |support(a) ∩ support(b)|
inline int64_t support_intersection(const SparseVector& a,
                                    const SparseVector& b) {
  int64_t n = 0;
  size_t i = 0, j = 0;
  while (i < a.idx.size() && j < b.idx.size()) {
    if (a.idx[i] == b.idx[j]) {
      ++n;
      ++i;
      ++j;
    } else if (a.idx[i] < b.idx[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return n;
}

// |support(a) Δ support(b)|
inline int64_t support_symmetric_difference(const SparseVector& a,
                                            const SparseVector& b) {
  return static_cast<int64_t>(a.nnz()) + static_cast<int64_t>(b.nnz()) -
         2 * support_intersection(a, b);
}

// Σ|a_i − b_i| over the union of supports.
inline double manhattan_distance(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  size_t i = 0, j = 0;
  while (i < a.idx.size() || j < b.idx.size()) {
    if (j >= b.idx.size() || (i < a.idx.size() && a.idx[i] < b.idx[j])) {
      s += std::abs(a.val[i]);
      ++i;
    } else if (i >= a.idx.size() || b.idx[j] < a.idx[i]) {
      s += std::abs(b.val[j]);
      ++j;
    } else {
      s += std::abs(a.val[i] - b.val[j]);
      ++i;
      ++j;
    }
  }
  return s;
}

// JSON encoding used by the featurized checkpoint column:
// {"dim":d,"idx":[...],"val":[...]}
inline std::string to_feature_json(const SparseVector& v) {
  nlohmann::ordered_json j;
  j["dim"] = v.dim;
  j["idx"] = v.idx;
  j["val"] = v.val;
  return j.dump();
}

inline SparseVector from_feature_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("feature json: ") + e.what());
  }
  if (!j.is_object() || !j.contains("dim") || !j.contains("idx") ||
      !j.contains("val"))
    throw DataError("feature json: missing dim/idx/val");
  SparseVector v;
  v.dim = j["dim"].get<int32_t>();
  v.idx = j["idx"].get<std::vector<int32_t>>();
  v.val = j["val"].get<std::vector<double>>();
  v.validate();
  return v;
}

}  // namespace docsim
