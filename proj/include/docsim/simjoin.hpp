#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "docsim/error.hpp"
#include "docsim/pool.hpp"
#include "docsim/sparse.hpp"

namespace docsim {

// Similarity family. Distance-type measures are rescaled to (0, 100] by
// S = 100 / (1 + D); set-type measures report 100 * J directly. All five
// are symmetric and score identical inputs as exactly 100.
enum class Measure { Cosine, Jaccard, WeightedJaccard, Manhattan, Hamming };

inline const char* measure_name(Measure m) {
  switch (m) {
    case Measure::Cosine: return "cosine";
    case Measure::Jaccard: return "jaccard";
    case Measure::WeightedJaccard: return "weighted_jaccard";
    case Measure::Manhattan: return "manhattan";
    case Measure::Hamming: return "hamming";
  }
  return "?";
}

inline Measure parse_measure(const std::string& s) {
  if (s == "cosine") return Measure::Cosine;
  if (s == "jaccard") return Measure::Jaccard;
  if (s == "weighted_jaccard") return Measure::WeightedJaccard;
  if (s == "manhattan") return Measure::Manhattan;
  if (s == "hamming") return Measure::Hamming;
  throw ParamError("unknown measure: " + s);
}

/// Distance-to-similarity rescaling; the +1 keeps identical vectors finite.
inline double distance_to_similarity(double d) { return 100.0 / (1.0 + d); }

/// Inverse of the rescaling: recovers the distance from a similarity score.
inline double similarity_to_distance(double s) { return 100.0 / s - 1.0; }

inline void check_same_dim(const SparseVector& a, const SparseVector& b,
                           const char* who) {
  if (a.dim != b.dim) throw ParamError(std::string(who) + ": dim mismatch");
}

inline double cosine_similarity(const SparseVector& a, const SparseVector& b) {
  check_same_dim(a, b, "cosine_similarity");
  const double nsq_a = norm_sq(a);
  const double nsq_b = norm_sq(b);
  if (nsq_a == 0.0 || nsq_b == 0.0)
    throw DataError("cosine_similarity: undefined for zero-norm input");
  if (a.idx == b.idx && a.val == b.val) return 100.0;  // D = 0 by definition
  // Clamp: rounding must not push the cosine outside [-1, 1].
  const double cos = std::clamp(dot(a, b) / std::sqrt(nsq_a * nsq_b), -1.0, 1.0);
  return distance_to_similarity(1.0 - cos);
}

inline double manhattan_similarity(const SparseVector& a,
                                   const SparseVector& b) {
  check_same_dim(a, b, "manhattan_similarity");
  return distance_to_similarity(manhattan_distance(a, b));
}

/// Hamming on the binary supports: D = |support(a) Δ support(b)|.
inline double hamming_similarity(const SparseVector& a, const SparseVector& b) {
  check_same_dim(a, b, "hamming_similarity");
  return distance_to_similarity(
      static_cast<double>(support_symmetric_difference(a, b)));
}

/// Plain Jaccard on the binary supports, as 100 * |∩| / |∪|. Stated via the
/// symmetric difference: J = (|S|+|L|-|SΔL|) / (|S|+|L|+|SΔL|).
inline double jaccard_similarity(const SparseVector& a, const SparseVector& b) {
  check_same_dim(a, b, "jaccard_similarity");
  const int64_t sa = static_cast<int64_t>(a.nnz());
  const int64_t sb = static_cast<int64_t>(b.nnz());
  if (sa == 0 && sb == 0)
    throw DataError("jaccard_similarity: undefined for two empty supports");
  const int64_t sd = support_symmetric_difference(a, b);
  const double j = static_cast<double>(sa + sb - sd) /
                   static_cast<double>(sa + sb + sd);
  return 100.0 * j;
}

/// Weighted Jaccard with the weight chosen as a function of the length ratio
/// alpha = |S|/|L| and the observed containment r = |S∩L|/|S| of the shorter
/// support in the longer:
///
///   w   = (1-r)(1+alpha) / ((1+r)(1+alpha-2*alpha*r))
///   J_w = (|S|+|L| - w|SΔL|) / (|S|+|L| + w|SΔL|)
///
/// Under this choice J_w equals r identically, so the score measures how much
/// of the shorter document is contained in the longer one.
inline double weighted_jaccard_similarity(const SparseVector& a,
                                          const SparseVector& b) {
  check_same_dim(a, b, "weighted_jaccard_similarity");
  const int64_t na = static_cast<int64_t>(a.nnz());
  const int64_t nb = static_cast<int64_t>(b.nnz());
  const int64_t s = std::min(na, nb);
  const int64_t l = std::max(na, nb);
  if (s == 0)
    throw DataError(
        "weighted_jaccard_similarity: undefined for an empty support");
  const int64_t inter = support_intersection(a, b);
  const int64_t sym = na + nb - 2 * inter;  // |SΔL| = (1+alpha-2*alpha*r)|L|
  if (sym == 0) return 100.0;               // identical supports: w is 0/0
  const double alpha = static_cast<double>(s) / static_cast<double>(l);
  const double r = static_cast<double>(inter) / static_cast<double>(s);
  const double w = ((1.0 - r) * (1.0 + alpha)) /
                   ((1.0 + r) * (1.0 + alpha - 2.0 * alpha * r));
  const double sum = static_cast<double>(s + l);
  const double wd = w * static_cast<double>(sym);
  return 100.0 * (sum - wd) / (sum + wd);
}

inline double similarity(Measure m, const SparseVector& a,
                         const SparseVector& b) {
  switch (m) {
    case Measure::Cosine: return cosine_similarity(a, b);
    case Measure::Jaccard: return jaccard_similarity(a, b);
    case Measure::WeightedJaccard: return weighted_jaccard_similarity(a, b);
    case Measure::Manhattan: return manhattan_similarity(a, b);
    case Measure::Hamming: return hamming_similarity(a, b);
  }
  throw ParamError("similarity: bad measure");
}

/// Canonically oriented candidate pair: left < right lexicographically.
struct CandidatePair {
  std::string left;
  std::string right;

  bool operator==(const CandidatePair&) const = default;
  bool operator<(const CandidatePair& o) const {
    return left != o.left ? left < o.left : right < o.right;
  }
};

struct AssignmentRow {
  std::string pk;
  std::string state;
  int32_t cluster = -1;
};

/// All same-cluster, different-state pairs, each exactly once in canonical
/// orientation. Output is ordered by (cluster, pk) enumeration, so it is
/// deterministic for a given input set.
inline std::vector<CandidatePair> candidate_pairs(
    std::span<const AssignmentRow> rows) {
  std::map<int32_t, std::vector<const AssignmentRow*>> by_cluster;
  {
    std::unordered_map<std::string, int32_t> seen;
    for (const auto& r : rows) {
      auto [it, inserted] = seen.emplace(r.pk, r.cluster);
      if (!inserted)
        throw DataError("candidate_pairs: key assigned more than once: " + r.pk);
      by_cluster[r.cluster].push_back(&r);
    }
  }

  std::vector<CandidatePair> pairs;
  for (auto& [cluster, members] : by_cluster) {
    std::sort(members.begin(), members.end(),
              [](const AssignmentRow* a, const AssignmentRow* b) {
                return a->pk < b->pk;
              });
    for (size_t i = 0; i < members.size(); ++i) {
      for (size_t j = i + 1; j < members.size(); ++j) {
        if (members[i]->state == members[j]->state) continue;
        pairs.push_back({members[i]->pk, members[j]->pk});
      }
    }
  }
  return pairs;
}

/// Scored pair row; similarity is in (0, 100] and symmetric in the keys.
struct ScoredPair {
  std::string left;
  std::string right;
  Measure measure = Measure::Cosine;
  double similarity = 0.0;

  bool operator==(const ScoredPair&) const = default;
};

/// Read-only key -> vector table shared by all join workers.
using VectorTable = std::unordered_map<std::string, SparseVector>;

/// Two-sided join: resolve the left key, resolve the right key, then score
/// and keep S > threshold. No grouping by key anywhere; each pair is scored
/// independently against the shared table, partition-parallel. Output order
/// is the candidate order restricted to survivors, for every worker count.
inline std::vector<ScoredPair> two_sided_join(
    std::span<const CandidatePair> pairs, const VectorTable& table,
    Measure measure, double threshold, unsigned workers = 1) {
  if (threshold < 0.0 || threshold >= 100.0)
    throw ParamError("two_sided_join: threshold must be in [0, 100)");

  // Join on the left key.
  std::vector<const SparseVector*> left(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    auto it = table.find(pairs[i].left);
    if (it == table.end())
      throw DataError("two_sided_join: unresolvable key: " + pairs[i].left);
    left[i] = &it->second;
  }
  // Join on the right key.
  std::vector<const SparseVector*> right(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    auto it = table.find(pairs[i].right);
    if (it == table.end())
      throw DataError("two_sided_join: unresolvable key: " + pairs[i].right);
    right[i] = &it->second;
  }

  // Calculate similarities and filter.
  auto buffers = map_partitions<std::vector<ScoredPair>>(
      pairs.size(), workers, [&](size_t, size_t lo, size_t hi) {
        std::vector<ScoredPair> out;
        for (size_t i = lo; i < hi; ++i) {
          const double s = similarity(measure, *left[i], *right[i]);
          if (s > threshold)
            out.push_back({pairs[i].left, pairs[i].right, measure, s});
        }
        return out;
      });

  std::vector<ScoredPair> result;
  for (auto& buf : buffers)
    result.insert(result.end(), std::make_move_iterator(buf.begin()),
                  std::make_move_iterator(buf.end()));
  return result;
}

}  // namespace docsim
