#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "docsim/agg.hpp"
#include "docsim/cluster.hpp"
#include "docsim/diffgraph.hpp"
#include "docsim/error.hpp"
#include "docsim/hash.hpp"
#include "docsim/lsa.hpp"
#include "docsim/pool.hpp"
#include "docsim/recordstore.hpp"
#include "docsim/simjoin.hpp"
#include "docsim/stopwords.hpp"
#include "docsim/textfeat.hpp"

namespace docsim {

// Pipeline stages with explicit checkpoint files between them:
//   ingest -> featurize -> cluster -> pairs -> graph
// Each stage writes its checkpoint atomically (temp file + rename) plus a
// sidecar fingerprint of its config and inputs; re-running an unchanged
// stage is a no-op and a changed one refuses to overwrite without force.
enum class Stage { Ingest, Featurize, Cluster, Pairs, Graph };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Featurize: return "featurize";
    case Stage::Cluster: return "cluster";
    case Stage::Pairs: return "pairs";
    case Stage::Graph: return "graph";
  }
  return "?";
}

inline Stage parse_stage(const std::string& s) {
  if (s == "ingest") return Stage::Ingest;
  if (s == "featurize") return Stage::Featurize;
  if (s == "cluster") return Stage::Cluster;
  if (s == "pairs") return Stage::Pairs;
  if (s == "graph") return Stage::Graph;
  throw ParamError("unknown stage: " + s);
}

struct PipelineConfig {
  std::filesystem::path work_dir = "work";
  std::filesystem::path manifest;  // ingest input

  // Empty path fields default to files under work_dir.
  std::filesystem::path store_path;
  std::filesystem::path featurized_path;
  std::filesystem::path clustered_path;
  std::filesystem::path model_path;
  std::filesystem::path factors_path;
  std::filesystem::path pairs_path;
  std::filesystem::path graph_path;

  int32_t dim = kDefaultFeatureDim;
  int ngram = 1;
  std::filesystem::path stoplist;  // empty -> built-in list

  bool lsa_enabled = false;
  int32_t lsa_k = 50;
  int lsa_iterations = 7;

  int32_t cluster_k = 150;
  int cluster_max_iter = 50;
  double cluster_tol = 1e-4;
  uint64_t seed = 13;

  Measure measure = Measure::Cosine;
  double threshold = 70.0;

  double damping = 0.85;
  double graph_threshold = 70.0;
  double pagerank_tol = 1e-6;
  int pagerank_max_iter = 100;

  unsigned workers = 1;

  std::filesystem::path store() const {
    return store_path.empty() ? work_dir / "store.dps" : store_path;
  }
  std::filesystem::path featurized() const {
    return featurized_path.empty() ? work_dir / "featurized.dps" : featurized_path;
  }
  std::filesystem::path clustered() const {
    return clustered_path.empty() ? work_dir / "clustered.dps" : clustered_path;
  }
  std::filesystem::path model() const {
    return model_path.empty() ? work_dir / "kmeans.bin" : model_path;
  }
  std::filesystem::path factors() const {
    return factors_path.empty() ? work_dir / "factors.bin" : factors_path;
  }
  std::filesystem::path pairs() const {
    return pairs_path.empty() ? work_dir / "pairs.dps" : pairs_path;
  }
  std::filesystem::path graph() const {
    return graph_path.empty() ? work_dir / "graph.csv" : graph_path;
  }

  std::unordered_set<std::string> stopwords() const {
    return stoplist.empty() ? default_stopwords()
                            : load_stopwords(stoplist.string());
  }
};

inline const StoreSchema& featurized_schema() {
  static const StoreSchema schema{
      "featurized",
      1,
      {{"primary_key", FieldType::String},
       {"state", FieldType::String},
       {"cluster", FieldType::Int},
       {"features", FieldType::String}}};
  return schema;
}

inline const StoreSchema& scored_pairs_schema() {
  static const StoreSchema schema{
      "scored_pairs",
      1,
      {{"pk1", FieldType::String},
       {"pk2", FieldType::String},
       {"measure", FieldType::String},
       {"similarity", FieldType::String}}};
  return schema;
}

struct FeaturizedRow {
  std::string pk;
  std::string state;
  int32_t cluster = -1;
  SparseVector features;
};

inline std::vector<FeaturizedRow> load_featurized(
    const std::filesystem::path& path, unsigned workers = 1) {
  StoreReader reader(path);
  if (!(reader.schema() == featurized_schema()))
    throw DataError("not a featurized checkpoint: " + path.string());
  std::vector<FeaturizedRow> rows;
  std::vector<std::string> jsons;
  reader.for_each([&](const Row& r) {
    FeaturizedRow out;
    out.pk = std::get<std::string>(r[0]);
    out.state = std::get<std::string>(r[1]);
    out.cluster = static_cast<int32_t>(std::get<int64_t>(r[2]));
    rows.push_back(std::move(out));
    jsons.push_back(std::get<std::string>(r[3]));
  });
  parallel_partitions(rows.size(), workers, [&](size_t, size_t lo, size_t hi) {
    for (size_t i = lo; i < hi; ++i)
      rows[i].features = from_feature_json(jsons[i]);
  });
  return rows;
}

struct ScoredPairRow {
  std::string pk1;
  std::string pk2;
  std::string measure;
  std::string similarity_str;  // decimal with 2 fractional digits
  double similarity = 0.0;
};

inline std::vector<ScoredPairRow> load_scored_pairs(
    const std::filesystem::path& path) {
  StoreReader reader(path);
  if (!(reader.schema() == scored_pairs_schema()))
    throw DataError("not a scored-pair checkpoint: " + path.string());
  std::vector<ScoredPairRow> rows;
  reader.for_each([&](const Row& r) {
    ScoredPairRow out;
    out.pk1 = std::get<std::string>(r[0]);
    out.pk2 = std::get<std::string>(r[1]);
    out.measure = std::get<std::string>(r[2]);
    out.similarity_str = std::get<std::string>(r[3]);
    out.similarity = std::stod(out.similarity_str);
    rows.push_back(std::move(out));
  });
  return rows;
}

namespace detail {

inline uint64_t file_fingerprint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot fingerprint missing file: " + path.string());
  uint64_t h = kFnvOffset;
  char buf[65536];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    h = fnv1a64(buf, static_cast<size_t>(is.gcount()), h);
    if (is.eof()) break;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".meta.json";
  return p;
}

// Atomic file write: callers produce the payload into a temp file that is
// renamed over the final path only on success.
template <typename WriteFn>
void write_atomically(const std::filesystem::path& path, WriteFn&& write) {
  auto tmp = path;
  tmp += ".tmp";
  write(tmp);
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

struct StageResult {
  Stage stage = Stage::Ingest;
  std::filesystem::path checkpoint;
  bool skipped = false;  // checkpoint was already up to date
  size_t rows = 0;
  double seconds = 0.0;
};

namespace detail {

// The fingerprint captures the stage parameters plus the content hash of
// every input file. worker count is excluded: results are worker-invariant.
inline nlohmann::json stage_fingerprint(Stage stage, const PipelineConfig& cfg) {
  nlohmann::json params;
  std::vector<std::filesystem::path> inputs;
  switch (stage) {
    case Stage::Ingest: {
      if (cfg.manifest.empty())
        throw ParamError("ingest: no manifest configured");
      inputs.push_back(cfg.manifest);
      for (const auto& e : read_manifest(cfg.manifest)) inputs.push_back(e.file);
      break;
    }
    case Stage::Featurize: {
      params["dim"] = cfg.dim;
      params["ngram"] = cfg.ngram;
      params["stoplist"] =
          cfg.stoplist.empty() ? "builtin"
                               : hex64(file_fingerprint(cfg.stoplist));
      inputs.push_back(cfg.store());
      break;
    }
    case Stage::Cluster: {
      params["k"] = cfg.cluster_k;
      params["max_iter"] = cfg.cluster_max_iter;
      params["tol"] = cfg.cluster_tol;
      params["seed"] = cfg.seed;
      params["lsa"] = cfg.lsa_enabled;
      if (cfg.lsa_enabled) {
        params["lsa_k"] = cfg.lsa_k;
        params["lsa_iterations"] = cfg.lsa_iterations;
      }
      inputs.push_back(cfg.featurized());
      break;
    }
    case Stage::Pairs: {
      params["measure"] = measure_name(cfg.measure);
      params["threshold"] = cfg.threshold;
      params["lsa"] = cfg.lsa_enabled;
      inputs.push_back(cfg.clustered());
      if (cfg.lsa_enabled) inputs.push_back(cfg.factors());
      break;
    }
    case Stage::Graph: {
      params["threshold"] = cfg.graph_threshold;
      inputs.push_back(cfg.pairs());
      break;
    }
  }
  nlohmann::json in;
  for (const auto& p : inputs) {
    if (!std::filesystem::exists(p)) {
      const char* needed = stage == Stage::Ingest ? "ingest inputs"
                           : stage == Stage::Featurize ? "ingest"
                           : stage == Stage::Cluster   ? "featurize"
                           : stage == Stage::Pairs     ? "cluster"
                                                       : "pairs";
      throw StageOrderError("stage '" + std::string(stage_name(stage)) +
                            "': missing input " + p.string() + " (run '" +
                            needed + "' first)");
    }
    in[p.string()] = hex64(file_fingerprint(p));
  }
  nlohmann::json j;
  j["stage"] = stage_name(stage);
  j["params"] = params;
  j["inputs"] = in;
  return j;
}

inline size_t run_featurize(const PipelineConfig& cfg,
                            const std::filesystem::path& out) {
  static const StoreSchema text_schema{
      "documents_text",
      1,
      {{"primary_key", FieldType::String},
       {"state", FieldType::String},
       {"content", FieldType::String}}};

  StoreReader reader(cfg.store());
  std::vector<std::string> pks, states, contents;
  reader.project(text_schema, [&](const Row& r) {
    pks.push_back(std::get<std::string>(r[0]));
    states.push_back(std::get<std::string>(r[1]));
    contents.push_back(std::get<std::string>(r[2]));
  });

  const auto stoplist = cfg.stopwords();
  std::vector<SparseVector> tf(pks.size());
  parallel_partitions(pks.size(), cfg.workers, [&](size_t, size_t lo, size_t hi) {
    for (size_t i = lo; i < hi; ++i)
      tf[i] = hashing_tf(extract_terms(contents[i], stoplist, cfg.ngram), cfg.dim);
  });

  if (tf.empty()) throw DataError("featurize: store has no records");

  // Document frequencies combine exactly (integer sums in partition order).
  auto df_parts = map_partitions<std::vector<int64_t>>(
      tf.size(), cfg.workers, [&](size_t, size_t lo, size_t hi) {
        std::vector<int64_t> df(static_cast<size_t>(cfg.dim), 0);
        for (size_t i = lo; i < hi; ++i)
          for (int32_t ix : tf[i].idx) ++df[static_cast<size_t>(ix)];
        return df;
      });
  std::vector<int64_t> df(static_cast<size_t>(cfg.dim), 0);
  for (const auto& part : df_parts)
    for (size_t i = 0; i < df.size(); ++i) df[i] += part[i];
  const auto idf = IdfModel::from_doc_freq(cfg.dim,
                                           static_cast<int64_t>(tf.size()),
                                           std::move(df));

  parallel_partitions(tf.size(), cfg.workers, [&](size_t, size_t lo, size_t hi) {
    for (size_t i = lo; i < hi; ++i) tf[i] = apply_idf(idf, tf[i]);
  });

  detail::write_atomically(out, [&](const std::filesystem::path& tmp) {
    StoreWriter writer(tmp, featurized_schema());
    for (size_t i = 0; i < pks.size(); ++i)
      writer.append(Row{pks[i], states[i], static_cast<int64_t>(-1),
                        to_feature_json(tf[i])});
    writer.close();
  });
  return pks.size();
}

inline size_t run_cluster(const PipelineConfig& cfg,
                          const std::filesystem::path& out) {
  auto rows = load_featurized(cfg.featurized(), cfg.workers);
  std::vector<SparseVector> features;
  features.reserve(rows.size());
  for (auto& r : rows) features.push_back(std::move(r.features));

  std::vector<SparseVector> working;
  if (cfg.lsa_enabled) {
    auto factors = truncated_svd(features, cfg.lsa_k, cfg.lsa_iterations,
                                 cfg.seed, cfg.workers);
    detail::write_atomically(cfg.factors(), [&](const std::filesystem::path& tmp) {
      save_factors(factors, tmp);
    });
    working.resize(features.size());
    parallel_partitions(features.size(), cfg.workers,
                        [&](size_t, size_t lo, size_t hi) {
                          for (size_t i = lo; i < hi; ++i)
                            working[i] = SparseVector::from_dense(
                                project(factors, features[i]));
                        });
  }
  const auto& points = cfg.lsa_enabled ? working : features;

  KMeansOptions opts;
  opts.max_iter = cfg.cluster_max_iter;
  opts.tol = cfg.cluster_tol;
  opts.seed = cfg.seed;
  opts.workers = cfg.workers;
  const auto model = kmeans_fit(points, cfg.cluster_k, opts);
  detail::write_atomically(cfg.model(), [&](const std::filesystem::path& tmp) {
    save_kmeans(model, tmp);
  });
  const auto labels = assign_all(model, points, cfg.workers);

  detail::write_atomically(out, [&](const std::filesystem::path& tmp) {
    StoreWriter writer(tmp, featurized_schema());
    for (size_t i = 0; i < rows.size(); ++i)
      writer.append(Row{rows[i].pk, rows[i].state,
                        static_cast<int64_t>(labels[i]),
                        to_feature_json(features[i])});
    writer.close();
  });
  return rows.size();
}

inline size_t run_pairs(const PipelineConfig& cfg,
                        const std::filesystem::path& out) {
  auto rows = load_featurized(cfg.clustered(), cfg.workers);

  std::vector<AssignmentRow> assignments;
  assignments.reserve(rows.size());
  for (const auto& r : rows) assignments.push_back({r.pk, r.state, r.cluster});

  // Term-space table; cosine and manhattan switch to concept space when the
  // reduction stage ran.
  const bool concept_space =
      cfg.lsa_enabled &&
      (cfg.measure == Measure::Cosine || cfg.measure == Measure::Manhattan);
  VectorTable table;
  table.reserve(rows.size());
  if (concept_space) {
    const auto factors = load_factors(cfg.factors());
    std::vector<SparseVector> projected(rows.size());
    parallel_partitions(rows.size(), cfg.workers,
                        [&](size_t, size_t lo, size_t hi) {
                          for (size_t i = lo; i < hi; ++i)
                            projected[i] = SparseVector::from_dense(
                                project(factors, rows[i].features));
                        });
    for (size_t i = 0; i < rows.size(); ++i)
      table.emplace(rows[i].pk, std::move(projected[i]));
  } else {
    for (auto& r : rows) table.emplace(r.pk, std::move(r.features));
  }

  const auto candidates = candidate_pairs(assignments);
  const auto scored =
      two_sided_join(candidates, table, cfg.measure, cfg.threshold, cfg.workers);

  detail::write_atomically(out, [&](const std::filesystem::path& tmp) {
    StoreWriter writer(tmp, scored_pairs_schema());
    for (const auto& p : scored)
      writer.append(Row{p.left, p.right, std::string(measure_name(p.measure)),
                        format_fixed(p.similarity, 2)});
    writer.close();
  });
  return scored.size();
}

inline size_t run_graph(const PipelineConfig& cfg,
                        const std::filesystem::path& out,
                        std::vector<std::string>* warnings) {
  const auto rows = load_scored_pairs(cfg.pairs());
  std::vector<ScoredPair> pairs;
  pairs.reserve(rows.size());
  for (const auto& r : rows)
    pairs.push_back({r.pk1, r.pk2, parse_measure(r.measure), r.similarity});
  const auto g = build_graph(pairs, cfg.graph_threshold, warnings);
  detail::write_atomically(out, [&](const std::filesystem::path& tmp) {
    write_graph_csv(g, tmp);
  });
  return g.edge_count();
}

}  // namespace detail

/// Runs one stage. The checkpoint is written atomically; a sidecar records
/// the fingerprint of the stage config and inputs. Re-running with an
/// unchanged fingerprint is a no-op; a changed fingerprint over an existing
/// checkpoint is refused unless force is set.
inline StageResult run_stage(Stage stage, const PipelineConfig& cfg,
                             bool force = false,
                             std::vector<std::string>* warnings = nullptr) {
  StageResult result;
  result.stage = stage;
  switch (stage) {
    case Stage::Ingest: result.checkpoint = cfg.store(); break;
    case Stage::Featurize: result.checkpoint = cfg.featurized(); break;
    case Stage::Cluster: result.checkpoint = cfg.clustered(); break;
    case Stage::Pairs: result.checkpoint = cfg.pairs(); break;
    case Stage::Graph: result.checkpoint = cfg.graph(); break;
  }

  const auto t0 = std::chrono::steady_clock::now();
  const auto fingerprint = detail::stage_fingerprint(stage, cfg);
  const auto sidecar = detail::sidecar_path(result.checkpoint);

  if (std::filesystem::exists(result.checkpoint)) {
    std::optional<nlohmann::json> existing;
    std::ifstream is(sidecar);
    if (is) {
      try {
        nlohmann::json j;
        is >> j;
        existing = std::move(j);
      } catch (const nlohmann::json::exception&) {
        existing.reset();
      }
    }
    if (existing && *existing == fingerprint) {
      result.skipped = true;
      result.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      return result;
    }
    if (!force)
      throw DataError("checkpoint " + result.checkpoint.string() +
                      " was built from different config or inputs; "
                      "re-run with --force to rebuild");
  }

  if (!cfg.work_dir.empty()) std::filesystem::create_directories(cfg.work_dir);
  if (result.checkpoint.has_parent_path())
    std::filesystem::create_directories(result.checkpoint.parent_path());

  switch (stage) {
    case Stage::Ingest: {
      detail::write_atomically(result.checkpoint,
                               [&](const std::filesystem::path& tmp) {
                                 result.rows = ingest(cfg.manifest, tmp);
                               });
      break;
    }
    case Stage::Featurize:
      result.rows = detail::run_featurize(cfg, result.checkpoint);
      break;
    case Stage::Cluster:
      result.rows = detail::run_cluster(cfg, result.checkpoint);
      break;
    case Stage::Pairs:
      result.rows = detail::run_pairs(cfg, result.checkpoint);
      break;
    case Stage::Graph:
      result.rows = detail::run_graph(cfg, result.checkpoint, warnings);
      break;
  }

  std::ofstream os(sidecar, std::ios::trunc);
  os << fingerprint.dump(2) << "\n";
  if (!os) throw DataError("cannot write sidecar: " + sidecar.string());

  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

// ---------------------------------------------------------------------------
// Probe: rank all scored pairs containing a key.

struct ProbeHit {
  std::string partner;
  std::string line;  // "PK1, PK2: SS.SS" with the probe key first
  double similarity = 0.0;
};

inline std::string format_probe_line(const std::string& probe,
                                     const std::string& partner,
                                     const std::string& similarity_str) {
  return probe + ", " + partner + ": " + similarity_str;
}

/// All scored pairs containing probe_key, descending by similarity (ties by
/// partner key), truncated to top_n (top_n <= 0 means no truncation). The
/// key must exist in the featurized corpus; unknown keys raise an error
/// naming the nearest matches.
inline std::vector<ProbeHit> probe(const std::filesystem::path& pairs_store,
                                   const std::filesystem::path& corpus_store,
                                   const std::string& probe_key, int top_n) {
  if (!std::filesystem::exists(pairs_store))
    throw StageOrderError("probe: missing checkpoint " + pairs_store.string() +
                          " (run 'pairs' first)");
  if (!std::filesystem::exists(corpus_store))
    throw StageOrderError("probe: missing checkpoint " +
                          corpus_store.string() + " (run 'featurize' first)");
  // Validate the key against the corpus, not the pairs: a key with no
  // surviving pairs is a valid (empty) probe.
  static const StoreSchema pk_schema{
      "featurized_keys", 1, {{"primary_key", FieldType::String}}};
  std::vector<std::string> keys;
  {
    StoreReader reader(corpus_store);
    reader.project(pk_schema, [&](const Row& r) {
      keys.push_back(std::get<std::string>(r[0]));
    });
  }
  if (std::find(keys.begin(), keys.end(), probe_key) == keys.end()) {
    auto common_prefix = [](const std::string& a, const std::string& b) {
      size_t i = 0;
      while (i < a.size() && i < b.size() && a[i] == b[i]) ++i;
      return i;
    };
    std::sort(keys.begin(), keys.end(),
              [&](const std::string& a, const std::string& b) {
                const size_t pa = common_prefix(a, probe_key);
                const size_t pb = common_prefix(b, probe_key);
                return pa != pb ? pa > pb : a < b;
              });
    std::string nearest;
    for (size_t i = 0; i < keys.size() && i < 5; ++i)
      nearest += (i ? ", " : "") + keys[i];
    throw DataError("unknown probe key '" + probe_key +
                    "'; nearest keys: " + nearest);
  }

  std::vector<ProbeHit> hits;
  for (const auto& row : load_scored_pairs(pairs_store)) {
    std::string partner;
    if (row.pk1 == probe_key) partner = row.pk2;
    else if (row.pk2 == probe_key) partner = row.pk1;
    else continue;
    ProbeHit h;
    h.partner = partner;
    h.similarity = row.similarity;
    h.line = format_probe_line(probe_key, partner, row.similarity_str);
    hits.push_back(std::move(h));
  }
  std::sort(hits.begin(), hits.end(), [](const ProbeHit& a, const ProbeHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.partner < b.partner;
  });
  if (top_n > 0 && hits.size() > static_cast<size_t>(top_n))
    hits.resize(static_cast<size_t>(top_n));
  return hits;
}

// ---------------------------------------------------------------------------
// Bench: the similarity-join stage timed per worker count.

/// Parallel efficiency: E = T0 / (N * T_N).
inline double parallel_efficiency(double t0, unsigned n_workers, double tn) {
  return t0 / (static_cast<double>(n_workers) * tn);
}

struct BenchRow {
  unsigned workers = 0;
  double seconds = 0.0;
  double efficiency = 0.0;
};

/// Runs the scoring loop of the pairs stage once per worker count on
/// identical inputs. Only the join itself is timed; load and setup I/O is
/// excluded. worker_counts must include 1, which defines T0.
inline std::vector<BenchRow> bench(const PipelineConfig& cfg,
                                   std::vector<unsigned> worker_counts) {
  std::sort(worker_counts.begin(), worker_counts.end());
  worker_counts.erase(std::unique(worker_counts.begin(), worker_counts.end()),
                      worker_counts.end());
  if (worker_counts.empty() || worker_counts.front() != 1)
    throw ParamError("bench: worker counts must include 1 (defines T0)");

  if (!std::filesystem::exists(cfg.clustered()))
    throw StageOrderError("bench: missing checkpoint " +
                          cfg.clustered().string() + " (run 'cluster' first)");

  auto rows = load_featurized(cfg.clustered(), cfg.workers);
  std::vector<AssignmentRow> assignments;
  assignments.reserve(rows.size());
  for (const auto& r : rows) assignments.push_back({r.pk, r.state, r.cluster});
  VectorTable table;
  table.reserve(rows.size());
  for (auto& r : rows) table.emplace(r.pk, std::move(r.features));
  const auto candidates = candidate_pairs(assignments);

  std::vector<BenchRow> report;
  double t0 = 0.0;
  for (unsigned w : worker_counts) {
    const auto start = std::chrono::steady_clock::now();
    const auto scored =
        two_sided_join(candidates, table, cfg.measure, cfg.threshold, w);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    (void)scored;
    if (w == 1) t0 = seconds;
    report.push_back({w, seconds, parallel_efficiency(t0, w, seconds)});
  }
  return report;
}

inline void write_bench_csv(const std::vector<BenchRow>& rows,
                            const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write bench csv: " + path.string());
  os << "n_workers,wall_time_seconds,efficiency\n";
  for (const auto& r : rows)
    os << r.workers << ',' << format_shortest(r.seconds) << ','
       << format_shortest(r.efficiency) << '\n';
}

/// Efficiency-versus-workers line plot.
inline std::string bench_svg(const std::vector<BenchRow>& rows) {
  const double w = 640, h = 400, ml = 70, mr = 20, mt = 30, mb = 55;
  const double pw = w - ml - mr, ph = h - mt - mb;
  double max_w = 1;
  for (const auto& r : rows) max_w = std::max(max_w, static_cast<double>(r.workers));
  auto num = [](double v) { return format_shortest(v); };
  auto x_of = [&](double workers) { return ml + pw * (workers - 1.0) / std::max(max_w - 1.0, 1.0); };
  auto y_of = [&](double eff) { return mt + ph * (1.0 - std::min(eff, 1.2) / 1.2); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
  s += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt + ph) + "\" x2=\"" + num(ml + pw) +
       "\" y2=\"" + num(mt + ph) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt) + "\" x2=\"" + num(ml) +
       "\" y2=\"" + num(mt + ph) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(ml) + "\" y1=\"" + num(y_of(1.0)) + "\" x2=\"" + num(ml + pw) +
       "\" y2=\"" + num(y_of(1.0)) + "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
  std::string points;
  for (size_t i = 0; i < rows.size(); ++i) {
    const double x = x_of(static_cast<double>(rows[i].workers));
    const double y = y_of(rows[i].efficiency);
    points += (i ? " " : "") + num(x) + "," + num(y);
    s += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"4\" fill=\"#1f77b4\"/>\n";
    s += "<text x=\"" + num(x) + "\" y=\"" + num(mt + ph + 20) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
         std::to_string(rows[i].workers) + "</text>\n";
  }
  s += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"" +
       points + "\"/>\n";
  s += "<text x=\"" + num(ml + pw / 2) + "\" y=\"" + num(h - 10) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
       "workers</text>\n";
  s += "<text x=\"18\" y=\"" + num(mt + ph / 2) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
       "transform=\"rotate(-90 18 " + num(mt + ph / 2) + ")\">efficiency</text>\n";
  s += "</svg>\n";
  return s;
}

// ---------------------------------------------------------------------------
// Report: the similarity histogram over a scored-pair checkpoint.

/// CSV export of a scored-pair checkpoint: pk1,pk2,similarity with the
/// stored two-digit rendering.
inline void write_pairs_csv(const std::filesystem::path& pairs_store,
                            const std::filesystem::path& out) {
  std::ofstream os(out, std::ios::trunc);
  if (!os) throw DataError("cannot write pairs csv: " + out.string());
  os << "pk1,pk2,similarity\n";
  for (const auto& r : load_scored_pairs(pairs_store))
    os << r.pk1 << ',' << r.pk2 << ',' << r.similarity_str << '\n';
  if (!os) throw DataError("pairs csv write failed: " + out.string());
}

struct PairDatum {
  std::string pk1;
  std::string pk2;
  double similarity = 0.0;
};

/// Bin(20, 0, 100) over pair similarity, optionally restricted to pairs
/// touching one state (matched against the key's state prefix).
inline Aggregator<PairDatum> similarity_histogram(
    const std::filesystem::path& pairs_store, const std::string& state_filter) {
  if (!std::filesystem::exists(pairs_store))
    throw StageOrderError("report: missing checkpoint " + pairs_store.string() +
                          " (run 'pairs' first)");
  auto hist = Aggregator<PairDatum>::bin(
      20, 0.0, 100.0, [](const PairDatum& d) { return d.similarity; });
  const std::string prefix = state_filter.empty() ? "" : state_filter + "/";
  for (const auto& row : load_scored_pairs(pairs_store)) {
    if (!prefix.empty() && row.pk1.rfind(prefix, 0) != 0 &&
        row.pk2.rfind(prefix, 0) != 0)
      continue;
    hist.fill({row.pk1, row.pk2, row.similarity});
  }
  return hist;
}

}  // namespace docsim
