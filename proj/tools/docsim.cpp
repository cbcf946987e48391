// docsim: near-duplicate document detection pipeline.
//
// Subcommands mirror the pipeline stages (ingest, featurize, cluster, pairs,
// graph) plus probe ranking, reporting, benchmarking, and a synthetic-corpus
// generator. Exit codes: 0 success, 2 usage error, 3 stage-order error,
// 4 data error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "docsim/agg.hpp"
#include "docsim/diffgraph.hpp"
#include "docsim/error.hpp"
#include "docsim/pipeline.hpp"
#include "docsim/synth.hpp"

namespace {

std::vector<unsigned> parse_uint_list(const std::string& text,
                                      const char* what) {
  std::vector<unsigned> out;
  size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto token = text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!token.empty()) {
      try {
        const long v = std::stol(token);
        if (v < 0) throw std::out_of_range("negative");
        out.push_back(static_cast<unsigned>(v));
      } catch (const std::exception&) {
        throw docsim::ParamError(std::string(what) + ": bad value '" + token +
                                 "'");
      }
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty())
    throw docsim::ParamError(std::string(what) + ": empty list");
  return out;
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw docsim::DataError("cannot write: " + path.string());
  os << text;
}

void log_stage(const docsim::StageResult& r) {
  if (r.skipped) {
    std::cerr << "[docsim] " << docsim::stage_name(r.stage)
              << ": up to date, skipped (" << r.checkpoint.string() << ")\n";
  } else {
    std::cerr << "[docsim] " << docsim::stage_name(r.stage) << ": " << r.rows
              << " rows -> " << r.checkpoint.string() << " ("
              << docsim::format_fixed(r.seconds, 2) << "s)\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"near-duplicate document detection pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value config file; flags override it");

  docsim::PipelineConfig cfg;
  std::string work_dir = "work";
  std::string manifest, store_path, featurized_path, clustered_path;
  std::string model_path, factors_path, pairs_path, graph_path, stoplist;
  std::string measure = "cosine";
  bool force = false;

  app.add_option("--work-dir", work_dir, "directory for checkpoint files");
  app.add_option("--manifest", manifest, "ingest input manifest CSV");
  app.add_option("--store-path", store_path, "document store checkpoint");
  app.add_option("--featurized-path", featurized_path, "featurized checkpoint");
  app.add_option("--clustered-path", clustered_path, "clustered checkpoint");
  app.add_option("--model-path", model_path, "k-means model checkpoint");
  app.add_option("--factors-path", factors_path, "svd factors checkpoint");
  app.add_option("--pairs-path", pairs_path, "scored-pair checkpoint");
  app.add_option("--graph-path", graph_path, "graph dump path");
  app.add_option("--dim", cfg.dim, "feature space size")->check(CLI::PositiveNumber);
  app.add_option("--ngram", cfg.ngram, "n-gram size added to unigrams when > 1");
  app.add_option("--stoplist", stoplist, "stopword file (default: built-in list)");
  app.add_flag("--lsa", cfg.lsa_enabled, "reduce to concept space before clustering");
  app.add_option("--lsa-k", cfg.lsa_k, "concept count");
  app.add_option("--lsa-iters", cfg.lsa_iterations, "svd power iterations");
  app.add_option("--k", cfg.cluster_k, "cluster count");
  app.add_option("--max-iter", cfg.cluster_max_iter, "k-means iteration cap");
  app.add_option("--tol", cfg.cluster_tol, "k-means movement tolerance");
  app.add_option("--seed", cfg.seed, "seed for all randomized steps");
  app.add_option("--measure", measure,
                 "cosine|jaccard|weighted_jaccard|manhattan|hamming");
  app.add_option("--threshold", cfg.threshold, "keep pairs with S > threshold");
  app.add_option("--damping", cfg.damping, "pagerank damping factor");
  app.add_option("--graph-threshold", cfg.graph_threshold,
                 "edge threshold for the graph stage");
  app.add_option("--workers", cfg.workers, "worker pool size");
  app.add_flag("--force", force, "rebuild checkpoints that do not match");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
  docsim::SynthParams synth_params;
  std::string synth_out = "synth";
  synth_cmd->add_option("--out", synth_out, "output directory");
  synth_cmd->add_option("--docs", synth_params.n_docs, "document count");
  synth_cmd->add_option("--states", synth_params.n_states, "state count");
  synth_cmd->add_option("--topics", synth_params.n_topics, "topic count");
  synth_cmd->add_option("--dup-rate", synth_params.dup_rate,
                        "fraction of documents that are near-copies");

  auto* ingest_cmd = app.add_subcommand("ingest", "manifest -> document store");
  auto* feat_cmd = app.add_subcommand("featurize", "store -> hashed tf-idf vectors");
  auto* cluster_cmd = app.add_subcommand("cluster", "featurized -> cluster labels");
  std::string elbow, elbow_out;
  cluster_cmd->add_option("--elbow", elbow,
                          "scan these k values (comma list) instead of fitting");
  cluster_cmd->add_option("--elbow-out", elbow_out, "elbow scan CSV path");

  auto* pairs_cmd = app.add_subcommand("pairs", "clustered -> scored pairs");
  std::string pairs_csv_out;
  pairs_cmd->add_option("--csv-out", pairs_csv_out,
                        "also export pk1,pk2,similarity CSV");

  auto* graph_cmd = app.add_subcommand("graph", "pairs -> similarity graph");
  std::string pagerank_out, groups_out, state_ranks_out, path_query, path_out;
  graph_cmd->add_option("--pagerank-out", pagerank_out, "write pk,rank CSV");
  graph_cmd->add_option("--groups-out", groups_out,
                        "write connected-component CSV");
  graph_cmd->add_option("--state-ranks-out", state_ranks_out,
                        "write per-state rank mass CSV");
  graph_cmd->add_option("--path", path_query, "SRC,DST minimum-cost path query");
  graph_cmd->add_option("--path-out", path_out, "path JSON output (default stdout)");

  auto* probe_cmd = app.add_subcommand("probe", "rank pairs containing a key");
  std::string probe_key;
  int probe_top = 0;
  probe_cmd->add_option("--key", probe_key, "probe primary key")->required();
  probe_cmd->add_option("--top", probe_top, "keep only the top N lines");

  auto* bench_cmd = app.add_subcommand("bench", "time the join per worker count");
  std::string bench_workers = "1,2,4";
  std::string bench_out, plot_out;
  bench_cmd->add_option("--bench-workers", bench_workers,
                        "worker counts (must include 1)");
  bench_cmd->add_option("--bench-out", bench_out, "bench CSV path");
  bench_cmd->add_option("--plot-out", plot_out, "efficiency plot SVG path");

  auto* report_cmd = app.add_subcommand("report", "similarity histogram");
  std::string report_state, report_format = "text", report_out, report_json_out;
  report_cmd->add_option("--state", report_state,
                         "keep pairs touching this state code");
  report_cmd->add_option("--format", report_format, "svg|csv|text");
  report_cmd->add_option("--out", report_out, "rendered output path");
  report_cmd->add_option("--json-out", report_json_out,
                         "aggregator JSON output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    cfg.work_dir = work_dir;
    if (!manifest.empty()) cfg.manifest = manifest;
    if (!store_path.empty()) cfg.store_path = store_path;
    if (!featurized_path.empty()) cfg.featurized_path = featurized_path;
    if (!clustered_path.empty()) cfg.clustered_path = clustered_path;
    if (!model_path.empty()) cfg.model_path = model_path;
    if (!factors_path.empty()) cfg.factors_path = factors_path;
    if (!pairs_path.empty()) cfg.pairs_path = pairs_path;
    if (!graph_path.empty()) cfg.graph_path = graph_path;
    if (!stoplist.empty()) cfg.stoplist = stoplist;
    cfg.measure = docsim::parse_measure(measure);
    if (cfg.workers < 1) throw docsim::ParamError("--workers must be >= 1");
    synth_params.seed = cfg.seed;

    if (synth_cmd->parsed()) {
      const auto r = docsim::synth_corpus(synth_params, synth_out);
      std::cerr << "[docsim] synth: " << r.docs << " documents, "
                << r.truth_pairs.size() << " ground-truth pairs -> "
                << r.manifest.string() << "\n";
      std::cout << r.manifest.string() << "\n";
      return 0;
    }

    if (ingest_cmd->parsed()) {
      if (cfg.manifest.empty())
        throw docsim::ParamError("ingest: --manifest is required");
      log_stage(docsim::run_stage(docsim::Stage::Ingest, cfg, force));
      return 0;
    }
    if (feat_cmd->parsed()) {
      log_stage(docsim::run_stage(docsim::Stage::Featurize, cfg, force));
      return 0;
    }

    if (cluster_cmd->parsed()) {
      if (!elbow.empty()) {
        const auto ks = parse_uint_list(elbow, "--elbow");
        auto rows = docsim::load_featurized(cfg.featurized(), cfg.workers);
        std::vector<docsim::SparseVector> points;
        points.reserve(rows.size());
        for (auto& r : rows) points.push_back(std::move(r.features));
        docsim::KMeansOptions opts;
        opts.max_iter = cfg.cluster_max_iter;
        opts.tol = cfg.cluster_tol;
        opts.seed = cfg.seed;
        opts.workers = cfg.workers;
        std::vector<int32_t> kv(ks.begin(), ks.end());
        const auto scan = docsim::elbow_scan(points, kv, opts);
        std::string csv = "k,wcss,wall_time_seconds\n";
        for (const auto& row : scan) {
          if (!row.error.empty()) {
            std::cerr << "[docsim] elbow k=" << row.k << ": " << row.error
                      << "\n";
            continue;
          }
          csv += std::to_string(row.k) + "," +
                 docsim::format_shortest(row.wcss) + "," +
                 docsim::format_shortest(row.seconds) + "\n";
        }
        if (elbow_out.empty()) std::cout << csv;
        else write_text_file(elbow_out, csv);
        return 0;
      }
      log_stage(docsim::run_stage(docsim::Stage::Cluster, cfg, force));
      return 0;
    }

    if (pairs_cmd->parsed()) {
      log_stage(docsim::run_stage(docsim::Stage::Pairs, cfg, force));
      if (!pairs_csv_out.empty()) {
        docsim::write_pairs_csv(cfg.pairs(), pairs_csv_out);
        std::cerr << "[docsim] pairs: exported " << pairs_csv_out << "\n";
      }
      return 0;
    }

    if (graph_cmd->parsed()) {
      std::vector<std::string> warnings;
      log_stage(docsim::run_stage(docsim::Stage::Graph, cfg, force, &warnings));
      for (const auto& w : warnings) std::cerr << "[docsim] warning: " << w << "\n";

      const bool wants_reports = !pagerank_out.empty() || !groups_out.empty() ||
                                 !state_ranks_out.empty() || !path_query.empty();
      if (!wants_reports) return 0;

      const auto g = docsim::load_graph_csv(cfg.graph());
      if (!pagerank_out.empty() || !state_ranks_out.empty()) {
        const auto ranks = docsim::pagerank(g, cfg.damping, cfg.pagerank_tol,
                                            cfg.pagerank_max_iter, nullptr,
                                            cfg.workers);
        if (!pagerank_out.empty()) docsim::write_rank_csv(g, ranks, pagerank_out);
        if (!state_ranks_out.empty()) {
          std::string csv = "state,rank_mass\n";
          for (const auto& [state, mass] : docsim::state_rank_mass(g, ranks))
            csv += state + "," + docsim::format_shortest(mass) + "\n";
          write_text_file(state_ranks_out, csv);
        }
      }
      if (!groups_out.empty()) {
        std::string csv = "component,pk\n";
        const auto groups = docsim::diffusion_groups(g);
        for (size_t c = 0; c < groups.size(); ++c)
          for (const auto& pk : groups[c])
            csv += std::to_string(c) + "," + pk + "\n";
        write_text_file(groups_out, csv);
      }
      if (!path_query.empty()) {
        const auto comma = path_query.find(',');
        if (comma == std::string::npos)
          throw docsim::ParamError("--path expects SRC,DST");
        const auto result = docsim::min_cost_path(
            g, path_query.substr(0, comma), path_query.substr(comma + 1));
        const auto json = docsim::path_to_json(result);
        if (path_out.empty()) std::cout << json << "\n";
        else write_text_file(path_out, json + "\n");
      }
      return 0;
    }

    if (probe_cmd->parsed()) {
      const auto hits =
          docsim::probe(cfg.pairs(), cfg.featurized(), probe_key, probe_top);
      for (const auto& h : hits) std::cout << h.line << "\n";
      return 0;
    }

    if (bench_cmd->parsed()) {
      const auto counts = parse_uint_list(bench_workers, "--bench-workers");
      const auto rows = docsim::bench(cfg, counts);
      for (const auto& r : rows) {
        std::cerr << "[docsim] bench: workers=" << r.workers << " time="
                  << docsim::format_fixed(r.seconds, 3) << "s efficiency="
                  << docsim::format_fixed(r.efficiency, 3) << "\n";
      }
      const auto csv_path = bench_out.empty()
                                ? (cfg.work_dir / "bench.csv").string()
                                : bench_out;
      docsim::write_bench_csv(rows, csv_path);
      std::cerr << "[docsim] bench: wrote " << csv_path << "\n";
      const auto svg_path = plot_out.empty()
                                ? (cfg.work_dir / "bench.svg").string()
                                : plot_out;
      write_text_file(svg_path, docsim::bench_svg(rows));
      std::cerr << "[docsim] bench: wrote " << svg_path << "\n";
      return 0;
    }

    if (report_cmd->parsed()) {
      const auto hist = docsim::similarity_histogram(cfg.pairs(), report_state);
      const auto fmt = docsim::parse_render_format(report_format);
      const auto rendered = docsim::render(
          hist, fmt, report_state.empty() ? "similarity" : report_state,
          "Similarity", "Num. pairs");
      if (report_out.empty()) std::cout << rendered;
      else write_text_file(report_out, rendered);
      if (!report_json_out.empty())
        write_text_file(report_json_out, hist.to_json_string() + "\n");
      return 0;
    }

    throw docsim::ParamError("no subcommand selected");
  } catch (const docsim::ParamError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const docsim::StageOrderError& e) {
    std::cerr << "stage-order error: " << e.what() << "\n";
    return 3;
  } catch (const docsim::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
