// heatgeo command-line front end.
//
// Exit codes: 0 success, 2 usage or validation error, 3 numerical failure,
// 1 anything unexpected. Reports go to stdout, diagnostics to stderr.

#include "heatgeo/heatgeo.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace hg = heatgeo;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

// Name of the step currently running, reported on numerical failure.
std::string g_stage = "startup";

void log(const std::string& msg) { std::cerr << "heatgeo: " << msg << '\n'; }

struct Common {
  std::uint64_t seed = 0;
  std::string output_dir = ".";
  std::string config;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--output-dir", c.output_dir, "Directory for output files");
  sub->add_option("--config", c.config, "JSON file of option values (flags win)");
}

std::string config_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw hg::ParameterError("config values must be strings, numbers, booleans or arrays of those");
}

// Fill options not given on the command line from a JSON object whose keys are
// option names in snake_case.
void apply_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw hg::ParameterError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw hg::ParseError(path + ": " + e.what());
  }
  if (!j.is_object()) throw hg::ParseError(path + ": config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    CLI::Option* opt = key == "config" ? nullptr : sub->get_option_no_throw(flag);
    if (!opt) throw hg::ParameterError(path + ": unknown config key '" + key + "' for " + sub->get_name());
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      if (value.empty()) throw hg::ParameterError(path + ": '" + key + "' must not be empty");
      for (const auto& v : value) opt->add_result(config_value(v));
    } else {
      opt->add_result(config_value(value));
    }
    opt->run_callback();
  }
}

fs::path prepare_output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw hg::ParameterError("output directory '" + dir + "' cannot be created");
  return fs::path(dir);
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw hg::ParameterError(std::string("missing ") + what);
  if (!fs::is_regular_file(path)) throw hg::ParameterError(std::string(what) + " '" + path + "' does not exist");
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw hg::ParameterError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

template <class F>
void write_text(const fs::path& path, F&& body) {
  std::ofstream out(path);
  if (!out) throw hg::ParameterError("cannot write " + path.string());
  body(out);
}

std::optional<double> parse_time(const std::string& s) {
  if (s == "auto") return std::nullopt;
  const auto v = hg::detail::parse_number(s);
  if (!v || !(*v > 0.0) || !std::isfinite(*v)) throw hg::ParameterError("--t must be 'auto' or a positive number");
  return *v;
}

hg::Bandwidth parse_bandwidth(const std::string& s) {
  if (s == "adaptive") return hg::Bandwidth::adaptive();
  const auto v = hg::detail::parse_number(s);
  if (!v || !(*v > 0.0)) throw hg::ParameterError("--bandwidth must be 'adaptive' or a positive number");
  return hg::Bandwidth::constant(*v);
}

// Runs fn(i) for i in [0, count) on up to `jobs` threads; results land by index.
void run_pool(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(jobs), std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> workers;
  for (int w = 0; w < jobs; ++w)
    workers.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    }));
  for (auto& f : workers) f.get();
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string dataset;
  std::string prefix;
  hg::SwissRollParams roll;
  hg::TreeParams tree;
  hg::DriftParams drift;
  int n = 500;
  double noise = 0.0;
  int dim = 0;
};

int cmd_generate(CLI::App* sub, GenerateArgs& a, Common& c) {
  apply_config(sub, c.config);
  const std::map<std::string, std::set<std::string>> allowed = {
      {"swiss-roll", {"--n", "--noise", "--dim", "--clustered"}},
      {"tree", {"--noise", "--dim", "--branch-len", "--branches", "--step-sd"}},
      {"drift", {"--dim", "--n-per-time", "--times", "--drift-step", "--spread"}}};
  const auto& ok = allowed.at(a.dataset);
  for (const char* name : {"--n", "--noise", "--dim", "--clustered", "--branch-len", "--branches", "--step-sd",
                           "--n-per-time", "--times", "--drift-step", "--spread"})
    if (sub->get_option(name)->count() > 0 && !ok.count(name))
      throw hg::ParameterError(std::string(name) + " does not apply to " + a.dataset);

  const fs::path dir = prepare_output_dir(c.output_dir);
  const std::string prefix = a.prefix.empty() ? a.dataset : a.prefix;
  g_stage = "generate";
  hg::GroundTruthBundle b;
  if (a.dataset == "swiss-roll") {
    a.roll.n = a.n;
    a.roll.noise_sd = a.noise;
    if (a.dim) a.roll.ambient_dim = a.dim;
    a.roll.seed = c.seed;
    b = hg::swiss_roll(a.roll);
  } else if (a.dataset == "tree") {
    a.tree.noise_sd = a.noise;
    if (a.dim) a.tree.dim = a.dim;
    a.tree.seed = c.seed;
    b = hg::tree(a.tree);
  } else {
    if (a.dim) a.drift.dim = a.dim;
    a.drift.seed = c.seed;
    b.cloud = hg::timepoint_drift(a.drift);
    b.params = {{"dataset", "drift"},
                {"n_per_time", a.drift.n_per_time},
                {"n_times", a.drift.n_times},
                {"dim", a.drift.dim},
                {"drift_step", a.drift.drift_step},
                {"spread", a.drift.spread},
                {"seed", a.drift.seed}};
  }

  json files = json::array();
  const fs::path cloud_path = dir / (prefix + ".csv");
  hg::save_point_cloud(cloud_path.string(), b.cloud);
  files.push_back(cloud_path.string());
  if (b.geodesics.values.size() > 0) {
    const fs::path geo_path = dir / (prefix + "_geodesics.csv");
    hg::save_matrix_csv(geo_path.string(), b.geodesics.values);
    files.push_back(geo_path.string());
  }
  const fs::path params_path = dir / (prefix + "_params.json");
  write_json(params_path, b.params);
  files.push_back(params_path.string());
  log("wrote " + std::to_string(b.cloud.size()) + " points");
  std::cout << json{{"dataset", a.dataset}, {"rows", b.cloud.size()}, {"files", files}}.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// embed
// ---------------------------------------------------------------------------

struct GraphArgs {
  int knn = 10;
  std::string bandwidth = "adaptive";
  std::string laplacian = "combinatorial";
  int order = hg::kDefaultChebyshevOrder;
};

void add_graph_options(CLI::App* sub, GraphArgs& g) {
  sub->add_option("--k,--knn", g.knn, "Neighbours in the k-NN graph");
  sub->add_option("--bandwidth", g.bandwidth, "'adaptive' or a fixed Gaussian bandwidth");
  sub->add_option("--laplacian", g.laplacian, "combinatorial | symmetric | random-walk");
  sub->add_option("--order", g.order, "Chebyshev order (Euler steps for --heat-method euler)");
}

struct EmbedArgs {
  std::string input;
  std::string prefix = "embedding";
  std::string t = "auto";
  double rho = 0.0;
  double sigma = 1.0;
  GraphArgs graph;
  std::string heat_method = "chebyshev";
  std::string method = "heatgeo";
  std::string kernel = "random-walk";
  int walk_steps = 10;
  std::string weighting = "standard";
  bool weighted = false;
  int dims = 2;
  int max_iters = 300;
  double rel_tol = 1e-6;
  std::string triplet_basis = "squared";
  bool save_kernel = false;
  bool save_adjacency = false;
};

hg::PipelineConfig pipeline_config(const GraphArgs& g, const std::string& t, double sigma, double rho,
                                   std::uint64_t seed) {
  hg::PipelineConfig cfg;
  cfg.knn = g.knn;
  cfg.bandwidth = parse_bandwidth(g.bandwidth);
  cfg.laplacian = hg::parse_laplacian_kind(g.laplacian);
  cfg.order = g.order;
  cfg.time = parse_time(t);
  cfg.sigma = sigma;
  cfg.rho = rho;
  cfg.seed = seed;
  return cfg;
}

int cmd_embed(CLI::App* sub, EmbedArgs& a, Common& c) {
  apply_config(sub, c.config);
  require_file(a.input, "input file");
  const fs::path dir = prepare_output_dir(c.output_dir);
  hg::PipelineConfig cfg = pipeline_config(a.graph, a.t, a.sigma, a.rho, c.seed);
  cfg.method = hg::parse_heat_method(a.heat_method);
  cfg.triplet_basis = hg::parse_triplet_basis(a.triplet_basis);
  cfg.weighted = a.weighted;
  cfg.dims = a.dims;
  cfg.max_iters = a.max_iters;
  cfg.rel_tol = a.rel_tol;
  cfg.validate();
  const hg::Method method = hg::parse_method(a.method);
  if (a.kernel != "random-walk" && a.kernel != "heat")
    throw hg::ParameterError("--kernel must be random-walk or heat");
  if (a.kernel == "heat" && method != hg::Method::PhatePotential)
    throw hg::ParameterError("--kernel heat applies to --method phate-potential only");
  if (a.weighted && method != hg::Method::HeatGeo)
    throw hg::ParameterError("--weighted applies to --method heatgeo only");
  if (a.walk_steps < 1) throw hg::ParameterError("--walk-steps must be >= 1");

  g_stage = "load";
  const hg::PointCloud points = hg::load_csv(a.input);
  log("loaded " + std::to_string(points.size()) + " points from " + a.input);

  json meta = {{"input", a.input},
               {"n", points.size()},
               {"method", hg::to_string(method)},
               {"knn", cfg.knn},
               {"bandwidth", a.graph.bandwidth},
               {"laplacian", hg::to_string(cfg.laplacian)},
               {"seed", c.seed},
               {"dims", cfg.dims}};
  hg::DistanceMatrix distances;
  std::optional<hg::PipelineResult> heat_run;
  if (method == hg::Method::HeatGeo || (method == hg::Method::PhatePotential && a.kernel == "heat")) {
    hg::PipelineConfig run_cfg = cfg;
    if (method != hg::Method::HeatGeo) run_cfg.sigma = run_cfg.rho = 0.0;
    heat_run = hg::heatgeo_distances(points, run_cfg, &g_stage);
    meta["t"] = heat_run->time;
    meta["t_source"] = heat_run->selection ? (heat_run->selection->knee_found ? "knee" : "fallback") : "fixed";
    if (heat_run->selection) {
      meta["time_grid"] = heat_run->selection->grid;
      meta["entropies"] = heat_run->selection->entropies;
    }
    meta["K"] = cfg.order;
    meta["heat_method"] = hg::to_string(cfg.method);
    meta["num_components"] = heat_run->num_components;
    meta["floored_bandwidths"] = heat_run->floored_bandwidths;
    if (method == hg::Method::HeatGeo) {
      meta["sigma"] = cfg.sigma;
      meta["rho"] = cfg.rho;
      meta["triplet_basis"] = hg::to_string(cfg.triplet_basis);
      meta["floored"] = heat_run->floored;
      meta["clamped"] = heat_run->clamped;
      distances = heat_run->distances;
    } else {
      g_stage = "phate-potential";
      meta["kernel"] = "heat";
      distances = hg::phate_potential(heat_run->heat, cfg.floor);
    }
  } else {
    hg::MethodConfig mc;
    mc.method = method;
    mc.heatgeo = cfg;
    mc.walk_steps = a.walk_steps;
    if (a.weighting == "standard") mc.weighting = hg::DiffusionWeighting::Standard;
    else if (a.weighting == "literal") mc.weighting = hg::DiffusionWeighting::Literal;
    else throw hg::ParameterError("--weighting must be standard or literal");
    g_stage = hg::to_string(method);
    distances = hg::method_distances(points, mc);
    if (method != hg::Method::ShortestPath) meta["walk_steps"] = a.walk_steps;
    if (method == hg::Method::PhatePotential) meta["kernel"] = "random-walk";
    if (method == hg::Method::DiffusionMap) meta["weighting"] = a.weighting;
  }

  g_stage = "mds";
  hg::MdsConfig mc;
  mc.dims = cfg.dims;
  mc.max_iters = cfg.max_iters;
  mc.rel_tol = cfg.rel_tol;
  mc.seed = cfg.seed;
  if (a.weighted) mc.weights = hg::heat_weights(heat_run->heat);
  meta["weighted"] = a.weighted;
  const hg::Embedding emb = hg::smacof(distances, mc);
  meta["stress"] = emb.stress;
  meta["iterations"] = emb.trace.empty() ? 0 : emb.trace.size() - 1;
  meta["converged"] = emb.converged;

  g_stage = "write";
  const fs::path emb_path = dir / (a.prefix + ".csv");
  const fs::path dist_path = dir / (a.prefix + "_distances.csv");
  const fs::path meta_path = dir / (a.prefix + "_meta.json");
  write_text(emb_path, [&](std::ostream& out) {
    hg::write_embedding_csv(out, emb.coords, points.labels, points.timepoints);
  });
  hg::save_matrix_csv(dist_path.string(), distances.values);
  json files = {emb_path.string(), dist_path.string(), meta_path.string()};
  if (a.save_kernel) {
    if (!heat_run) throw hg::ParameterError("--save-kernel needs a heat-kernel method");
    const fs::path p = dir / (a.prefix + "_kernel.bin");
    std::ofstream out(p, std::ios::binary);
    hg::write_kernel_binary(out, heat_run->heat.matrix);
    files.push_back(p.string());
  }
  if (a.save_adjacency) {
    const fs::path p = dir / (a.prefix + "_adjacency.csv");
    const auto adj = hg::build_knn_graph(points, cfg.knn, cfg.bandwidth);
    write_text(p, [&](std::ostream& out) { hg::write_adjacency_csv(out, adj.weights); });
    files.push_back(p.string());
  }
  meta["files"] = files;
  write_json(meta_path, meta);
  std::cout << meta.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string truth;
  std::string pred;
  std::string embedding;
  std::string labels;
  int clusters = 0;
  std::optional<int> held_out;
  std::string report = "eval_report.json";
};

int cmd_eval(CLI::App* sub, EvalArgs& a, Common& c) {
  apply_config(sub, c.config);
  if (!a.pred.empty() && !a.embedding.empty())
    throw hg::ParameterError("give either --pred or --embedding, not both");
  if (!a.truth.empty()) require_file(a.truth, "--truth file");
  if (!a.pred.empty()) require_file(a.pred, "--pred file");
  if (!a.embedding.empty()) require_file(a.embedding, "--embedding file");
  if (!a.labels.empty()) require_file(a.labels, "--labels file");
  const fs::path dir = prepare_output_dir(c.output_dir);

  g_stage = "load";
  json report;
  std::optional<hg::PointCloud> emb;
  if (!a.embedding.empty()) emb = hg::load_csv(a.embedding);

  bool any = false;
  if (!a.truth.empty()) {
    if (a.pred.empty() && !emb) throw hg::ParameterError("--truth needs --pred or --embedding");
    const hg::Matrix d = hg::load_distance_csv(a.truth).values;
    const hg::Matrix dhat = emb ? hg::pairwise_row_distances(emb->data) : hg::load_distance_csv(a.pred).values;
    if (d.rows() != dhat.rows())
      throw hg::ParameterError("size mismatch: truth has " + std::to_string(d.rows()) + " points, prediction " +
                               std::to_string(dhat.rows()));
    g_stage = "correlations";
    const auto r = hg::row_correlations(d, dhat);
    const auto nd = hg::norm_diffs(d, dhat);
    if (r.constant_rows > 0) log(std::to_string(r.constant_rows) + " constant rows scored as correlation 0");
    report["pearson"] = r.pearson;
    report["spearman"] = r.spearman;
    report["frob_norm"] = nd.frob;
    report["max_norm"] = nd.max;
    report["raw_frob_norm"] = nd.raw_frob;
    report["raw_max_norm"] = nd.raw_max;
    report["norms_normalized"] = nd.normalized;
    report["constant_rows"] = r.constant_rows;
    any = true;
  }

  std::optional<std::vector<int>> labels;
  if (!a.labels.empty()) {
    labels = hg::load_csv(a.labels).labels;
    if (!labels) throw hg::ParameterError("--labels file has no 'label' column");
  } else if (emb && emb->labels && a.clusters > 0) {
    labels = emb->labels;
  }
  if (labels) {
    if (!emb) throw hg::ParameterError("clustering needs --embedding");
    if (labels->size() != static_cast<std::size_t>(emb->size()))
      throw hg::ParameterError("size mismatch: " + std::to_string(labels->size()) + " labels for " +
                               std::to_string(emb->size()) + " embedded points");
    const int k = a.clusters > 0 ? a.clusters
                                 : static_cast<int>(std::set<int>(labels->begin(), labels->end()).size());
    g_stage = "clustering";
    const auto s = hg::clustering_scores(emb->data, *labels, k, c.seed);
    report["homogeneity"] = s.homogeneity;
    report["ami"] = s.ami;
    report["ari"] = s.ari;
    report["n_clusters"] = k;
    any = true;
  }

  if (a.held_out) {
    if (!emb || !emb->timepoints) throw hg::ParameterError("--held-out needs an --embedding with a timepoint column");
    g_stage = "interpolation";
    const auto r = hg::interpolation_emd(emb->data, *emb->timepoints, *a.held_out, c.seed);
    const auto ctl = hg::interpolation_emd_control(emb->data, *emb->timepoints, *a.held_out, c.seed);
    report["emd"] = r.emd;
    report["emd_control"] = ctl.emd;
    report["emd_sample_size"] = r.sample_size;
    report["held_out"] = *a.held_out;
    any = true;
  }
  if (!any) throw hg::ParameterError("nothing to evaluate: give --truth, --labels/--clusters or --held-out");

  report["config_truth"] = a.truth;
  report["config_pred"] = a.pred;
  report["config_embedding"] = a.embedding;
  report["config_labels"] = a.labels;
  report["config_seed"] = c.seed;
  for (const auto& [key, value] : report.items())
    if (value.is_number_float() && !std::isfinite(value.get<double>()))
      throw hg::NumericalError("metric '" + key + "' is not finite");
  write_json(dir / a.report, report);
  std::cout << report.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// knee
// ---------------------------------------------------------------------------

struct KneeArgs {
  std::string input;
  GraphArgs graph;
  double grid_min = 0.05;
  double grid_max = 200.0;
  int grid_points = 20;
  std::string prefix = "knee";
};

int cmd_knee(CLI::App* sub, KneeArgs& a, Common& c) {
  apply_config(sub, c.config);
  require_file(a.input, "input file");
  const fs::path dir = prepare_output_dir(c.output_dir);
  if (!(a.grid_min > 0.0) || !(a.grid_max > a.grid_min) || a.grid_points < 3)
    throw hg::ParameterError("time grid needs 0 < min < max and at least 3 points");
  g_stage = "load";
  const hg::PointCloud points = hg::load_csv(a.input);
  g_stage = "graph";
  const auto adj = hg::build_knn_graph(points, a.graph.knn, parse_bandwidth(a.graph.bandwidth));
  g_stage = "laplacian";
  const auto lap = hg::laplacian(adj, hg::parse_laplacian_kind(a.graph.laplacian));
  g_stage = "time-selection";
  const auto grid = hg::log_spaced(a.grid_min, a.grid_max, a.grid_points);
  const auto sel = hg::select_time_knee(lap, grid, a.graph.order);
  const fs::path path = dir / (a.prefix + "_entropy.csv");
  write_text(path, [&](std::ostream& out) { hg::write_time_entropy_csv(out, sel); });
  const json report = {{"chosen_t", sel.chosen}, {"knee_found", sel.knee_found}, {"grid", sel.grid},
                       {"entropies", sel.entropies}, {"file", path.string()}};
  std::cout << report.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

struct BenchmarkArgs {
  std::string dataset = "swiss-roll";
  std::vector<std::string> methods = {"heatgeo", "phate-potential", "diffusion-map", "shortest-path"};
  int reps = 5;
  int n = 500;
  double noise = 0.1;
  int dim = 10;
  int branch_len = 100;
  int branches = 5;
  double step_sd = 2.0;
  std::vector<int> knn_grid = {5, 10, 15};
  std::vector<std::string> t_grid = {"auto"};
  std::vector<double> sigma_grid = {1.0};
  std::vector<double> rho_grid = {0.0};
  std::vector<int> walk_grid = {10};
  std::string laplacian = "combinatorial";
  int order = hg::kDefaultChebyshevOrder;
  int jobs = 0;
  bool sweep = false;
  int sweep_knn = 10;
  double sweep_sigma = 1.0;
  double sweep_min = 0.05;
  double sweep_max = 200.0;
  int sweep_points = 20;
  std::string prefix = "benchmark";
};

hg::GroundTruthBundle bench_dataset(const BenchmarkArgs& a, std::uint64_t seed) {
  if (a.dataset == "swiss-roll") return hg::swiss_roll({a.n, a.noise, a.dim, false, seed});
  return hg::tree({a.branch_len, a.branches, a.dim, a.noise, a.step_sd, seed});
}

struct Cell {
  hg::Method method;
  json config;
  hg::MethodConfig mc;
  std::uint64_t seed;
  bool validation;
  // results
  std::optional<double> pearson, spearman, norm_fro;
  std::string error;
};

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

int benchmark_sweep(const BenchmarkArgs& a, const Common& c, const fs::path& dir) {
  if (!(a.sweep_min > 0.0) || !(a.sweep_max > a.sweep_min) || a.sweep_points < 2)
    throw hg::ParameterError("sweep grid needs 0 < min < max and at least 2 points");
  g_stage = "generate";
  const auto data = bench_dataset(a, c.seed);
  g_stage = "graph";
  const auto adj = hg::build_knn_graph(data.cloud, a.sweep_knn);
  g_stage = "laplacian";
  const auto lap = hg::laplacian(adj, hg::parse_laplacian_kind(a.laplacian));
  g_stage = "heat-kernel";
  const auto grid = hg::log_spaced(a.sweep_min, a.sweep_max, a.sweep_points);
  const auto kernels = hg::chebyshev_heat(lap, grid, a.order);
  std::vector<std::array<double, 3>> rows(grid.size());
  g_stage = "heat-geodesic";
  run_pool(grid.size(), a.jobs, [&](std::size_t i) {
    const auto hgd = hg::heat_geodesic(kernels[i], {a.sweep_sigma, 0.0, 1e-12});
    const auto r = hg::row_correlations(data.geodesics.values, hgd.distances.values);
    rows[i] = {r.pearson, hg::norm_diffs(data.geodesics.values, hgd.distances.values).frob,
               hg::heat_entropy(kernels[i])};
  });
  std::ostringstream table;
  table << "t,pearson,frobenius,entropy\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    table << hg::format_double(grid[i]) << ',' << hg::format_double(rows[i][0]) << ','
          << hg::format_double(rows[i][1]) << ',' << hg::format_double(rows[i][2]) << '\n';
  write_text(dir / (a.prefix + "_sweep.csv"), [&](std::ostream& out) { out << table.str(); });
  std::cout << table.str();
  return kExitOk;
}

int cmd_benchmark(CLI::App* sub, BenchmarkArgs& a, Common& c) {
  apply_config(sub, c.config);
  if (a.methods.empty()) throw hg::ParameterError("benchmark needs at least one method");
  if (a.dataset != "swiss-roll" && a.dataset != "tree")
    throw hg::ParameterError("--dataset must be swiss-roll or tree");
  if (a.reps < 1) throw hg::ParameterError("--reps must be >= 1");
  if (a.knn_grid.empty() || a.t_grid.empty() || a.sigma_grid.empty() || a.rho_grid.empty() || a.walk_grid.empty())
    throw hg::ParameterError("hyperparameter grids must not be empty");
  std::vector<hg::Method> methods;
  for (const auto& m : a.methods) methods.push_back(hg::parse_method(m));
  const auto lap_kind = hg::parse_laplacian_kind(a.laplacian);
  for (const auto& t : a.t_grid) parse_time(t);
  // fail fast on bad dataset parameters
  bench_dataset(a, c.seed);
  const fs::path dir = prepare_output_dir(c.output_dir);
  if (a.sweep) return benchmark_sweep(a, c, dir);

  // Seeds seed .. seed+reps-1 select hyperparameters, the next reps report.
  std::vector<Cell> cells;
  for (const auto method : methods) {
    std::vector<std::pair<json, hg::MethodConfig>> configs;
    for (int k : a.knn_grid) {
      hg::MethodConfig mc;
      mc.method = method;
      mc.heatgeo.knn = k;
      mc.heatgeo.laplacian = lap_kind;
      mc.heatgeo.order = a.order;
      if (method == hg::Method::HeatGeo) {
        for (const auto& t : a.t_grid)
          for (double s : a.sigma_grid)
            for (double r : a.rho_grid) {
              mc.heatgeo.time = parse_time(t);
              mc.heatgeo.sigma = s;
              mc.heatgeo.rho = r;
              mc.heatgeo.validate();
              configs.push_back({{{"knn", k}, {"t", t}, {"sigma", s}, {"rho", r}}, mc});
            }
      } else if (method == hg::Method::ShortestPath) {
        configs.push_back({{{"knn", k}}, mc});
      } else {
        for (int w : a.walk_grid) {
          if (w < 1) throw hg::ParameterError("walk steps must be >= 1");
          mc.walk_steps = w;
          configs.push_back({{{"knn", k}, {"t", w}}, mc});
        }
      }
    }
    for (const auto& [cfg, mc] : configs)
      for (int r = 0; r < 2 * a.reps; ++r)
        cells.push_back({method, cfg, mc, c.seed + static_cast<std::uint64_t>(r), r < a.reps, {}, {}, {}, {}});
  }
  log("running " + std::to_string(cells.size()) + " cells");

  g_stage = "benchmark";
  run_pool(cells.size(), a.jobs, [&](std::size_t i) {
    Cell& cell = cells[i];
    try {
      const auto data = bench_dataset(a, cell.seed);
      const auto d = hg::method_distances(data.cloud, cell.mc);
      const auto r = hg::row_correlations(data.geodesics.values, d.values);
      cell.pearson = r.pearson;
      cell.spearman = r.spearman;
      cell.norm_fro = hg::norm_diffs(data.geodesics.values, d.values).frob;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });

  std::ostringstream cells_csv;
  cells_csv << "method,config,split,seed,pearson,spearman,norm_fro,error\n";
  auto opt = [](const std::optional<double>& v) { return v ? hg::format_double(*v) : std::string(); };
  for (const auto& cell : cells) {
    std::string err = cell.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '"', '\'');
    std::string cfg = cell.config.dump();
    std::replace(cfg.begin(), cfg.end(), '"', '\'');
    cells_csv << hg::to_string(cell.method) << ",\"" << cfg << "\"," << (cell.validation ? "validation" : "test")
              << ',' << cell.seed << ',' << opt(cell.pearson) << ',' << opt(cell.spearman) << ','
              << opt(cell.norm_fro) << ',' << err << '\n';
  }

  std::ostringstream table;
  table << "dataset,method,selected,pearson_mean,pearson_sd,spearman_mean,spearman_sd,norm_fro_mean,norm_fro_sd,"
           "test_reps,failed_cells\n";
  json summary = json::array();
  std::size_t failed_total = 0;
  for (const auto method : methods) {
    // validation mean Pearson per config, in insertion order
    std::vector<std::string> order;
    std::map<std::string, std::vector<const Cell*>> by_config;
    for (const auto& cell : cells) {
      if (cell.method != method) continue;
      const std::string key = cell.config.dump();
      if (!by_config.count(key)) order.push_back(key);
      by_config[key].push_back(&cell);
    }
    std::optional<std::string> best;
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t failed = 0;
    for (const auto& key : order) {
      std::vector<double> v;
      bool ok = true;
      for (const Cell* cell : by_config[key]) {
        if (!cell->error.empty()) ++failed;
        if (!cell->validation) continue;
        if (cell->pearson) v.push_back(*cell->pearson);
        else ok = false;
      }
      if (ok && mean_sd(v).first > best_score) {
        best_score = mean_sd(v).first;
        best = key;
      }
    }
    failed_total += failed;
    json row = {{"dataset", a.dataset}, {"method", hg::to_string(method)}, {"failed_cells", failed}};
    if (!best) {
      row["error"] = "every configuration failed on validation";
      table << a.dataset << ',' << hg::to_string(method) << ",,,,,,,,0," << failed << '\n';
      summary.push_back(row);
      continue;
    }
    std::vector<double> p, s, f;
    for (const Cell* cell : by_config[*best])
      if (!cell->validation && cell->pearson) {
        p.push_back(*cell->pearson);
        s.push_back(*cell->spearman);
        f.push_back(*cell->norm_fro);
      }
    const auto [pm, psd] = mean_sd(p);
    const auto [sm, ssd] = mean_sd(s);
    const auto [fm, fsd] = mean_sd(f);
    std::string sel = *best;
    std::replace(sel.begin(), sel.end(), '"', '\'');
    table << a.dataset << ',' << hg::to_string(method) << ",\"" << sel << "\"," << hg::format_double(pm) << ','
          << hg::format_double(psd) << ',' << hg::format_double(sm) << ',' << hg::format_double(ssd) << ','
          << hg::format_double(fm) << ',' << hg::format_double(fsd) << ',' << p.size() << ',' << failed << '\n';
    row["selected"] = json::parse(*best);
    row["validation_pearson"] = best_score;
    row["pearson_mean"] = pm;
    row["pearson_sd"] = psd;
    row["spearman_mean"] = sm;
    row["spearman_sd"] = ssd;
    row["norm_fro_mean"] = fm;
    row["norm_fro_sd"] = fsd;
    row["test_reps"] = p.size();
    summary.push_back(row);
  }
  if (failed_total > 0) log(std::to_string(failed_total) + " cells failed; see " + a.prefix + "_cells.csv");

  write_text(dir / (a.prefix + ".csv"), [&](std::ostream& out) { out << table.str(); });
  write_text(dir / (a.prefix + "_cells.csv"), [&](std::ostream& out) { out << cells_csv.str(); });
  write_json(dir / (a.prefix + ".json"),
             {{"dataset", a.dataset}, {"reps", a.reps}, {"seed", c.seed}, {"results", summary}});
  std::cout << table.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat-geodesic embeddings of point clouds"};
  app.require_subcommand(1);
  Common common;

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset with ground truth");
  add_common(generate, common);
  generate->add_option("dataset", gen.dataset, "swiss-roll | tree | drift")
      ->required()
      ->check(CLI::IsMember({"swiss-roll", "tree", "drift"}));
  generate->add_option("--prefix", gen.prefix, "Output file prefix (default: dataset name)");
  generate->add_option("--n", gen.n, "Swiss roll: number of points");
  generate->add_option("--noise", gen.noise, "Ambient Gaussian noise sd");
  generate->add_option("--dim", gen.dim, "Ambient dimension");
  generate->add_flag("--clustered", gen.roll.clustered, "Swiss roll: two-component mixture with labels");
  generate->add_option("--branch-len", gen.tree.branch_len, "Tree: points per branch");
  generate->add_option("--branches", gen.tree.n_branches, "Tree: number of branches");
  generate->add_option("--step-sd", gen.tree.step_sd, "Tree: random-walk step sd");
  generate->add_option("--n-per-time", gen.drift.n_per_time, "Drift: points per timepoint");
  generate->add_option("--times", gen.drift.n_times, "Drift: number of timepoints");
  generate->add_option("--drift-step", gen.drift.drift_step, "Drift: mean shift per timepoint");
  generate->add_option("--spread", gen.drift.spread, "Drift: blob sd");

  EmbedArgs emb;
  auto* embed = app.add_subcommand("embed", "Embed a point cloud");
  add_common(embed, common);
  embed->add_option("--input", emb.input, "Point cloud CSV");
  embed->add_option("--prefix", emb.prefix, "Output file prefix");
  embed->add_option("--t", emb.t, "Diffusion time, or 'auto' for the entropy knee");
  embed->add_option("--rho", emb.rho, "Triplet interpolation weight in [0, 1]");
  embed->add_option("--sigma", emb.sigma, "Volume-correction weight");
  add_graph_options(embed, emb.graph);
  embed->add_option("--heat-method", emb.heat_method, "exact | chebyshev | euler");
  embed->add_option("--method", emb.method, "heatgeo | phate-potential | diffusion-map | shortest-path");
  embed->add_option("--kernel", emb.kernel, "phate-potential kernel: random-walk | heat");
  embed->add_option("--walk-steps", emb.walk_steps, "Random-walk steps for the baselines");
  embed->add_option("--weighting", emb.weighting, "diffusion-map weighting: standard | literal");
  embed->add_flag("--weighted", emb.weighted, "Heat-kernel weighted MDS");
  embed->add_option("--dims", emb.dims, "Embedding dimension");
  embed->add_option("--max-iters", emb.max_iters, "SMACOF iteration cap");
  embed->add_option("--rel-tol", emb.rel_tol, "SMACOF relative stress tolerance");
  embed->add_option("--triplet-basis", emb.triplet_basis, "squared | distance");
  embed->add_flag("--save-kernel", emb.save_kernel, "Also write the heat kernel (binary)");
  embed->add_flag("--save-adjacency", emb.save_adjacency, "Also write the k-NN graph as CSV triples");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score distances, clusters or interpolation");
  add_common(eval, common);
  eval->add_option("--truth", ev.truth, "Ground-truth distance matrix CSV");
  eval->add_option("--pred", ev.pred, "Estimated distance matrix CSV");
  eval->add_option("--embedding", ev.embedding, "Embedding CSV (distances taken between rows)");
  eval->add_option("--labels", ev.labels, "CSV with a 'label' column");
  eval->add_option("--clusters", ev.clusters, "k for k-means (default: number of label classes)");
  eval->add_option("--held-out", ev.held_out, "Timepoint to predict by interpolation");
  eval->add_option("--report", ev.report, "Report file name inside the output directory");

  KneeArgs kn;
  auto* knee = app.add_subcommand("knee", "Entropy curve over diffusion time and its knee");
  add_common(knee, common);
  knee->add_option("--input", kn.input, "Point cloud CSV");
  add_graph_options(knee, kn.graph);
  knee->add_option("--grid-min", kn.grid_min, "Smallest time");
  knee->add_option("--grid-max", kn.grid_max, "Largest time");
  knee->add_option("--grid-points", kn.grid_points, "Number of log-spaced times");
  knee->add_option("--prefix", kn.prefix, "Output file prefix");

  BenchmarkArgs bm;
  auto* benchmark = app.add_subcommand("benchmark", "Distance-recovery benchmark with validation/test split");
  add_common(benchmark, common);
  benchmark->add_option("--dataset", bm.dataset, "swiss-roll | tree");
  benchmark->add_option("--methods", bm.methods, "Methods to compare");
  benchmark->add_option("--reps", bm.reps, "Repetitions per split");
  benchmark->add_option("--n", bm.n, "Swiss roll: number of points");
  benchmark->add_option("--noise", bm.noise, "Ambient noise sd");
  benchmark->add_option("--dim", bm.dim, "Ambient dimension");
  benchmark->add_option("--branch-len", bm.branch_len, "Tree: points per branch");
  benchmark->add_option("--branches", bm.branches, "Tree: number of branches");
  benchmark->add_option("--step-sd", bm.step_sd, "Tree: random-walk step sd");
  benchmark->add_option("--knn-grid", bm.knn_grid, "Neighbour counts to try");
  benchmark->add_option("--t-grid", bm.t_grid, "Heat-geodesic times to try ('auto' allowed)");
  benchmark->add_option("--sigma-grid", bm.sigma_grid, "Volume-correction weights to try");
  benchmark->add_option("--rho-grid", bm.rho_grid, "Triplet weights to try");
  benchmark->add_option("--walk-grid", bm.walk_grid, "Random-walk steps to try for the baselines");
  benchmark->add_option("--laplacian", bm.laplacian, "combinatorial | symmetric | random-walk");
  benchmark->add_option("--order", bm.order, "Chebyshev order");
  benchmark->add_option("--jobs", bm.jobs, "Worker threads (0: all cores)");
  benchmark->add_flag("--sweep", bm.sweep, "Sweep diffusion time instead of the method table");
  benchmark->add_option("--sweep-knn", bm.sweep_knn, "Sweep: neighbours");
  benchmark->add_option("--sweep-sigma", bm.sweep_sigma, "Sweep: volume-correction weight");
  benchmark->add_option("--sweep-min", bm.sweep_min, "Sweep: smallest time");
  benchmark->add_option("--sweep-max", bm.sweep_max, "Sweep: largest time");
  benchmark->add_option("--sweep-points", bm.sweep_points, "Sweep: number of log-spaced times");
  benchmark->add_option("--prefix", bm.prefix, "Output file prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(generate, gen, common);
    if (embed->parsed()) return cmd_embed(embed, emb, common);
    if (eval->parsed()) return cmd_eval(eval, ev, common);
    if (knee->parsed()) return cmd_knee(knee, kn, common);
    if (benchmark->parsed()) return cmd_benchmark(benchmark, bm, common);
  } catch (const hg::NumericalError& e) {
    log("numerical failure in stage '" + g_stage + "': " + e.what());
    return kExitNumerical;
  } catch (const hg::ParameterError& e) {
    log(std::string("error: ") + e.what());
    return kExitUsage;
  } catch (const hg::ParseError& e) {
    log(std::string("error: ") + e.what());
    return kExitUsage;
  } catch (const CLI::Error& e) {
    log(std::string("error: ") + e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    log("internal error in stage '" + g_stage + "': " + e.what());
    return 1;
  }
  return kExitUsage;
}
