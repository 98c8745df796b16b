#ifndef ACOUSTWIN_CLI_HPP
#define ACOUSTWIN_CLI_HPP

// Pipeline commands behind the acoustwin executable. Each returns a process
// exit code: 0 success, 2 config error, 3 IO error, 4 numerical failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acoustwin/assimilate.hpp"
#include "acoustwin/datagen.hpp"
#include "acoustwin/model.hpp"
#include "acoustwin/train.hpp"
#include "acoustwin/voyage.hpp"

namespace acoustwin::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kIoError = 3, kNumericalError = 4 };

/// Regular lat/lon grid of receivers for one source, band and depth list.
struct PredictGrid {
  GeoPoint source{48.85, -124.1, 10.0};
  double f_hz = 400.0;
  std::vector<double> depths_m{40.0};
  double lat_min = 48.4, lat_max = 49.3;
  double lon_min = -125.0, lon_max = -123.2;
  int nlat = 100, nlon = 100;

  void check() const {
    require_valid(source, "grid source");
    if (nlat < 1 || nlon < 1) throw ConfigError("grid needs nlat, nlon >= 1");
    if (depths_m.empty()) throw ConfigError("grid needs at least one receiver depth");
    if (!(lat_min <= lat_max && lon_min <= lon_max)) throw ConfigError("grid bounds reversed");
  }
  std::size_t size() const {
    return static_cast<std::size_t>(nlat) * static_cast<std::size_t>(nlon) * depths_m.size();
  }
};

struct RunConfig {
  std::string command;
  std::string dataset_dir;
  std::string model_path;
  std::string route_path;
  std::string obs_path;
  std::string out;
  std::string log_path;  // train: JSON lines; defaults to <out>.log.jsonl
  std::string split = "test";

  DatasetSpec dataset;
  OracleConfig oracle;
  BathySource bathy = AnalyticBathy{};
  ModelConfig model;
  Ablation ablation = Ablation::Full;
  TrainConfig train;
  bool lambda_set = false;  // zero-mean runs default to lambda = 0 otherwise
  PredictGrid grid;

  double query_radius_km = 5.0;
  int query_count = 200;
  Conditioning conditioning = Conditioning::Prior;
  std::optional<double> stub_tl;  // optimize-voyage without a model

  std::uint64_t seed = 0;
  int threads = 1;
  int verbosity = 0;

  /// One seed drives data generation, oracle noise, initialization and shuffling.
  void apply_seed(std::uint64_t s) {
    seed = s;
    dataset.seed = s;
    oracle.seed = s;
    train.seed = s;
  }
};

inline GeoPoint point_from_json(const nlohmann::json& j, double depth = 0.0) {
  return {j.at("lat").get<double>(), j.at("lon").get<double>(), j.value("depth", depth)};
}

/// Structured config: {"seed", "paths", "dataset", "oracle", "bathymetry",
/// "model", "train", "predict", "assimilate"}; every key optional.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  try {
    if (j.contains("seed")) c.apply_seed(j["seed"].get<std::uint64_t>());
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      c.dataset_dir = p.value("dataset", c.dataset_dir);
      c.model_path = p.value("model", c.model_path);
      c.route_path = p.value("route", c.route_path);
      c.obs_path = p.value("observations", c.obs_path);
      c.out = p.value("out", c.out);
      c.log_path = p.value("log", c.log_path);
    }
    if (j.contains("dataset")) c.dataset = dataset_spec_from_json(j["dataset"], c.dataset);
    if (j.contains("oracle")) c.oracle = oracle_from_json(j["oracle"], c.oracle);
    if (j.contains("bathymetry")) c.bathy = bathy_from_json(j["bathymetry"]);
    if (j.contains("model")) {
      const auto& m = j["model"];
      c.model.encoder.bathy_dim = m.value("bathy_dim", c.model.encoder.bathy_dim);
      c.model.encoder.geom_dim = m.value("geom_dim", c.model.encoder.geom_dim);
      c.model.encoder.latent_dim = m.value("latent_dim", c.model.encoder.latent_dim);
      c.model.num_inducing = m.value("num_inducing", c.model.num_inducing);
      c.model.tl_max = m.value("tl_max", c.model.tl_max);
      if (m.contains("ablation")) c.ablation = parse_ablation(m["ablation"].get<std::string>());
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.lr_max = t.value("lr_max", c.train.lr_max);
      c.train.lr_min = t.value("lr_min", c.train.lr_min);
      c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
      c.train.clip_norm = t.value("clip_norm", c.train.clip_norm);
      if (t.contains("lambda")) {
        c.train.lambda = t["lambda"].get<double>();
        c.lambda_set = true;
      }
      c.train.patience = t.value("patience", c.train.patience);
      c.train.tolerance = t.value("tolerance", c.train.tolerance);
      c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
    }
    if (j.contains("predict")) {
      const auto& p = j["predict"];
      if (p.contains("source")) c.grid.source = point_from_json(p["source"], c.grid.source.depth);
      c.grid.f_hz = p.value("freq_hz", c.grid.f_hz);
      c.grid.depths_m = p.value("depths_m", c.grid.depths_m);
      c.grid.lat_min = p.value("lat_min", c.grid.lat_min);
      c.grid.lat_max = p.value("lat_max", c.grid.lat_max);
      c.grid.lon_min = p.value("lon_min", c.grid.lon_min);
      c.grid.lon_max = p.value("lon_max", c.grid.lon_max);
      c.grid.nlat = p.value("nlat", c.grid.nlat);
      c.grid.nlon = p.value("nlon", c.grid.nlon);
    }
    if (j.contains("assimilate")) {
      const auto& a = j["assimilate"];
      c.query_radius_km = a.value("query_radius_km", c.query_radius_km);
      c.query_count = a.value("query_count", c.query_count);
      if (a.contains("conditioning")) c.conditioning = parse_conditioning(a["conditioning"].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  return c;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

inline void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required ") + flag);
}

inline std::string join(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

// ---------------------------------------------------------------------------
// Commands

inline void cmd_gen_data(const RunConfig& c, std::ostream& out) {
  require(c.out, "--out");
  const DatasetSummary s = generate_dataset(c.dataset, c.bathy, c.oracle, c.out);
  nlohmann::ordered_json j = {{"rows", s.rows},
                              {"train", s.split.train},
                              {"val", s.split.val},
                              {"test", s.split.test},
                              {"manifest_sha256", s.manifest_sha256}};
  out << j.dump() << "\n";
}

inline SurrogateModel build_model(const RunConfig& c, const Dataset& d) {
  SurrogateModel m = SurrogateModel::create(ModelConfig::for_ablation(c.ablation, c.model), d.ranges, c.train.seed);
  m.provenance.dataset_hash = d.manifest_sha256;
  return m;
}

inline void cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require(c.dataset_dir, "--dataset");
  require(c.out, "--out");
  const Dataset d = Dataset::open(c.dataset_dir);
  const PreparedSet tr = prepare(d.split("train"), d.ranges);
  const PreparedSet va = prepare(d.split("val"), d.ranges);
  const std::string log_path = c.log_path.empty() ? c.out + ".log.jsonl" : c.log_path;
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw IoError("cannot write " + log_path);
  TrainConfig tc = c.train;
  if (c.ablation == Ablation::ZeroMean && !c.lambda_set) tc.lambda = 0.0;
  const TrainResult r = train(build_model(c, d), tr, va, tc, [&](const EpochRecord& e) {
    const std::string line = to_json(e).dump();
    log << line << "\n" << std::flush;
    if (c.verbosity > 0) err << line << "\n";
  });
  save(r.model, c.out);
  nlohmann::ordered_json j = {{"model", c.out},
                              {"ablation", to_string(r.model.config.ablation())},
                              {"epochs", r.log.size()},
                              {"best_epoch", r.best_epoch},
                              {"best", to_json(r.best_metrics)},
                              {"A", r.model.params.a(0)},
                              {"B", r.model.params.b(0)}};
  out << j.dump() << "\n";
}

inline void cmd_eval(const RunConfig& c, std::ostream& out) {
  require(c.model_path, "--model");
  require(c.dataset_dir, "--dataset");
  if (c.split != "train" && c.split != "val" && c.split != "test") throw ConfigError("--split must be train|val|test");
  const SurrogateModel m = load(c.model_path);
  const Dataset d = Dataset::open(c.dataset_dir);
  const Metrics metrics = validate(m, prepare(d.split(c.split), m.ranges, m.config.earth_radius_km));
  nlohmann::ordered_json j = {{"split", c.split}, {"ablation", to_string(m.config.ablation())}};
  j["metrics"] = to_json(metrics);
  const std::string text = j.dump(1) + "\n";
  if (c.out.empty()) {
    out << text;
  } else {
    write_text(c.out, text);
  }
}

inline std::vector<QueryPoint> grid_queries(const PredictGrid& g, const BathySource& bathy) {
  g.check();
  std::vector<QueryPoint> q;
  q.reserve(g.size());
  for (double depth : g.depths_m) {
    for (int i = 0; i < g.nlat; ++i) {
      const double lat = g.nlat == 1 ? g.lat_min : g.lat_min + (g.lat_max - g.lat_min) * i / (g.nlat - 1);
      for (int k = 0; k < g.nlon; ++k) {
        const double lon = g.nlon == 1 ? g.lon_min : g.lon_min + (g.lon_max - g.lon_min) * k / (g.nlon - 1);
        const GeoPoint rcv{lat, lon, depth};
        q.push_back({g.source, rcv, g.f_hz, sample_profile(g.source, rcv, bathy), std::nullopt});
      }
    }
  }
  return q;
}

inline void cmd_predict(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require(c.model_path, "--model");
  require(c.out, "--out");
  const SurrogateModel m = load(c.model_path);
  const BathySource bathy = c.dataset_dir.empty() ? c.bathy : Dataset::open(c.dataset_dir).bathy;
  const std::vector<QueryPoint> q = grid_queries(c.grid, bathy);
  const auto t0 = std::chrono::steady_clock::now();
  const PreparedSet set = prepare_queries(m, q);
  const PredictiveBatch pb = SurrogatePredictor(m).predict(set, true);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream f(c.out);
  if (!f) throw IoError("cannot write " + c.out);
  f << "lat,lon,depth,freq,tl_mean,tl_sigma\n";
  char buf[160];
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto j = static_cast<Index>(i);
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.2f,%g,%.4f,%.4f\n", q[i].rcv.lat, q[i].rcv.lon, q[i].rcv.depth,
                  q[i].f_hz, pb.mean(j), std::sqrt(pb.variance(j)));
    f << buf;
  }
  if (!f) throw IoError("failed writing " + c.out);
  if (c.verbosity > 0) err << "predicted " << q.size() << " points in " << seconds << " s\n";
  out << nlohmann::ordered_json{{"points", q.size()}, {"seconds", seconds}, {"out", c.out}}.dump() << "\n";
}

inline void cmd_optimize_voyage(const RunConfig& c, std::ostream& out) {
  require(c.route_path, "--route");
  require(c.out, "--out");
  if (!std::filesystem::is_directory(c.out)) throw IoError("output directory does not exist: " + c.out);
  const VoyageRequest req = voyage_request_from_json(read_json_file(c.route_path));
  VoyagePlan plan;
  if (c.stub_tl) {
    plan = optimize_route(ConstantTl{*c.stub_tl}, req.route, req.receptor);
  } else {
    require(c.model_path, "--model (or --stub-tl)");
    const SurrogateModel m = load(c.model_path);
    const BathySource bathy = c.dataset_dir.empty() ? c.bathy : Dataset::open(c.dataset_dir).bathy;
    plan = optimize_route(SurrogateTl(m, bathy), req.route, req.receptor);
  }
  write_text(join(c.out, "voyage_plan.json"), to_json(plan).dump(1) + "\n");
  write_rl_series_csv(join(c.out, "rl_series.csv"), plan);
  nlohmann::ordered_json j = {{"legs", plan.legs.size()},
                              {"total_sel_db", plan.total_sel_db},
                              {"baseline_sel_db", plan.baseline_sel_db},
                              {"total_time_s", plan.total_time_s},
                              {"budget_s", plan.budget_s}};
  out << j.dump() << "\n";
}

inline void cmd_assimilate(const RunConfig& c, std::ostream& out) {
  require(c.model_path, "--model");
  require(c.obs_path, "--obs");
  require(c.out, "--out");
  if (!std::filesystem::is_directory(c.out)) throw IoError("output directory does not exist: " + c.out);
  const SurrogateModel m = load(c.model_path);
  std::optional<Dataset> d;
  if (!c.dataset_dir.empty()) d = Dataset::open(c.dataset_dir);
  const BathySource bathy = d ? d->bathy : c.bathy;
  const AssimilatedModel a = assimilate(m, read_observations_csv(c.obs_path, bathy), c.conditioning);
  // queries around every hydrophone; with a dataset the oracle supplies ground truth
  std::vector<QueryPoint> q;
  for (std::size_t k = 0; k < a.observations().size(); ++k) {
    auto part = query_disk(a.observations()[k], c.query_radius_km, c.query_count, derive_seed(c.seed, k), bathy);
    q.insert(q.end(), part.begin(), part.end());
  }
  if (d) {
    const OracleConfig oracle = oracle_from_json(d->manifest.at("oracle"));
    for (auto& p : q) p.truth = oracle_tl(p.src, p.rcv, p.f_hz, p.bathy, oracle);
  }
  const AssimilationReport rep = assimilation_report(a, q);
  write_text(join(c.out, "assimilation_report.json"), to_json(rep).dump(1) + "\n");
  write_text(join(c.out, "assimilation_sidecar.json"),
             assimilation_sidecar(a, c.model_path, sha256_file(c.model_path)).dump(1) + "\n");
  out << to_json(rep)["summary"].dump() << "\n";
}

/// Dispatches `c.command` and maps failures onto exit codes.
inline int run(const RunConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    if (c.command == "gen-data") {
      cmd_gen_data(c, out);
    } else if (c.command == "train") {
      cmd_train(c, out, err);
    } else if (c.command == "eval") {
      cmd_eval(c, out);
    } else if (c.command == "predict") {
      cmd_predict(c, out, err);
    } else if (c.command == "optimize-voyage") {
      cmd_optimize_voyage(c, out);
    } else if (c.command == "assimilate") {
      cmd_assimilate(c, out);
    } else {
      throw ConfigError("unknown command '" + c.command + "'");
    }
    return kOk;
  } catch (const FailureEscalation& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kIoError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const OutOfRange& e) {
    err << "out of range: " << e.what() << "\n";
    return kConfigError;
  } catch (const OutOfGrid& e) {
    err << "out of grid: " << e.what() << "\n";
    return kConfigError;
  } catch (const ShapeMismatch& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace acoustwin::cli

#endif  // ACOUSTWIN_CLI_HPP
