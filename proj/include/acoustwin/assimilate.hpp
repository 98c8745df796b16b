#ifndef ACOUSTWIN_ASSIMILATE_HPP
#define ACOUSTWIN_ASSIMILATE_HPP

// Conditioning a trained surrogate on sparse hydrophone TL observations.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acoustwin/datagen.hpp"
#include "acoustwin/errors.hpp"
#include "acoustwin/model.hpp"
#include "acoustwin/svgp.hpp"

namespace acoustwin {

struct HydrophoneObs {
  GeoPoint source;
  GeoPoint position;
  double f_hz = 0.0;
  double tl_obs = 0.0;
  BathyProfile bathy;                // source -> hydrophone track
  std::optional<double> noise_var;  // defaults to the model's sigma_n^2

  void check() const {
    require_valid(source, "observation source");
    require_valid(position, "hydrophone");
    if (!(tl_obs > 0.0 && tl_obs <= kTlClip)) throw OutOfRange("tl_obs must lie in (0, 200]");
    if (noise_var && !(*noise_var >= 0.0)) throw OutOfRange("observation noise must be >= 0");
  }
};

/// A query location; `truth` enables error summaries.
struct QueryPoint {
  GeoPoint src;
  GeoPoint rcv;
  double f_hz = 0.0;
  BathyProfile bathy;
  std::optional<double> truth;
};

/// Frozen surrogate plus the conditioned residual posterior.
class AssimilatedModel {
 public:
  AssimilatedModel(const SurrogateModel& model, ConditionedPosterior post, std::vector<HydrophoneObs> obs)
      : model_(&model), post_(std::move(post)), obs_(std::move(obs)) {}

  /// Posterior predictive TL; `clamp` caps the mean at the model's TL_max.
  PredictiveBatch predict(const PreparedSet& set, bool clamp) const {
    const Marginals gp = post_.marginals(embed(*model_, set));
    PredictiveBatch out;
    out.mean = physics_mean(model_->params, set) + gp.mean;
    out.variance = gp.var;
    out.clamped.assign(static_cast<std::size_t>(set.size()), false);
    if (clamp) {
      for (Index i = 0; i < set.size(); ++i) {
        if (out.mean(i) > model_->config.tl_max) {
          out.mean(i) = model_->config.tl_max;
          out.clamped[static_cast<std::size_t>(i)] = true;
        }
      }
    }
    return out;
  }

  const SurrogateModel& model() const { return *model_; }
  const std::vector<HydrophoneObs>& observations() const { return obs_; }
  const Vector& innovation() const { return post_.innovation(); }
  Conditioning mode() const { return post_.mode(); }

 private:
  const SurrogateModel* model_;
  ConditionedPosterior post_;
  std::vector<HydrophoneObs> obs_;
};

inline PreparedSet prepare_observations(const SurrogateModel& model, std::span<const HydrophoneObs> obs) {
  PreparedSet set = allocate_prepared(static_cast<Index>(obs.size()), true);
  for (Index j = 0; j < set.size(); ++j) {
    const HydrophoneObs& o = obs[static_cast<std::size_t>(j)];
    o.check();
    prepare_into(set, j, o.source, o.position, o.f_hz, o.bathy, model.ranges, model.config.earth_radius_km);
    set.target(j) = o.tl_obs;
  }
  return set;
}

inline PreparedSet prepare_queries(const SurrogateModel& model, std::span<const QueryPoint> q) {
  PreparedSet set = allocate_prepared(static_cast<Index>(q.size()), false);
  for (Index j = 0; j < set.size(); ++j) {
    const QueryPoint& p = q[static_cast<std::size_t>(j)];
    prepare_into(set, j, p.src, p.rcv, p.f_hz, p.bathy, model.ranges, model.config.earth_radius_km);
  }
  return set;
}

/// Observations enter in residual space, y_k - TL_phys(x_k), against the
/// frozen encoder embeddings. The model must outlive the result.
inline AssimilatedModel assimilate(const SurrogateModel& model, std::vector<HydrophoneObs> obs,
                                   Conditioning mode = Conditioning::Prior) {
  if (obs.empty()) throw ConfigError("assimilate needs at least one observation");
  const PreparedSet set = prepare_observations(model, obs);
  const Vector residuals = set.target - physics_mean(model.params, set);
  Vector noise(set.size());
  const double default_noise = model.params.noise_var();
  for (Index j = 0; j < set.size(); ++j) noise(j) = obs[static_cast<std::size_t>(j)].noise_var.value_or(default_noise);
  ConditionedPosterior post(SvgpPredictor(model.params.variational(), model.params.hyper()), embed(model, set),
                            residuals, noise, mode);
  return AssimilatedModel(model, std::move(post), std::move(obs));
}

struct QueryResult {
  double prior_mean = 0.0;
  double prior_sd = 0.0;
  double post_mean = 0.0;
  double post_sd = 0.0;
  double truth = std::numeric_limits<double>::quiet_NaN();
};

struct AssimilationReport {
  std::vector<QueryResult> queries;
  std::vector<QueryResult> at_observations;  // truth = tl_obs
  double mean_signed_error_before = std::numeric_limits<double>::quiet_NaN();
  double mean_signed_error_after = std::numeric_limits<double>::quiet_NaN();
  double mean_sd_before = 0.0;
  double mean_sd_after = 0.0;
  std::size_t truth_count = 0;
};

inline std::vector<QueryResult> compare(const AssimilatedModel& a, const PreparedSet& set) {
  const PredictiveBatch prior = SurrogatePredictor(a.model()).predict(set, true);
  const PredictiveBatch post = a.predict(set, true);
  std::vector<QueryResult> out(static_cast<std::size_t>(set.size()));
  for (Index i = 0; i < set.size(); ++i) {
    auto& r = out[static_cast<std::size_t>(i)];
    r.prior_mean = prior.mean(i);
    r.prior_sd = std::sqrt(prior.variance(i));
    r.post_mean = post.mean(i);
    r.post_sd = std::sqrt(post.variance(i));
  }
  return out;
}

inline AssimilationReport assimilation_report(const AssimilatedModel& a, std::span<const QueryPoint> queries) {
  AssimilationReport rep;
  rep.queries = compare(a, prepare_queries(a.model(), queries));
  rep.at_observations = compare(a, prepare_observations(a.model(), a.observations()));
  for (std::size_t k = 0; k < rep.at_observations.size(); ++k) rep.at_observations[k].truth = a.observations()[k].tl_obs;
  double before = 0.0, after = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    QueryResult& r = rep.queries[i];
    rep.mean_sd_before += r.prior_sd;
    rep.mean_sd_after += r.post_sd;
    if (queries[i].truth) {
      r.truth = *queries[i].truth;
      before += r.prior_mean - r.truth;
      after += r.post_mean - r.truth;
      ++rep.truth_count;
    }
  }
  if (!queries.empty()) {
    rep.mean_sd_before /= static_cast<double>(queries.size());
    rep.mean_sd_after /= static_cast<double>(queries.size());
  }
  if (rep.truth_count > 0) {
    rep.mean_signed_error_before = before / static_cast<double>(rep.truth_count);
    rep.mean_signed_error_after = after / static_cast<double>(rep.truth_count);
  }
  return rep;
}

/// `n` queries uniform in a disk of `radius_km` around the hydrophone, at its
/// depth, for the observation's source and band.
inline std::vector<QueryPoint> query_disk(const HydrophoneObs& obs, double radius_km, int n, std::uint64_t seed,
                                          const BathySource& bathy) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<QueryPoint> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double r = radius_km * std::sqrt(unit(rng));
    GeoPoint p = destination_point(obs.position, 2.0 * std::numbers::pi * unit(rng), r);
    p.depth = obs.position.depth;
    out.push_back({obs.source, p, obs.f_hz, sample_profile(obs.source, p, bathy), std::nullopt});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline std::string observation_csv_header() {
  return "src_lat,src_lon,src_depth,hyd_lat,hyd_lon,hyd_depth,freq_hz,tl_obs_db";
}

/// Reads observations; track profiles come from `bathy`. An optional ninth
/// column `noise_var` overrides the model noise per row.
inline std::vector<HydrophoneObs> read_observations_csv(const std::string& path, const BathySource& bathy) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty observation file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const bool with_noise = line == observation_csv_header() + ",noise_var";
  if (!with_noise && line != observation_csv_header()) throw FormatError("unexpected header in " + path);
  const int cols = with_noise ? 9 : 8;
  std::vector<HydrophoneObs> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    double v[9];
    const char* p = line.c_str();
    for (int c = 0; c < cols; ++c) {
      char* end = nullptr;
      v[c] = std::strtod(p, &end);
      const bool last = c == cols - 1;
      if (end == p || (!last && *end != ',') || (last && *end != '\0' && *end != '\r')) {
        throw FormatError(path + ":" + std::to_string(lineno) + ": malformed field " + std::to_string(c + 1));
      }
      p = end + 1;
    }
    HydrophoneObs o;
    o.source = {v[0], v[1], v[2]};
    o.position = {v[3], v[4], v[5]};
    o.f_hz = v[6];
    o.tl_obs = v[7];
    if (with_noise) o.noise_var = v[8];
    o.check();
    o.bathy = sample_profile(o.source, o.position, bathy);
    out.push_back(o);
  }
  if (out.empty()) throw FormatError("no observations in " + path);
  return out;
}

inline nlohmann::ordered_json to_json(const QueryResult& r) {
  nlohmann::ordered_json j = {{"prior_mean", r.prior_mean},
                              {"prior_sd", r.prior_sd},
                              {"post_mean", r.post_mean},
                              {"post_sd", r.post_sd}};
  if (!std::isnan(r.truth)) j["truth"] = r.truth;
  return j;
}

inline nlohmann::ordered_json to_json(const AssimilationReport& rep) {
  nlohmann::ordered_json q = nlohmann::ordered_json::array();
  for (const auto& r : rep.queries) q.push_back(to_json(r));
  nlohmann::ordered_json o = nlohmann::ordered_json::array();
  for (const auto& r : rep.at_observations) o.push_back(to_json(r));
  nlohmann::ordered_json summary = {{"queries", rep.queries.size()},
                                    {"mean_sd_before", rep.mean_sd_before},
                                    {"mean_sd_after", rep.mean_sd_after}};
  if (rep.truth_count > 0) {
    summary["mean_signed_error_before"] = rep.mean_signed_error_before;
    summary["mean_signed_error_after"] = rep.mean_signed_error_after;
  }
  return {{"summary", summary}, {"observations", o}, {"queries", q}};
}

/// Sidecar recording an assimilation against a base model file. Reapplying it
/// reproduces the same posterior.
inline nlohmann::ordered_json assimilation_sidecar(const AssimilatedModel& a, const std::string& model_path,
                                                   const std::string& model_sha256) {
  nlohmann::ordered_json obs = nlohmann::ordered_json::array();
  for (const auto& o : a.observations()) {
    nlohmann::ordered_json j = {{"source", {o.source.lat, o.source.lon, o.source.depth}},
                                {"position", {o.position.lat, o.position.lon, o.position.depth}},
                                {"f_hz", o.f_hz},
                                {"tl_obs", o.tl_obs},
                                {"bathy", o.bathy.depth_m}};
    if (o.noise_var) j["noise_var"] = *o.noise_var;
    obs.push_back(j);
  }
  return {{"format", "acoustwin-assimilation"},
          {"format_version", 1},
          {"base_model", model_path},
          {"base_model_sha256", model_sha256},
          {"default_noise_var", a.model().params.noise_var()},
          {"conditioning", a.mode() == Conditioning::Prior ? "prior" : "posterior"},
          {"observations", obs}};
}

inline Conditioning parse_conditioning(const std::string& s) {
  if (s == "prior") return Conditioning::Prior;
  if (s == "posterior") return Conditioning::Posterior;
  throw ConfigError("conditioning must be 'prior' or 'posterior', got '" + s + "'");
}

inline std::vector<HydrophoneObs> observations_from_sidecar(const nlohmann::ordered_json& j) {
  if (j.value("format", "") != "acoustwin-assimilation") throw FormatError("not an assimilation sidecar");
  if (j.value("format_version", 0) != 1) throw VersionMismatch("unsupported sidecar version");
  std::vector<HydrophoneObs> out;
  try {
    for (const auto& o : j.at("observations")) {
      HydrophoneObs h;
      h.source = {o.at("source").at(0), o.at("source").at(1), o.at("source").at(2)};
      h.position = {o.at("position").at(0), o.at("position").at(1), o.at("position").at(2)};
      h.f_hz = o.at("f_hz");
      h.tl_obs = o.at("tl_obs");
      const auto& b = o.at("bathy");
      if (b.size() != static_cast<std::size_t>(kProfileLength)) throw FormatError("sidecar profile length");
      for (int k = 0; k < kProfileLength; ++k) h.bathy.depth_m[k] = b.at(k);
      if (o.contains("noise_var")) h.noise_var = o["noise_var"].get<double>();
      out.push_back(h);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed sidecar: " + std::string(e.what()));
  }
  return out;
}

}  // namespace acoustwin

#endif  // ACOUSTWIN_ASSIMILATE_HPP
