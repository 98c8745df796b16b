#ifndef ACOUSTWIN_DATAGEN_HPP
#define ACOUSTWIN_DATAGEN_HPP

// Synthetic bathymetry, a closed-form TL oracle, third-octave bands and
// dataset generation/serialization.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "acoustwin/encoders.hpp"
#include "acoustwin/errors.hpp"
#include "acoustwin/geo.hpp"
#include "acoustwin/hash.hpp"
#include "acoustwin/model.hpp"
#include "acoustwin/physics.hpp"

namespace acoustwin {

using Json = nlohmann::ordered_json;

inline constexpr double kTlClip = 200.0;
inline constexpr double kTlFloor = 0.01;

/// Nominal one-third-octave centre frequencies (Hz) inside [f_lo, f_hi].
inline std::vector<double> third_octave_bands(double f_lo, double f_hi) {
  static constexpr double kNominal[] = {
      10,   12.5, 16,   20,   25,   31.5, 40,    50,    63,    80,    100,   125,   160,   200,
      250,  315,  400,  500,  630,  800,  1000,  1250,  1600,  2000,  2500,  3150,  4000,  5000,
      6300, 8000, 10000, 12500, 16000, 20000};
  if (!(f_lo <= f_hi) || f_lo <= 0.0) throw ConfigError("third_octave_bands: need 0 < f_lo <= f_hi");
  std::vector<double> out;
  for (double f : kNominal) {
    if (f >= f_lo * (1 - 1e-9) && f <= f_hi * (1 + 1e-9)) out.push_back(f);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bathymetry

/// depth = base + amplitude (0.5 + 0.5 sin(a lat) cos(b lon)), angles in
/// radians, clamped to [min_depth, max_depth].
struct AnalyticBathy {
  double base = 50.0;
  double amplitude = 300.0;
  double a = 40.0;
  double b = 40.0;
  double min_depth = 10.0;
  double max_depth = 400.0;

  double depth(double lat, double lon) const {
    const double s = std::sin(a * deg2rad(lat)) * std::cos(b * deg2rad(lon));
    return std::clamp(base + amplitude * (0.5 + 0.5 * s), min_depth, max_depth);
  }
};

/// Regular grid, depth(i, j) at (lat0 + i dlat, lon0 + j dlon), bilinear.
struct GridBathy {
  double lat0 = 0.0;
  double lon0 = 0.0;
  double dlat = 1.0;
  double dlon = 1.0;
  Matrix depth_m;  // nrows x ncols
  std::string path;  // source file, if any

  void check() const {
    if (depth_m.rows() < 2 || depth_m.cols() < 2) throw FormatError("bathymetry grid needs >= 2x2 nodes");
    if (dlat == 0.0 || dlon == 0.0 || !std::isfinite(dlat) || !std::isfinite(dlon)) {
      throw FormatError("bathymetry grid axes must be strictly monotone");
    }
    if (!depth_m.allFinite() || depth_m.minCoeff() < 1.0 || depth_m.maxCoeff() > 10000.0) {
      throw FormatError("bathymetry grid depths must lie in [1, 10000] m");
    }
  }

  double depth(double lat, double lon) const {
    const double fi = (lat - lat0) / dlat;
    const double fj = (lon - lon0) / dlon;
    const double tol = 1e-9;
    const auto nr = static_cast<double>(depth_m.rows() - 1);
    const auto nc = static_cast<double>(depth_m.cols() - 1);
    if (!(fi >= -tol && fi <= nr + tol && fj >= -tol && fj <= nc + tol)) {
      throw OutOfGrid("point (" + std::to_string(lat) + ", " + std::to_string(lon) +
                      ") outside the bathymetry grid");
    }
    const double ci = std::clamp(fi, 0.0, nr);
    const double cj = std::clamp(fj, 0.0, nc);
    const Index i0 = std::min<Index>(static_cast<Index>(ci), depth_m.rows() - 2);
    const Index j0 = std::min<Index>(static_cast<Index>(cj), depth_m.cols() - 2);
    const double u = ci - static_cast<double>(i0);
    const double v = cj - static_cast<double>(j0);
    return (1 - u) * (1 - v) * depth_m(i0, j0) + u * (1 - v) * depth_m(i0 + 1, j0) +
           (1 - u) * v * depth_m(i0, j0 + 1) + u * v * depth_m(i0 + 1, j0 + 1);
  }
};

/// Plain-text grid: "lat0 lon0 dlat dlon nrows ncols" then nrows x ncols
/// depths in row-major order. Lines starting with '#' are skipped.
inline GridBathy read_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read bathymetry grid " + path);
  std::stringstream clean;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    clean << line << '\n';
  }
  GridBathy g;
  g.path = path;
  Index nrows = 0;
  Index ncols = 0;
  if (!(clean >> g.lat0 >> g.lon0 >> g.dlat >> g.dlon >> nrows >> ncols) || nrows < 2 || ncols < 2) {
    throw FormatError("bad bathymetry grid header in " + path);
  }
  g.depth_m.resize(nrows, ncols);
  for (Index i = 0; i < nrows; ++i) {
    for (Index j = 0; j < ncols; ++j) {
      if (!(clean >> g.depth_m(i, j))) throw FormatError("truncated bathymetry grid " + path);
    }
  }
  g.check();
  return g;
}

using BathySource = std::variant<AnalyticBathy, GridBathy>;

inline double synth_depth(double lat, double lon, const BathySource& src) {
  return std::visit([&](const auto& b) { return b.depth(lat, lon); }, src);
}

/// Seabed depths at the 128 track midpoints xi_k = (k + 0.5) / 128.
inline BathyProfile sample_profile(const GeoPoint& src, const GeoPoint& rcv, const BathySource& bathy) {
  BathyProfile p;
  for (int k = 0; k < kProfileLength; ++k) {
    const double xi = (k + 0.5) / kProfileLength;
    const GeoPoint q = interpolate_geodesic(src, rcv, xi);
    p.depth_m[k] = synth_depth(q.lat, q.lon, bathy);
  }
  return p;
}

inline Json to_json(const BathySource& src) {
  if (const auto* a = std::get_if<AnalyticBathy>(&src)) {
    return {{"kind", "analytic"}, {"base", a->base},          {"amplitude", a->amplitude},
            {"a", a->a},          {"b", a->b},                {"min_depth", a->min_depth},
            {"max_depth", a->max_depth}};
  }
  const auto& g = std::get<GridBathy>(src);
  return {{"kind", "grid"}, {"path", g.path}, {"sha256", g.path.empty() ? "" : sha256_file(g.path)}};
}

inline BathySource bathy_from_json(const Json& j) {
  const std::string kind = j.value("kind", "analytic");
  if (kind == "grid") return read_grid_file(j.at("path").get<std::string>());
  if (kind != "analytic") throw ConfigError("unknown bathymetry kind '" + kind + "'");
  AnalyticBathy a;
  a.base = j.value("base", a.base);
  a.amplitude = j.value("amplitude", a.amplitude);
  a.a = j.value("a", a.a);
  a.b = j.value("b", a.b);
  a.min_depth = j.value("min_depth", a.min_depth);
  a.max_depth = j.value("max_depth", a.max_depth);
  if (!(a.min_depth >= 1.0 && a.min_depth < a.max_depth && a.max_depth <= 10000.0)) {
    throw ConfigError("analytic bathymetry clamp must satisfy 1 <= min < max <= 10000");
  }
  return a;
}

// ---------------------------------------------------------------------------
// Oracle

struct OracleConfig {
  double c_b = 2.0;         // dB/km shallow-water excess
  double d_ref = 100.0;     // m
  double c_i = 3.0;         // dB interference amplitude
  double lambda0 = 500.0;   // m, interference scale at 1 kHz
  double c_z = 5.0;         // dB depth term
  double sigma_data = 1.0;  // dB noise
  std::uint64_t seed = 0;

  void check() const {
    if (c_b < 0 || c_i < 0 || c_z < 0 || sigma_data < 0) throw ConfigError("oracle coefficients must be >= 0");
    if (d_ref <= 0 || lambda0 <= 0) throw ConfigError("oracle d_ref and lambda0 must be > 0");
  }
};

inline Json to_json(const OracleConfig& c) {
  return {{"c_b", c.c_b}, {"d_ref", c.d_ref}, {"c_i", c.c_i},
          {"lambda0", c.lambda0}, {"c_z", c.c_z}, {"sigma_data", c.sigma_data},
          {"seed", c.seed}};
}

inline OracleConfig oracle_from_json(const Json& j, OracleConfig c = {}) {
  c.c_b = j.value("c_b", c.c_b);
  c.d_ref = j.value("d_ref", c.d_ref);
  c.c_i = j.value("c_i", c.c_i);
  c.lambda0 = j.value("lambda0", c.lambda0);
  c.c_z = j.value("c_z", c.c_z);
  c.sigma_data = j.value("sigma_data", c.sigma_data);
  c.seed = j.value("seed", c.seed);
  c.check();
  return c;
}

/// Noise-free oracle TL before clipping.
inline double oracle_tl_raw(const GeoPoint& src, const GeoPoint& rcv, double f_hz,
                            const BathyProfile& profile, const OracleConfig& cfg) {
  const double r_m = slant_range_m(src, rcv);
  const double r_km = r_m / 1000.0;
  double shallow = 0.0;
  for (double d : profile.depth_m) shallow += std::max(0.0, 1.0 - d / cfg.d_ref);
  shallow /= kProfileLength;
  const double wavelength = cfg.lambda0 * std::sqrt(1000.0 / f_hz);
  return spreading_db(r_m, 20.0) + thorp_alpha(f_hz / 1000.0) * r_km + cfg.c_b * r_km * shallow +
         cfg.c_i * std::sin(2.0 * std::numbers::pi * r_m / wavelength) +
         cfg.c_z * std::sin(std::numbers::pi * rcv.depth / 110.0) *
             std::sin(std::numbers::pi * src.depth / 30.0);
}

/// Oracle TL in (0, 200]; Gaussian noise of sigma_data when `noise` is given.
inline double oracle_tl(const GeoPoint& src, const GeoPoint& rcv, double f_hz,
                        const BathyProfile& profile, const OracleConfig& cfg, Rng* noise = nullptr) {
  double tl = oracle_tl_raw(src, rcv, f_hz, profile, cfg);
  if (noise != nullptr && cfg.sigma_data > 0.0) {
    tl += std::normal_distribution<double>(0.0, cfg.sigma_data)(*noise);
  }
  return std::clamp(tl, kTlFloor, kTlClip);
}

// ---------------------------------------------------------------------------
// Dataset

struct DatasetSpec {
  int n_sources = 20;
  int receivers_per_source = 172;
  double radius_km = 100.0;
  double max_rcv_depth_m = 110.0;
  double src_depth_min_m = 2.0;
  double src_depth_max_m = 20.0;
  double f_lo_hz = 12.5;
  double f_hi_hz = 8000.0;
  double train_fraction = 0.75;
  double val_fraction = 0.15;
  double test_fraction = 0.10;
  GeoPoint path_start{48.4, -125.0, 0.0};
  GeoPoint path_end{49.3, -123.2, 0.0};
  std::uint64_t seed = 0;

  void check() const {
    if (n_sources < 1 || receivers_per_source < 1) throw ConfigError("need >= 1 source and receiver");
    if (!(radius_km > 0.0)) throw ConfigError("radius_km must be > 0");
    if (!(max_rcv_depth_m >= 0.0)) throw ConfigError("max_rcv_depth_m must be >= 0");
    if (!(src_depth_min_m >= 0.0 && src_depth_min_m <= src_depth_max_m)) {
      throw ConfigError("source depth range invalid");
    }
    if (train_fraction < 0 || val_fraction < 0 || test_fraction < 0 ||
        std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
      throw ConfigError("split fractions must be >= 0 and sum to 1");
    }
    if (third_octave_bands(f_lo_hz, f_hi_hz).empty()) throw ConfigError("no third-octave band in range");
    require_valid(path_start, "path_start");
    require_valid(path_end, "path_end");
  }

  std::size_t band_count() const { return third_octave_bands(f_lo_hz, f_hi_hz).size(); }
  std::size_t row_count() const {
    return static_cast<std::size_t>(n_sources) * static_cast<std::size_t>(receivers_per_source) * band_count();
  }
};

inline Json to_json(const DatasetSpec& s) {
  return {{"n_sources", s.n_sources},
          {"receivers_per_source", s.receivers_per_source},
          {"radius_km", s.radius_km},
          {"max_rcv_depth_m", s.max_rcv_depth_m},
          {"src_depth_min_m", s.src_depth_min_m},
          {"src_depth_max_m", s.src_depth_max_m},
          {"f_lo_hz", s.f_lo_hz},
          {"f_hi_hz", s.f_hi_hz},
          {"train_fraction", s.train_fraction},
          {"val_fraction", s.val_fraction},
          {"test_fraction", s.test_fraction},
          {"path_start", {s.path_start.lat, s.path_start.lon}},
          {"path_end", {s.path_end.lat, s.path_end.lon}},
          {"seed", s.seed}};
}

inline DatasetSpec dataset_spec_from_json(const Json& j, DatasetSpec s = {}) {
  s.n_sources = j.value("n_sources", s.n_sources);
  s.receivers_per_source = j.value("receivers_per_source", s.receivers_per_source);
  s.radius_km = j.value("radius_km", s.radius_km);
  s.max_rcv_depth_m = j.value("max_rcv_depth_m", s.max_rcv_depth_m);
  s.src_depth_min_m = j.value("src_depth_min_m", s.src_depth_min_m);
  s.src_depth_max_m = j.value("src_depth_max_m", s.src_depth_max_m);
  s.f_lo_hz = j.value("f_lo_hz", s.f_lo_hz);
  s.f_hi_hz = j.value("f_hi_hz", s.f_hi_hz);
  s.train_fraction = j.value("train_fraction", s.train_fraction);
  s.val_fraction = j.value("val_fraction", s.val_fraction);
  s.test_fraction = j.value("test_fraction", s.test_fraction);
  if (j.contains("path_start")) s.path_start = {j["path_start"].at(0), j["path_start"].at(1), 0.0};
  if (j.contains("path_end")) s.path_end = {j["path_end"].at(0), j["path_end"].at(1), 0.0};
  s.seed = j.value("seed", s.seed);
  s.check();
  return s;
}

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// Rounded split sizes; the test split takes the remainder.
inline SplitCounts split_counts(std::size_t n, const DatasetSpec& s) {
  SplitCounts c;
  c.train = std::min(n, static_cast<std::size_t>(std::llround(s.train_fraction * static_cast<double>(n))));
  c.val = std::min(n - c.train, static_cast<std::size_t>(std::llround(s.val_fraction * static_cast<double>(n))));
  c.test = n - c.train - c.val;
  return c;
}

/// Source positions on the seeded path between path_start and path_end.
inline std::vector<GeoPoint> source_positions(const DatasetSpec& spec) {
  Rng rng(derive_seed(spec.seed, 0x5eedULL));
  std::uniform_real_distribution<double> jitter(-0.25, 0.25);
  std::uniform_real_distribution<double> depth(spec.src_depth_min_m, spec.src_depth_max_m);
  std::vector<GeoPoint> out;
  for (int s = 0; s < spec.n_sources; ++s) {
    const double xi = std::clamp((s + 0.5 + jitter(rng)) / spec.n_sources, 0.0, 1.0);
    GeoPoint p = interpolate_geodesic(spec.path_start, spec.path_end, xi);
    p.depth = depth(rng);
    out.push_back(p);
  }
  return out;
}

/// All rows in generation order: source-major, then receiver, then band.
inline std::vector<TrainingSample> generate_samples(const DatasetSpec& spec, const BathySource& bathy,
                                                    const OracleConfig& oracle) {
  spec.check();
  oracle.check();
  const std::vector<double> bands = third_octave_bands(spec.f_lo_hz, spec.f_hi_hz);
  const std::vector<GeoPoint> sources = source_positions(spec);
  std::vector<TrainingSample> rows;
  rows.reserve(spec.row_count());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uint64_t row_index = 0;
  for (int s = 0; s < spec.n_sources; ++s) {
    for (int r = 0; r < spec.receivers_per_source; ++r) {
      const std::uint64_t pair = static_cast<std::uint64_t>(s) * spec.receivers_per_source + r;
      Rng prng(derive_seed(spec.seed, 0x10000ULL + pair));
      const double dist = std::min(spec.radius_km * std::sqrt(unit(prng)), spec.radius_km);
      const double bearing = 2.0 * std::numbers::pi * unit(prng);
      GeoPoint rcv = destination_point(sources[s], bearing, dist);
      rcv.depth = spec.max_rcv_depth_m * unit(prng);
      const BathyProfile profile = sample_profile(sources[s], rcv, bathy);
      for (double f : bands) {
        Rng nrng(derive_seed(oracle.seed ^ spec.seed, row_index++));
        rows.push_back({sources[s], rcv, f, profile, oracle_tl(sources[s], rcv, f, profile, oracle, &nrng)});
      }
    }
  }
  return rows;
}

/// Padded min/max of one quantity; the lower bound never drops below `floor`.
inline Interval padded_interval(double lo, double hi, double frac, double floor) {
  const double span = hi - lo;
  const double pad = span > 0.0 ? frac * span : std::max(1.0, frac * std::abs(hi));
  return {std::max(floor, lo - pad), hi + pad};
}

/// Training-split ranges widened by `pad` of their span so held-out rows and
/// nearby queries stay inside. Frequencies use the exact band extent.
inline NormRanges norm_ranges_from(const std::vector<TrainingSample>& rows, double pad = 0.05) {
  if (rows.empty()) throw ConfigError("cannot compute normalization ranges from an empty split");
  double sd_lo = 1e300, sd_hi = -1e300, rd_lo = 1e300, rd_hi = -1e300;
  double b_lo = 1e300, b_hi = -1e300, f_lo = 1e300, f_hi = -1e300;
  for (const auto& r : rows) {
    sd_lo = std::min(sd_lo, r.src.depth);
    sd_hi = std::max(sd_hi, r.src.depth);
    rd_lo = std::min(rd_lo, r.rcv.depth);
    rd_hi = std::max(rd_hi, r.rcv.depth);
    f_lo = std::min(f_lo, r.f_hz);
    f_hi = std::max(f_hi, r.f_hz);
    for (double d : r.bathy.depth_m) {
      b_lo = std::min(b_lo, d);
      b_hi = std::max(b_hi, d);
    }
  }
  NormRanges n;
  n.src_depth = padded_interval(sd_lo, sd_hi, pad, 0.0);
  n.rcv_depth = padded_interval(rd_lo, rd_hi, pad, 0.0);
  n.bathy = padded_interval(b_lo, b_hi, pad, 0.0);
  n.freq_hz = f_hi > f_lo ? Interval{f_lo, f_hi} : padded_interval(f_lo, f_hi, pad, 0.0);
  return n;
}

inline std::string csv_header() {
  std::string h = "src_lat,src_lon,src_depth,rcv_lat,rcv_lon,rcv_depth,freq_hz";
  char buf[16];
  for (int k = 0; k < kProfileLength; ++k) {
    std::snprintf(buf, sizeof buf, ",bathy_%03d", k);
    h += buf;
  }
  return h + ",tl_db";
}

inline void append_csv_row(std::string& out, const TrainingSample& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.7f,%.7f,%.3f,%.7f,%.7f,%.3f,%.6g", s.src.lat, s.src.lon, s.src.depth,
                s.rcv.lat, s.rcv.lon, s.rcv.depth, s.f_hz);
  out += buf;
  for (double d : s.bathy.depth_m) {
    std::snprintf(buf, sizeof buf, ",%.2f", d);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, ",%.6f\n", s.tl_db);
  out += buf;
}

inline std::string write_samples_csv(const std::string& path, const std::vector<TrainingSample>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  Sha256 hash;
  std::string chunk = csv_header() + "\n";
  for (const auto& r : rows) {
    append_csv_row(chunk, r);
    if (chunk.size() > (1u << 20)) {
      out << chunk;
      hash.update(chunk);
      chunk.clear();
    }
  }
  out << chunk;
  hash.update(chunk);
  if (!out) throw IoError("failed writing " + path);
  return hash.hex();
}

inline std::vector<TrainingSample> read_samples_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) throw FormatError("unexpected header in " + path);
  std::vector<TrainingSample> rows;
  std::size_t lineno = 1;
  constexpr int kCols = 7 + kProfileLength + 1;
  double v[kCols];
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const char* p = line.c_str();
    for (int c = 0; c < kCols; ++c) {
      char* end = nullptr;
      v[c] = std::strtod(p, &end);
      const bool last = c == kCols - 1;
      if (end == p || (!last && *end != ',') || (last && *end != '\0' && *end != '\r')) {
        throw FormatError(path + ":" + std::to_string(lineno) + ": malformed field " + std::to_string(c + 1));
      }
      p = end + 1;
    }
    TrainingSample s;
    s.src = {v[0], v[1], v[2]};
    s.rcv = {v[3], v[4], v[5]};
    s.f_hz = v[6];
    for (int k = 0; k < kProfileLength; ++k) s.bathy.depth_m[k] = v[7 + k];
    s.tl_db = v[kCols - 1];
    rows.push_back(s);
  }
  return rows;
}

struct DatasetSummary {
  std::size_t rows = 0;
  SplitCounts split;
  NormRanges ranges;
  std::string manifest_sha256;
};

/// Writes train.csv, val.csv, test.csv and manifest.json into `out_dir`
/// (which must exist).
inline DatasetSummary generate_dataset(const DatasetSpec& spec, const BathySource& bathy,
                                       const OracleConfig& oracle, const std::string& out_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(out_dir)) throw IoError("output directory does not exist: " + out_dir);
  std::vector<TrainingSample> rows = generate_samples(spec, bathy, oracle);
  const SplitCounts counts = split_counts(rows.size(), spec);
  std::vector<std::size_t> perm(rows.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng split_rng(derive_seed(spec.seed, 0x5b117ULL));
  std::shuffle(perm.begin(), perm.end(), split_rng);
  auto take = [&](std::size_t from, std::size_t count) {
    std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(from),
                                 perm.begin() + static_cast<std::ptrdiff_t>(from + count));
    std::sort(idx.begin(), idx.end());
    std::vector<TrainingSample> out;
    out.reserve(count);
    for (std::size_t i : idx) out.push_back(rows[i]);
    return out;
  };
  const auto train = take(0, counts.train);
  const auto val = take(counts.train, counts.val);
  const auto test = take(counts.train + counts.val, counts.test);
  rows.clear();
  rows.shrink_to_fit();

  DatasetSummary summary;
  summary.rows = counts.train + counts.val + counts.test;
  summary.split = counts;
  summary.ranges = norm_ranges_from(train.empty() ? (val.empty() ? test : val) : train);

  Json files = Json::object();
  const std::pair<const char*, const std::vector<TrainingSample>*> parts[] = {
      {"train.csv", &train}, {"val.csv", &val}, {"test.csv", &test}};
  for (const auto& [name, part] : parts) {
    const std::string sha = write_samples_csv((fs::path(out_dir) / name).string(), *part);
    files[name] = {{"rows", part->size()}, {"sha256", sha}};
  }
  const std::vector<double> bands = third_octave_bands(spec.f_lo_hz, spec.f_hi_hz);
  Json manifest;
  manifest["format"] = "acoustwin-dataset";
  manifest["format_version"] = 1;
  manifest["spec"] = to_json(spec);
  manifest["oracle"] = to_json(oracle);
  manifest["bathymetry"] = to_json(bathy);
  manifest["seeds"] = {{"dataset", spec.seed}, {"oracle_noise", oracle.seed}};
  manifest["bands_hz"] = bands;
  manifest["band_note"] = std::to_string(bands.size()) +
                          " nominal one-third-octave centres lie in the configured range; a count of 30 "
                          "for 12.5 Hz to 8 kHz would need one band beyond the nominal series";
  manifest["rows"] = {{"total", summary.rows},
                      {"train", counts.train},
                      {"val", counts.val},
                      {"test", counts.test}};
  manifest["split_fractions"] = {
      {"train", static_cast<double>(counts.train) / static_cast<double>(summary.rows)},
      {"val", static_cast<double>(counts.val) / static_cast<double>(summary.rows)},
      {"test", static_cast<double>(counts.test) / static_cast<double>(summary.rows)}};
  manifest["norm_ranges"] = to_json(summary.ranges);
  manifest["files"] = files;
  const std::string text = manifest.dump(2) + "\n";
  const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + manifest_path);
  out << text;
  if (!out) throw IoError("failed writing " + manifest_path);
  summary.manifest_sha256 = sha256_hex(text);
  return summary;
}

/// A dataset directory written by generate_dataset.
struct Dataset {
  std::string dir;
  Json manifest;
  std::string manifest_sha256;
  NormRanges ranges;
  BathySource bathy;

  static Dataset open(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string path = (fs::path(dir) / "manifest.json").string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read dataset manifest " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    Dataset d;
    d.dir = dir;
    d.manifest_sha256 = sha256_hex(ss.str());
    try {
      d.manifest = Json::parse(ss.str());
      if (d.manifest.value("format", "") != "acoustwin-dataset") throw FormatError("not a dataset manifest");
      d.ranges = norm_ranges_from_json(d.manifest.at("norm_ranges"));
      d.bathy = bathy_from_json(d.manifest.at("bathymetry"));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("malformed dataset manifest: " + std::string(e.what()));
    }
    return d;
  }

  std::vector<TrainingSample> split(const std::string& name) const {
    return read_samples_csv((std::filesystem::path(dir) / (name + ".csv")).string());
  }
};

}  // namespace acoustwin

#endif  // ACOUSTWIN_DATAGEN_HPP
