#include <Eigen/Core>
#include <CLI11.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <optional>
#include <string>

#include "acoustwin/cli.hpp"

namespace cli = acoustwin::cli;

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Batch activations are several MB; keep them on the heap instead of
  // mapping and unmapping pages on every mini-batch.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Acoustic transmission-loss surrogate: data, training, prediction, voyage planning"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, ablation, dataset, model, route, obs, split, log, conditioning;
  std::optional<int> epochs, batch, queries, nlat, nlon;
  std::optional<double> stub_tl, radius, lambda, freq;
  int threads = 1;
  int verbosity = 0;

  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for data, initialization and shuffling");
  app.add_option("--out", out, "Output path (file or directory, per command)");
  app.add_option("--threads", threads, "Eigen worker threads")->check(CLI::PositiveNumber);
  app.add_option("--ablation", ablation, "full | physics-mean-only | zero-mean");
  app.add_flag("-v,--verbose", verbosity, "More logging on stderr");

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  auto* tr = app.add_subcommand("train", "Train a surrogate");
  tr->add_option("--dataset", dataset, "Dataset directory");
  tr->add_option("--log", log, "JSON-lines training log");
  tr->add_option("--epochs", epochs, "Maximum epochs");
  tr->add_option("--batch-size", batch, "Mini-batch size");
  tr->add_option("--lambda", lambda, "Hinge penalty weight");
  auto* ev = app.add_subcommand("eval", "Evaluate a model on a dataset split");
  ev->add_option("--model", model, "Model file");
  ev->add_option("--dataset", dataset, "Dataset directory");
  ev->add_option("--split", split, "train | val | test");
  auto* pr = app.add_subcommand("predict", "Predict TL on a lat/lon grid");
  pr->add_option("--model", model, "Model file");
  pr->add_option("--dataset", dataset, "Dataset directory (bathymetry source)");
  pr->add_option("--freq", freq, "Frequency in Hz");
  pr->add_option("--nlat", nlat, "Grid rows");
  pr->add_option("--nlon", nlon, "Grid columns");
  auto* vo = app.add_subcommand("optimize-voyage", "Plan per-leg speeds that minimize SEL");
  vo->add_option("--model", model, "Model file");
  vo->add_option("--dataset", dataset, "Dataset directory (bathymetry source)");
  vo->add_option("--route", route, "Route JSON");
  vo->add_option("--stub-tl", stub_tl, "Use a constant TL (dB) instead of a model");
  auto* as = app.add_subcommand("assimilate", "Condition the surrogate on hydrophone data");
  as->add_option("--model", model, "Model file");
  as->add_option("--dataset", dataset, "Dataset directory (bathymetry and truth)");
  as->add_option("--obs", obs, "Observation CSV");
  as->add_option("--radius", radius, "Query disk radius in km");
  as->add_option("--queries", queries, "Queries per hydrophone");
  as->add_option("--conditioning", conditioning, "prior | posterior");
  for (auto* s : {gen, tr, ev, pr, vo, as}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }

  cli::RunConfig c;
  try {
    if (!config_path.empty()) c = cli::run_config_from_json(cli::read_json_file(config_path));
    c.command = app.get_subcommands().front()->get_name();
    if (seed) c.apply_seed(*seed);
    if (out) c.out = *out;
    if (ablation) c.ablation = acoustwin::parse_ablation(*ablation);
    if (dataset) c.dataset_dir = *dataset;
    if (model) c.model_path = *model;
    if (route) c.route_path = *route;
    if (obs) c.obs_path = *obs;
    if (split) c.split = *split;
    if (log) c.log_path = *log;
    if (conditioning) c.conditioning = acoustwin::parse_conditioning(*conditioning);
    if (epochs) c.train.max_epochs = *epochs;
    if (batch) c.train.batch_size = *batch;
    if (lambda) {
      c.train.lambda = *lambda;
      c.lambda_set = true;
    }
    if (queries) c.query_count = *queries;
    if (radius) c.query_radius_km = *radius;
    if (freq) c.grid.f_hz = *freq;
    if (nlat) c.grid.nlat = *nlat;
    if (nlon) c.grid.nlon = *nlon;
    c.stub_tl = stub_tl;
  } catch (const acoustwin::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return cli::kIoError;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kConfigError;
  }
  c.threads = threads;
  c.verbosity = verbosity;
  Eigen::setNbThreads(threads);
  return cli::run(c);
}
