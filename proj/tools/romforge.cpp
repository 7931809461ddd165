// Command-line driver for the reduced-order-model pipeline.  Exit codes:
//   0 success, 2 configuration/usage error, 3 solver non-convergence or a
//   degenerate element state, 4 file I/O error.
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "romforge/pipeline.hpp"
#include "romforge/util.hpp"

namespace {

using namespace romforge;

pipeline::EvalOptions parse_eval_options(const std::string& appendix, bool no_grid) {
  pipeline::EvalOptions opts;
  opts.grid = !no_grid;
  std::string item;
  std::stringstream ss(appendix);
  while (std::getline(ss, item, ',')) {
    if (item == "a") opts.appendix_a = true;
    else if (item == "b") opts.appendix_b = true;
    else if (item == "c") opts.appendix_c = true;
    else if (!item.empty())
      throw ConfigError("unknown appendix '" + item + "' (expected a, b or c)");
  }
  if (!opts.grid && !opts.appendix_a && !opts.appendix_b && !opts.appendix_c)
    throw ConfigError("eval with --no-grid needs at least one --appendix");
  return opts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"romforge: projection-based reduced-order models with trained "
               "nonlinear closure for a Neo-Hookean cantilever"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int threads = 0;
  bool force = false;
  app.add_option("--config", config_path, "JSON configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir,
                 "output root; overrides ROMFORGE_OUT and the config file");
  app.add_option("--threads", threads, "worker threads; overrides the config file")
      ->check(CLI::PositiveNumber);
  app.add_flag("--force", force, "rebuild artifacts even when they are up to date");

  auto* c_config = app.add_subcommand("config", "print the effective configuration");
  bool dump_defaults = false;
  c_config->add_flag("--dump-defaults", dump_defaults,
                     "print the built-in default configuration");

  auto* c_mesh = app.add_subcommand("mesh", "write the cantilever mesh listing");
  auto* c_generate =
      app.add_subcommand("generate", "solve the sampled loads and store snapshots");
  auto* c_svd = app.add_subcommand("svd", "build the POD bases from the snapshots");

  auto* c_train = app.add_subcommand("train", "train a reduced manifold");
  std::string mode_name;
  int train_n = 0;
  std::string from_dir;
  c_train->add_option("--mode", mode_name, "loss mode: qloss, sloss or rloss")
      ->required();
  c_train->add_option("--n", train_n, "primary dimension (default: svd.n)")
      ->check(CLI::PositiveNumber);
  c_train->add_option("--from", from_dir,
                      "bundle directory to warm-start from (required for rloss)");

  auto* c_rom = app.add_subcommand("rom", "online reduced solve at one load");
  std::string bundle_dir;
  double px = 0.0, py = 0.0;
  c_rom->add_option("--bundle", bundle_dir, "trained bundle directory")->required();
  c_rom->add_option("--px", px, "line load in x [N/m]")->required();
  c_rom->add_option("--py", py, "line load in y [N/m]")->required();

  auto* c_eval =
      app.add_subcommand("eval", "accuracy report over the model-size grid");
  std::string appendix;
  bool no_grid = false;
  c_eval->add_option("--appendix", appendix,
                     "extra studies, comma list of: a (vs plain POD), b "
                     "(out-of-box loads), c (network variants)");
  c_eval->add_flag("--no-grid", no_grid, "skip the main accuracy grid");

  auto* c_bench =
      app.add_subcommand("bench", "training and online-solve runtime benchmarks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_config->parsed() && dump_defaults) {
      std::printf("%s\n", cfg::default_config_json().dump(2).c_str());
      return 0;
    }

    cfg::RunConfig cfg = config_path.empty() ? cfg::default_config()
                                             : cfg::load_config_file(config_path);
    if (threads > 0) cfg.threads = threads;

    if (c_config->parsed()) {
      std::printf("%s\n", cfg.canonical.dump(2).c_str());
      std::fprintf(stderr, "config hash: %s\n", util::hex64(cfg.hash).c_str());
      return 0;
    }

    const pipeline::Paths paths = pipeline::resolve_paths(cfg, out_dir);

    if (c_mesh->parsed()) {
      pipeline::cmd_mesh(cfg, paths, force);
    } else if (c_generate->parsed()) {
      pipeline::cmd_generate(cfg, paths, force);
    } else if (c_svd->parsed()) {
      pipeline::cmd_svd(cfg, paths, force);
    } else if (c_train->parsed()) {
      const train::LossMode mode = train::loss_mode_from_name(mode_name);
      if (mode == train::LossMode::r_loss && from_dir.empty())
        throw ConfigError(
            "rloss training refines an existing manifold; pass --from <bundle>, "
            "e.g. the sloss bundle at the same n");
      if (mode != train::LossMode::r_loss && !from_dir.empty())
        throw ConfigError("--from is only meaningful with --mode rloss");
      const int n = train_n > 0 ? train_n : cfg.n;
      pipeline::cmd_train(cfg, paths, mode, n, from_dir, force);
    } else if (c_rom->parsed()) {
      pipeline::cmd_rom(cfg, paths, bundle_dir, fem::LoadParams{px, py});
    } else if (c_eval->parsed()) {
      pipeline::cmd_eval(cfg, paths, parse_eval_options(appendix, no_grid), force);
    } else if (c_bench->parsed()) {
      pipeline::cmd_bench(cfg, paths, force);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ConvergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const DegenerateStateError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
}
