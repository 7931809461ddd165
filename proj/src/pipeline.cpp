#include "romforge/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

#include "romforge/util.hpp"

namespace fs = std::filesystem;

namespace romforge::pipeline {

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("malformed JSON in " + path + ": " + std::string(e.what()));
  }
  return j;
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << j.dump(2) << "\n";
  if (!os) throw IoError("failed writing " + path);
}

std::string hash_hex(const cfg::RunConfig& cfg) { return util::hex64(cfg.hash); }

enum class ArtifactState { missing, fresh, stale };

// fresh = manifest exists and records the current config hash.
ArtifactState manifest_state(const std::string& path, const cfg::RunConfig& cfg) {
  if (!fs::exists(path)) return ArtifactState::missing;
  const nlohmann::json j = read_json_file(path);
  if (!j.contains("config_hash") || !j.at("config_hash").is_string())
    return ArtifactState::stale;
  return j.at("config_hash").get<std::string>() == hash_hex(cfg)
             ? ArtifactState::fresh
             : ArtifactState::stale;
}

[[noreturn]] void refuse_stale(const std::string& what, const std::string& path) {
  throw ConfigError(what + " at " + path +
                    " was produced under a different configuration; rerun the "
                    "stage with --force to rebuild it");
}

std::string load_tag(const fem::LoadParams& load) {
  const auto component = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    std::string s(buf);
    std::string out;
    for (char c : s) {
      if (c == '.') out += 'p';
      else if (c == '-') out += 'm';
      else if (c != '+') out += c;
    }
    return out;
  };
  return "px" + component(load.px) + "_py" + component(load.py);
}

bool same_load(const fem::LoadParams& a, const fem::LoadParams& b) {
  const auto close = [](double x, double y) {
    return std::abs(x - y) <= 1e-9 * std::max({1.0, std::abs(x), std::abs(y)});
  };
  return close(a.px, b.px) && close(a.py, b.py);
}

std::string hidden_tag(const std::vector<int>& hidden) {
  std::string s;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(hidden[i]);
  }
  return s.empty() ? "none" : s;
}

std::vector<int> net_dims(int n, const std::vector<int>& hidden, int n_bar) {
  std::vector<int> dims;
  dims.reserve(hidden.size() + 2);
  dims.push_back(n);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(n_bar);
  return dims;
}

double train_loss_at_best(const train::TrainResult& r) {
  for (const auto& row : r.history)
    if (row.epoch == r.best_epoch) return row.train_loss;
  return r.history.empty() ? 0.0 : r.history.back().train_loss;
}

int paired_n_bar_impl(const cfg::RunConfig& cfg, int n);

// (n, n_bar) pairs the svd stage prepares: the configured pair plus the
// evaluation grid splits against the mode budget.
std::vector<std::pair<int, int>> standard_pairs(const cfg::RunConfig& cfg) {
  std::vector<std::pair<int, int>> pairs{{cfg.n, cfg.n_bar}};
  for (int g : cfg.grid_n) {
    const std::pair<int, int> p{g, paired_n_bar_impl(cfg, g)};
    if (std::find(pairs.begin(), pairs.end(), p) == pairs.end()) pairs.push_back(p);
  }
  return pairs;
}

int paired_n_bar_impl(const cfg::RunConfig& cfg, int n) {
  if (n == cfg.n) return cfg.n_bar;
  const int n_bar = cfg.total_modes - n;
  if (n_bar < 1)
    throw ConfigError("n = " + std::to_string(n) +
                      " leaves no secondary modes against total_modes = " +
                      std::to_string(cfg.total_modes));
  return n_bar;
}

}  // namespace

std::string Paths::bases_file(int n, int n_bar) const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "/bases_n%d_nb%d.bin", n, n_bar);
  return bases_dir() + buf;
}

std::string Paths::bundle_dir(const std::string& mode, int n) const {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "/%s_n%d", mode.c_str(), n);
  return bundles_dir() + buf;
}

Paths resolve_paths(const cfg::RunConfig& cfg, const std::string& cli_out) {
  Paths paths;
  if (!cli_out.empty()) {
    paths.root = cli_out;
  } else if (const char* env = std::getenv("ROMFORGE_OUT"); env && *env) {
    paths.root = env;
  } else {
    paths.root = cfg.output_dir;
  }
  fs::create_directories(paths.root);
  return paths;
}

fem::Mesh make_mesh(const cfg::RunConfig& cfg) {
  return fem::build_cantilever_mesh(cfg.nx, cfg.ny, cfg.length, cfg.height);
}

fem::FemModel make_model(const cfg::RunConfig& cfg) {
  return fem::FemModel(make_mesh(cfg), cfg.youngs_modulus, cfg.poisson_ratio);
}

int paired_n_bar(const cfg::RunConfig& cfg, int n) { return paired_n_bar_impl(cfg, n); }

std::uint64_t derive_seed(const cfg::RunConfig& cfg, const std::string& tag) {
  return cfg.seed ^ util::fnv1a64(tag);
}

// ---- mesh -------------------------------------------------------------------

void cmd_mesh(const cfg::RunConfig& cfg, const Paths& paths, bool /*force*/) {
  const fem::Mesh mesh = make_mesh(cfg);
  std::ofstream os(paths.mesh_listing(), std::ios::trunc);
  if (!os) throw IoError("cannot open " + paths.mesh_listing() + " for writing");
  fem::write_mesh_listing(mesh, os);
  if (!os) throw IoError("failed writing " + paths.mesh_listing());
  std::printf("[mesh] %d nodes, %d triangles -> %s\n", mesh.node_count(),
              mesh.triangle_count(), paths.mesh_listing().c_str());
}

// ---- dataset ----------------------------------------------------------------

void cmd_generate(const cfg::RunConfig& cfg, const Paths& paths, bool force) {
  const ArtifactState state = manifest_state(paths.dataset_manifest(), cfg);
  if (state == ArtifactState::fresh && !force) {
    const bool complete = fs::exists(paths.snapshots("train")) &&
                          fs::exists(paths.snapshots("val")) &&
                          fs::exists(paths.snapshots("test"));
    if (complete) {
      std::printf("[generate] dataset up to date (%s)\n", hash_hex(cfg).c_str());
      return;
    }
  }
  if (state == ArtifactState::stale && !force)
    refuse_stale("dataset", paths.dataset_dir());

  fs::create_directories(paths.dataset_dir());
  const fem::FemModel model = make_model(cfg);

  struct Split {
    const char* name;
    int count;
  };
  const Split splits[3] = {{"train", cfg.train_count},
                           {"val", cfg.val_count},
                           {"test", cfg.test_count}};

  nlohmann::json manifest;
  manifest["config_hash"] = hash_hex(cfg);
  manifest["halton_start"] = cfg.halton_start;
  manifest["mu_res"] = {cfg.mu_res.px, cfg.mu_res.py};
  manifest["box"] = {{"lo", {cfg.box.lo[0], cfg.box.lo[1]}},
                     {"hi", {cfg.box.hi[0], cfg.box.hi[1]}}};

  // The val and test parameter streams continue the Halton sequence at offsets
  // given by the requested (not kept) counts, so dropped samples in one split
  // never shift another.
  std::uint64_t start = cfg.halton_start;
  for (const Split& split : splits) {
    util::Stopwatch watch;
    const auto params = snap::sample_parameters(split.count, cfg.box, start);
    start += static_cast<std::uint64_t>(split.count);
    snap::GenerateReport report =
        snap::generate_dataset(model, params, cfg.mu_res, cfg.newton, cfg.threads);
    snap::save_snapshots(report.set, paths.snapshots(split.name));
    snap::write_params_csv(report.set.params, paths.params_csv(split.name));
    manifest["splits"][split.name] = {
        {"requested", split.count},
        {"kept", static_cast<int>(report.set.count())},
        {"failed_indices", report.failed_indices}};
    std::printf("[generate] %s: %d requested, %d kept (%.1f s)\n", split.name,
                split.count, static_cast<int>(report.set.count()), watch.seconds());
  }
  write_json_file(manifest, paths.dataset_manifest());
}

snap::SnapshotSet load_split_checked(const cfg::RunConfig& cfg, const Paths& paths,
                                     const std::string& split) {
  const ArtifactState state = manifest_state(paths.dataset_manifest(), cfg);
  if (state == ArtifactState::missing)
    throw ConfigError("no dataset under " + paths.dataset_dir() +
                      "; run the generate stage first");
  if (state == ArtifactState::stale) refuse_stale("dataset", paths.dataset_dir());
  snap::SnapshotSet set = snap::load_snapshots(paths.snapshots(split));
  const Eigen::Index expected = 2LL * cfg.nx * (cfg.ny + 1);
  if (set.dofs() != expected)
    throw IoError("snapshot file " + paths.snapshots(split) +
                  " has wrong dof count for this configuration");
  return set;
}

snap::SnapshotSet ensure_extrapolation_set(const cfg::RunConfig& cfg,
                                           const Paths& paths, bool force) {
  const std::string split = "extrapolation";
  const ArtifactState state = manifest_state(paths.extrapolation_manifest(), cfg);
  if (state == ArtifactState::fresh && !force && fs::exists(paths.snapshots(split)))
    return snap::load_snapshots(paths.snapshots(split));
  if (state == ArtifactState::stale && !force)
    refuse_stale("extrapolation set", paths.extrapolation_manifest());

  fs::create_directories(paths.dataset_dir());
  const fem::FemModel model = make_model(cfg);
  util::Stopwatch watch;
  const auto params = snap::extrapolation_band_samples(cfg.extrap_count, cfg.box,
                                                       cfg.extrap_band, cfg.extrap_seed);
  snap::GenerateReport report =
      snap::generate_dataset(model, params, cfg.mu_res, cfg.newton, cfg.threads);
  snap::save_snapshots(report.set, paths.snapshots(split));
  snap::write_params_csv(report.set.params, paths.params_csv(split));
  nlohmann::json manifest;
  manifest["config_hash"] = hash_hex(cfg);
  manifest["requested"] = cfg.extrap_count;
  manifest["kept"] = static_cast<int>(report.set.count());
  manifest["failed_indices"] = report.failed_indices;
  manifest["band"] = cfg.extrap_band;
  manifest["seed"] = cfg.extrap_seed;
  write_json_file(manifest, paths.extrapolation_manifest());
  std::printf("[generate] extrapolation band: %d requested, %d kept (%.1f s)\n",
              cfg.extrap_count, static_cast<int>(report.set.count()), watch.seconds());
  return report.set;
}

// ---- bases ------------------------------------------------------------------

namespace {

nlohmann::json build_and_save_bases(const cfg::RunConfig& cfg, const Paths& paths,
                                    const pod::SvdFactors& svd,
                                    const snap::SnapshotSet& train,
                                    const fem::FemModel& model, int n, int n_bar) {
  pod::RomBases b = pod::build_bases(svd, n, n_bar,
                                     static_cast<std::uint64_t>(train.count()));
  b.e_pod_d = pod::compute_e_pod_d(b, train.U_star);
  b.e_pod_r = pod::compute_e_pod_r(b, model, train, cfg.threads);
  const std::string file = paths.bases_file(n, n_bar);
  pod::save_bases(b, file);
  std::printf("[svd] n=%d n_bar=%d  e_pod_d=%.6e  e_pod_r=%.6e\n", n, n_bar, b.e_pod_d,
              b.e_pod_r);
  return nlohmann::json{{"n", n},
                        {"n_bar", n_bar},
                        {"file", fs::path(file).filename().string()},
                        {"e_pod_d", b.e_pod_d},
                        {"e_pod_r", b.e_pod_r}};
}

}  // namespace

void cmd_svd(const cfg::RunConfig& cfg, const Paths& paths, bool force) {
  const ArtifactState state = manifest_state(paths.bases_manifest(), cfg);
  if (state == ArtifactState::fresh && !force) {
    bool complete = true;
    for (const auto& [n, n_bar] : standard_pairs(cfg))
      complete = complete && fs::exists(paths.bases_file(n, n_bar));
    if (complete) {
      std::printf("[svd] bases up to date (%s)\n", hash_hex(cfg).c_str());
      return;
    }
  }
  if (state == ArtifactState::stale && !force) refuse_stale("bases", paths.bases_dir());

  const snap::SnapshotSet train = load_split_checked(cfg, paths, "train");
  const fem::FemModel model = make_model(cfg);
  fs::create_directories(paths.bases_dir());
  util::Stopwatch watch;
  const pod::SvdFactors svd = pod::compute_svd(train.U_star);
  std::printf("[svd] thin SVD of %lld x %lld snapshots (%.1f s)\n",
              static_cast<long long>(train.dofs()),
              static_cast<long long>(train.count()), watch.seconds());

  nlohmann::json manifest;
  manifest["config_hash"] = hash_hex(cfg);
  manifest["train_file_hash"] =
      util::hex64(util::fnv1a64_file(paths.snapshots("train")));
  manifest["singular_values"] =
      std::vector<double>(svd.sigma.data(), svd.sigma.data() + svd.sigma.size());
  manifest["entries"] = nlohmann::json::array();
  for (const auto& [n, n_bar] : standard_pairs(cfg))
    manifest["entries"].push_back(
        build_and_save_bases(cfg, paths, svd, train, model, n, n_bar));
  write_json_file(manifest, paths.bases_manifest());
}

pod::RomBases ensure_bases(const cfg::RunConfig& cfg, const Paths& paths, int n,
                           int n_bar, bool force) {
  const ArtifactState state = manifest_state(paths.bases_manifest(), cfg);
  if (state == ArtifactState::missing || force) {
    cmd_svd(cfg, paths, force);
  } else if (state == ArtifactState::stale) {
    refuse_stale("bases", paths.bases_dir());
  }
  const std::string file = paths.bases_file(n, n_bar);
  if (!fs::exists(file)) {
    // A pair outside the standard list: build it on demand and append the
    // manifest entry.
    const snap::SnapshotSet train = load_split_checked(cfg, paths, "train");
    const fem::FemModel model = make_model(cfg);
    const pod::SvdFactors svd = pod::compute_svd(train.U_star);
    nlohmann::json entry = build_and_save_bases(cfg, paths, svd, train, model, n, n_bar);
    nlohmann::json manifest = read_json_file(paths.bases_manifest());
    manifest["entries"].push_back(std::move(entry));
    write_json_file(manifest, paths.bases_manifest());
  }
  return pod::load_bases(file);
}

// ---- training ---------------------------------------------------------------

rom::Bundle cmd_train(const cfg::RunConfig& cfg, const Paths& paths,
                      train::LossMode mode, int n, const std::string& warm_dir,
                      bool force) {
  const std::string mode_name = train::loss_mode_name(mode);
  const std::string dir = paths.bundle_dir(mode_name, n);
  const std::string manifest_path = dir + "/manifest.json";
  const ArtifactState state = manifest_state(manifest_path, cfg);
  if (state == ArtifactState::fresh && !force) {
    std::printf("[train] %s n=%d up to date (%s)\n", mode_name.c_str(), n,
                hash_hex(cfg).c_str());
    return rom::load_bundle(dir);
  }
  if (state == ArtifactState::stale && !force) refuse_stale("bundle", dir);

  const int n_bar = paired_n_bar(cfg, n);
  pod::RomBases bases = ensure_bases(cfg, paths, n, n_bar);
  const snap::SnapshotSet train_set = load_split_checked(cfg, paths, "train");
  const snap::SnapshotSet val_set = load_split_checked(cfg, paths, "val");
  const fem::FemModel model = make_model(cfg);

  rom::PromAnnManifold init;
  init.bases = std::move(bases);
  std::uint64_t init_seed =
      derive_seed(cfg, "init/" + mode_name + "/n" + std::to_string(n));
  std::string warm_note;

  if (mode == train::LossMode::r_loss) {
    rom::Bundle warm;
    if (warm_dir.empty()) {
      warm = cmd_train(cfg, paths, train::LossMode::s_loss, n, "", false);
      warm_note = paths.bundle_dir("sloss", n);
    } else {
      warm = rom::load_bundle(warm_dir);
      if (!warm.manifest.contains("config_hash") ||
          warm.manifest.at("config_hash") != hash_hex(cfg))
        refuse_stale("warm-start bundle", warm_dir);
      warm_note = warm_dir;
    }
    if (warm.manifold.variant != rom::Variant::scaled)
      throw ConfigError("warm-start bundle must use the scaled decoder");
    if (warm.manifold.reduced_dim() != n || warm.manifold.bases.n_bar() != n_bar)
      throw ConfigError("warm-start bundle has reduced dimensions " +
                        std::to_string(warm.manifold.reduced_dim()) + "/" +
                        std::to_string(warm.manifold.bases.n_bar()) +
                        ", expected " + std::to_string(n) + "/" +
                        std::to_string(n_bar));
    init.variant = rom::Variant::scaled;
    init.net = std::move(warm.manifold.net);
    init_seed = warm.manifest.value("init_seed", init_seed);
  } else if (mode == train::LossMode::q_loss) {
    init.variant = rom::Variant::original;
    init.u_ref = train_set.U_star.rowwise().mean();
    init.net = ann::init_mlp(net_dims(n, cfg.hidden, n_bar), init_seed);
  } else {
    init.variant = rom::Variant::scaled;
    init.net = ann::init_mlp(net_dims(n, cfg.hidden, n_bar), init_seed);
  }
  rom::validate_manifold(init);

  train::TrainConfig tc;
  tc.mode = mode;
  tc.batch_size = cfg.batch_size;
  tc.lr_min = cfg.lr_min;
  tc.adamw = cfg.adamw;
  tc.threads = cfg.threads;
  tc.seed = derive_seed(cfg, "shuffle/" + mode_name + "/n" + std::to_string(n));
  tc.checkpoint_every = cfg.checkpoint_every;
  tc.checkpoint_dir = dir + "/checkpoints";
  switch (mode) {
    case train::LossMode::s_loss:
      tc.omega_d = 1.0;
      tc.omega_r = 0.0;
      tc.epochs = cfg.sloss_epochs;
      tc.lr0 = cfg.sloss_lr0;
      break;
    case train::LossMode::r_loss:
      tc.omega_d = 0.0;
      tc.omega_r = 1.0;
      tc.epochs = cfg.rloss_epochs;
      tc.lr0 = cfg.rloss_lr0;
      break;
    case train::LossMode::q_loss:
      tc.omega_d = 1.0;
      tc.omega_r = 0.0;
      tc.epochs = cfg.qloss_epochs;
      tc.lr0 = cfg.qloss_lr0;
      break;
  }
  if (tc.checkpoint_every > 0) fs::create_directories(tc.checkpoint_dir);

  std::printf("[train] %s n=%d n_bar=%d: %d epochs, lr0=%g, batch=%d%s\n",
              mode_name.c_str(), n, n_bar, tc.epochs, tc.lr0, tc.batch_size,
              warm_note.empty() ? "" : (" (warm start " + warm_note + ")").c_str());
  util::Stopwatch watch;
  train::TrainResult result = train::train(init, &model, train_set, val_set, tc);
  const double seconds = watch.seconds();

  nlohmann::json extra{{"config_hash", hash_hex(cfg)},
                       {"dataset_hash",
                        util::hex64(util::fnv1a64_file(paths.snapshots("train")))},
                       {"mode", mode_name},
                       {"epochs", tc.epochs},
                       {"lr0", tc.lr0},
                       {"batch_size", tc.batch_size},
                       {"train_seed", tc.seed},
                       {"init_seed", init_seed},
                       {"warm_start", warm_note},
                       {"best_epoch", result.best_epoch},
                       {"best_val_loss", result.best_val_loss},
                       {"best_val_data_loss", result.best_val_data_loss},
                       {"best_val_residual_loss", result.best_val_residual_loss},
                       {"train_seconds", seconds}};
  rom::save_bundle(result.manifold, dir, extra, init_seed, cfg.adamw, tc.lr0);
  train::write_history_csv(result.history, dir + "/history.csv");
  std::printf("[train] %s n=%d done in %.1f s: best epoch %d, val loss %.6e\n",
              mode_name.c_str(), n, seconds, result.best_epoch, result.best_val_loss);
  return rom::load_bundle(dir);
}

rom::Bundle ensure_bundle(const cfg::RunConfig& cfg, const Paths& paths,
                          train::LossMode mode, int n, bool force) {
  return cmd_train(cfg, paths, mode, n, "", force);
}

// ---- online solve -----------------------------------------------------------

RomCommandResult cmd_rom(const cfg::RunConfig& cfg, const Paths& paths,
                         const std::string& bundle_dir, const fem::LoadParams& load) {
  rom::Bundle bundle = rom::load_bundle(bundle_dir);
  if (!bundle.manifest.contains("config_hash") ||
      bundle.manifest.at("config_hash") != hash_hex(cfg))
    refuse_stale("bundle", bundle_dir);
  const fem::FemModel model = make_model(cfg);
  if (model.dof_count() != bundle.manifold.dofs())
    throw ConfigError("bundle dof count does not match the configured mesh");

  fs::create_directories(paths.rom_dir());
  const std::string tag = load_tag(load);
  RomCommandResult out;
  out.solution_csv = paths.rom_dir() + "/solution_" + tag + ".csv";
  out.trace_csv = paths.rom_dir() + "/trace_" + tag + ".csv";

  try {
    out.result = rom::rom_solve(bundle.manifold, model, load, cfg.rom);
  } catch (const rom::RomConvergenceError& e) {
    rom::write_trace_csv(e.trace, out.trace_csv);  // keep the partial trace
    throw;
  }
  rom::write_trace_csv(out.result.trace, out.trace_csv);

  const Vec u_full = model.full_from_free(out.result.u);
  const fem::Mesh& mesh = model.mesh();
  std::ofstream os(out.solution_csv, std::ios::trunc);
  if (!os) throw IoError("cannot open " + out.solution_csv + " for writing");
  os << "node,x,y,ux,uy\n";
  char buf[200];
  for (int i = 0; i < mesh.node_count(); ++i) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", i,
                  mesh.nodes[static_cast<std::size_t>(i)][0],
                  mesh.nodes[static_cast<std::size_t>(i)][1], u_full[2 * i],
                  u_full[2 * i + 1]);
    os << buf;
  }
  if (!os) throw IoError("failed writing " + out.solution_csv);

  if (fs::exists(paths.snapshots("test")) &&
      manifest_state(paths.dataset_manifest(), cfg) == ArtifactState::fresh) {
    const snap::SnapshotSet test = load_split_checked(cfg, paths, "test");
    for (int j = 0; j < test.count(); ++j) {
      if (!same_load(test.params[static_cast<std::size_t>(j)], load)) continue;
      const double truth_norm = test.U_star.col(j).norm();
      if (truth_norm > 0.0) {
        out.matched_e_u = (out.result.u - test.U_star.col(j)).norm() / truth_norm;
        out.matched_sample = j;
      }
      break;
    }
  }

  std::printf("[rom] px=%g py=%g: %d iterations, reduced norm %.3e\n", load.px,
              load.py, out.result.total_iterations, out.result.final_reduced_norm);
  if (out.matched_sample >= 0)
    std::printf("[rom] load matches test sample %d: e_u = %.6e\n", out.matched_sample,
                out.matched_e_u);
  std::printf("[rom] wrote %s and %s\n", out.solution_csv.c_str(),
              out.trace_csv.c_str());
  return out;
}

// ---- evaluation -------------------------------------------------------------

namespace {

std::vector<eval::ReportRow> parse_report_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::vector<eval::ReportRow> rows;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() < 8) throw IoError("malformed report row in " + path + ": " + line);
    eval::ReportRow r;
    r.model = f[0];
    r.n = std::stoi(f[1]);
    r.n_bar = std::stoi(f[2]);
    r.mode = f[3];
    r.e_u = std::stod(f[4]);
    r.e_r = std::stod(f[5]);
    r.n_samples = std::stoi(f[6]);
    r.mean_iter = std::stod(f[7]);
    if (f.size() > 8) r.notes = f[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

void print_report_rows(const std::vector<eval::ReportRow>& rows) {
  std::printf("  %-6s %4s %5s %-15s %12s %12s %9s\n", "model", "n", "nbar", "mode",
              "e_u", "e_R", "mean_iter");
  for (const auto& r : rows)
    std::printf("  %-6s %4d %5d %-15s %12.4e %12.4e %9.2f  %s\n", r.model.c_str(),
                r.n, r.n_bar, r.mode.c_str(), r.e_u, r.e_r, r.mean_iter,
                r.notes.c_str());
}

}  // namespace

void cmd_eval(const cfg::RunConfig& cfg, const Paths& paths, const EvalOptions& opts,
              bool force) {
  const ArtifactState state = manifest_state(paths.eval_manifest(), cfg);
  if (state == ArtifactState::stale && !force)
    refuse_stale("evaluation outputs", paths.eval_dir());
  nlohmann::json manifest;
  if (state == ArtifactState::fresh) manifest = read_json_file(paths.eval_manifest());
  manifest["config_hash"] = hash_hex(cfg);
  const auto part_done = [&](const char* key, const std::string& file) {
    return !force && manifest.value(key, false) && fs::exists(file);
  };

  cmd_generate(cfg, paths, false);
  fs::create_directories(paths.eval_dir());
  const fem::FemModel model = make_model(cfg);

  const std::string report_path = paths.eval_dir() + "/report.csv";
  std::vector<eval::ReportRow> grid_rows;

  // Accuracy rows for one primary dimension; `modes` selects the trained
  // manifolds evaluated next to the POD baseline.
  const auto rows_for_n = [&](int n, const std::vector<train::LossMode>& modes,
                              const snap::SnapshotSet& test) {
    std::vector<eval::ReportRow> rows;
    const int n_bar = paired_n_bar(cfg, n);
    const pod::RomBases bases = ensure_bases(cfg, paths, n, n_bar);
    rows.push_back(eval::evaluate_pod_reconstruction(bases, model, test, cfg.threads));
    rows.push_back(eval::evaluate_pod_rom(bases, model, test, cfg.rom, cfg.threads));
    for (train::LossMode mode : modes) {
      const rom::Bundle bundle = ensure_bundle(cfg, paths, mode, n);
      const std::string tag = train::loss_mode_name(mode);
      rows.push_back(eval::evaluate_reconstruction(tag, bundle.manifold, model, test,
                                                   cfg.threads));
      rows.push_back(
          eval::evaluate_rom(tag, bundle.manifold, model, test, cfg.rom, cfg.threads));
    }
    return rows;
  };

  if (opts.grid) {
    if (part_done("grid", report_path)) {
      std::printf("[eval] accuracy grid up to date\n");
      grid_rows = parse_report_csv(report_path);
    } else {
      const snap::SnapshotSet test = load_split_checked(cfg, paths, "test");
      for (int n : cfg.grid_n) {
        util::Stopwatch watch;
        const auto rows = rows_for_n(n,
                                     {train::LossMode::q_loss, train::LossMode::s_loss,
                                      train::LossMode::r_loss},
                                     test);
        grid_rows.insert(grid_rows.end(), rows.begin(), rows.end());
        std::printf("[eval] n=%d evaluated (%.1f s)\n", n, watch.seconds());
      }
      eval::write_report_csv(grid_rows, report_path);
      manifest["grid"] = true;
      write_json_file(manifest, paths.eval_manifest());
      std::printf("[eval] accuracy grid -> %s\n", report_path.c_str());
    }
    print_report_rows(grid_rows);
  }

  if (opts.appendix_a) {
    const std::string path = paths.eval_dir() + "/appendix_a.csv";
    if (part_done("appendix_a", path)) {
      std::printf("[eval] appendix A up to date\n");
    } else {
      std::vector<eval::ReportRow> rows;
      if (!grid_rows.empty() || part_done("grid", report_path)) {
        if (grid_rows.empty()) grid_rows = parse_report_csv(report_path);
        for (const auto& r : grid_rows)
          if (r.model == "pod" || r.model == "sloss") rows.push_back(r);
      } else {
        // Standalone run: only the two models this comparison needs.
        const snap::SnapshotSet test = load_split_checked(cfg, paths, "test");
        for (int n : cfg.grid_n) {
          const auto sub = rows_for_n(n, {train::LossMode::s_loss}, test);
          rows.insert(rows.end(), sub.begin(), sub.end());
        }
      }
      eval::write_report_csv(rows, path);
      manifest["appendix_a"] = true;
      write_json_file(manifest, paths.eval_manifest());
      std::printf("[eval] appendix A (POD vs snapshot loss) -> %s\n", path.c_str());
    }
  }

  if (opts.appendix_b) {
    const std::string path = paths.eval_dir() + "/appendix_b.csv";
    if (part_done("appendix_b", path)) {
      std::printf("[eval] appendix B up to date\n");
    } else {
      const snap::SnapshotSet band = ensure_extrapolation_set(cfg, paths);
      std::vector<eval::ExtrapolationRow> rows;
      for (int n : cfg.grid_n) {
        const int n_bar = paired_n_bar(cfg, n);
        const pod::RomBases bases = ensure_bases(cfg, paths, n, n_bar);
        Mat U_hat(band.U_star.rows(), band.U_star.cols());
        util::parallel_for(0, static_cast<int>(band.count()), cfg.threads, [&](int j) {
          U_hat.col(j) = pod::project_primary(bases, band.U_star.col(j));
        });
        rows.push_back({"pod", n, eval::metric_e_u(U_hat, band.U_star).value,
                        static_cast<int>(band.count())});
        for (train::LossMode mode :
             {train::LossMode::s_loss, train::LossMode::r_loss}) {
          const rom::Bundle bundle = ensure_bundle(cfg, paths, mode, n);
          rows.push_back(eval::evaluate_extrapolation(
              train::loss_mode_name(mode), bundle.manifold, band, cfg.threads));
        }
      }
      eval::write_extrapolation_csv(rows, path);
      manifest["appendix_b"] = true;
      write_json_file(manifest, paths.eval_manifest());
      std::printf("[eval] appendix B (out-of-box loads) -> %s\n", path.c_str());
    }
  }

  if (opts.appendix_c) {
    const std::string path = paths.eval_dir() + "/appendix_c.csv";
    if (part_done("appendix_c", path)) {
      std::printf("[eval] appendix C up to date\n");
    } else {
      const int n = cfg.appendix_c_n;
      const int n_bar = paired_n_bar(cfg, n);
      pod::RomBases bases = ensure_bases(cfg, paths, n, n_bar);
      const snap::SnapshotSet train_set = load_split_checked(cfg, paths, "train");
      const snap::SnapshotSet val_set = load_split_checked(cfg, paths, "val");
      std::ofstream os(path, std::ios::trunc);
      if (!os) throw IoError("cannot open " + path + " for writing");
      os << "hidden,batch_size,epochs,train_loss,val_data_loss\n";
      for (std::size_t i = 0; i < cfg.appendix_c_variants.size(); ++i) {
        const auto& variant = cfg.appendix_c_variants[i];
        rom::PromAnnManifold init;
        init.bases = bases;
        init.variant = rom::Variant::scaled;
        init.net = ann::init_mlp(net_dims(n, variant.hidden, n_bar),
                                 derive_seed(cfg, "appc/init/" + std::to_string(i)));
        train::TrainConfig tc;
        tc.mode = train::LossMode::s_loss;
        tc.omega_d = 1.0;
        tc.omega_r = 0.0;
        tc.epochs = cfg.appendix_c_epochs;
        tc.batch_size = variant.batch_size;
        tc.lr0 = cfg.sloss_lr0;
        tc.lr_min = cfg.lr_min;
        tc.adamw = cfg.adamw;
        tc.threads = cfg.threads;
        tc.seed = derive_seed(cfg, "appc/shuffle/" + std::to_string(i));
        util::Stopwatch watch;
        const train::TrainResult result =
            train::train(init, &model, train_set, val_set, tc);
        char buf[200];
        std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.17g,%.17g\n",
                      hidden_tag(variant.hidden).c_str(), variant.batch_size,
                      tc.epochs, train_loss_at_best(result),
                      result.best_val_data_loss);
        os << buf;
        std::printf("[eval] appendix C net %s batch %d: val data loss %.4e (%.1f s)\n",
                    hidden_tag(variant.hidden).c_str(), variant.batch_size,
                    result.best_val_data_loss, watch.seconds());
      }
      if (!os) throw IoError("failed writing " + path);
      os.close();
      manifest["appendix_c"] = true;
      write_json_file(manifest, paths.eval_manifest());
      std::printf("[eval] appendix C (network variants) -> %s\n", path.c_str());
    }
  }
}

// ---- runtime benchmark ------------------------------------------------------

void cmd_bench(const cfg::RunConfig& cfg, const Paths& paths, bool force) {
  const ArtifactState state = manifest_state(paths.bench_manifest(), cfg);
  const std::string batch_path = paths.bench_dir() + "/batch_timings.csv";
  const std::string solver_path = paths.bench_dir() + "/solver_timings.csv";
  if (state == ArtifactState::fresh && !force && fs::exists(batch_path) &&
      fs::exists(solver_path)) {
    std::printf("[bench] benchmark outputs up to date\n");
    return;
  }
  if (state == ArtifactState::stale && !force)
    refuse_stale("benchmark outputs", paths.bench_dir());

  cmd_generate(cfg, paths, false);
  fs::create_directories(paths.bench_dir());
  const fem::FemModel model = make_model(cfg);
  const snap::SnapshotSet train_set = load_split_checked(cfg, paths, "train");
  const snap::SnapshotSet test = load_split_checked(cfg, paths, "test");

  // Per-batch training cost at the configured operating point.
  const rom::Bundle bundle = ensure_bundle(cfg, paths, train::LossMode::s_loss, cfg.n);
  std::printf("[bench] timing training batches (batch=%d, %d reps, %d naive reps)\n",
              cfg.batch_size, cfg.bench_batch_reps, cfg.bench_naive_reps);
  const eval::BatchTimings bt = eval::benchmark_training_batches(
      bundle.manifold, model, train_set, cfg.batch_size, cfg.bench_batch_reps,
      cfg.bench_naive_reps);
  eval::write_batch_timings_csv(bt, batch_path);
  std::printf("[bench] snapshot %.4f s  residual %.4f s  naive %.4f s  (naive/opt "
              "%.1fx)\n",
              bt.snapshot_s, bt.residual_opt_s, bt.residual_naive_s,
              bt.residual_naive_s / std::max(bt.residual_opt_s, 1e-300));

  // Online solve cost across model sizes at a shared set of loads.
  const int load_count = std::min<int>(cfg.bench_loads, static_cast<int>(test.count()));
  const std::vector<fem::LoadParams> loads(test.params.begin(),
                                           test.params.begin() + load_count);
  std::vector<eval::SolverTimingRow> rows;
  const int n_small = *std::min_element(cfg.grid_n.begin(), cfg.grid_n.end());
  const int n_large = *std::max_element(cfg.grid_n.begin(), cfg.grid_n.end());
  for (int n : {n_small, n_large}) {
    const rom::Bundle b = ensure_bundle(cfg, paths, train::LossMode::s_loss, n);
    rows.push_back(eval::benchmark_manifold_solver(b.manifold, model, loads, cfg.rom));
    if (n_small == n_large) break;
  }
  const pod::RomBases pool = ensure_bases(cfg, paths, cfg.n, cfg.n_bar);
  for (int k : cfg.bench_pod_sizes) {
    const Mat phi = pod::leading_basis(pool, k);
    rows.push_back(eval::benchmark_pod_solver(phi, model, loads, cfg.rom));
  }
  rows.push_back(eval::benchmark_fom_solver(model, loads, cfg.newton));
  eval::write_solver_timings_csv(rows, solver_path);
  for (const auto& r : rows)
    std::printf("[bench] %-8s q=%-4d system solve %.3e s  W %.3e s  assembly %.3e s "
                " (%ld solves, %d failures)\n",
                r.model.c_str(), r.q_size, r.mean_system_solve_s, r.mean_w_s,
                r.mean_assembly_s, r.solves, r.failures);

  nlohmann::json manifest;
  manifest["config_hash"] = hash_hex(cfg);
  manifest["loads"] = load_count;
  write_json_file(manifest, paths.bench_manifest());
  std::printf("[bench] wrote %s and %s\n", batch_path.c_str(), solver_path.c_str());
}

}  // namespace romforge::pipeline
