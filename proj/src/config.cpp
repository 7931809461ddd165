#include "romforge/config.hpp"

#include <fstream>

#include "romforge/util.hpp"

namespace romforge::cfg {

namespace {

using nlohmann::json;

bool types_compatible(const json& expected, const json& given) {
  if (expected.is_number() && given.is_number()) return true;
  if (expected.is_array() && given.is_array()) return true;
  return expected.type() == given.type();
}

// Every key in `given` must exist in `schema` with a compatible type; arrays
// are checked element-wise against the schema's first element.
void check_against_schema(const json& schema, const json& given, const std::string& path) {
  if (!types_compatible(schema, given))
    throw ConfigError("config field " + (path.empty() ? "<root>" : path) +
                      ": expected " + std::string(schema.type_name()) + ", got " +
                      std::string(given.type_name()));
  if (schema.is_object()) {
    for (auto it = given.begin(); it != given.end(); ++it) {
      const std::string sub = path.empty() ? it.key() : path + "." + it.key();
      if (!schema.contains(it.key())) throw ConfigError("unknown config field: " + sub);
      check_against_schema(schema.at(it.key()), it.value(), sub);
    }
  } else if (schema.is_array() && !schema.empty()) {
    for (std::size_t i = 0; i < given.size(); ++i)
      check_against_schema(schema.at(0), given.at(i),
                           path + "[" + std::to_string(i) + "]");
  }
}

void merge_into(json& base, const json& overrides) {
  if (!overrides.is_object() || !base.is_object()) {
    base = overrides;
    return;
  }
  for (auto it = overrides.begin(); it != overrides.end(); ++it) {
    if (base.contains(it.key()) && base.at(it.key()).is_object() && it.value().is_object())
      merge_into(base.at(it.key()), it.value());
    else
      base[it.key()] = it.value();
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

json default_config_json() {
  json j;
  j["seed"] = 2024;
  j["threads"] = 1;
  j["output_dir"] = "romforge_out";

  j["fem"] = {{"nx", 40},
              {"ny", 10},
              {"length", 2.0},
              {"height", 1.25},
              {"youngs_modulus", 5.0e4},
              {"poisson_ratio", 0.40},
              {"newton",
               {{"tolerance", 1e-9}, {"max_iter", 25}, {"load_steps", 5}, {"max_halvings", 10}}}};

  j["sampling"] = {{"train", 500},
                   {"validation", 125},
                   {"test", 50},
                   {"box", {{"min", {-3000.0, -3000.0}}, {"max", {3000.0, 3000.0}}}},
                   {"mu_res", {0.0, 0.0}},
                   {"halton_start", 1},
                   {"extrapolation", {{"count", 50}, {"band", 500.0}, {"seed", 77}}}};

  j["svd"] = {{"n", 6}, {"n_bar", 54}};

  j["ann"] = {{"hidden", {200, 200}},
              {"optimizer",
               {{"beta1", 0.9}, {"beta2", 0.999}, {"epsilon", 1e-7}, {"weight_decay", 4e-3}}}};

  j["training"] = {{"batch_size", 16},
                   {"lr_min", 1e-6},
                   {"checkpoint_every", 0},
                   {"sloss", {{"epochs", 800}, {"lr0", 1e-3}}},
                   {"rloss", {{"epochs", 200}, {"lr0", 1e-4}}},
                   {"qloss", {{"epochs", 800}, {"lr0", 1e-3}}}};

  j["rom"] = {{"tolerance", 1e-8}, {"max_iter", 25}, {"load_steps", 5}, {"max_halvings", 10}};

  j["eval"] = {{"grid_n", {6, 10, 14, 18, 20}},
               {"total_modes", 60},
               {"appendix_c",
                {{"n", 14},
                 {"epochs", 200},
                 {"variants",
                  {{{"hidden", {200}}, {"batch_size", 16}},
                   {{"hidden", {200, 200}}, {"batch_size", 8}},
                   {{"hidden", {200, 200}}, {"batch_size", 16}},
                   {{"hidden", {400, 400}}, {"batch_size", 16}}}}}}};

  j["bench"] = {{"batch_reps", 20}, {"naive_reps", 2}, {"pod_sizes", {18, 40}}, {"loads", 5}};
  return j;
}

RunConfig parse_config(const json& overrides) {
  json merged = default_config_json();
  check_against_schema(merged, overrides, "");
  merge_into(merged, overrides);

  RunConfig c;
  c.canonical = merged;
  // threads and output_dir are execution knobs: results are independent of
  // both, so they stay out of the artifact identity.
  json hashed = merged;
  hashed.erase("threads");
  hashed.erase("output_dir");
  c.hash = util::fnv1a64(hashed.dump());

  c.seed = merged.at("seed").get<std::uint64_t>();
  c.threads = merged.at("threads").get<int>();
  c.output_dir = merged.at("output_dir").get<std::string>();

  const auto& f = merged.at("fem");
  c.nx = f.at("nx").get<int>();
  c.ny = f.at("ny").get<int>();
  c.length = f.at("length").get<double>();
  c.height = f.at("height").get<double>();
  c.youngs_modulus = f.at("youngs_modulus").get<double>();
  c.poisson_ratio = f.at("poisson_ratio").get<double>();
  const auto& nt = f.at("newton");
  c.newton.tolerance = nt.at("tolerance").get<double>();
  c.newton.max_iter = nt.at("max_iter").get<int>();
  c.newton.load_steps = nt.at("load_steps").get<int>();
  c.newton.max_halvings = nt.at("max_halvings").get<int>();

  const auto& s = merged.at("sampling");
  c.train_count = s.at("train").get<int>();
  c.val_count = s.at("validation").get<int>();
  c.test_count = s.at("test").get<int>();
  const auto& box = s.at("box");
  c.box.lo = Vec2(box.at("min").at(0).get<double>(), box.at("min").at(1).get<double>());
  c.box.hi = Vec2(box.at("max").at(0).get<double>(), box.at("max").at(1).get<double>());
  c.mu_res.px = s.at("mu_res").at(0).get<double>();
  c.mu_res.py = s.at("mu_res").at(1).get<double>();
  c.halton_start = s.at("halton_start").get<std::uint64_t>();
  const auto& ex = s.at("extrapolation");
  c.extrap_count = ex.at("count").get<int>();
  c.extrap_band = ex.at("band").get<double>();
  c.extrap_seed = ex.at("seed").get<std::uint64_t>();

  c.n = merged.at("svd").at("n").get<int>();
  c.n_bar = merged.at("svd").at("n_bar").get<int>();

  const auto& a = merged.at("ann");
  c.hidden = a.at("hidden").get<std::vector<int>>();
  const auto& opt = a.at("optimizer");
  c.adamw.beta1 = opt.at("beta1").get<double>();
  c.adamw.beta2 = opt.at("beta2").get<double>();
  c.adamw.epsilon = opt.at("epsilon").get<double>();
  c.adamw.weight_decay = opt.at("weight_decay").get<double>();

  const auto& t = merged.at("training");
  c.batch_size = t.at("batch_size").get<int>();
  c.lr_min = t.at("lr_min").get<double>();
  c.checkpoint_every = t.at("checkpoint_every").get<int>();
  c.sloss_epochs = t.at("sloss").at("epochs").get<int>();
  c.sloss_lr0 = t.at("sloss").at("lr0").get<double>();
  c.rloss_epochs = t.at("rloss").at("epochs").get<int>();
  c.rloss_lr0 = t.at("rloss").at("lr0").get<double>();
  c.qloss_epochs = t.at("qloss").at("epochs").get<int>();
  c.qloss_lr0 = t.at("qloss").at("lr0").get<double>();

  const auto& r = merged.at("rom");
  c.rom.tolerance = r.at("tolerance").get<double>();
  c.rom.max_iter = r.at("max_iter").get<int>();
  c.rom.load_steps = r.at("load_steps").get<int>();
  c.rom.max_halvings = r.at("max_halvings").get<int>();

  const auto& e = merged.at("eval");
  c.grid_n = e.at("grid_n").get<std::vector<int>>();
  c.total_modes = e.at("total_modes").get<int>();
  const auto& ac = e.at("appendix_c");
  c.appendix_c_n = ac.at("n").get<int>();
  c.appendix_c_epochs = ac.at("epochs").get<int>();
  c.appendix_c_variants.clear();
  for (const auto& v : ac.at("variants"))
    c.appendix_c_variants.push_back(
        {v.at("hidden").get<std::vector<int>>(), v.at("batch_size").get<int>()});

  const auto& b = merged.at("bench");
  c.bench_batch_reps = b.at("batch_reps").get<int>();
  c.bench_naive_reps = b.at("naive_reps").get<int>();
  c.bench_pod_sizes = b.at("pod_sizes").get<std::vector<int>>();
  c.bench_loads = b.at("loads").get<int>();

  // ---- range checks --------------------------------------------------------
  require(c.threads >= 1, "threads must be >= 1");
  require(!c.output_dir.empty(), "output_dir must not be empty");
  require(c.nx >= 1 && c.ny >= 1, "fem.nx and fem.ny must be >= 1");
  require(c.length > 0.0 && c.height > 0.0, "fem.length and fem.height must be positive");
  require(c.youngs_modulus > 0.0, "fem.youngs_modulus must be positive");
  require(c.poisson_ratio > 0.0 && c.poisson_ratio < 0.5,
          "fem.poisson_ratio must lie in (0, 0.5)");
  require(c.newton.tolerance > 0.0, "fem.newton.tolerance must be positive");
  require(c.newton.max_iter >= 1 && c.newton.load_steps >= 1,
          "fem.newton.max_iter and load_steps must be >= 1");
  require(c.train_count >= 1 && c.val_count >= 1 && c.test_count >= 1,
          "sampling counts must be >= 1");
  require((c.box.hi - c.box.lo).minCoeff() >= 0.0, "sampling.box is inverted");
  require(c.halton_start >= 1, "sampling.halton_start must be >= 1");
  require(c.extrap_count >= 1 && c.extrap_band > 0.0,
          "sampling.extrapolation needs count >= 1 and band > 0");
  require(c.n >= 1 && c.n_bar >= 1, "svd.n and svd.n_bar must be >= 1");
  require(!c.hidden.empty(), "ann.hidden must not be empty");
  for (int h : c.hidden) require(h >= 1, "ann.hidden entries must be >= 1");
  require(c.adamw.beta1 > 0.0 && c.adamw.beta1 < 1.0 && c.adamw.beta2 > 0.0 &&
              c.adamw.beta2 < 1.0,
          "ann.optimizer betas must lie in (0, 1)");
  require(c.adamw.epsilon > 0.0, "ann.optimizer.epsilon must be positive");
  require(c.adamw.weight_decay >= 0.0, "ann.optimizer.weight_decay must be >= 0");
  require(c.batch_size >= 1, "training.batch_size must be >= 1");
  require(c.lr_min > 0.0, "training.lr_min must be positive");
  require(c.checkpoint_every >= 0, "training.checkpoint_every must be >= 0");
  require(c.sloss_epochs >= 1 && c.rloss_epochs >= 1 && c.qloss_epochs >= 1,
          "training epochs must be >= 1");
  require(c.sloss_lr0 >= c.lr_min && c.rloss_lr0 >= c.lr_min && c.qloss_lr0 >= c.lr_min,
          "training lr0 must be >= lr_min");
  require(c.rom.tolerance > 0.0, "rom.tolerance must be positive");
  require(c.rom.max_iter >= 1 && c.rom.load_steps >= 1,
          "rom.max_iter and rom.load_steps must be >= 1");
  require(!c.grid_n.empty(), "eval.grid_n must not be empty");
  for (int gn : c.grid_n)
    require(gn >= 1 && gn < c.total_modes,
            "eval.grid_n entries must lie in [1, total_modes)");
  require(c.total_modes >= 2, "eval.total_modes must be >= 2");
  require(c.total_modes <= c.train_count,
          "eval.total_modes cannot exceed the training sample count");
  require(c.appendix_c_n >= 1 && c.appendix_c_n < c.total_modes,
          "eval.appendix_c.n must lie in [1, total_modes)");
  require(c.appendix_c_epochs >= 1, "eval.appendix_c.epochs must be >= 1");
  require(!c.appendix_c_variants.empty(), "eval.appendix_c.variants must not be empty");
  for (const auto& v : c.appendix_c_variants) {
    require(!v.hidden.empty(), "eval.appendix_c variant hidden dims must not be empty");
    for (int h : v.hidden) require(h >= 1, "eval.appendix_c hidden entries must be >= 1");
    require(v.batch_size >= 1, "eval.appendix_c batch_size must be >= 1");
  }
  require(c.bench_batch_reps >= 1 && c.bench_naive_reps >= 1,
          "bench reps must be >= 1");
  for (int k : c.bench_pod_sizes)
    require(k >= 1 && k <= c.total_modes, "bench.pod_sizes must lie in [1, total_modes]");
  require(c.bench_loads >= 1, "bench.loads must be >= 1");

  const int free_dofs = 2 * c.nx * (c.ny + 1);
  require(c.total_modes <= free_dofs, "eval.total_modes exceeds the free dof count");
  require(c.n + c.n_bar <= std::min(free_dofs, c.train_count),
          "svd.n + svd.n_bar exceeds the available modes");

  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& ex) {
    throw ConfigError("malformed config json in " + path + ": " + ex.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a json object");
  return parse_config(j);
}

RunConfig default_config() { return parse_config(json::object()); }

}  // namespace romforge::cfg
