#include "romforge/manifold.hpp"

#include <filesystem>
#include <fstream>

#include "romforge/util.hpp"

namespace romforge::rom {

namespace fs = std::filesystem;

std::string variant_name(Variant v) {
  return v == Variant::scaled ? "scaled" : "original";
}

Variant variant_from_name(const std::string& name) {
  if (name == "scaled") return Variant::scaled;
  if (name == "original") return Variant::original;
  throw IoError("unknown manifold variant: " + name);
}

void validate_manifold(const PromAnnManifold& m) {
  if (m.net.input_dim() != m.bases.n())
    throw ConfigError("net input dim " + std::to_string(m.net.input_dim()) +
                      " != primary basis size " + std::to_string(m.bases.n()));
  if (m.net.output_dim() != m.bases.n_bar())
    throw ConfigError("net output dim " + std::to_string(m.net.output_dim()) +
                      " != secondary basis size " + std::to_string(m.bases.n_bar()));
  if (m.variant == Variant::original && m.u_ref.size() != m.bases.dofs())
    throw ConfigError("original variant needs a reference state of full dimension");
}

Vec encode(const PromAnnManifold& m, const Vec& u) {
  if (u.size() != m.dofs()) throw ConfigError("encode: state dimension mismatch");
  if (m.variant == Variant::scaled) return pod::encode(m.bases, u);
  return m.bases.phi.transpose() * (u - m.u_ref);
}

Vec decode(const PromAnnManifold& m, const Vec& q) {
  if (q.size() != m.reduced_dim()) throw ConfigError("decode: reduced dimension mismatch");
  const Vec correction = ann::forward(m.net, q);
  if (m.variant == Variant::scaled)
    return pod::decode_linear_part(m.bases, q) + pod::lift_secondary(m.bases, correction);
  return m.u_ref + m.bases.phi * q + m.bases.phi_bar * correction;
}

Mat decode_jacobian(const PromAnnManifold& m, const Vec& q) {
  if (q.size() != m.reduced_dim()) throw ConfigError("decode: reduced dimension mismatch");
  const Mat net_jac = ann::input_jacobian(m.net, q);
  if (m.variant == Variant::scaled)
    return m.bases.phi * m.bases.xi.asDiagonal() +
           m.bases.phi_bar * m.bases.xi_bar.asDiagonal() * net_jac;
  return m.bases.phi + m.bases.phi_bar * net_jac;
}

Mat reconstruct_batch(const PromAnnManifold& m, const Mat& U, int threads) {
  if (U.rows() != m.dofs()) throw ConfigError("reconstruct: state dimension mismatch");
  Mat out(U.rows(), U.cols());
  util::parallel_for(0, U.cols(), threads,
                     [&](std::int64_t j) { out.col(j) = decode(m, encode(m, U.col(j))); });
  return out;
}

void save_bundle(const PromAnnManifold& m, const std::string& dir,
                 const nlohmann::json& extra, std::uint64_t init_seed,
                 const ann::AdamWConfig& opt, double base_lr) {
  validate_manifold(m);
  fs::create_directories(dir);
  pod::save_bases(m.bases, (fs::path(dir) / "bases.bin").string());
  ann::WeightsFile wf;
  wf.net = m.net;
  wf.seed = init_seed;
  wf.optimizer = opt;
  wf.base_lr = base_lr;
  ann::save_weights_json(wf, (fs::path(dir) / "weights.json").string());

  nlohmann::json manifest = extra;
  manifest["variant"] = variant_name(m.variant);
  manifest["n"] = m.bases.n();
  manifest["n_bar"] = m.bases.n_bar();
  manifest["dofs"] = static_cast<std::uint64_t>(m.dofs());
  if (m.variant == Variant::original) {
    std::vector<double> u_ref(m.u_ref.data(), m.u_ref.data() + m.u_ref.size());
    manifest["u_ref"] = std::move(u_ref);
  }
  std::ofstream os(fs::path(dir) / "manifest.json", std::ios::trunc);
  if (!os) throw IoError("cannot write manifest in " + dir);
  os << manifest.dump(2) << "\n";
  if (!os) throw IoError("write failed: " + dir + "/manifest.json");
}

Bundle load_bundle(const std::string& dir) {
  const fs::path base(dir);
  if (!fs::exists(base / "manifest.json"))
    throw IoError("not a manifold bundle (no manifest.json): " + dir);
  std::ifstream is(base / "manifest.json");
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest in " + dir + ": " + e.what());
  }

  Bundle bundle;
  bundle.manifest = manifest;
  bundle.manifold.bases = pod::load_bases((base / "bases.bin").string());
  bundle.manifold.net = ann::load_weights_json((base / "weights.json").string()).net;
  try {
    bundle.manifold.variant = variant_from_name(manifest.at("variant").get<std::string>());
    if (bundle.manifold.variant == Variant::original) {
      const auto u_ref = manifest.at("u_ref").get<std::vector<double>>();
      bundle.manifold.u_ref =
          Eigen::Map<const Vec>(u_ref.data(), static_cast<Eigen::Index>(u_ref.size()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest missing fields in " + dir + ": " + e.what());
  }
  validate_manifold(bundle.manifold);
  return bundle;
}

}  // namespace romforge::rom
