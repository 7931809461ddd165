#pragma once

#include <string>

#include <json.hpp>

#include "romforge/mlp.hpp"
#include "romforge/pod_bases.hpp"

namespace romforge::rom {

// scaled:   E(u) = Xi^-1 Phi^T u,           D(q) = Phi Xi q + Phi_bar Xi_bar N(q)
// original: E(u) = Phi^T (u - u_ref),       D(q) = u_ref + Phi q + Phi_bar N(q)
enum class Variant { scaled, original };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct PromAnnManifold {
  pod::RomBases bases;
  ann::MlpModel net;
  Variant variant = Variant::scaled;
  Vec u_ref;  // reference state of the original variant; empty when scaled

  int reduced_dim() const { return bases.n(); }
  Eigen::Index dofs() const { return bases.dofs(); }
};

// Checks dimensional consistency (net input n, output n_bar, u_ref presence).
void validate_manifold(const PromAnnManifold& m);

Vec encode(const PromAnnManifold& m, const Vec& u);
Vec decode(const PromAnnManifold& m, const Vec& q);

// d decode / d q, dofs x n.
Mat decode_jacobian(const PromAnnManifold& m, const Vec& q);

// decode(encode(u_j)) column by column.
Mat reconstruct_batch(const PromAnnManifold& m, const Mat& U, int threads = 1);

// ---- bundle directory -------------------------------------------------------
// <dir>/bases.bin + <dir>/weights.json + <dir>/manifest.json.  The manifest
// stores the variant (plus u_ref for `original`) and whatever bookkeeping the
// caller passes in `extra` (config hash, dataset hash, training record...).

void save_bundle(const PromAnnManifold& m, const std::string& dir,
                 const nlohmann::json& extra, std::uint64_t init_seed,
                 const ann::AdamWConfig& opt, double base_lr);

struct Bundle {
  PromAnnManifold manifold;
  nlohmann::json manifest;
};

Bundle load_bundle(const std::string& dir);

}  // namespace romforge::rom
