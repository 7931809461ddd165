#include "romforge/spring_chain.hpp"

namespace romforge::fem {

SpringChainModel::SpringChainModel(double k, double alpha, int n_dof)
    : k_(k), alpha_(alpha), n_(n_dof) {
  if (n_dof < 1) throw ConfigError("spring chain needs at least one dof");
  if (k <= 0.0) throw ConfigError("spring stiffness must be positive");
}

Vec SpringChainModel::residual(const Vec& u, const LoadParams& mu) const {
  if (u.size() != n_) throw ConfigError("state size does not match chain length");
  Vec r = Vec::Zero(n_);
  for (int i = 0; i < n_; ++i) {
    const double d = u[i] - (i > 0 ? u[i - 1] : 0.0);
    const double f = k_ * d + alpha_ * d * d * d;
    r[i] += f;
    if (i > 0) r[i - 1] -= f;
  }
  r[n_ - 1] -= mu.px;
  return r;
}

SpMat SpringChainModel::jacobian(const Vec& u, const LoadParams&) const {
  if (u.size() != n_) throw ConfigError("state size does not match chain length");
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(4 * n_));
  for (int i = 0; i < n_; ++i) {
    const double d = u[i] - (i > 0 ? u[i - 1] : 0.0);
    const double s = k_ + 3.0 * alpha_ * d * d;  // tangent stiffness of spring i
    trips.emplace_back(i, i, s);
    if (i > 0) {
      trips.emplace_back(i, i - 1, -s);
      trips.emplace_back(i - 1, i, -s);
      trips.emplace_back(i - 1, i - 1, s);
    }
  }
  SpMat J(n_, n_);
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

Vec SpringChainModel::vjp(const Vec& u, const LoadParams&, const Vec& w) const {
  if (u.size() != n_ || w.size() != n_)
    throw ConfigError("state/cotangent size does not match chain length");
  // J is symmetric here, but accumulate w^T J spring by spring anyway so the
  // code path mirrors the FEM implementation rather than exploiting symmetry.
  Vec out = Vec::Zero(n_);
  for (int i = 0; i < n_; ++i) {
    const double d = u[i] - (i > 0 ? u[i - 1] : 0.0);
    const double s = k_ + 3.0 * alpha_ * d * d;
    const double w_here = w[i];
    const double w_prev = i > 0 ? w[i - 1] : 0.0;
    out[i] += s * (w_here - w_prev);
    if (i > 0) out[i - 1] -= s * (w_here - w_prev);
  }
  return out;
}

Vec spring_chain_residual(double k, double alpha, int n_dof, const Vec& u,
                          double load_scalar) {
  return SpringChainModel(k, alpha, n_dof).residual(u, LoadParams{load_scalar, 0.0});
}

}  // namespace romforge::fem
