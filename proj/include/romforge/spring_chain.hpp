#pragma once

#include "romforge/fem.hpp"

namespace romforge::fem {

// 1D chain of cubic-hardening springs, clamped at one end and pulled by a
// scalar load at the other.  Spring i connects node i-1 (node -1 being the
// wall) to node i and carries force k d + alpha d^3 for elongation d.  Cheap
// stand-in for the hyperelastic model in gradient-oracle tests; the load
// scalar rides in LoadParams::px.
class SpringChainModel final : public ResidualModel {
 public:
  SpringChainModel(double k, double alpha, int n_dof);

  int dof_count() const override { return n_; }
  Vec residual(const Vec& u, const LoadParams& mu) const override;
  SpMat jacobian(const Vec& u, const LoadParams& mu) const override;
  Vec vjp(const Vec& u, const LoadParams& mu, const Vec& w) const override;

 private:
  double k_;
  double alpha_;
  int n_;
};

// Free-function form of the residual, handy in tests.
Vec spring_chain_residual(double k, double alpha, int n_dof, const Vec& u,
                          double load_scalar);

}  // namespace romforge::fem
