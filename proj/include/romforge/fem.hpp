#pragma once

#include <vector>

#include "romforge/common.hpp"
#include "romforge/mesh.hpp"

namespace romforge::fem {

// Line load on the right edge, N/m in x and y.
struct LoadParams {
  double px = 0.0;
  double py = 0.0;
};

// A parametrized nonlinear system R(u; mu) = 0 over free dofs.  The Jacobian
// is dR/du; vjp(u, mu, w) returns w^T dR/du as a vector without forming the
// sparse matrix.  Implementations are callable concurrently on distinct
// states; models themselves are immutable after construction.
class ResidualModel {
 public:
  virtual ~ResidualModel() = default;
  virtual int dof_count() const = 0;
  virtual Vec residual(const Vec& u, const LoadParams& mu) const = 0;
  virtual SpMat jacobian(const Vec& u, const LoadParams& mu) const = 0;
  virtual Vec vjp(const Vec& u, const LoadParams& mu, const Vec& w) const = 0;
};

// Compressible Neo-Hookean plane-strain cantilever on linear triangles with
// one-point quadrature.  Left edge clamped (those dofs are eliminated; all
// vectors live on free dofs), right edge carries a constant line load that is
// integrated into consistent nodal forces on the reference edge, so the
// external force is independent of u and linear in (px, py).
//
// Energy density: psi(F) = mu/2 (tr(F^T F) - 2) - mu ln J + lambda/2 (ln J)^2.
class FemModel final : public ResidualModel {
 public:
  FemModel(Mesh mesh, double youngs_modulus = 3.0e6, double poisson_ratio = 0.40);

  int dof_count() const override { return static_cast<int>(free_to_full_.size()); }
  Vec residual(const Vec& u, const LoadParams& mu) const override;
  SpMat jacobian(const Vec& u, const LoadParams& mu) const override;
  Vec vjp(const Vec& u, const LoadParams& mu, const Vec& w) const override;

  const Mesh& mesh() const { return mesh_; }
  double lame_lambda() const { return lambda_; }
  double lame_mu() const { return mu_; }

  int total_dof_count() const { return 2 * mesh_.node_count(); }
  bool is_fixed_dof(int full_dof) const { return free_index_[static_cast<std::size_t>(full_dof)] < 0; }

  // Reinserts Dirichlet zeros / strips them again.
  Vec full_from_free(const Vec& u) const;
  Vec free_from_full(const Vec& u_full) const;

  Vec external_force(const LoadParams& mu) const { return mu.px * f_px_ + mu.py * f_py_; }

 private:
  struct Element {
    int n[3];
    Eigen::Matrix<double, 3, 2> grad;  // row a = reference gradient of shape fn a
    double area;
  };

  Mat2 displacement_gradient(const Element& e, const Vec& u_full) const;
  Mat2 deformation_gradient(const Element& e, const Vec& u_full) const;
  void element_tangent(const Mat2& F, const Element& e,
                       Eigen::Matrix<double, 6, 6>& K) const;

  Mesh mesh_;
  double lambda_ = 0.0;
  double mu_ = 0.0;
  std::vector<Element> elements_;
  std::vector<int> free_index_;    // full dof -> free dof or -1
  std::vector<int> free_to_full_;  // free dof -> full dof
  Vec f_px_, f_py_;                // nodal force per unit px / py, free dofs
};

}  // namespace romforge::fem
