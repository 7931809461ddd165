#include "romforge/fem.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace romforge::fem {

namespace {

// dP for a perturbation dF of the deformation gradient:
//   dP = mu dF + (mu - lambda ln J) F^-T dF^T F^-T + lambda tr(F^-1 dF) F^-T
Mat2 tangent_apply(const Mat2& dF, const Mat2& Finv, const Mat2& FinvT,
                   double log_j, double lambda, double mu) {
  return mu * dF + (mu - lambda * log_j) * (FinvT * dF.transpose() * FinvT) +
         lambda * (Finv * dF).trace() * FinvT;
}

}  // namespace

FemModel::FemModel(Mesh mesh, double youngs_modulus, double poisson_ratio)
    : mesh_(std::move(mesh)) {
  if (youngs_modulus <= 0.0) throw ConfigError("Young's modulus must be positive");
  if (poisson_ratio <= 0.0 || poisson_ratio >= 0.5)
    throw ConfigError("Poisson ratio must lie in (0, 0.5) for plane strain");

  lambda_ = youngs_modulus * poisson_ratio /
            ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
  mu_ = youngs_modulus / (2.0 * (1.0 + poisson_ratio));

  elements_.reserve(mesh_.triangles.size());
  for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) {
    const auto& tri = mesh_.triangles[t];
    Element e;
    e.n[0] = tri[0];
    e.n[1] = tri[1];
    e.n[2] = tri[2];
    const Vec2 x1 = mesh_.nodes[static_cast<std::size_t>(tri[0])];
    const Vec2 x2 = mesh_.nodes[static_cast<std::size_t>(tri[1])];
    const Vec2 x3 = mesh_.nodes[static_cast<std::size_t>(tri[2])];
    Mat2 edges;
    edges.col(0) = x2 - x1;
    edges.col(1) = x3 - x1;
    const double det = edges.determinant();
    if (det <= 0.0)
      throw ConfigError("triangle " + std::to_string(t) + " is degenerate or clockwise");
    e.area = 0.5 * det;
    const Mat2 inv = edges.inverse();
    // N1 = 1 - xi - eta, N2 = xi, N3 = eta  =>  dN/d(xi,eta) rows stacked
    Eigen::Matrix<double, 3, 2> dN_ref;
    dN_ref << -1.0, -1.0, 1.0, 0.0, 0.0, 1.0;
    e.grad = dN_ref * inv;
    elements_.push_back(e);
  }

  // Clamp both components of every left-edge node.
  std::vector<bool> fixed(static_cast<std::size_t>(2 * mesh_.node_count()), false);
  for (int n : mesh_.left_edge) {
    fixed[static_cast<std::size_t>(2 * n)] = true;
    fixed[static_cast<std::size_t>(2 * n + 1)] = true;
  }
  free_index_.assign(fixed.size(), -1);
  for (std::size_t d = 0; d < fixed.size(); ++d) {
    if (!fixed[d]) {
      free_index_[d] = static_cast<int>(free_to_full_.size());
      free_to_full_.push_back(static_cast<int>(d));
    }
  }

  // Consistent nodal forces of a unit line load on the reference right edge:
  // each segment of length L puts L/2 on both of its endpoints.
  f_px_ = Vec::Zero(dof_count());
  f_py_ = Vec::Zero(dof_count());
  for (std::size_t s = 0; s + 1 < mesh_.right_edge.size(); ++s) {
    const int a = mesh_.right_edge[s];
    const int b = mesh_.right_edge[s + 1];
    const double len = (mesh_.nodes[static_cast<std::size_t>(b)] -
                        mesh_.nodes[static_cast<std::size_t>(a)])
                           .norm();
    for (int node : {a, b}) {
      const int ix = free_index_[static_cast<std::size_t>(2 * node)];
      const int iy = free_index_[static_cast<std::size_t>(2 * node + 1)];
      if (ix >= 0) f_px_[ix] += 0.5 * len;
      if (iy >= 0) f_py_[iy] += 0.5 * len;
    }
  }
}

Mat2 FemModel::displacement_gradient(const Element& e, const Vec& u_full) const {
  // sum_a grad_a = 0 for linear shape functions, so G = sum_a u_a grad_a^T
  // equals d1 grad_1^T + d2 grad_2^T with relative displacements d_a = u_a -
  // u_0.  The relative form stays accurate when displacements dwarf strains.
  const Vec2 u0(u_full[2 * e.n[0]], u_full[2 * e.n[0] + 1]);
  const Vec2 d1(u_full[2 * e.n[1]] - u0[0], u_full[2 * e.n[1] + 1] - u0[1]);
  const Vec2 d2(u_full[2 * e.n[2]] - u0[0], u_full[2 * e.n[2] + 1] - u0[1]);
  return d1 * e.grad.row(1) + d2 * e.grad.row(2);
}

Mat2 FemModel::deformation_gradient(const Element& e, const Vec& u_full) const {
  return Mat2::Identity() + displacement_gradient(e, u_full);
}

Vec FemModel::full_from_free(const Vec& u) const {
  if (u.size() != dof_count()) throw ConfigError("state size does not match free dof count");
  Vec full = Vec::Zero(total_dof_count());
  for (int i = 0; i < dof_count(); ++i) full[free_to_full_[static_cast<std::size_t>(i)]] = u[i];
  return full;
}

Vec FemModel::free_from_full(const Vec& u_full) const {
  if (u_full.size() != total_dof_count())
    throw ConfigError("full state size does not match total dof count");
  Vec u(dof_count());
  for (int i = 0; i < dof_count(); ++i) u[i] = u_full[free_to_full_[static_cast<std::size_t>(i)]];
  return u;
}

Vec FemModel::residual(const Vec& u, const LoadParams& mu) const {
  if (u.size() != dof_count()) throw ConfigError("state size does not match free dof count");
  if (!u.allFinite()) throw DegenerateStateError("non-finite displacement state");
  const Vec u_full = full_from_free(u);

  // At equilibrium the element forces cancel the applied load to many digits
  // of their own magnitude, so evaluation noise sets the floor of ||R||.  Two
  // measures keep that floor well below the solver tolerance: det F - 1 and
  // F - F^-T are expanded so every term carries a factor of the displacement
  // gradient (no I + G round trip), and the stress kernel plus the global
  // accumulation run in extended precision with a single final rounding.
  std::vector<long double> acc(static_cast<std::size_t>(dof_count()));
  for (int i = 0; i < dof_count(); ++i)
    acc[static_cast<std::size_t>(i)] =
        -static_cast<long double>(mu.px) * f_px_[i] -
        static_cast<long double>(mu.py) * f_py_[i];

  for (std::size_t t = 0; t < elements_.size(); ++t) {
    const Element& e = elements_[t];
    const long double u0x = u_full[2 * e.n[0]], u0y = u_full[2 * e.n[0] + 1];
    const long double d1x = u_full[2 * e.n[1]] - u0x, d1y = u_full[2 * e.n[1] + 1] - u0y;
    const long double d2x = u_full[2 * e.n[2]] - u0x, d2y = u_full[2 * e.n[2] + 1] - u0y;
    const long double g11 = d1x * e.grad(1, 0) + d2x * e.grad(2, 0);
    const long double g12 = d1x * e.grad(1, 1) + d2x * e.grad(2, 1);
    const long double g21 = d1y * e.grad(1, 0) + d2y * e.grad(2, 0);
    const long double g22 = d1y * e.grad(1, 1) + d2y * e.grad(2, 1);
    const long double jm1 = g11 + g22 + g11 * g22 - g12 * g21;
    const long double det = 1.0L + jm1;
    if (!(det > 0.0L))
      throw DegenerateStateError("element " + std::to_string(t) + " inverted (det F <= 0)");
    const long double log_j = std::log1p(jm1);
    // rows of F - F^-T and of F^-T, assembled scalar by scalar
    const long double fmt00 =
        ((1.0L + g22) * g11 * (2.0L + g11) - (1.0L + g11) * g12 * g21) / det;
    const long double fmt11 =
        ((1.0L + g11) * g22 * (2.0L + g22) - (1.0L + g22) * g12 * g21) / det;
    const long double fmt01 = (g12 * det + g21) / det;
    const long double fmt10 = (g21 * det + g12) / det;
    const long double vol = lambda_ * log_j / det;
    const long double p00 = mu_ * fmt00 + vol * (1.0L + g22);
    const long double p01 = mu_ * fmt01 - vol * g21;
    const long double p10 = mu_ * fmt10 - vol * g12;
    const long double p11 = mu_ * fmt11 + vol * (1.0L + g11);
    for (int a = 0; a < 3; ++a) {
      const int ix = free_index_[static_cast<std::size_t>(2 * e.n[a])];
      const int iy = free_index_[static_cast<std::size_t>(2 * e.n[a] + 1)];
      const long double gax = e.grad(a, 0), gay = e.grad(a, 1);
      if (ix >= 0) acc[static_cast<std::size_t>(ix)] += e.area * (p00 * gax + p01 * gay);
      if (iy >= 0) acc[static_cast<std::size_t>(iy)] += e.area * (p10 * gax + p11 * gay);
    }
  }
  Vec r(dof_count());
  for (int i = 0; i < dof_count(); ++i)
    r[i] = static_cast<double>(acc[static_cast<std::size_t>(i)]);
  if (!r.allFinite()) throw DegenerateStateError("non-finite residual");
  return r;
}

void FemModel::element_tangent(const Mat2& F, const Element& e,
                               Eigen::Matrix<double, 6, 6>& K) const {
  const double det = F.determinant();
  const double log_j = std::log(det);
  const Mat2 Finv = F.inverse();
  const Mat2 FinvT = Finv.transpose();
  for (int b = 0; b < 3; ++b) {
    for (int j = 0; j < 2; ++j) {
      Mat2 dF = Mat2::Zero();
      dF(j, 0) = e.grad(b, 0);
      dF(j, 1) = e.grad(b, 1);
      const Mat2 dP = tangent_apply(dF, Finv, FinvT, log_j, lambda_, mu_);
      const Eigen::Matrix<double, 2, 3> col = e.area * (dP * e.grad.transpose());
      for (int a = 0; a < 3; ++a) {
        K(2 * a, 2 * b + j) = col(0, a);
        K(2 * a + 1, 2 * b + j) = col(1, a);
      }
    }
  }
}

SpMat FemModel::jacobian(const Vec& u, const LoadParams&) const {
  if (u.size() != dof_count()) throw ConfigError("state size does not match free dof count");
  if (!u.allFinite()) throw DegenerateStateError("non-finite displacement state");
  const Vec u_full = full_from_free(u);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(elements_.size() * 36);
  Eigen::Matrix<double, 6, 6> K;
  for (std::size_t t = 0; t < elements_.size(); ++t) {
    const Element& e = elements_[t];
    const Mat2 F = deformation_gradient(e, u_full);
    if (!(F.determinant() > 0.0))
      throw DegenerateStateError("element " + std::to_string(t) + " inverted (det F <= 0)");
    element_tangent(F, e, K);
    for (int a = 0; a < 3; ++a) {
      for (int i = 0; i < 2; ++i) {
        const int row = free_index_[static_cast<std::size_t>(2 * e.n[a] + i)];
        if (row < 0) continue;
        for (int b = 0; b < 3; ++b) {
          for (int j = 0; j < 2; ++j) {
            const int col = free_index_[static_cast<std::size_t>(2 * e.n[b] + j)];
            if (col < 0) continue;
            trips.emplace_back(row, col, K(2 * a + i, 2 * b + j));
          }
        }
      }
    }
  }
  SpMat J(dof_count(), dof_count());
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

Vec FemModel::vjp(const Vec& u, const LoadParams&, const Vec& w) const {
  if (u.size() != dof_count() || w.size() != dof_count())
    throw ConfigError("state/cotangent size does not match free dof count");
  if (!u.allFinite() || !w.allFinite())
    throw DegenerateStateError("non-finite input to vjp");
  const Vec u_full = full_from_free(u);

  Vec out = Vec::Zero(dof_count());
  Eigen::Matrix<double, 6, 6> K;
  Eigen::Matrix<double, 6, 1> we;
  for (std::size_t t = 0; t < elements_.size(); ++t) {
    const Element& e = elements_[t];
    const Mat2 F = deformation_gradient(e, u_full);
    if (!(F.determinant() > 0.0))
      throw DegenerateStateError("element " + std::to_string(t) + " inverted (det F <= 0)");
    element_tangent(F, e, K);
    for (int a = 0; a < 3; ++a) {
      for (int i = 0; i < 2; ++i) {
        const int row = free_index_[static_cast<std::size_t>(2 * e.n[a] + i)];
        we[2 * a + i] = row >= 0 ? w[row] : 0.0;
      }
    }
    const Eigen::Matrix<double, 6, 1> ve = K.transpose() * we;
    for (int b = 0; b < 3; ++b) {
      for (int j = 0; j < 2; ++j) {
        const int col = free_index_[static_cast<std::size_t>(2 * e.n[b] + j)];
        if (col >= 0) out[col] += ve[2 * b + j];
      }
    }
  }
  return out;
}

}  // namespace romforge::fem
