#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "catalog_fixtures.hpp"
#include "drps/functions.hpp"
#include "drps/oracles.hpp"

using namespace drps;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Euclidean projection onto the unit l1 ball by bisection (independent of the sort rule).
Vector l1_ball_bisection(const Vector& x) {
  if (x.cwiseAbs().sum() <= 1.0) return x;
  double lo = 0.0, hi = x.cwiseAbs().maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    ((x.cwiseAbs().array() - mid).max(0.0).sum() > 1.0 ? lo : hi) = mid;
  }
  const double tau = 0.5 * (lo + hi);
  Vector p(x.size());
  for (Index i = 0; i < x.size(); ++i) p(i) = sign(x(i)) * std::max(std::abs(x(i)) - tau, 0.0);
  return p;
}

// Central differences of the Riemannian gradient along an orthonormal basis of T_x.
Matrix hessian_by_finite_differences(const PartlySmoothFunction& f, const Vector& x, double h) {
  const Subspace t = f.model_subspace(x);
  const Index n = x.size();
  Matrix out = Matrix::Zero(n, n);
  for (Index c = 0; c < t.dim(); ++c) {
    const Vector dir = t.basis().col(c);
    const Vector d = (f.model_gradient(x + h * dir) - f.model_gradient(x - h * dir)) / (2.0 * h);
    out += t.project(d) * dir.transpose();
  }
  return out;
}

}  // namespace

TEST(Prox, L1Example) {
  const L1Norm f(3);
  const Vector x = vec({3, -0.5, 0});
  const Vector p = f.prox(1.0, x);
  EXPECT_EQ(p, vec({2, 0, 0}));
  // (x - p)/gamma = (1, -0.5, 0) is a subgradient at p.
  EXPECT_GE(f.ri_margin(p, x - p), 0.0);
}

TEST(Prox, LInfExampleAgainstMoreauOracle) {
  const LInfNorm f(2);
  const Vector x = vec({2, 0});
  const Vector p = f.prox(1.0, x);
  EXPECT_LE((p - vec({1, 0})).norm(), 1e-15);
  EXPECT_LE((p - (x - l1_ball_bisection(x))).norm(), 1e-12);
}

TEST(Prox, BoxClamps) {
  const BoxIndicator f(Vector::Zero(2), 1.0);
  for (double gamma : {0.1, 1.0, 7.0}) EXPECT_EQ(f.prox(gamma, vec({3, -0.2})), vec({1, -0.2}));
}

TEST(Prox, RejectsBadArguments) {
  const L1Norm f(3);
  EXPECT_THROW(f.prox(0.0, vec({1, 2, 3})), ParameterError);
  EXPECT_THROW(f.prox(-1.0, vec({1, 2, 3})), ParameterError);
  EXPECT_THROW(f.prox(1.0, vec({1, 2})), DimensionError);
}

TEST(Prox, AffineInfeasibleDetectedAtConstruction) {
  Matrix a(2, 3);
  a << 1, 0, 0, 2, 0, 0;  // rank 1, range spanned by (1, 2)
  EXPECT_THROW(AffineIndicator(a, vec({1, 0})), InfeasibleError);
  EXPECT_NO_THROW(AffineIndicator(a, vec({1, 2})));
}

TEST(Prox, AffineProjectsOntoConstraint) {
  Matrix a(1, 2);
  a << 1, 1;
  const AffineIndicator f(a, vec({2}));
  const Vector p = f.prox(1.0, vec({3, 0}));
  EXPECT_LE((p - vec({2.5, -0.5})).norm(), 1e-14);
}

TEST(Prox, L1FidelityShiftsSoftThreshold) {
  const L1Fidelity f(vec({1, 1}));
  EXPECT_LE((f.prox(0.5, vec({3, 1.2})) - vec({2.5, 1})).norm(), 1e-15);
}

TEST(ModelSubspace, L1Support) {
  const Subspace t = L1Norm(3).model_subspace(vec({1, 0, -2}));
  EXPECT_EQ(t.dim(), 2);
  Matrix expected = Matrix::Zero(3, 3);
  expected(0, 0) = expected(2, 2) = 1;
  EXPECT_LE((t.projector() - expected).norm(), 1e-15);
}

TEST(ModelSubspace, LInfTiedSaturation) {
  // Lin ∂J = {u : supp u ⊆ {1,2}, u1 + u2 = 0}; its complement is {h : h1 = h2}.
  const Subspace t = LInfNorm(3).model_subspace(vec({2, 2, -1}));
  ASSERT_EQ(t.dim(), 2);
  const Subspace expected = orthonormalize(std::span<const Vector>(std::vector<Vector>{vec({1, 1, 0}), vec({0, 0, 1})}), 3);
  EXPECT_LE(projector_distance(t, expected), 1e-14);
}

TEST(ModelSubspace, LInfMatchesSampledSubdifferentialHull) {
  // Mixed-sign saturation: Lin ∂J(x) spanned by differences of the vertices sign(x_i) e_i.
  const Vector x = vec({1.5, -1.5, 0.3, 1.5, -0.2});
  const Subspace t = LInfNorm(5).model_subspace(x);
  const std::vector<Index> sat{0, 1, 3};
  std::vector<Vector> diffs;
  for (std::size_t a = 1; a < sat.size(); ++a) {
    Vector d = Vector::Zero(5);
    d(sat[a]) = sign(x(sat[a]));
    d(sat[0]) -= sign(x(sat[0]));
    diffs.push_back(d);
  }
  const Subspace lin = orthonormalize(std::span<const Vector>(diffs), 5);
  EXPECT_LE(projector_distance(t, complement(lin)), 1e-12);
}

TEST(ModelSubspace, TVMergesEqualNeighbours) {
  // Dx = (0, 2): only the first difference is inactive, so T = {h : h1 = h2}.
  const Subspace t = TotalVariation1D(3).model_subspace(vec({1, 1, 3}));
  ASSERT_EQ(t.dim(), 2);
  const Subspace expected = orthonormalize(std::span<const Vector>(std::vector<Vector>{vec({1, 1, 0}), vec({0, 0, 1})}), 3);
  EXPECT_LE(projector_distance(t, expected), 1e-14);
}

TEST(ModelSubspace, StableUnderPatternPreservingPerturbation) {
  const L1Norm f(4);
  const Vector x = vec({1, 0, -2, 0});
  const Vector y = vec({1.3, 0, -1.7, 0});
  EXPECT_TRUE(f.model_subspace(x).identical_to(f.model_subspace(y)));
}

TEST(ModelGradient, Examples) {
  EXPECT_EQ(L1Norm(3).model_gradient(vec({1, 0, -2})), vec({1, 0, -1}));
  Matrix a(1, 2);
  a << 1, 1;
  EXPECT_EQ(AffineIndicator(a, vec({2})).model_gradient(vec({1, 1})), Vector::Zero(2));
  const auto g = GroupL12Norm::uniform(4, 2);
  EXPECT_LE((g.model_gradient(vec({3, 4, 0, 0})) - vec({0.6, 0.8, 0, 0})).norm(), 1e-15);
}

TEST(RiemannianHessian, PolyhedralIsZero) {
  EXPECT_TRUE(L1Norm(3).riemannian_hessian(vec({1, 0, -2})).isZero(0.0));
  EXPECT_TRUE(LInfNorm(3).riemannian_hessian(vec({1, 1, -2})).isZero(0.0));
  EXPECT_TRUE(TotalVariation1D(3).riemannian_hessian(vec({1, 1, -2})).isZero(0.0));
}

TEST(RiemannianHessian, GroupBlockExamplesMatchFiniteDifferences) {
  const auto g = GroupL12Norm::uniform(2, 2);
  for (const auto& [x, d0, d1] : {std::tuple{vec({1, 0}), 0.0, 1.0}, std::tuple{vec({0, 2}), 0.5, 0.0}}) {
    const Matrix h = g.riemannian_hessian(x);
    EXPECT_NEAR(h(0, 0), d0, 1e-15);
    EXPECT_NEAR(h(1, 1), d1, 1e-15);
    EXPECT_NEAR(h(0, 1), 0.0, 1e-15);
    EXPECT_LE((hessian_by_finite_differences(g, x, 1e-5) - h).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(RiemannianHessian, GroupRandomPointsMatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  const auto g = GroupL12Norm::uniform(9, 3, 0.6);
  for (int t = 0; t < 20; ++t) {
    Vector x = fixtures::gaussian(rng, 9);
    x.segment(3 * (t % 3), 3).setZero();
    const Matrix h = g.riemannian_hessian(x);
    EXPECT_LE((hessian_by_finite_differences(g, x, 1e-5) - h).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(RiMargin, L1Examples) {
  const L1Norm f(2);
  EXPECT_NEAR(f.ri_margin(vec({1, 0}), vec({1, 0.3})), 0.7, 1e-15);
  EXPECT_EQ(f.ri_margin(vec({1, 0}), vec({1, 1})), 0.0);
  EXPECT_EQ(f.ri_margin(vec({1, 0}), vec({-1, 0})), -kInf);
  EXPECT_EQ(f.ri_margin(vec({1, -3}), vec({1, -1})), kInf);
}

TEST(RiMargin, AffineSubspaceCase) {
  Matrix a(1, 2);
  a << 1, 1;
  const AffineIndicator f(a, vec({2}));
  EXPECT_EQ(f.ri_margin(vec({1, 1}), vec({3, 3})), kInf);
  EXPECT_EQ(f.ri_margin(vec({1, 1}), vec({1, 0})), -kInf);
  EXPECT_EQ(f.ri_margin(vec({5, 1}), vec({3, 3})), -kInf);
}

TEST(RiMargin, LInfBoxTvGroup) {
  const LInfNorm linf(3);
  EXPECT_NEAR(linf.ri_margin(vec({2, -2, 1}), vec({0.25, -0.75, 0})), 0.25, 1e-15);
  EXPECT_EQ(linf.ri_margin(vec({2, -2, 1}), vec({1, 0, 0})), 0.0);
  EXPECT_EQ(linf.ri_margin(vec({2, -1, 1}), vec({1, 0, 0})), kInf);
  EXPECT_NEAR(linf.ri_margin(vec({0, 0, 0}), vec({0.2, 0.3, 0})), 0.5, 1e-15);

  const BoxIndicator box(Vector::Zero(2), 1.0);
  EXPECT_NEAR(box.ri_margin(vec({1, 0.3}), vec({0.4, 0})), 0.4, 1e-15);
  EXPECT_EQ(box.ri_margin(vec({1, 0.3}), vec({-0.4, 0})), -kInf);

  // x = (0, 0, 1): jump only at the second difference. u = D^T q with q = (-0.5, 1).
  const TotalVariation1D tv(3);
  EXPECT_NEAR(tv.ri_margin(vec({0, 0, 1}), vec({0.5, -1.5, 1})), 0.5, 1e-14);

  const auto g = GroupL12Norm::uniform(4, 2);
  EXPECT_NEAR(g.ri_margin(vec({3, 4, 0, 0}), vec({0.6, 0.8, 0.6, 0})), 0.4, 1e-14);
}

TEST(ProxIdentity, Examples) {
  EXPECT_LE(check_prox_identity(L1Norm(2), 1.0, vec({3, 0.2})), 1e-12);
  std::mt19937_64 rng(0);
  const BoxIndicator box(fixtures::gaussian(rng, 5), 0.3);
  EXPECT_LE(check_prox_identity(box, 2.0, fixtures::gaussian(rng, 5)), 1e-12);
  EXPECT_LE(check_prox_identity(TotalVariation1D(8), 0.5, fixtures::gaussian(rng, 8)), 1e-9);
}

TEST(Catalog, ProxIsFirmlyNonexpansive) {
  std::mt19937_64 rng(100);
  std::uniform_real_distribution<double> gam(0.05, 3.0);
  for (const auto& [label, f] : fixtures::catalog(rng)) {
    for (int t = 0; t < 100; ++t) {
      const double gamma = gam(rng);
      const Vector x = fixtures::gaussian(rng, f->dim(), 2.0);
      const Vector y = fixtures::gaussian(rng, f->dim(), 2.0);
      const Vector d = f->prox(gamma, x) - f->prox(gamma, y);
      EXPECT_LE(d.squaredNorm(), d.dot(x - y) + 1e-10) << label;
    }
  }
}

TEST(Catalog, ProxIdentityAndSubgradientOptimality) {
  std::mt19937_64 rng(200);
  std::uniform_real_distribution<double> gam(0.05, 3.0);
  for (const auto& [label, f] : fixtures::catalog(rng)) {
    for (int t = 0; t < 100; ++t) {
      const double gamma = gam(rng);
      const Vector x = fixtures::gaussian(rng, f->dim(), 2.0);
      EXPECT_LE(check_prox_identity(*f, gamma, x), 1e-9) << label;
      const Vector p = f->prox(gamma, x);
      EXPECT_GT(f->ri_margin(p, (x - p) / gamma), -kInf) << label << ": (x-p)/gamma not a subgradient";
    }
  }
}

TEST(Catalog, GradientInTangentAndHessianSupportedOnIt) {
  std::mt19937_64 rng(300);
  for (const auto& [label, f] : fixtures::catalog(rng)) {
    for (int t = 0; t < 20; ++t) {
      const Vector p = f->prox(0.7, fixtures::gaussian(rng, f->dim(), 2.0));
      const Subspace tp = f->model_subspace(p);
      const Vector e = f->model_gradient(p);
      EXPECT_LE((e - tp.project(e)).norm(), 1e-10) << label;
      const Matrix h = f->riemannian_hessian(p);
      const Matrix pt = tp.projector();
      EXPECT_LE(symmetry_residual(h), 1e-12) << label;
      EXPECT_LE((pt * h * pt - h).cwiseAbs().maxCoeff(), 1e-12) << label;
      if (!h.isZero(0.0)) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(h);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12) << label;
      }
    }
  }
}

TEST(Catalog, LInfMoreauDecomposition) {
  std::mt19937_64 rng(400);
  std::uniform_real_distribution<double> gam(0.05, 3.0);
  const LInfNorm f(12);
  for (int t = 0; t < 100; ++t) {
    const double gamma = gam(rng);
    const Vector x = fixtures::gaussian(rng, 12, 2.0);
    const Vector lhs = f.prox(gamma, x) + gamma * kernels::project_l1_ball(x / gamma, 1.0);
    EXPECT_LE((lhs - x).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Catalog, TVProxMatchesBruteForce) {
  std::mt19937_64 rng(500);
  std::uniform_real_distribution<double> gam(0.05, 2.0);
  for (int t = 0; t < 100; ++t) {
    const Index n = 2 + t % 5;
    const TotalVariation1D f(n, 0.8);
    const double gamma = gam(rng);
    const Vector x = fixtures::gaussian(rng, n, 2.0);
    EXPECT_LE((f.prox(gamma, x) - oracle::tv_brute_force(x, gamma * 0.8)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Catalog, ImageAxisTVActsPerRow) {
  const auto rows = TotalVariation1D::image_axis(2, 3, true);
  const auto cols = TotalVariation1D::image_axis(2, 3, false);
  Vector img(6);
  img << 0, 0, 1, 5, 5, 5;
  EXPECT_DOUBLE_EQ(rows.eval(img), 1.0);
  EXPECT_DOUBLE_EQ(cols.eval(img), 14.0);
  EXPECT_EQ(rows.model_subspace(img).dim(), 3);
  EXPECT_EQ(cols.model_subspace(img).dim(), 6);
}

TEST(Catalog, ConsensusProxReplicatesMean) {
  const ConsensusIndicator s(2, 2);
  EXPECT_EQ(s.prox(1.0, vec({1, 2, 3, 6})), vec({2, 4, 2, 4}));
  EXPECT_EQ(s.ri_margin(vec({2, 4, 2, 4}), vec({1, -1, -1, 1})), kInf);
  EXPECT_EQ(s.ri_margin(vec({2, 4, 2, 4}), vec({1, 0, 0, 0})), -kInf);
}
