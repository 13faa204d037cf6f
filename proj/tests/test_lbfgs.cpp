#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sfc/lbfgs.hpp"

using namespace sfc;

TEST(Minimize, QuadraticBowl) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int t = 0; t < 20; ++t) {
    const int n = 1 + t % 6;
    Vec c(n), x0(n);
    for (int k = 0; k < n; ++k) {
      c(k) = g(rng);
      x0(k) = g(rng);
    }
    auto f = [&](const Vec& x, Vec& grad) {
      grad = 2.0 * (x - c);
      return (x - c).squaredNorm();
    };
    MinimizeOptions o;
    o.grad_tol = 1e-10;
    const auto r = minimize(f, x0, o);
    EXPECT_LE((r.x - c).lpNorm<Eigen::Infinity>(), 1e-8);
    EXPECT_EQ(r.status, MinimizeStatus::Converged);
  }
}

TEST(Minimize, Rosenbrock) {
  auto f = [](const Vec& x, Vec& g) {
    const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
    g.resize(2);
    g(0) = -2.0 * a - 400.0 * x(0) * b;
    g(1) = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  MinimizeOptions o;
  o.max_iters = 500;
  o.grad_tol = 1e-10;
  const auto r = minimize(f, (Vec(2) << -1.2, 1.0).finished(), o);
  EXPECT_NEAR(r.x(0), 1.0, 1e-5);
  EXPECT_NEAR(r.x(1), 1.0, 1e-5);
  EXPECT_LE(r.f, 1e-10);
}

TEST(Minimize, ConstantFunction) {
  auto f = [](const Vec& x, Vec& g) {
    g = Vec::Zero(x.size());
    return 3.0;
  };
  const Vec x0 = Vec::Constant(4, 0.7);
  const auto r = minimize(f, x0, {});
  EXPECT_TRUE(r.x == x0);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.status, MinimizeStatus::Converged);
}

TEST(Minimize, NonFiniteStartThrows) {
  auto f = [](const Vec& x, Vec& g) {
    g = Vec::Zero(x.size());
    return std::nan("");
  };
  EXPECT_THROW(minimize(f, Vec::Zero(2), {}), Error);
}

TEST(Minimize, NeverIncreasesObjective) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    // Smooth but nonconvex: sum of cos plus a weak quadratic.
    Vec w(5);
    for (int k = 0; k < 5; ++k) w(k) = g(rng);
    auto f = [&](const Vec& x, Vec& grad) {
      grad = 0.02 * x;
      double v = 0.01 * x.squaredNorm();
      for (int k = 0; k < x.size(); ++k) {
        v += std::cos(w(k) * x(k));
        grad(k) -= w(k) * std::sin(w(k) * x(k));
      }
      return v;
    };
    Vec x0(5);
    for (int k = 0; k < 5; ++k) x0(k) = 3.0 * g(rng);
    Vec g0;
    const double f0 = f(x0, g0);
    MinimizeOptions o;
    o.max_iters = 15;
    const auto r = minimize(f, x0, o);
    EXPECT_LE(r.f, f0);
    Vec gx;
    EXPECT_DOUBLE_EQ(f(r.x, gx), r.f);
  }
}

TEST(Minimize, IterationCapStatus) {
  auto f = [](const Vec& x, Vec& g) {
    const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
    g.resize(2);
    g(0) = -2.0 * a - 400.0 * x(0) * b;
    g(1) = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  MinimizeOptions o;
  o.max_iters = 3;
  o.grad_tol = 1e-14;
  const auto r = minimize(f, (Vec(2) << -1.2, 1.0).finished(), o);
  EXPECT_EQ(r.status, MinimizeStatus::MaxIterations);
  EXPECT_EQ(r.iterations, 3);
}

TEST(Minimize, StatusNames) {
  EXPECT_EQ(to_string(MinimizeStatus::Converged), "converged");
  EXPECT_EQ(to_string(MinimizeStatus::Stalled), "stalled");
}
