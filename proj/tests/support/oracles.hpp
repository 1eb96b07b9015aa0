#pragma once

// Independent reference implementations used as test oracles. Plain loops,
// no shared code with the library.

#include <Eigen/Dense>

#include <cmath>
#include <utility>

namespace oracle {

// Gaussian elimination with partial pivoting; returns X with A X = B.
inline Eigen::MatrixXd gauss_solve(Eigen::MatrixXd a, Eigen::MatrixXd b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pivot = k;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > std::abs(a(pivot, k))) pivot = i;
    }
    a.row(k).swap(a.row(pivot));
    b.row(k).swap(b.row(pivot));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (Eigen::Index j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      for (Eigen::Index j = 0; j < b.cols(); ++j) b(i, j) -= f * b(k, j);
    }
  }
  Eigen::MatrixXd x(n, b.cols());
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double s = b(i, j);
      for (Eigen::Index m = i + 1; m < n; ++m) s -= a(i, m) * x(m, j);
      x(i, j) = s / a(i, i);
    }
  }
  return x;
}

// log|det A| by elimination.
inline double log_abs_det(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  double logdet = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pivot = k;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > std::abs(a(pivot, k))) pivot = i;
    }
    a.row(k).swap(a.row(pivot));
    logdet += std::log(std::abs(a(k, k)));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (Eigen::Index j = k; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return logdet;
}

// Matérn-5/2 written straight from the formula.
inline double matern(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& l,
                     double s) {
  double r2 = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) r2 += std::pow((u(j) - v(j)) / l(j), 2);
  const double r = std::sqrt(r2);
  return s * (1.0 + std::sqrt(5.0) * r + 5.0 * r * r / 3.0) * std::exp(-std::sqrt(5.0) * r);
}

inline Eigen::MatrixXd gram(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::VectorXd& l,
                            double s) {
  Eigen::MatrixXd k(x.rows(), y.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.rows(); ++j) k(i, j) = matern(x.row(i).transpose(), y.row(j).transpose(), l, s);
  }
  return k;
}

// Central difference of f at x along each coordinate.
template <typename F>
Eigen::VectorXd central_difference(F&& f, Eigen::VectorXd x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double keep = x(k);
    x(k) = keep + h;
    const double up = f(x);
    x(k) = keep - h;
    const double down = f(x);
    x(k) = keep;
    g(k) = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  return (analytic - numeric).lpNorm<Eigen::Infinity>() /
         std::max(numeric.lpNorm<Eigen::Infinity>(), 1e-12);
}

}  // namespace oracle
