#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <string>

#include "sparselm/common.hpp"

namespace sparselm {

// Column-major dense matrices throughout; a "vector" is a one-column matrix.
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using VecF = Vec<float>;
using MatD = Mat<double>;
using VecD = Vec<double>;

template <class M>
std::string shape_str(const M& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

// A @ B with an explicit inner-dimension check; Eigen would only assert.
template <class S>
Mat<S> matmul(const Mat<S>& a, const Mat<S>& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dims differ, lhs " + shape_str(a) +
                     " rhs " + shape_str(b));
  return a * b;
}

template <class A, class B>
void check_same_shape(const A& a, const B& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape " + shape_str(a) + " vs " +
                     shape_str(b));
}

template <class S>
Mat<S> add(const Mat<S>& a, const Mat<S>& b) {
  check_same_shape(a, b, "add");
  return a + b;
}

template <class S>
Mat<S> hadamard(const Mat<S>& a, const Mat<S>& b) {
  check_same_shape(a, b, "hadamard");
  return a.cwiseProduct(b);
}

template <class S>
S sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  S e = std::exp(x);
  return e / (S(1) + e);
}

// log(1 + exp(x)) without overflow for large |x|
template <class S>
S softplus(S x) {
  if (x > S(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

template <class S>
Mat<S> sigmoid(const Mat<S>& a) {
  return a.unaryExpr([](S v) { return sigmoid(v); });
}

template <class S>
Mat<S> tanh(const Mat<S>& a) {
  return a.array().tanh().matrix();
}

// max-subtracted log-sum-exp accumulated in double regardless of input type
template <class S>
double log_sum_exp(const S* x, std::ptrdiff_t n) {
  double m = -HUGE_VAL;
  for (std::ptrdiff_t i = 0; i < n; ++i) m = std::max(m, double(x[i]));
  double s = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) s += std::exp(double(x[i]) - m);
  return m + std::log(s);
}

template <class S>
double log_sum_exp(const Vec<S>& x) {
  return log_sum_exp(x.data(), x.size());
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers for one tensor. Step count lives here so every
// tensor can join the optimizer at a different time (lazy slot creation).
// M is any dense Eigen matrix or vector type.
template <class M>
struct AdamSlot {
  M m, v;
  long t = 0;

  void ensure(Eigen::Index rows, Eigen::Index cols) {
    if (m.rows() != rows || m.cols() != cols) {
      m = M::Zero(rows, cols);
      v = M::Zero(rows, cols);
      t = 0;
    }
  }
};

// One Adam update with bias correction. Throws NumericError naming the
// parameter if the gradient contains NaN/Inf, leaving the parameter untouched.
template <class M>
void adam_step(M& param, const M& grad, AdamSlot<M>& slot,
               const AdamConfig& cfg, const std::string& name) {
  using S = typename M::Scalar;
  check_same_shape(param, grad, "adam_step");
  if (!grad.allFinite())
    throw NumericError("adam_step: non-finite gradient for '" + name + "'");
  slot.ensure(param.rows(), param.cols());
  slot.t += 1;
  const S b1 = S(cfg.beta1), b2 = S(cfg.beta2);
  slot.m = b1 * slot.m + (S(1) - b1) * grad;
  slot.v = (b2 * slot.v.array() + (S(1) - b2) * grad.array().square()).matrix();
  const double c1 = 1.0 - std::pow(cfg.beta1, double(slot.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(slot.t));
  const S step = S(cfg.lr / c1);
  const S vscale = S(1.0 / c2);
  param.array() -=
      step * slot.m.array() /
      ((slot.v.array() * vscale).sqrt() + S(cfg.eps));
}

struct GradCheckReport {
  double max_rel_err = 0.0;
  Eigen::Index worst_index = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// Central-difference check of an analytic gradient, done in double.
// rel err_i = |a_i - n_i| / max(|a_i|, |n_i|, 1e-8)
inline GradCheckReport grad_check(
    const std::function<double(const VecD&)>& f, VecD x,
    const VecD& analytic, double h = 1e-5) {
  if (x.size() != analytic.size())
    throw ShapeError("grad_check: point has " + std::to_string(x.size()) +
                     " dims, gradient has " + std::to_string(analytic.size()));
  GradCheckReport rep;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    const double n = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double denom = std::max({std::fabs(a), std::fabs(n), 1e-8});
    const double rel = std::fabs(a - n) / denom;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_index = i;
      rep.analytic_at_worst = a;
      rep.numeric_at_worst = n;
    }
  }
  return rep;
}

}  // namespace sparselm
