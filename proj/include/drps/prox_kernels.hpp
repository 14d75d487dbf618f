#pragma once

// Closed-form proximal kernels shared by the function catalog.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "drps/linalg.hpp"

namespace drps::kernels {

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

inline Vector soft_threshold(const Vector& x, double t) {
  Vector out(x.size());
  for (Index i = 0; i < x.size(); ++i) out(i) = soft_threshold(x(i), t);
  return out;
}

/// Threshold tau >= 0 such that soft_threshold(x, tau) is the projection of x onto the
/// l1 ball of the given radius. Returns 0 when x is already inside the ball.
///
/// Sort-and-threshold: with |x| sorted decreasingly as u, tau = (sum_{i<=k} u_i - r) / k for
/// the largest k with u_k > (sum_{i<=k} u_i - r) / k.
inline double l1_ball_threshold(const Vector& x, double radius) {
  if (x.cwiseAbs().sum() <= radius) return 0.0;
  std::vector<double> u(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) u[static_cast<std::size_t>(i)] = std::abs(x(i));
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumsum += u[k];
    const double t = (cumsum - radius) / static_cast<double>(k + 1);
    if (u[k] > t) tau = t;
    else break;
  }
  return std::max(tau, 0.0);
}

inline Vector project_l1_ball(const Vector& x, double radius) {
  return soft_threshold(x, l1_ball_threshold(x, radius));
}

/// Exact 1-D total variation denoising,
///   argmin_p 0.5 ||p - y||^2 + lambda sum_i |p_{i+1} - p_i|,
/// by the direct (taut-string) method of L. Condat. Every output segment is written from a
/// single value, so equal neighbours are bitwise equal.
inline Vector tv1d_denoise(const Vector& y, double lambda) {
  const Index width = y.size();
  Vector out(width);
  if (width == 0) return out;
  if (width == 1 || lambda <= 0.0) return y;

  Index k = 0, k0 = 0, kplus = 0, kminus = 0;
  double umin = lambda, umax = -lambda;
  double vmin = y(0) - lambda, vmax = y(0) + lambda;
  const double twolambda = 2.0 * lambda;
  const double minlambda = -lambda;

  for (;;) {
    while (k == width - 1) {
      if (umin < 0.0) {
        do out(k0++) = vmin; while (k0 <= kminus);
        k = kminus = k0;
        vmin = y(k);
        umin = lambda;
        umax = vmin + umin - vmax;
      } else if (umax > 0.0) {
        do out(k0++) = vmax; while (k0 <= kplus);
        k = kplus = k0;
        vmax = y(k);
        umax = minlambda;
        umin = vmax + umax - vmin;
      } else {
        vmin += umin / static_cast<double>(k - k0 + 1);
        do out(k0++) = vmin; while (k0 <= k);
        return out;
      }
    }
    if ((umin += y(k + 1) - vmin) < minlambda) {
      do out(k0++) = vmin; while (k0 <= kminus);
      k = kplus = kminus = k0;
      vmin = y(k);
      vmax = vmin + twolambda;
      umin = lambda;
      umax = minlambda;
    } else if ((umax += y(k + 1) - vmax) > lambda) {
      do out(k0++) = vmax; while (k0 <= kplus);
      k = kplus = kminus = k0;
      vmax = y(k);
      vmin = vmax - twolambda;
      umin = lambda;
      umax = minlambda;
    } else {
      ++k;
      if (umin >= lambda) {
        kminus = k;
        vmin += (umin - lambda) / static_cast<double>(kminus - k0 + 1);
        umin = lambda;
      }
      if (umax <= minlambda) {
        kplus = k;
        vmax += (umax + lambda) / static_cast<double>(kplus - k0 + 1);
        umax = minlambda;
      }
    }
  }
}

}  // namespace drps::kernels
