#ifndef HIERENT_ANGLE_GRADIENTS_HPP_
#define HIERENT_ANGLE_GRADIENTS_HPP_

//! \file angle_gradients.hpp
//! Analytic derivatives of the exterior angle with respect to the tangent-space
//! parametrization of both arguments and (hyperbolic) the curvature.
//!
//! Hyperbolic chain: tangent u -> space a = sinh(r)/r * u with r = sqrt(c)|u|,
//! time from the space component, then ext(a, b; c). The norm cap of the
//! exponential map is not differentiated through; callers keep tangent norms
//! below Curvature::norm_cap().

#include <cmath>
#include <span>
#include <vector>

#include "hierent/geometry.hpp"

namespace hierent {

/// A tangent vector pushed onto the hyperboloid together with the factors needed
/// to pull space-component gradients back to the tangent vector.
struct MappedTangent {
  std::span<const double> tangent;
  std::vector<double> space;
  double time = 0.0;
  double space_norm = 0.0;
  double shape = 1.0;     // sinh(r)/r
  double radial = 0.0;    // (d shape/d|u|) / |u|
  double curv_coef = 0.0; // d space / d c = curv_coef * u
};

inline MappedTangent map_tangent(std::span<const double> u, double c) {
  MappedTangent m;
  m.tangent = u;
  const double sc = std::sqrt(c);
  const double n = detail::norm(u);
  const double r = sc * n;
  double g;  // (r cosh r - sinh r) / r^3
  if (r < 1e-4) {
    const double r2 = r * r;
    m.shape = 1.0 + r2 / 6.0;
    g = 1.0 / 3.0 + r2 / 30.0;
  } else {
    m.shape = std::sinh(r) / r;
    g = (r * std::cosh(r) - std::sinh(r)) / (r * r * r);
  }
  m.radial = c * g;
  m.curv_coef = g * r * r / (2.0 * c);
  m.space.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) m.space[i] = m.shape * u[i];
  m.space_norm = detail::norm(m.space);
  m.time = std::sqrt(1.0 / c + m.space_norm * m.space_norm);
  return m;
}

struct AngleGradient {
  ExteriorAngle value;
  std::vector<double> d_first;   // d ext / d first tangent vector
  std::vector<double> d_second;  // d ext / d second tangent vector
  double d_c = 0.0;              // d ext / d c (hyperbolic only)
  bool singular = false;         // clamped arccos argument: zero gradient
};

namespace detail {

inline void pull_back(const MappedTangent& m, std::span<const double> g_space,
                      std::vector<double>& g_tangent, double& g_c) {
  const double ug = dot(m.tangent, g_space);
  g_tangent.resize(m.tangent.size());
  for (std::size_t i = 0; i < g_space.size(); ++i) {
    g_tangent[i] = m.shape * g_space[i] + m.radial * ug * m.tangent[i];
  }
  g_c += m.curv_coef * ug;
}

}  // namespace detail

/// ext(x, y) and its gradient for points produced by map_tangent at curvature c.
inline AngleGradient exterior_angle_hyp_grad(const MappedTangent& x, const MappedTangent& y,
                                             double c) {
  AngleGradient out;
  const std::size_t d = x.space.size();
  const double xn = x.space_norm;
  if (!(xn > kGeometryEps)) {
    throw DegenerateGeometry("exterior angle undefined for an anchor at the origin");
  }
  const double x0 = x.time;
  const double y0 = y.time;
  const std::span<const double> a = x.space;
  const std::span<const double> b = y.space;
  const double lor = -x0 * y0 + detail::dot(a, b);
  const double cl = c * lor;
  double q = cl * cl - 1.0;
  bool floored = false;
  if (q <= kGeometryEps) {
    q = kGeometryEps;
    floored = true;
  }
  const double s = std::sqrt(q);
  const double num = y0 + x0 * cl;
  const double den = xn * s;
  const double cosine = num / den;

  out.value.cosine = cosine;
  out.value.floored = floored;
  out.value.clamped = cosine > 1.0 || cosine < -1.0;
  out.value.angle = clamped_acos(cosine);
  out.d_first.assign(d, 0.0);
  out.d_second.assign(d, 0.0);
  if (out.value.clamped || std::abs(cosine) >= 1.0) {
    out.singular = true;
    return out;
  }
  const double dext = -1.0 / std::sqrt(1.0 - cosine * cosine);
  const double ds_scale = floored ? 0.0 : cl / s;  // dS = ds_scale * d(cl)

  // d/da as coef_a * a + coef_b * b
  const double cla_a = -c * y0 / x0, cla_b = c;
  const double na_a = x0 * cla_a + cl / x0, na_b = x0 * cla_b;
  const double da_a = s / xn + xn * ds_scale * cla_a, da_b = xn * ds_scale * cla_b;
  const double ga_a = dext * (na_a - cosine * da_a) / den;
  const double ga_b = dext * (na_b - cosine * da_b) / den;

  // d/db as coef_b * b + coef_a * a
  const double clb_b = -c * x0 / y0, clb_a = c;
  const double nb_b = 1.0 / y0 + x0 * clb_b, nb_a = x0 * clb_a;
  const double db_b = xn * ds_scale * clb_b, db_a = xn * ds_scale * clb_a;
  const double gb_b = dext * (nb_b - cosine * db_b) / den;
  const double gb_a = dext * (nb_a - cosine * db_a) / den;

  // explicit c dependence, including through both time components
  const double dx0c = -1.0 / (2.0 * c * c * x0);
  const double dy0c = -1.0 / (2.0 * c * c * y0);
  const double dlc = -dx0c * y0 - x0 * dy0c;
  const double dclc = lor + c * dlc;
  const double dnc = dy0c + dx0c * cl + x0 * dclc;
  const double ddc = xn * ds_scale * dclc;
  double g_c = dext * (dnc - cosine * ddc) / den;

  std::vector<double> g_a(d), g_b(d);
  for (std::size_t i = 0; i < d; ++i) {
    g_a[i] = ga_a * a[i] + ga_b * b[i];
    g_b[i] = gb_b * b[i] + gb_a * a[i];
  }
  detail::pull_back(x, g_a, out.d_first, g_c);
  detail::pull_back(y, g_b, out.d_second, g_c);
  out.d_c = g_c;
  return out;
}

/// Euclidean ext(x, y) and its gradient.
inline AngleGradient exterior_angle_euc_grad(std::span<const double> x, std::span<const double> y) {
  AngleGradient out;
  out.value = exterior_angle_euc_detail(x, y);
  const std::size_t d = x.size();
  out.d_first.assign(d, 0.0);
  out.d_second.assign(d, 0.0);
  const double cosine = out.value.cosine;
  if (out.value.clamped || std::abs(cosine) >= 1.0) {
    out.singular = true;
    return out;
  }
  const double xn = detail::norm(x);
  double wn2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) wn2 += (x[i] - y[i]) * (x[i] - y[i]);
  const double wn = std::sqrt(wn2);
  const double den = 2.0 * xn * wn;
  const double dext = -1.0 / std::sqrt(1.0 - cosine * cosine);
  for (std::size_t i = 0; i < d; ++i) {
    const double w = x[i] - y[i];
    const double dn_x = -2.0 * x[i] - 2.0 * w;
    const double dn_y = 2.0 * x[i];
    const double dd_x = 2.0 * (wn * x[i] / xn + xn * w / wn);
    const double dd_y = -2.0 * xn * w / wn;
    out.d_first[i] = dext * (dn_x - cosine * dd_x) / den;
    out.d_second[i] = dext * (dn_y - cosine * dd_y) / den;
  }
  return out;
}

}  // namespace hierent

#endif  // HIERENT_ANGLE_GRADIENTS_HPP_
