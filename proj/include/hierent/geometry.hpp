#ifndef HIERENT_GEOMETRY_HPP_
#define HIERENT_GEOMETRY_HPP_

//! \file geometry.hpp
//! Lorentz-model primitives: time component, Lorentzian inner product, the
//! exponential map at the hyperboloid apex and the exterior angles used by the
//! entailment loss (hyperbolic and Euclidean forms).
//!
//! Points are stored by their space component; the time component is always
//! derived from it so that every constructed point lies on the hyperboloid
//! <x, x>_H = -1/c.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

namespace hierent {

/// Guard added under square roots and used as the degeneracy threshold.
inline constexpr double kGeometryEps = 1e-8;

enum class SpaceKind { hyperbolic, euclidean };

inline const char* to_string(SpaceKind kind) {
  return kind == SpaceKind::hyperbolic ? "hyp" : "euc";
}

inline SpaceKind space_kind_from_string(const std::string& s) {
  if (s == "hyp" || s == "hyperbolic") return SpaceKind::hyperbolic;
  if (s == "euc" || s == "euclidean") return SpaceKind::euclidean;
  throw std::invalid_argument("unknown space kind: " + s);
}

/// Raised when an angle is requested at a configuration where it is undefined
/// (anchor at the origin, coincident Euclidean points).
class DegenerateGeometry : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Curvature magnitude c of H^d. Always positive and finite.
class Curvature {
 public:
  explicit Curvature(double c) : c_(c) {
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw std::invalid_argument("curvature must be positive and finite");
    }
  }
  double value() const { return c_; }
  double sqrt() const { return std::sqrt(c_); }
  /// Largest tangent-vector norm passed to the exponential map.
  double norm_cap() const { return 10.0 / std::sqrt(c_); }

 private:
  double c_;
};

struct HyperbolicPoint {
  std::vector<double> space;
  double time = 1.0;

  std::size_t dim() const { return space.size(); }
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

inline void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
  }
}

inline void require_same_dim(std::size_t a, std::size_t b) {
  if (a != b) {
    throw std::invalid_argument("dimension mismatch: " + std::to_string(a) + " vs " +
                                std::to_string(b));
  }
}

}  // namespace detail

/// x_time = sqrt(1/c + |x_space|^2).
inline double time_component(std::span<const double> space, Curvature c) {
  detail::require_finite(space, "time_component");
  return std::sqrt(1.0 / c.value() + detail::squared_norm(space));
}

inline HyperbolicPoint make_point(std::vector<double> space, Curvature c) {
  const double t = time_component(space, c);
  return HyperbolicPoint{std::move(space), t};
}

/// -x0*y0 + sum_i x_i*y_i
inline double lorentz_inner(const HyperbolicPoint& x, const HyperbolicPoint& y) {
  detail::require_same_dim(x.dim(), y.dim());
  return -x.time * y.time + detail::dot(x.space, y.space);
}

/// Exponential map at the origin for a space-only tangent vector. Norms above
/// Curvature::norm_cap() are scaled back onto the cap.
inline HyperbolicPoint exp_map_origin(std::span<const double> v, Curvature c) {
  detail::require_finite(v, "exp_map_origin");
  const double sc = c.sqrt();
  double n = detail::norm(v);
  double scale = 1.0;
  if (n > c.norm_cap()) {
    spdlog::debug("exp_map_origin: tangent norm {} clamped to {}", n, c.norm_cap());
    scale = c.norm_cap() / n;
    n = c.norm_cap();
  }
  const double r = sc * n;
  // sinh(r)/r -> 1 as r -> 0
  const double shape = r < 1e-8 ? 1.0 + r * r / 6.0 : std::sinh(r) / r;
  HyperbolicPoint p;
  p.space.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) p.space[i] = shape * scale * v[i];
  p.time = time_component(p.space, c);
  return p;
}

/// Result of an exterior-angle evaluation with the state of its numerical guards.
struct ExteriorAngle {
  double angle = 0.0;
  double cosine = 0.0;   // arccos argument before clamping
  bool clamped = false;  // |cosine| > 1 was clipped
  bool floored = false;  // (c<x,y>)^2 - 1 fell below the epsilon floor
};

inline double clamped_acos(double a) { return std::acos(std::clamp(a, -1.0, 1.0)); }

inline ExteriorAngle exterior_angle_hyp_detail(const HyperbolicPoint& x, const HyperbolicPoint& y,
                                               Curvature c) {
  detail::require_same_dim(x.dim(), y.dim());
  const double xn = detail::norm(x.space);
  if (!(xn > kGeometryEps)) {
    throw DegenerateGeometry("exterior angle undefined for an anchor at the origin");
  }
  const double cl = c.value() * lorentz_inner(x, y);
  double q = cl * cl - 1.0;
  ExteriorAngle out;
  if (q <= kGeometryEps) {
    q = kGeometryEps;
    out.floored = true;
  }
  out.cosine = (y.time + x.time * cl) / (xn * std::sqrt(q));
  out.clamped = out.cosine > 1.0 || out.cosine < -1.0;
  out.angle = clamped_acos(out.cosine);
  return out;
}

/// ext(x, y) in the Lorentz model: the angle at x between the outward extension
/// of the geodesic origin->x and the geodesic x->y.
inline double exterior_angle_hyp(const HyperbolicPoint& x, const HyperbolicPoint& y, Curvature c) {
  const ExteriorAngle e = exterior_angle_hyp_detail(x, y, c);
  if (e.floored) spdlog::debug("exterior_angle_hyp: epsilon floor under square root");
  return e.angle;
}

inline ExteriorAngle exterior_angle_euc_detail(std::span<const double> x,
                                               std::span<const double> y) {
  detail::require_same_dim(x.size(), y.size());
  const double xn2 = detail::squared_norm(x);
  const double yn2 = detail::squared_norm(y);
  double diff2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) diff2 += (x[i] - y[i]) * (x[i] - y[i]);
  const double xn = std::sqrt(xn2);
  const double dn = std::sqrt(diff2);
  if (!(xn > kGeometryEps) || !(dn > kGeometryEps)) {
    throw DegenerateGeometry("Euclidean exterior angle needs |x| > eps and |x - y| > eps");
  }
  ExteriorAngle out;
  out.cosine = (yn2 - xn2 - diff2) / (2.0 * xn * dn);
  out.clamped = out.cosine > 1.0 || out.cosine < -1.0;
  out.angle = clamped_acos(out.cosine);
  return out;
}

inline double exterior_angle_euc(std::span<const double> x, std::span<const double> y) {
  return exterior_angle_euc_detail(x, y).angle;
}

/// The two maximized angles of the bidirectional loss for a parent->child pair.
struct AnglePair {
  double beta1 = 0.0;   // pi - ext(parent, child)
  double alpha2 = 0.0;  // ext(child, parent)
};

/// Exterior angle between two tangent-space embeddings, mapping them onto the
/// hyperboloid first in hyperbolic mode.
inline double exterior_angle(std::span<const double> x, std::span<const double> y, SpaceKind kind,
                             Curvature c) {
  if (kind == SpaceKind::euclidean) return exterior_angle_euc(x, y);
  return exterior_angle_hyp(exp_map_origin(x, c), exp_map_origin(y, c), c);
}

inline AnglePair entailment_angles(std::span<const double> parent, std::span<const double> child,
                                   SpaceKind kind, Curvature c = Curvature(1.0)) {
  AnglePair p;
  p.beta1 = std::numbers::pi - exterior_angle(parent, child, kind, c);
  p.alpha2 = exterior_angle(child, parent, kind, c);
  return p;
}

}  // namespace hierent

#endif  // HIERENT_GEOMETRY_HPP_
