#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>

#include "atpg/liegroup.hpp"

namespace atpg {

enum class FovKind { Triangle2d };

/// Sensor field of view in the body frame. The triangle has its apex at the
/// body origin, opens along +x with the given half angle and is cut off at
/// x = depth.
struct FovShape {
  FovKind kind = FovKind::Triangle2d;
  double depth = 2.0;
  double half_angle = M_PI / 3.0;

  void validate() const {
    if (!(depth > 0.0)) throw std::invalid_argument("fov depth must be positive");
    if (!(half_angle > 0.0 && half_angle < M_PI / 2.0))
      throw std::invalid_argument("fov half_angle must lie in (0, pi/2)");
  }
};

/// Smoothing of the FoV indicator:
///   Phi(x) = 1/2 [1 + erf(x / (sqrt(2) kappa) - 2)].
/// The -2 shift makes the boundary (x = 0) nearly fully informative,
/// 1 - Phi(0) ~= 0.9977, with the information weight decaying to 1/2 at
/// x = 2 sqrt(2) kappa outside the set.
struct ProbitParams {
  double kappa = 0.4;

  void validate() const {
    if (!(kappa > 0.0)) throw std::invalid_argument("probit kappa must be positive");
  }
};

template <typename Scalar>
struct SignedDistance {
  Scalar value;
  Vec3<Scalar> grad;
};

/// Target state to world location. Planar states embed their first two
/// components at z = 0.
template <typename Derived>
Vec3<typename Derived::Scalar> zeta(const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  if (y.size() < 2) throw std::invalid_argument("zeta: target state needs at least 2 components");
  return Vec3<Scalar>(y(0), y(1), Scalar(0));
}

/// R^T (zeta - x)
template <typename DerivedT, typename DerivedZ>
Vec3<typename DerivedT::Scalar> bodyFrame(const Eigen::MatrixBase<DerivedT>& T, const Eigen::MatrixBase<DerivedZ>& z) {
  return T.template topLeftCorner<3, 3>().transpose() * (z - T.template topRightCorner<3, 1>());
}

namespace detail {

template <typename Scalar>
struct TriangleGeometry {
  std::array<Eigen::Matrix<Scalar, 2, 1>, 3> vertices;  // apex, left corner, right corner

  explicit TriangleGeometry(const FovShape& shape) {
    const Scalar w = Scalar(shape.depth) * std::tan(Scalar(shape.half_angle));
    vertices[0] << Scalar(0), Scalar(0);
    vertices[1] << Scalar(shape.depth), w;
    vertices[2] << Scalar(shape.depth), -w;
  }

  /// Edges in tie-break order: left slant, right slant, far edge.
  std::array<std::pair<int, int>, 3> edges() const { return {{{0, 1}, {0, 2}, {1, 2}}}; }
};

template <typename Scalar>
bool insideTriangle(const Eigen::Matrix<Scalar, 2, 1>& p, const FovShape& shape) {
  const Scalar t = std::tan(Scalar(shape.half_angle));
  return p.x() >= Scalar(0) && p.x() <= Scalar(shape.depth) && std::abs(p.y()) <= t * p.x();
}

}  // namespace detail

/// Exact membership test used for hard (evaluation-time) sensing.
template <typename Derived>
bool insideFov(const Eigen::MatrixBase<Derived>& q, const FovShape& shape) {
  using Scalar = typename Derived::Scalar;
  return detail::insideTriangle<Scalar>(Eigen::Matrix<Scalar, 2, 1>(q(0), q(1)), shape);
}

/// Signed distance from a body-frame point to the FoV boundary, negative
/// inside. The z coordinate is ignored. Where several boundary features are
/// equally near, the gradient of the first one (left, right, far) is used.
template <typename Derived>
SignedDistance<typename Derived::Scalar> signedDistance(const Eigen::MatrixBase<Derived>& q, const FovShape& shape) {
  using Scalar = typename Derived::Scalar;
  using V2 = Eigen::Matrix<Scalar, 2, 1>;
  const detail::TriangleGeometry<Scalar> tri(shape);
  const V2 p(q(0), q(1));
  const bool inside = detail::insideTriangle(p, shape);

  Scalar best = std::numeric_limits<Scalar>::infinity();
  V2 best_dir = V2::Zero();
  for (const auto& [a_idx, b_idx] : tri.edges()) {
    const V2& a = tri.vertices[a_idx];
    const V2& b = tri.vertices[b_idx];
    const V2 ab = b - a;
    const Scalar s = std::clamp((p - a).dot(ab) / ab.squaredNorm(), Scalar(0), Scalar(1));
    const V2 diff = p - (a + s * ab);
    const Scalar dist = diff.norm();
    if (dist < best) {
      best = dist;
      if (dist > Scalar(0)) {
        best_dir = diff / dist;
      } else {
        // On the edge: outward normal. The triangle lies on the +x side of
        // the apex, so the normal pointing away from the centroid is outward.
        V2 n(ab.y(), -ab.x());
        n.normalize();
        const V2 centroid = (tri.vertices[0] + tri.vertices[1] + tri.vertices[2]) / Scalar(3);
        if (n.dot(a - centroid) < Scalar(0)) n = -n;
        best_dir = n;
      }
    }
  }
  SignedDistance<Scalar> out;
  if (inside && best > Scalar(0)) {
    out.value = -best;
    out.grad = Vec3<Scalar>(-best_dir.x(), -best_dir.y(), Scalar(0));
  } else {
    out.value = inside ? Scalar(0) : best;
    out.grad = Vec3<Scalar>(best_dir.x(), best_dir.y(), Scalar(0));
  }
  return out;
}

template <typename Scalar>
Scalar probit(Scalar x, const ProbitParams& p) {
  return Scalar(0.5) * (Scalar(1) + std::erf(x / (std::sqrt(Scalar(2)) * Scalar(p.kappa)) - Scalar(2)));
}

/// 1 - Phi(x), evaluated through erfc so the far-outside tail stays accurate.
template <typename Scalar>
Scalar probitComplement(Scalar x, const ProbitParams& p) {
  return Scalar(0.5) * std::erfc(x / (std::sqrt(Scalar(2)) * Scalar(p.kappa)) - Scalar(2));
}

template <typename Scalar>
Scalar probitDeriv(Scalar x, const ProbitParams& p) {
  const Scalar k = Scalar(p.kappa);
  const Scalar a = x / (std::sqrt(Scalar(2)) * k) - Scalar(2);
  return std::exp(-a * a) / (std::sqrt(Scalar(2) * Scalar(M_PI)) * k);
}

}  // namespace atpg
