#pragma once

#include "swopt/types.hpp"

#include <algorithm>
#include <cmath>

// Pointwise porous shallow-water kernels in solver variables U~ = (h, uh, vh) = (phi H, phi uH, phi vH).
// 1D problems use the same kernels with vh = 0 and n = (+-1, 0).
namespace swopt::swe {

enum class BoundaryKind { Shore, OpenSea };
enum class OpenSeaMode { Depth, Surface };

struct BoundaryData {
  double H1 = 1.0;
  OpenSeaMode mode = OpenSeaMode::Surface;
};

template <typename S>
Vec3T<S> physical_state(const Vec3T<S>& u, S phi) {
  return u / phi;
}

template <typename S>
Vec3T<S> solver_state(const Vec3T<S>& U, S phi) {
  return U * phi;
}

// rows: components, columns: x and y fluxes
template <typename S>
Eigen::Matrix<S, 3, 2> advective_flux(const Vec3T<S>& u, S phi, double g) {
  using std::abs;
  if (!(u[0] > S(0))) throw SolverError("dry state in advective_flux");
  const S h = u[0], p = S(0.5 * g) * h * h / phi;
  Eigen::Matrix<S, 3, 2> F;
  F << u[1], u[2], u[1] * u[1] / h + p, u[1] * u[2] / h, u[1] * u[2] / h, u[2] * u[2] / h + p;
  return F;
}

// flux of a reconstructed state; a vanishing depth drops the advective part
template <typename S>
Vec3T<S> reconstructed_normal_flux(const Vec3T<S>& u, S phi, double g, const Vec2& n) {
  const S h = u[0];
  const S p = S(0.5 * g) * h * h / phi;
  const S un = u[1] * n.x() + u[2] * n.y();
  Vec3T<S> f;
  if (h > S(1e-300)) {
    f << un, u[1] * un / h + p * n.x(), u[2] * un / h + p * n.y();
  } else {
    f << un, p * n.x(), p * n.y();
  }
  return f;
}

template <typename S>
Vec3T<S> normal_flux(const Vec3T<S>& u, S phi, double g, const Vec2& n) {
  return advective_flux(u, phi, g) * n.cast<S>();
}

// momentum sources inside a cell; porosity is cell-constant so its source lives on facets
template <typename S>
Vec3T<S> sources(const Vec3T<S>& u, S phi, const Vec2T<S>& grad_phi, const Vec2T<S>& grad_z, double g) {
  Vec3T<S> s;
  const S pz = S(0.5 * g) * u[0] * u[0] / (phi * phi);
  s << S(0), -S(g) * u[0] * grad_z.x() + pz * grad_phi.x(), -S(g) * u[0] * grad_z.y() + pz * grad_phi.y();
  return s;
}

template <typename S>
Vec3T<S> wave_speeds(const Vec3T<S>& u, S phi, const Vec2& n, double g) {
  using std::sqrt;
  if (!(u[0] > S(0))) throw SolverError("dry state in wave_speeds");
  const S un = (u[1] * n.x() + u[2] * n.y()) / u[0];
  const S c = sqrt(S(g) * u[0] / phi);
  return Vec3T<S>(un - c, un, un + c);
}

template <typename S>
S max_speed(const Vec3T<S>& u, S phi, const Vec2& n, double g) {
  using std::abs;
  using std::sqrt;
  const S un = (u[1] * n.x() + u[2] * n.y()) / u[0];
  return abs(un) + sqrt(S(g) * u[0] / phi);
}

template <typename S>
Vec3T<S> lax_friedrichs(const Vec3T<S>& up, const Vec3T<S>& um, S phi_p, S phi_m, const Vec2& n, S alpha,
                        double g) {
  return S(0.5) * (normal_flux(up, phi_p, g, n) + normal_flux(um, phi_m, g, n) + alpha * (up - um));
}

template <typename S>
std::pair<S, S> hydrostatic_reconstruct(S hp, S hm, S zp, S zm, S phip, S phim) {
  using std::max;
  using std::min;
  const S zmax = max(zp, zm);
  const S phimin = min(phip, phim);
  const S a = max(S(0), hp / phip + zp - zmax) * phimin;
  const S b = max(S(0), hm / phim + zm - zmax) * phimin;
  return {a, b};
}

// Well-balanced interior facet flux seen from each side. flux_plus multiplies the plus-side
// test functions, flux_minus the minus-side ones (both already carry the orientation sign).
template <typename S>
void well_balanced_facet_flux(const Vec3T<S>& up, const Vec3T<S>& um, S zp, S zm, S phip, S phim,
                              const Vec2& n, double g, Vec3T<S>& flux_plus, Vec3T<S>& flux_minus) {
  using std::max;
  using std::min;
  const auto [hps, hms] = hydrostatic_reconstruct(up[0], um[0], zp, zm, phip, phim);
  const S phimin = min(phip, phim);
  Vec3T<S> ups(hps, up[1], up[2]);
  Vec3T<S> ums(hms, um[1], um[2]);
  const S alpha = max(max_speed(up, phip, n, g), max_speed(um, phim, n, g));
  const Vec3T<S> F = S(0.5) * (reconstructed_normal_flux(ups, phimin, g, n) +
                               reconstructed_normal_flux(ums, phimin, g, n) + alpha * (ups - ums));
  const S cp = S(0.5 * g) * (up[0] * up[0] / phip - hps * hps / phimin);
  const S cm = S(0.5 * g) * (um[0] * um[0] / phim - hms * hms / phimin);
  flux_plus = F;
  flux_plus[1] += cp * n.x();
  flux_plus[2] += cp * n.y();
  flux_minus = -F;
  flux_minus[1] -= cm * n.x();
  flux_minus[2] -= cm * n.y();
}

template <typename S>
Vec3T<S> boundary_state(const Vec3T<S>& up, BoundaryKind kind, const Vec2& n, const BoundaryData& bd, S phi,
                        S z) {
  Vec3T<S> ub = up;
  if (kind == BoundaryKind::Shore) {
    const S qn = up[1] * n.x() + up[2] * n.y();
    ub[1] = up[1] - S(2) * qn * n.x();
    ub[2] = up[2] - S(2) * qn * n.y();
  } else {
    ub[0] = bd.mode == OpenSeaMode::Depth ? phi * S(bd.H1) : phi * (S(bd.H1) - z);
  }
  return ub;
}

template <typename S>
Vec3T<S> boundary_flux(const Vec3T<S>& up, const Vec3T<S>& ub, S phi, const Vec2& n, double g) {
  return S(0.5) * (normal_flux(up, phi, g, n) + normal_flux(ub, phi, g, n));
}

}  // namespace swopt::swe
