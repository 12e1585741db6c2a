#pragma once

// Quadrature on the unit momentum sphere and on the torus.

#include "folab/core.hpp"

#include <cmath>
#include <vector>

namespace folab {

struct QuadratureRule {
  std::vector<Point> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre nodes/weights on [-1, 1] via Newton iteration on P_n.
inline QuadratureRule gauss_legendre(int count) {
  if (count < 1) throw PreconditionError("Gauss-Legendre needs at least one node");
  QuadratureRule r;
  r.nodes.resize(count);
  r.weights.resize(count);
  for (int i = 0; i < (count + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (count + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= count; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = count * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.nodes[i] = {-z};
    r.nodes[count - 1 - i] = {z};
    r.weights[i] = w;
    r.weights[count - 1 - i] = w;
  }
  return r;
}

struct SphereRuleSpec {
  int azimuth = 256;  // trapezoid nodes in the azimuthal angle
  int polar = 64;     // Gauss-Legendre nodes in cos(theta), n = 3 only
};

/// Product rule on S^{n-1} for n = 2 (trapezoid) and n = 3 (Gauss-Legendre in
/// cos(theta) times trapezoid in phi). For n = 4 the rule is Gauss-Legendre
/// in the first hyperspherical angle (with the sin^2 Jacobian folded in via
/// t = cos(chi)) times the n = 3 rule.
inline QuadratureRule sphere_rule(int n, const SphereRuleSpec& spec = {}) {
  QuadratureRule r;
  const int na = spec.azimuth;
  if (n == 2) {
    for (int k = 0; k < na; ++k) {
      const double phi = 2.0 * kPi * k / na;
      r.nodes.push_back({std::cos(phi), std::sin(phi)});
      r.weights.push_back(2.0 * kPi / na);
    }
    return r;
  }
  if (n == 3) {
    const QuadratureRule gl = gauss_legendre(spec.polar);
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double t = gl.nodes[i][0], st = std::sqrt(1.0 - t * t);
      for (int k = 0; k < na; ++k) {
        const double phi = 2.0 * kPi * k / na;
        r.nodes.push_back({st * std::cos(phi), st * std::sin(phi), t});
        r.weights.push_back(gl.weights[i] * 2.0 * kPi / na);
      }
    }
    return r;
  }
  if (n == 4) {
    const QuadratureRule inner = sphere_rule(3, spec);
    const QuadratureRule gl = gauss_legendre(spec.polar);
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double t = gl.nodes[i][0], st = std::sqrt(1.0 - t * t);
      // dS^3 = sin^2(chi) dchi dS^2 = sqrt(1 - t^2) dt dS^2
      for (std::size_t k = 0; k < inner.nodes.size(); ++k) {
        const Point& u = inner.nodes[k];
        r.nodes.push_back({st * u[0], st * u[1], st * u[2], t});
        r.weights.push_back(gl.weights[i] * st * inner.weights[k]);
      }
    }
    return r;
  }
  throw PreconditionError("sphere rules are available for n in {2, 3, 4}");
}

/// Same rule at half resolution, for error estimation.
inline SphereRuleSpec halved(const SphereRuleSpec& s) {
  return {std::max(4, s.azimuth / 2), std::max(2, s.polar / 2)};
}

}  // namespace folab
