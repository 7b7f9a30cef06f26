#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "chf/core.hpp"
#include "chf/io.hpp"
#include "chf/ode.hpp"
#include "chf/rng.hpp"

namespace chf {

struct Box {
  Vec lo;
  Vec hi;

  static Box unbounded(int n);
  static Box symmetric(int n, double half_width);
  int dim() const { return static_cast<int>(lo.size()); }
  // margin is a fraction of the box width added on each side.
  bool contains(const Vec& x, double margin = 0.0) const;
  Vec sample(Rng& rng) const;
  // per_axis points along every axis, endpoints included. Unbounded axes
  // are clipped to [-1, 1].
  std::vector<Vec> grid(int per_axis) const;
  // Grid plus uniform Monte Carlo points.
  std::vector<Vec> sample_points(Rng& rng, int monte_carlo, int per_axis) const;
};

using DynamicsFn = std::function<Vec(const Vec& x, const Vec& u)>;
using MatField = std::function<Mat(const Vec& x)>;
using VecField = std::function<Vec(const Vec& x)>;
using SpeedField = VecField;

// First-order plant xdot = f(x, u). When B_field/b_field are present the
// plant also has the affine inverse dynamics u = B(x) xdot + b(x).
struct Plant {
  int dim = 0;
  int ctrl_dim = 0;
  DynamicsFn dynamics;
  MatField B_field;
  VecField b_field;
  Box domain;
  double margin = 0.1;
  Integrator integrator = Integrator::RK4;
  double max_dt = std::numeric_limits<double>::infinity();

  bool has_inverse() const { return static_cast<bool>(B_field) && static_cast<bool>(b_field); }
};

// Square affine plant: f(x,u) = B(x)^{-1}(u - b(x)).
Plant make_affine_plant(int dim, MatField B, VecField b, Box domain);

Vec step_plant(const Plant& plant, const Vec& x, const Vec& u, double dt);
Vec inverse_dynamics_exact(const Plant& plant, const Vec& x, const Vec& xdot);

// Max |f(x, B x' + b) - x'| over sampled states and random momenta.
double inverse_consistency_error(const Plant& plant, Rng& rng, int samples, double speed_scale = 1.0);

struct HigherOrderSystem {
  int order = 1;
  int config_dim = 1;
  int ctrl_dim = 0;
  // (q, q', ..., q^(order-1)), u -> q^(order)
  std::function<Vec(const std::vector<Vec>& derivs, const Vec& u)> rhs;
  Box domain;  // over the concatenated state; empty means unbounded
};

Plant reduce_order(const HigherOrderSystem& sys);

struct SpeedFieldReport {
  double max_norm = 0.0;
  double max_jacobian_norm = 0.0;
  int samples = 0;
};
SpeedFieldReport check_speed_field(const SpeedField& v, const Box& domain, Rng& rng, int samples,
                                   double fd_step = 1e-6);

// Built-in families.
Plant linear_plant(const Mat& B, const Vec& b, Box domain);
// b_i(x) = sum_k coeffs(i,k) * x_i^k
Plant polynomial_b_plant(const Mat& B, const Mat& coeffs, Box domain);
// q'' = -omega^2 q + u, reduced to (q, q').
Plant harmonic_oscillator(double omega, int ctrl_dim = 1);
// Two-link-arm-like plant with configuration-dependent mass matrix.
Plant arm_analog(const Vec& b_offset = Vec::Zero(2));

// Limit-cycle field omega*J x + gamma*(1 - |x|^2)*x in 2-D, J the quarter-turn rotation.
SpeedField hopf_field(double omega = 0.5, double gamma = 0.5);
SpeedField linear_field(const Mat& K);

Plant plant_from_json(const Json& j);
SpeedField speed_field_from_json(const Json& j, int dim);
Box box_from_json(const Json& j, int dim);

}  // namespace chf
