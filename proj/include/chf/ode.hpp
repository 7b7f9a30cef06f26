#pragma once

#include "chf/core.hpp"

namespace chf {

enum class Integrator { RK4, Euler };

template <class F>
Vec ode_step(Integrator kind, const F& f, const Vec& x, double dt) {
  if (kind == Integrator::Euler) return x + dt * f(x);
  Vec k1 = f(x);
  Vec k2 = f(x + 0.5 * dt * k1);
  Vec k3 = f(x + 0.5 * dt * k2);
  Vec k4 = f(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace chf
