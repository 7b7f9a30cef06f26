#include "chf/plant.hpp"

#include <cmath>
#include <sstream>

namespace chf {

Box Box::unbounded(int n) {
  const double inf = std::numeric_limits<double>::infinity();
  return Box{Vec::Constant(n, -inf), Vec::Constant(n, inf)};
}

Box Box::symmetric(int n, double half_width) {
  return Box{Vec::Constant(n, -half_width), Vec::Constant(n, half_width)};
}

bool Box::contains(const Vec& x, double margin) const {
  if (x.size() != lo.size()) return false;
  for (int i = 0; i < x.size(); ++i) {
    double w = hi[i] - lo[i];
    double pad = std::isfinite(w) ? margin * w : 0.0;
    if (x[i] < lo[i] - pad || x[i] > hi[i] + pad) return false;
  }
  return true;
}

namespace {
double clip_lo(double v) { return std::isfinite(v) ? v : -1.0; }
double clip_hi(double v) { return std::isfinite(v) ? v : 1.0; }
}  // namespace

Vec Box::sample(Rng& rng) const {
  Vec x(lo.size());
  for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(clip_lo(lo[i]), clip_hi(hi[i]));
  return x;
}

std::vector<Vec> Box::grid(int per_axis) const {
  std::vector<Vec> pts;
  int n = dim();
  if (per_axis < 1 || n == 0) return pts;
  std::vector<int> idx(n, 0);
  while (true) {
    Vec x(n);
    for (int i = 0; i < n; ++i) {
      double a = clip_lo(lo[i]), b = clip_hi(hi[i]);
      x[i] = per_axis == 1 ? 0.5 * (a + b) : a + (b - a) * idx[i] / (per_axis - 1);
    }
    pts.push_back(x);
    int k = 0;
    while (k < n && ++idx[k] == per_axis) idx[k++] = 0;
    if (k == n) break;
  }
  return pts;
}

std::vector<Vec> Box::sample_points(Rng& rng, int monte_carlo, int per_axis) const {
  auto pts = grid(per_axis);
  for (int i = 0; i < monte_carlo; ++i) pts.push_back(sample(rng));
  return pts;
}

Plant make_affine_plant(int dim, MatField B, VecField b, Box domain) {
  Plant p;
  p.dim = dim;
  p.ctrl_dim = dim;
  p.B_field = B;
  p.b_field = b;
  p.domain = std::move(domain);
  p.dynamics = [B, b](const Vec& x, const Vec& u) -> Vec {
    return B(x).partialPivLu().solve(u - b(x));
  };
  return p;
}

namespace {
void check_state(const Plant& plant, const Vec& x, const char* when) {
  if (!x.allFinite()) throw IntegrationDiverged(std::string("non-finite state ") + when);
  if (!plant.domain.contains(x, plant.margin)) {
    std::ostringstream ss;
    ss << "state " << x.transpose() << " outside domain " << when;
    throw DomainExit(ss.str());
  }
}
}  // namespace

Vec step_plant(const Plant& plant, const Vec& x, const Vec& u, double dt) {
  require_shape(x.size() == plant.dim, "step_plant: state dimension");
  require_shape(u.size() == plant.ctrl_dim, "step_plant: control dimension");
  if (!(dt > 0.0) || dt > plant.max_dt) throw InvalidConfig("step_plant: dt outside (0, max_dt]");
  check_state(plant, x, "before step");
  auto f = [&](const Vec& s) { return plant.dynamics(s, u); };
  Vec out = ode_step(plant.integrator, f, x, dt);
  check_state(plant, out, "after step");
  return out;
}

Vec inverse_dynamics_exact(const Plant& plant, const Vec& x, const Vec& xdot) {
  if (!plant.has_inverse()) throw InvalidConfig("plant has no affine inverse dynamics");
  require_shape(x.size() == plant.dim, "inverse_dynamics_exact: state dimension");
  require_shape(xdot.size() == plant.dim, "inverse_dynamics_exact: momentum dimension");
  if (!plant.domain.contains(x, plant.margin)) throw DomainExit("inverse_dynamics_exact: x outside domain");
  Mat B = plant.B_field(x);
  require_shape(B.rows() == plant.ctrl_dim && B.cols() == plant.dim, "B(x) shape");
  return B * xdot + plant.b_field(x);
}

double inverse_consistency_error(const Plant& plant, Rng& rng, int samples, double speed_scale) {
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    Vec x = plant.domain.sample(rng);
    Vec xd = rng.normal_vec(plant.dim, speed_scale);
    Vec back = plant.dynamics(x, inverse_dynamics_exact(plant, x, xd));
    worst = std::max(worst, (back - xd).norm());
  }
  return worst;
}

Plant reduce_order(const HigherOrderSystem& sys) {
  if (sys.order < 1) throw InvalidOrder("reduce_order: order must be >= 1");
  if (sys.config_dim < 1) throw InvalidOrder("reduce_order: config_dim must be >= 1");
  if (!sys.rhs) throw InvalidConfig("reduce_order: missing rhs");
  const int n = sys.order, d = sys.config_dim;
  Plant p;
  p.dim = n * d;
  p.ctrl_dim = sys.ctrl_dim;
  p.domain = sys.domain.dim() == p.dim ? sys.domain : Box::unbounded(p.dim);
  auto rhs = sys.rhs;
  p.dynamics = [rhs, n, d](const Vec& x, const Vec& u) -> Vec {
    std::vector<Vec> z(n);
    for (int k = 0; k < n; ++k) z[k] = x.segment(k * d, d);
    Vec out(n * d);
    for (int k = 0; k + 1 < n; ++k) out.segment(k * d, d) = z[k + 1];
    Vec top = rhs(z, u);
    require_shape(top.size() == d, "rhs output dimension");
    out.segment((n - 1) * d, d) = top;
    return out;
  };
  return p;
}

SpeedFieldReport check_speed_field(const SpeedField& v, const Box& domain, Rng& rng, int samples,
                                   double fd_step) {
  SpeedFieldReport r;
  const int n = domain.dim();
  for (const Vec& x : domain.sample_points(rng, samples, 3)) {
    Vec vx = v(x);
    r.max_norm = std::max(r.max_norm, vx.norm());
    Mat J(vx.size(), n);
    for (int k = 0; k < n; ++k) {
      Vec xp = x, xm = x;
      xp[k] += fd_step;
      xm[k] -= fd_step;
      J.col(k) = (v(xp) - v(xm)) / (2 * fd_step);
    }
    r.max_jacobian_norm = std::max(r.max_jacobian_norm, J.operatorNorm());
    ++r.samples;
  }
  return r;
}

Plant linear_plant(const Mat& B, const Vec& b, Box domain) {
  require_shape(B.rows() == B.cols() && B.rows() == b.size(), "linear_plant shapes");
  return make_affine_plant(static_cast<int>(B.rows()), [B](const Vec&) { return B; },
                           [b](const Vec&) { return b; }, std::move(domain));
}

Plant polynomial_b_plant(const Mat& B, const Mat& coeffs, Box domain) {
  require_shape(B.rows() == B.cols() && coeffs.rows() == B.rows(), "polynomial_b_plant shapes");
  auto b = [coeffs](const Vec& x) {
    Vec out = Vec::Zero(x.size());
    for (int i = 0; i < x.size(); ++i) {
      double p = 1.0;
      for (int k = 0; k < coeffs.cols(); ++k) {
        out[i] += coeffs(i, k) * p;
        p *= x[i];
      }
    }
    return out;
  };
  return make_affine_plant(static_cast<int>(B.rows()), [B](const Vec&) { return B; }, b,
                           std::move(domain));
}

Plant harmonic_oscillator(double omega, int ctrl_dim) {
  HigherOrderSystem sys;
  sys.order = 2;
  sys.config_dim = 1;
  sys.ctrl_dim = ctrl_dim;
  double w2 = omega * omega;
  sys.rhs = [w2](const std::vector<Vec>& z, const Vec& u) -> Vec {
    Vec a = -w2 * z[0];
    if (u.size() > 0) a[0] += u[0];
    return a;
  };
  return reduce_order(sys);
}

Plant arm_analog(const Vec& b_offset) {
  require_shape(b_offset.size() == 2, "arm_analog offset must be 2-D");
  auto B = [](const Vec& x) {
    double c = std::cos(x[1]);
    Mat m(2, 2);
    m << 1.5 + 0.5 * c, 0.25 + 0.25 * c, 0.25 + 0.25 * c, 0.75;
    return m;
  };
  auto b = [b_offset](const Vec& x) {
    Vec o(2);
    o << 0.3 * std::sin(x[0]), 0.2 * x[1];
    return Vec(o + b_offset);
  };
  return make_affine_plant(2, B, b, Box::symmetric(2, 2.0));
}

SpeedField hopf_field(double omega, double gamma) {
  return [omega, gamma](const Vec& x) -> Vec {
    Vec r(2);
    r << -x[1], x[0];
    return omega * r + gamma * (1.0 - x.squaredNorm()) * x;
  };
}

SpeedField linear_field(const Mat& K) {
  return [K](const Vec& x) -> Vec { return K * x; };
}

Box box_from_json(const Json& j, int dim) {
  if (j.is_null()) return Box::unbounded(dim);
  if (j.is_number()) return Box::symmetric(dim, j.get<double>());
  Box b{vec_from_json(j.at("lo")), vec_from_json(j.at("hi"))};
  if (b.lo.size() != dim || b.hi.size() != dim) throw ParamError("domain dimension mismatch");
  return b;
}

Plant plant_from_json(const Json& j) {
  std::string fam = j.value("family", "");
  Plant p;
  if (fam == "linear") {
    Mat B = mat_from_json(j.at("B"));
    Vec b = j.contains("b") ? vec_from_json(j.at("b")) : Vec::Zero(B.rows());
    p = linear_plant(B, b, box_from_json(j.value("domain", Json()), static_cast<int>(B.rows())));
  } else if (fam == "polynomial_b") {
    Mat B = mat_from_json(j.at("B"));
    p = polynomial_b_plant(B, mat_from_json(j.at("b_coeffs")),
                           box_from_json(j.value("domain", Json()), static_cast<int>(B.rows())));
  } else if (fam == "harmonic_oscillator") {
    p = harmonic_oscillator(j.value("omega", 1.0), j.value("ctrl_dim", 1));
  } else if (fam == "arm_analog") {
    Vec off = j.contains("b_offset") ? vec_from_json(j.at("b_offset")) : Vec::Zero(2);
    p = arm_analog(off);
    if (j.contains("domain")) p.domain = box_from_json(j.at("domain"), 2);
  } else {
    throw ParamError("unknown plant family '" + fam + "'");
  }
  if (j.contains("margin")) p.margin = j.at("margin").get<double>();
  if (j.contains("integrator")) {
    std::string s = j.at("integrator").get<std::string>();
    if (s == "rk4") p.integrator = Integrator::RK4;
    else if (s == "euler") p.integrator = Integrator::Euler;
    else throw ParamError("unknown integrator '" + s + "'");
  }
  if (j.contains("max_dt")) p.max_dt = j.at("max_dt").get<double>();
  return p;
}

SpeedField speed_field_from_json(const Json& j, int dim) {
  std::string fam = j.value("family", "");
  if (fam == "hopf") {
    if (dim != 2) throw ParamError("hopf field is 2-D");
    return hopf_field(j.value("omega", 0.5), j.value("gamma", 0.5));
  }
  if (fam == "linear") {
    Mat K = mat_from_json(j.at("K"));
    if (K.rows() != dim || K.cols() != dim) throw ParamError("speed field K shape");
    return linear_field(K);
  }
  if (fam == "decay") return linear_field(-j.value("kappa", 1.0) * Mat::Identity(dim, dim));
  throw ParamError("unknown speed field family '" + fam + "'");
}

}  // namespace chf
