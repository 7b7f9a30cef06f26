#include "chf/sds_control.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chf {

AffineIdModel AffineIdModel::constant(const Mat& A, const Vec& a) {
  require_shape(A.rows() == a.size(), "AffineIdModel: offset length");
  return AffineIdModel{[A](const Vec&) { return A; }, [a](const Vec&) { return a; }};
}

AffineIdModel AffineIdModel::constant(const Mat& A) { return constant(A, Vec::Zero(A.rows())); }

AffineIdModel AffineIdModel::zero(int m, int n) { return constant(Mat::Zero(m, n)); }

AffineIdModel AffineIdModel::exact(const Plant& plant) {
  if (!plant.has_inverse()) throw InvalidConfig("exact model needs plant inverse dynamics");
  return AffineIdModel{plant.B_field, plant.b_field};
}

AffineIdModel AffineIdModel::scaled_plant(const Plant& plant, double s) {
  if (!plant.has_inverse()) throw InvalidConfig("scaled model needs plant inverse dynamics");
  auto B = plant.B_field;
  int m = plant.ctrl_dim;
  return AffineIdModel{[B, s](const Vec& x) { return Mat(s * B(x)); },
                       [m](const Vec&) { return Vec(Vec::Zero(m)); }};
}

SdsController::SdsController(AffineIdModel phi, AffineIdModel psi, double g, int ctrl_dim)
    : phi_hat(std::move(phi)), psi_hat(std::move(psi)), gain(g), w(Vec::Zero(ctrl_dim)) {
  if (!(gain > 0.0)) throw InvalidConfig("controller gain must be > 0");
}

Vec feedforward(const SdsController& ctrl, const Vec& x, const Vec& xdot, const Vec& v) {
  require_shape(xdot.size() == v.size(), "feedforward: momentum shapes");
  Mat A = ctrl.psi_hat.A_hat(x);
  require_shape(A.cols() == v.size(), "feedforward: model columns");
  return A * (v - xdot);
}

const Vec& feedback_step(SdsController& ctrl, const Vec& x, const Vec& xdot, const Vec& v, double dt) {
  if (!(dt > 0.0)) throw InvalidConfig("feedback_step: dt must be > 0");
  Mat A = ctrl.phi_hat.A_hat(x);
  require_shape(A.cols() == v.size() && A.rows() == ctrl.w.size(), "feedback_step: shapes");
  ctrl.w += dt * ctrl.gain * (A * (v - xdot));
  if (!ctrl.w.allFinite()) throw ControllerDiverged("feedback_step: non-finite integrator state");
  return ctrl.w;
}

Vec control_output(const SdsController& ctrl, const Vec& x, const Vec& xdot, const Vec& v) {
  Vec uff = feedforward(ctrl, x, xdot, v);
  require_shape(uff.size() == ctrl.w.size(), "control_output: integrator length");
  return uff + ctrl.w;
}

SubtractionPair subtraction_rule(const AffineIdModel& model, const Vec& x, const Vec& xdot, const Vec& v) {
  return SubtractionPair{model(x, v), model(x, xdot)};
}

double min_sym_eigenvalue(const Mat& X, const Mat& Y) {
  require_shape(X.rows() == Y.rows() && X.cols() == Y.cols(), "pd pair shapes");
  Mat P = X.transpose() * Y;
  Mat S = 0.5 * (P + P.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

PdCheckReport check_uniform_pd(const std::vector<FieldPair>& pairs, const Box& domain, int samples,
                               double epsilon, std::uint64_t seed) {
  if (samples < 1) throw InvalidConfig("check_uniform_pd: samples must be >= 1");
  PdCheckReport r;
  r.epsilon = epsilon;
  r.min_eigenvalue_observed = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  int per_axis = domain.dim() <= 3 ? 5 : 2;
  auto pts = domain.sample_points(rng, samples, per_axis);
  for (const auto& p : pairs) {
    r.pairs_checked.push_back(p.label);
    bool pair_failed = false;
    for (const Vec& x : pts) {
      double l = min_sym_eigenvalue(p.X(x), p.Y(x));
      r.min_eigenvalue_observed = std::min(r.min_eigenvalue_observed, l);
      if (!(l > epsilon)) {
        r.failed_points.push_back(x);
        pair_failed = true;
      }
    }
    if (pair_failed) r.failed_pairs.push_back(p.label);
  }
  r.sample_count = static_cast<int>(pts.size());
  r.verdict = r.failed_points.empty() && !pairs.empty();
  return r;
}

std::vector<FieldPair> theorem_pairs(const Plant& plant, const SdsController& ctrl) {
  if (!plant.has_inverse()) throw InvalidConfig("theorem_pairs: plant has no B field");
  std::vector<std::pair<std::string, MatField>> f = {
      {"A", plant.B_field}, {"A_hat", ctrl.psi_hat.A_hat}, {"B_hat", ctrl.phi_hat.A_hat}};
  std::vector<FieldPair> out;
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t k = i; k < f.size(); ++k)
      out.push_back({f[i].first + "^T " + f[k].first, f[i].second, f[k].second});
  return out;
}

double lyapunov_value(const Vec& e, const Mat& A, const Mat& A_hat) {
  require_shape(A.rows() == A_hat.rows() && A.cols() == A_hat.cols() && A.cols() == e.size(),
                "lyapunov_value shapes");
  Vec z = (A + A_hat) * e;
  return 0.5 * z.squaredNorm();
}

CsvTable TrajectoryRecord::to_csv() const {
  int n = x.empty() ? 0 : static_cast<int>(x.front().size());
  int m = u.empty() ? 0 : static_cast<int>(u.front().size());
  std::vector<std::string> h{"t"};
  for (auto& s : indexed_names("x", n)) h.push_back(s);
  for (auto& s : indexed_names("xdot", n)) h.push_back(s);
  for (auto& s : indexed_names("u", m)) h.push_back(s);
  for (auto& s : indexed_names("w", m)) h.push_back(s);
  h.push_back("e_norm");
  h.push_back("L");
  CsvTable tab(h);
  for (std::size_t k = 0; k < t.size(); ++k) {
    std::vector<double> r{t[k]};
    for (int i = 0; i < n; ++i) r.push_back(x[k][i]);
    for (int i = 0; i < n; ++i) r.push_back(xdot[k][i]);
    for (int i = 0; i < m; ++i) r.push_back(u[k][i]);
    for (int i = 0; i < m; ++i) r.push_back(w[k][i]);
    r.push_back(e_norm[k]);
    r.push_back(L[k]);
    tab.add_row(r);
  }
  return tab;
}

namespace {

struct ClosedLoop {
  const Plant& plant;
  const SpeedField& v;
  const ScheduleEntry* model = nullptr;
  Vec n_before, n_after;

  // Solves u = A_psi (v - xdot) + w + n_after together with u = B xdot + b.
  Vec momentum(const Vec& x, const Vec& w, double t) const {
    Mat B = plant.B_field(x);
    Mat Ap = model->psi_hat.A_hat(x);
    Eigen::PartialPivLU<Mat> lu(B + Ap);
    if (!(lu.rcond() > 1e-13)) {
      std::ostringstream ss;
      ss << "B + A_psi singular at t=" << t;
      throw TrackingDiverged(ss.str(), t);
    }
    return lu.solve(Ap * v(x) + w + n_after - plant.b_field(x));
  }

  void deriv(const Vec& x, const Vec& w, double t, Vec& dx, Vec& dw) const {
    dx = momentum(x, w, t);
    dw = model->gain * (model->phi_hat.A_hat(x) * (v(x) - dx) + n_before);
  }
};

}  // namespace

std::vector<ScheduleEntry> alternating_schedule(const std::vector<ScheduleEntry>& models, double period,
                                                double T) {
  if (models.empty() || !(period > 0.0)) throw InvalidConfig("alternating_schedule: bad arguments");
  std::vector<ScheduleEntry> out;
  int k = 0;
  for (double t = 0.0; t < T; t = (++k) * period) {
    ScheduleEntry e = models[static_cast<std::size_t>(k) % models.size()];
    e.t_start = t;
    out.push_back(std::move(e));
  }
  return out;
}

TrajectoryRecord time_varying_track(const Plant& plant, const SdsController& ctrl,
                                    const std::vector<ScheduleEntry>& schedule, const SpeedField& v,
                                    const Vec& x0, const TrackOptions& opt) {
  if (!plant.has_inverse()) throw InvalidConfig("tracking needs a plant with affine inverse dynamics");
  if (plant.ctrl_dim != plant.dim) throw ShapeError("tracking supports square plants only");
  require_shape(x0.size() == plant.dim, "x0 dimension");
  require_shape(ctrl.w.size() == plant.ctrl_dim, "controller integrator dimension");
  if (schedule.empty() || schedule.front().t_start != 0.0)
    throw InvalidConfig("schedule must start at t=0");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (schedule[i].t_start < schedule[i - 1].t_start) throw InvalidConfig("schedule not sorted");
  for (const auto& e : schedule)
    if (!(e.gain > 0.0)) throw InvalidConfig("scheduled gain must be > 0");
  if (!(opt.dt > 0.0) || !(opt.T > 0.0)) throw InvalidConfig("T and dt must be > 0");
  const int n = plant.dim;
  const long steps = std::lround(opt.T / opt.dt);
  const int every = std::max(1, opt.record_every);

  ClosedLoop cl{plant, v, nullptr, Vec(), Vec()};
  cl.n_before = Vec::Zero(n);
  cl.n_after = Vec::Zero(n);
  Rng noise(opt.noise_seed);
  const bool noisy = opt.noise_before_std > 0.0 || opt.noise_after_std > 0.0;

  TrajectoryRecord rec;
  Vec x = x0, w = ctrl.w;
  std::size_t active = 0;
  std::vector<double> all_e;
  all_e.reserve(static_cast<std::size_t>(steps) + 1);

  auto check = [&](const Vec& e, const Vec& wv, double t) {
    double en = e.norm(), wn = wv.norm();
    if (!std::isfinite(en) || !std::isfinite(wn) || !x.allFinite() || en > opt.blowup || wn > opt.blowup) {
      std::ostringstream ss;
      ss << "tracking diverged at t=" << t << " (|e|=" << en << ", |w|=" << wn << ")";
      throw TrackingDiverged(ss.str(), t);
    }
  };
  auto record = [&](long k, double t) {
    cl.model = &schedule[active];
    Vec xd = cl.momentum(x, w, t);
    Vec e = v(x) - xd;
    check(e, w, t);
    all_e.push_back(e.norm());
    if (k % every != 0 && k != steps) return;
    Mat A = plant.B_field(x);
    Mat Ap = cl.model->psi_hat.A_hat(x);
    rec.t.push_back(t);
    rec.x.push_back(x);
    rec.xdot.push_back(xd);
    rec.u.push_back(Ap * (v(x) - xd) + w + cl.n_after);
    rec.w.push_back(w);
    rec.e_norm.push_back(e.norm());
    rec.L.push_back(lyapunov_value(e, A, Ap));
  };

  for (long k = 0; k < steps; ++k) {
    double t = k * opt.dt;
    while (active + 1 < schedule.size() && schedule[active + 1].t_start <= t + 1e-12) ++active;
    if (noisy) {
      cl.n_before = noise.normal_vec(n, opt.noise_before_std);
      cl.n_after = noise.normal_vec(n, opt.noise_after_std);
    }
    record(k, t);
    cl.model = &schedule[active];
    const double h = opt.dt;
    Vec k1x, k1w, k2x, k2w, k3x, k3w, k4x, k4w;
    cl.deriv(x, w, t, k1x, k1w);
    cl.deriv(x + 0.5 * h * k1x, w + 0.5 * h * k1w, t, k2x, k2w);
    cl.deriv(x + 0.5 * h * k2x, w + 0.5 * h * k2w, t, k3x, k3w);
    cl.deriv(x + h * k3x, w + h * k3w, t, k4x, k4w);
    x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    w += (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
  }
  double t_end = steps * opt.dt;
  while (active + 1 < schedule.size() && schedule[active + 1].t_start <= t_end + 1e-12) ++active;
  cl.n_before.setZero();
  cl.n_after.setZero();
  record(steps, t_end);

  std::size_t tail = std::max<std::size_t>(1, all_e.size() / 10);
  rec.asymptotic_error = *std::max_element(all_e.end() - static_cast<long>(tail), all_e.end());
  rec.final_x = x;
  rec.final_w = w;
  return rec;
}

TrajectoryRecord track_speed_field(const Plant& plant, const SdsController& ctrl, const SpeedField& v,
                                   const Vec& x0, const TrackOptions& opt) {
  ScheduleEntry e{0.0, ctrl.phi_hat, ctrl.psi_hat, ctrl.gain};
  return time_varying_track(plant, ctrl, {e}, v, x0, opt);
}

}  // namespace chf
