#include "chf/recon_net.hpp"

#include <cmath>
#include <complex>
#include <sstream>

namespace chf {

ReconNet ReconNet::make(const Mat& W, const Mat& Q) {
  ReconNet n;
  n.W = W;
  n.Q = Q;
  const int hd = static_cast<int>(Q.cols());
  n.N = Mat::Identity(hd, hd);
  n.M = Mat::Zero(hd, hd);
  n.P = W;
  n.B_ctrl = Mat::Identity(hd, hd);
  n.h = Vec::Zero(hd);
  n.validate();
  return n;
}

void ReconNet::validate() const {
  const int xd = x_dim(), hd = h_dim();
  require_shape(W.rows() == hd && W.cols() == xd, "W must be h_dim x x_dim");
  require_shape(N.rows() == hd && N.cols() == hd, "N must be h_dim x h_dim");
  require_shape(M.rows() == hd && M.cols() == hd, "M must be h_dim x h_dim");
  require_shape(P.rows() == hd && P.cols() == xd, "P must be h_dim x x_dim");
  require_shape(B_ctrl.rows() == hd, "B_ctrl must have h_dim rows");
  require_shape(h.size() == hd, "h must have h_dim entries");
  if (theta < 0.0) throw InvalidThreshold("theta must be >= 0");
}

namespace {

void check_h(const Vec& h, double blowup, double t) {
  if (!h.allFinite() || h.norm() > blowup) {
    std::ostringstream ss;
    ss << "hidden state diverged at t=" << t << " (|h|=" << h.norm() << ")";
    throw NetworkDiverged(ss.str());
  }
}

void warn_if_not_pd(const ReconNet& net) {
  Mat WQ = net.W * net.Q;
  Eigen::EigenSolver<Mat> es(WQ, false);
  if (es.info() != Eigen::Success || es.eigenvalues().real().minCoeff() <= 0.0)
    warn("relax_simple: WQ has an eigenvalue with non-positive real part");
}

}  // namespace

Mat relax_simple(const ReconNet& net, const InputSignal& x, double dt, int steps) {
  require_shape(net.W.rows() == net.Q.cols() && net.W.cols() == net.Q.rows(), "W/Q shapes");
  if (!(dt > 0.0) || steps < 0) throw InvalidConfig("relax_simple: need dt > 0, steps >= 0");
  warn_if_not_pd(net);
  const Mat& W = net.W;
  const Mat& Q = net.Q;
  Mat out(steps + 1, net.h_dim());
  Vec h = net.h;
  out.row(0) = h.transpose();
  for (int k = 0; k < steps; ++k) {
    double t = k * dt;
    Vec x0 = x(t), xm = x(t + 0.5 * dt), x1 = x(t + dt);
    Vec k1 = W * (x0 - Q * h);
    Vec k2 = W * (xm - Q * (h + 0.5 * dt * k1));
    Vec k3 = W * (xm - Q * (h + 0.5 * dt * k2));
    Vec k4 = W * (x1 - Q * (h + dt * k3));
    h += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_h(h, net.blowup, t + dt);
    out.row(k + 1) = h.transpose();
  }
  return out;
}

Mat relax_simple(const ReconNet& net, const Vec& x, double dt, int steps) {
  return relax_simple(net, [&x](double) { return x; }, dt, steps);
}

namespace {

// 8-point Gauss-Legendre nodes and weights on [-1, 1].
constexpr double kGLx[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                            -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                            0.7966664774136267,  0.9602898564975363};
constexpr double kGLw[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                            0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                            0.2223810344533745, 0.1012285362903763};

}  // namespace

Vec convolution_oracle(const ReconNet& net, const InputSignal& x, double t, int panels) {
  using C = std::complex<double>;
  Mat WQ = net.W * net.Q;
  const int n = static_cast<int>(WQ.rows());
  Eigen::EigenSolver<Mat> es(WQ);
  if (es.info() != Eigen::Success) throw OracleUnavailable("eigen-decomposition failed");
  Eigen::VectorXcd lam = es.eigenvalues();
  Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(V);
  if (!lu.isInvertible() || 1.0 / lu.rcond() > 1e10)
    throw OracleUnavailable("WQ is not diagonalizable");
  if (lam.real().minCoeff() <= 0.0) throw OracleUnavailable("WQ has a non-positive eigenvalue");
  Eigen::MatrixXcd Vinv = lu.inverse();
  Eigen::MatrixXcd Wc = Vinv * net.W.cast<C>();

  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(n);
  Eigen::VectorXcd h0 = Vinv * net.h.cast<C>();
  for (int i = 0; i < n; ++i) acc[i] = std::exp(-lam[i] * t) * h0[i];
  if (t > 0.0) {
    panels = std::max(1, panels);
    double width = t / panels;
    for (int p = 0; p < panels; ++p) {
      double a = p * width;
      for (int q = 0; q < 8; ++q) {
        double s = a + 0.5 * width * (kGLx[q] + 1.0);
        Eigen::VectorXcd src = Wc * x(s).cast<C>();
        double wq = 0.5 * width * kGLw[q];
        for (int i = 0; i < n; ++i) acc[i] += wq * std::exp(-lam[i] * (t - s)) * src[i];
      }
    }
  }
  return (V * acc).real();
}

Vec convolution_oracle(const ReconNet& net, const Vec& x, double t, int panels) {
  return convolution_oracle(net, [&x](double) { return x; }, t, panels);
}

Vec scs_gate(const Vec& s, const Vec& gate, double theta, double alpha) {
  if (theta < 0.0) throw InvalidThreshold("scs_gate: theta must be >= 0");
  require_shape(s.size() == gate.size(), "scs_gate: s and gate lengths differ");
  Vec out = s;
  for (int i = 0; i < s.size(); ++i)
    if (!(std::abs(gate[i]) >= theta)) out[i] *= alpha;
  return out;
}

Vec bu_signal(const ReconNet& net, const Vec& x) {
  require_shape(x.size() == net.x_dim(), "input dimension");
  Vec xh = net.Q * net.h;
  Vec s = net.literal_sign ? Vec(net.W * (xh - x)) : Vec(net.W * (x - xh));
  return scs_gate(s, net.P * xh, net.theta, net.alpha);
}

const Vec& step_extended(ReconNet& net, const Vec& x, const Vec& v, double dt) {
  require_shape(v.size() == net.B_ctrl.cols(), "control dimension");
  Vec dh = net.N * bu_signal(net, x) + net.M * net.h + net.B_ctrl * v;
  net.h += dt * dh;
  check_h(net.h, net.blowup, dt);
  return net.h;
}

const Vec& step_extended(ReconNet& net, const Vec& x, const ControlField& v, double dt) {
  Vec vv = v ? v(net.h) : Vec(Vec::Zero(net.B_ctrl.cols()));
  return step_extended(net, x, vv, dt);
}

TuningReport is_tuned(const ReconNet& net, double tol) {
  Mat prod = net.Q * net.N * net.W;
  require_shape(prod.rows() == prod.cols(), "QNW must be square");
  TuningReport r;
  r.distance = (prod - Mat::Identity(prod.rows(), prod.cols())).norm();
  r.tuned = r.distance < tol;
  return r;
}

Vec equilibrium_linear(const ReconNet& net, const Vec& x, const Vec& v) {
  // standard sign: 0 = N W (x - Q h) + M h + B v
  double sg = net.literal_sign ? -1.0 : 1.0;
  Mat A = sg * net.N * net.W * net.Q - net.M;
  Vec rhs = sg * net.N * net.W * x + net.B_ctrl * v;
  Eigen::FullPivLU<Mat> lu(A);
  if (!lu.isInvertible()) throw InvalidConfig("equilibrium_linear: singular system");
  return lu.solve(rhs);
}

CsvTable RelaxationRecord::to_csv() const {
  int n = static_cast<int>(per_unit_activity.size());
  std::vector<std::string> hdr{"step", "err_norm", "s_l1"};
  for (auto& s : indexed_names("s", n)) hdr.push_back(s);
  CsvTable tab(hdr);
  for (std::size_t k = 0; k < error_trace.size(); ++k) {
    std::vector<double> r{static_cast<double>(k), error_trace[k], bu_activity_trace[k]};
    for (int i = 0; i < n; ++i) r.push_back(unit_trace[k][i]);
    tab.add_row(r);
  }
  return tab;
}

RelaxationRecord relaxation_time(ReconNet& net, const Vec& x, const RelaxOptions& opt) {
  if (!(opt.tol > 0.0)) throw InvalidConfig("relaxation_time: tol must be > 0");
  net.validate();
  if (opt.reset_h) net.h.setZero();
  RelaxationRecord r;
  r.per_unit_peak = Vec::Zero(net.h_dim());
  r.steps_to_tolerance = opt.cap;
  for (int k = 0; k < opt.cap; ++k) {
    double err = (x - net.Q * net.h).norm();
    if (err < opt.tol) {
      r.steps_to_tolerance = k;
      r.converged = true;
      break;
    }
    Vec s = bu_signal(net, x);
    Vec a = s.cwiseAbs();
    r.error_trace.push_back(err);
    r.bu_activity_trace.push_back(a.sum());
    r.unit_trace.push_back(a);
    r.per_unit_peak = r.per_unit_peak.cwiseMax(a);
    step_extended(net, x, opt.v, opt.dt);
  }
  r.per_unit_activity = bu_signal(net, x).cwiseAbs();
  return r;
}

}  // namespace chf
