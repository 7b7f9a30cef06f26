#include "chf/hierarchy.hpp"

#include <sstream>

namespace chf {

namespace {

std::string dims(const Mat& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

[[noreturn]] void bad_pair(int lo, int hi, const std::string& what) {
  std::ostringstream ss;
  ss << "levels " << lo << " and " << hi << ": " << what;
  throw ConstructionError(ss.str());
}

Mat pinv(const Mat& m) { return m.completeOrthogonalDecomposition().pseudoInverse(); }

Mat effective_U(const HierarchyLevel& lv) {
  if (lv.modulation_V.size() == 0) return lv.coupling_U;
  Vec gain = Vec::Ones(lv.coupling_U.rows()) + lv.modulation_V * lv.net.h;
  return gain.asDiagonal() * lv.coupling_U;
}

}  // namespace

void Hierarchy::reset() {
  t = 0.0;
  for (auto& lv : levels) {
    lv.net.h.setZero();
    lv.h_dot = Vec::Zero(lv.net.h_dim());
    if (lv.controller) lv.controller->w.setZero();
  }
}

std::vector<WiringEdge> Hierarchy::wiring() const {
  std::vector<WiringEdge> out;
  const int L = size();
  for (int l = 1; l < L; ++l) {
    out.push_back({l - 1, "bu_error", l, "input"});
    if (top_twist && l == L - 1)
      out.push_back({l, "mismatch", l - 1, "hidden"});
    else if (levels[static_cast<std::size_t>(l)].controller)
      out.push_back({l, "control", l - 1, "hidden"});
  }
  if (top_deconv) out.push_back({L - 1, "hidden", L - 1, "deconv"});
  return out;
}

Hierarchy build_hierarchy(const std::vector<LevelSpec>& specs, bool top_twist) {
  if (specs.size() < 2) throw ConstructionError("a hierarchy needs at least 2 levels");
  Hierarchy H;
  H.top_twist = top_twist;
  const int L = static_cast<int>(specs.size());
  for (int l = 0; l < L; ++l) {
    const LevelSpec& sp = specs[static_cast<std::size_t>(l)];
    HierarchyLevel lv;
    lv.net = sp.net;
    try {
      lv.net.validate();
    } catch (const Error& e) {
      throw ConstructionError("level " + std::to_string(l) + ": " + e.what());
    }
    lv.kappa = sp.kappa;
    lv.speed_field = sp.speed_field;
    lv.control_enabled = sp.control_enabled;
    lv.h_dot = Vec::Zero(lv.net.h_dim());
    const int xd = lv.net.x_dim(), hd = lv.net.h_dim();
    if (l == 0) {
      if (sp.controller) throw ConstructionError("level 0: the bottom level has no controller");
      H.levels.push_back(std::move(lv));
      continue;
    }
    const ReconNet& below = H.levels[static_cast<std::size_t>(l - 1)].net;
    const int hb = below.h_dim();
    if (sp.U.size() == 0) {
      if (xd != hb)
        bad_pair(l - 1, l, "no U given and x_dim " + std::to_string(xd) + " != lower h_dim " + std::to_string(hb));
      lv.coupling_U = Mat::Identity(xd, hb);
    } else {
      lv.coupling_U = sp.U;
    }
    if (lv.coupling_U.rows() != xd || lv.coupling_U.cols() != hb)
      bad_pair(l - 1, l, "U is " + dims(lv.coupling_U) + ", expected " + std::to_string(xd) + "x" + std::to_string(hb));
    if (sp.C.size() != 0) {
      if (sp.C.rows() != xd || sp.C.cols() != hd)
        bad_pair(l - 1, l, "C is " + dims(sp.C) + ", expected " + std::to_string(xd) + "x" + std::to_string(hd));
      if (sp.C.rows() != sp.C.cols() || Eigen::FullPivLU<Mat>(sp.C).rank() < sp.C.rows())
        warn("level " + std::to_string(l) + ": C is not invertible");
      lv.coupling_C = sp.C;
    }
    if (sp.V.size() != 0) {
      if (sp.V.rows() != xd || sp.V.cols() != hd)
        bad_pair(l - 1, l, "V is " + dims(sp.V) + ", expected " + std::to_string(xd) + "x" + std::to_string(hd));
      lv.modulation_V = sp.V;
    }
    lv.desired_T = sp.T.size() == 0 ? Mat(Mat::Identity(xd, xd)) : sp.T;
    if (lv.desired_T.rows() != xd || lv.desired_T.cols() != xd)
      bad_pair(l - 1, l, "T is " + dims(lv.desired_T) + ", expected " + std::to_string(xd) + "x" + std::to_string(xd));

    const int cb = static_cast<int>(below.B_ctrl.cols());
    const bool twisted_top = top_twist && l == L - 1;
    if (twisted_top) {
      lv.twist = sp.twist.size() == 0 ? Mat(Mat::Identity(cb, xd)) : sp.twist;
      if (sp.twist.size() == 0 && cb != xd)
        bad_pair(l - 1, l, "no twist given and lower control dim " + std::to_string(cb) + " != x_dim " + std::to_string(xd));
      if (lv.twist.rows() != cb || lv.twist.cols() != xd)
        bad_pair(l - 1, l, "twist is " + dims(lv.twist) + ", expected " + std::to_string(cb) + "x" + std::to_string(xd));
    }
    if (sp.controller) {
      lv.controller = sp.controller;
    } else if (!twisted_top) {
      Mat A = pinv(lv.coupling_U * below.B_ctrl);
      lv.controller = SdsController(AffineIdModel::constant(A), AffineIdModel::constant(A), 4.0, cb);
    }
    if (lv.controller) {
      const SdsController& c = *lv.controller;
      Mat Ap = c.psi_hat.A_hat(below.h), Af = c.phi_hat.A_hat(below.h);
      if (c.w.size() != cb || Ap.rows() != cb || Ap.cols() != xd || Af.rows() != cb || Af.cols() != xd)
        bad_pair(l - 1, l, "controller models must be " + std::to_string(cb) + "x" + std::to_string(xd) +
                               " with a length-" + std::to_string(cb) + " integrator");
    }
    H.levels.push_back(std::move(lv));
  }
  const ReconNet& top = H.levels.back().net;
  try {
    H.top_deconv = diagonalize(top.W, top.Q);
  } catch (const Error&) {
    H.top_deconv.reset();
  }
  return H;
}

std::vector<LevelSnapshot> step_hierarchy(Hierarchy& H, const Vec& x, double dt) {
  if (!(dt > 0.0)) throw InvalidConfig("step_hierarchy: dt must be > 0");
  const int L = H.size();
  if (L < 2) throw ConstructionError("hierarchy has fewer than 2 levels");
  std::vector<LevelSnapshot> snap(static_cast<std::size_t>(L));
  std::vector<Vec> s(static_cast<std::size_t>(L));
  std::vector<Mat> Ueff(static_cast<std::size_t>(L));

  // bottom-up: inputs, mismatches and gated errors from the current state
  for (int l = 0; l < L; ++l) {
    auto& lv = H.levels[static_cast<std::size_t>(l)];
    auto& sn = snap[static_cast<std::size_t>(l)];
    if (l == 0) {
      require_shape(x.size() == lv.net.x_dim(), "step_hierarchy: bottom input dimension");
      sn.x = x;
    } else {
      Ueff[static_cast<std::size_t>(l)] = effective_U(lv);
      sn.x = Ueff[static_cast<std::size_t>(l)] * s[static_cast<std::size_t>(l - 1)];
    }
    sn.e = sn.x - lv.net.Q * lv.net.h;
    s[static_cast<std::size_t>(l)] = bu_signal(lv.net, sn.x);
    sn.u = Vec::Zero(lv.net.B_ctrl.cols());
  }

  // top-down: controls into the layer below
  for (int l = L - 1; l >= 1; --l) {
    auto& lv = H.levels[static_cast<std::size_t>(l)];
    auto& below = H.levels[static_cast<std::size_t>(l - 1)];
    auto& sn = snap[static_cast<std::size_t>(l)];
    if (H.top_twist && l == L - 1) {
      sn.corrective = -(lv.twist * sn.e);
      snap[static_cast<std::size_t>(l - 1)].u += sn.corrective;
      continue;
    }
    if (!lv.controller || !lv.control_enabled) continue;
    const Mat& U = Ueff[static_cast<std::size_t>(l)];
    sn.desired = lv.speed_field ? Vec(lv.desired_T * lv.speed_field(lv.net.h))
                                : Vec(lv.desired_T * (lv.net.Q * lv.net.h));
    SdsController& c = *lv.controller;
    // experienced momentum depends on the control it produces:
    // y = U(drift + Bc u), u = A(d - y) + w, solved jointly
    Vec drift = below.net.N * s[static_cast<std::size_t>(l - 1)] + below.net.M * below.net.h;
    Mat UB = U * below.net.B_ctrl;
    Mat A = c.psi_hat.A_hat(below.net.h);
    Mat lhs = Mat::Identity(UB.rows(), UB.rows()) + UB * A;
    Eigen::FullPivLU<Mat> lu(lhs);
    if (!lu.isInvertible()) throw HierarchyDiverged("level " + std::to_string(l) + ": singular control loop", l);
    sn.experienced = lu.solve(U * drift + UB * (A * sn.desired + c.w));
    sn.corrective = control_output(c, below.net.h, sn.experienced, sn.desired);
    try {
      feedback_step(c, below.net.h, sn.experienced, sn.desired, dt);
    } catch (const ControllerDiverged& e) {
      throw HierarchyDiverged("level " + std::to_string(l) + ": " + e.what(), l);
    }
    snap[static_cast<std::size_t>(l - 1)].u += sn.corrective;
  }

  // integrate every hidden layer
  for (int l = 0; l < L; ++l) {
    auto& lv = H.levels[static_cast<std::size_t>(l)];
    auto& sn = snap[static_cast<std::size_t>(l)];
    Vec drive = lv.net.B_ctrl * sn.u;
    if (l == L - 1) drive -= lv.kappa * lv.net.h;
    Vec dh = lv.net.N * s[static_cast<std::size_t>(l)] + lv.net.M * lv.net.h + drive;
    Vec hn = lv.net.h + dt * dh;
    if (!hn.allFinite() || hn.norm() > lv.net.blowup) {
      std::ostringstream ss;
      ss << "level " << l << ": hidden state diverged at t=" << H.t + dt;
      throw HierarchyDiverged(ss.str(), l);
    }
    lv.h_dot = (hn - lv.net.h) / dt;
    lv.net.h = hn;
    sn.h = hn;
  }
  for (int l = 1; l < L; ++l) {
    auto& lv = H.levels[static_cast<std::size_t>(l)];
    if (lv.coupling_C.size() != 0)
      snap[static_cast<std::size_t>(l)].identification_residual =
          (lv.coupling_C * lv.h_dot - Ueff[static_cast<std::size_t>(l)] * H.levels[static_cast<std::size_t>(l - 1)].h_dot).norm();
  }
  H.t += dt;
  return snap;
}

std::vector<FeedforwardLevelReport> verify_feedforward(const Hierarchy& H, const std::vector<Vec>& inputs,
                                                       double tol) {
  const int L = H.size();
  std::vector<FeedforwardLevelReport> rep;
  for (int l = 0; l < L; ++l)
    rep.push_back({l, 0.0, is_tuned(H.levels[static_cast<std::size_t>(l)].net, 0.0).distance, true});
  for (const Vec& x : inputs) {
    Vec xin = x;
    for (int l = 0; l < L; ++l) {
      const auto& lv = H.levels[static_cast<std::size_t>(l)];
      ReconNet net = lv.net;
      net.h.setZero();
      if (l > 0) xin = lv.coupling_U * xin;
      // one sweep: a unit step from h = 0 with open gates
      Vec h1 = net.N * net.W * xin;
      Vec hr = equilibrium_linear(net, xin, Vec::Zero(net.B_ctrl.cols()));
      auto& r = rep[static_cast<std::size_t>(l)];
      r.residual = std::max(r.residual, (h1 - hr).norm());
      // in the first sweep the whole input is still unexplained, so the
      // level above receives W x
      xin = net.W * xin;
    }
  }
  for (auto& r : rep) r.feedforward_equivalent = r.residual <= tol;
  return rep;
}

CsvTable snapshots_to_csv(const std::vector<std::vector<LevelSnapshot>>& run, int level, double dt) {
  if (run.empty()) return CsvTable({"t"});
  const auto& first = run.front().at(static_cast<std::size_t>(level));
  int hd = static_cast<int>(first.h.size()), xd = static_cast<int>(first.e.size()),
      ud = static_cast<int>(first.u.size());
  std::vector<std::string> hdr{"t"};
  for (auto& s : indexed_names("h", hd)) hdr.push_back(s);
  for (auto& s : indexed_names("e", xd)) hdr.push_back(s);
  for (auto& s : indexed_names("u", ud)) hdr.push_back(s);
  hdr.push_back("e_norm");
  hdr.push_back("u_norm");
  CsvTable t(hdr);
  for (std::size_t k = 0; k < run.size(); ++k) {
    const auto& sn = run[k].at(static_cast<std::size_t>(level));
    std::vector<double> r{(static_cast<double>(k) + 1.0) * dt};
    for (int i = 0; i < hd; ++i) r.push_back(sn.h[i]);
    for (int i = 0; i < xd; ++i) r.push_back(sn.e[i]);
    for (int i = 0; i < ud; ++i) r.push_back(sn.u[i]);
    r.push_back(sn.e.norm());
    r.push_back(sn.u.norm());
    t.add_row(r);
  }
  return t;
}

}  // namespace chf
