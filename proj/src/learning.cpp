#include "chf/learning.hpp"

#include <cmath>

namespace chf {

Vec score(const Vec& y, const Vec& k) {
  require_shape(y.size() == k.size(), "score: sign vector length");
  Vec out(y.size());
  for (int i = 0; i < y.size(); ++i) out[i] = y[i] + k[i] * std::tanh(y[i]);
  return out;
}

Vec score(const Vec& y) { return score(y, Vec::Ones(y.size())); }

namespace {
Vec signs_or_default(const Vec* k, int n) { return k ? *k : Vec(Vec::Ones(n)); }
}  // namespace

void ica_update_W(ReconNet& net, const Vec& x, double eta, IcaMode mode, const Vec* k) {
  if (eta == 0.0) return;
  require_shape(x.size() == net.W.cols(), "ica_update_W: input length");
  Vec y = net.W * x;
  Vec phi = score(y, signs_or_default(k, static_cast<int>(y.size())));
  const int n = static_cast<int>(y.size());
  if (mode == IcaMode::GainOnly) {
    Vec g = Vec::Ones(n) - phi.cwiseProduct(y);
    net.W += eta * g.asDiagonal() * net.W;
  } else {
    net.W += eta * (Mat::Identity(n, n) - phi * y.transpose()) * net.W;
  }
}

Mat inverse_term(const ReconNet& net, InverseMode mode, Rng* rng, const NoiseModel& noise) {
  switch (mode) {
    case InverseMode::InverseTranspose:
    case InverseMode::InverseLiteral: {
      if (net.P.rows() != net.P.cols()) throw ShapeError("exact inverse term needs a square P");
      Eigen::FullPivLU<Mat> lu(net.P);
      if (!lu.isInvertible() || lu.rcond() < 1e-12) throw NotPositiveDefinite("P is singular");
      Mat inv = lu.inverse();
      return mode == InverseMode::InverseTranspose ? Mat(inv.transpose()) : inv;
    }
    case InverseMode::Noise: {
      if (!rng) throw InvalidConfig("noise inverse term needs an rng");
      if (!(noise.std > 0.0) || noise.samples < 1) throw InvalidConfig("bad noise model");
      const int hd = net.h_dim();
      Mat QN = net.Q * net.N;
      Mat acc = Mat::Zero(hd, net.x_dim());
      for (int i = 0; i < noise.samples; ++i) {
        Vec n = rng->normal_vec(hd, noise.std);
        acc += n * (QN * n).transpose();
      }
      return acc / (noise.std * noise.std * noise.samples);
    }
    case InverseMode::NaturalGradient:
      break;
  }
  throw InvalidConfig("inverse_term: natural-gradient mode has no standalone inverse term");
}

Mat ica_update_P(ReconNet& net, const Vec& s, const Vec& x_hat, double eta, InverseMode mode, Rng* rng,
                 const NoiseModel& noise, IcaMode ica, const Vec* k) {
  require_shape(s.size() == net.P.rows() && x_hat.size() == net.P.cols(), "ica_update_P shapes");
  if (eta == 0.0) return Mat::Zero(net.P.rows(), net.P.cols());
  Vec f = -score(s, signs_or_default(k, static_cast<int>(s.size())));
  Mat d;
  if (mode == InverseMode::NaturalGradient || ica == IcaMode::GainOnly) {
    // (f x^T + P^-T) P^T P = (I + f (P x)^T) P
    Vec y = net.P * x_hat;
    const int n = static_cast<int>(y.size());
    if (ica == IcaMode::GainOnly) {
      Vec g = Vec::Ones(n) + f.cwiseProduct(y);
      d = eta * (g.asDiagonal() * net.P);
    } else {
      d = eta * (Mat::Identity(n, n) + f * y.transpose()) * net.P;
    }
  } else {
    Mat inv;
    try {
      inv = inverse_term(net, mode, rng, noise);
    } catch (const NotPositiveDefinite&) {
      warn("ica_update_P: P singular, falling back to the noise inverse term");
      inv = inverse_term(net, InverseMode::Noise, rng, noise);
    }
    d = eta * (f * x_hat.transpose() + inv);
  }
  net.P += d;
  return d;
}

void hebbian_update_Q(ReconNet& net, const Vec& e, const Vec& h, double eta, bool nonnegative) {
  require_shape(e.size() == net.Q.rows() && h.size() == net.Q.cols(), "hebbian_update_Q shapes");
  if (eta != 0.0) net.Q += eta * e * h.transpose();
  if (nonnegative) net.Q = net.Q.cwiseMax(0.0);
}

void hebbian_update_M(ReconNet& net, const Vec& h, const Vec& h_dot, double eta, MRule rule) {
  require_shape(h.size() == net.M.rows() && h_dot.size() == net.M.rows(), "hebbian_update_M shapes");
  if (eta == 0.0) return;
  Vec drive = rule == MRule::Residual ? Vec(h_dot - net.M * h) : h_dot;
  net.M += eta * (net.N * drive) * h.transpose();
}

IcaState IcaState::make(int dim, double separate_rate) {
  IcaState s;
  s.whitening = Mat::Identity(dim, dim);
  s.separation = Mat::Identity(dim, dim);
  s.covariance = Mat::Zero(dim, dim);
  s.mean = Vec::Zero(dim);
  s.m2 = Vec::Ones(dim);
  s.m4 = Vec::Constant(dim, 3.0);
  s.kurt_sign = Vec::Ones(dim);
  s.separate_rate = separate_rate;
  return s;
}

bool whiten_then_separate(IcaState& st, const std::vector<Vec>& batch) {
  if (batch.empty()) throw InvalidConfig("whiten_then_separate: empty batch");
  const int n = static_cast<int>(st.whitening.rows());
  Vec bmean = Vec::Zero(n);
  for (const Vec& x : batch) {
    require_shape(x.size() == n, "whiten_then_separate: sample length");
    bmean += x;
  }
  bmean /= static_cast<double>(batch.size());
  Mat bcov = Mat::Zero(n, n);
  for (const Vec& x : batch) {
    Vec c = st.center ? Vec(x - bmean) : x;
    bcov += c * c.transpose();
  }
  bcov /= static_cast<double>(batch.size());

  bool ok = true;
  Eigen::SelfAdjointEigenSolver<Mat> bes(bcov);
  double top = bes.eigenvalues().maxCoeff();
  if (!(top > 0.0) || bes.eigenvalues().minCoeff() <= 1e-10 * top) {
    warn("whiten_then_separate: rank-deficient batch covariance, whitening degenerate");
    ok = false;
  }

  if (ok) {
    double a = static_cast<double>(st.count), b = static_cast<double>(batch.size());
    st.covariance = (a * st.covariance + b * bcov) / (a + b);
    st.mean = (a * st.mean + b * bmean) / (a + b);
    st.count += static_cast<long>(batch.size());
    Eigen::SelfAdjointEigenSolver<Mat> es(st.covariance);
    Vec isq = es.eigenvalues().cwiseMax(1e-12).cwiseSqrt().cwiseInverse();
    Mat target = es.eigenvectors() * isq.asDiagonal() * es.eigenvectors().transpose();
    st.whitening += st.whiten_rate * (target - st.whitening);
  }

  const Mat I = Mat::Identity(n, n);
  for (const Vec& x : batch) {
    Vec z = st.whitening * (st.center ? Vec(x - st.mean) : x);
    Vec y = st.separation * z;
    if (st.adaptive_sign) {
      for (int i = 0; i < n; ++i) {
        double y2 = y[i] * y[i];
        st.m2[i] += st.moment_rate * (y2 - st.m2[i]);
        st.m4[i] += st.moment_rate * (y2 * y2 - st.m4[i]);
        st.kurt_sign[i] = st.m4[i] / (st.m2[i] * st.m2[i]) - 3.0 >= 0.0 ? 1.0 : -1.0;
      }
    }
    Vec phi = score(y, st.kurt_sign);
    st.separation += st.separate_rate * (I - phi * y.transpose()) * st.separation;
  }
  return ok;
}

double amari_index(const Mat& unmixing, const Mat& mixing) {
  Mat Pm = (unmixing * mixing).cwiseAbs();
  require_shape(Pm.rows() == Pm.cols(), "amari_index: product must be square");
  const int n = static_cast<int>(Pm.rows());
  if (n < 2) return 0.0;
  double r = 0.0, c = 0.0;
  for (int i = 0; i < n; ++i) r += Pm.row(i).sum() / Pm.row(i).maxCoeff() - 1.0;
  for (int j = 0; j < n; ++j) c += Pm.col(j).sum() / Pm.col(j).maxCoeff() - 1.0;
  return (r + c) / (2.0 * n * (n - 1));
}

LearningConfig LearningConfig::from_ratio(double eta_W) {
  LearningConfig c;
  c.eta_W = eta_W;
  c.eta_P = 0.3 * eta_W;
  c.eta_Q = 0.1 * eta_W;
  c.eta_M = 0.1 * eta_W;
  return c;
}

void LearningConfig::validate() const {
  for (double r : {eta_W, eta_P, eta_Q, eta_M})
    if (!std::isfinite(r) || r < 0.0) throw InvalidConfig("learning rates must be finite and >= 0");
  if (!(anneal > 0.0) || anneal > 1.0) throw InvalidConfig("anneal must be in (0, 1]");
  if (all_zero()) return;
  if (!(eta_Q < eta_P && eta_P < eta_W))
    throw InvalidConfig("learning schedule requires eta_Q < eta_P < eta_W");
}

CsvTable LearningTrace::to_csv() const {
  CsvTable t({"step", "dW", "dP", "dQ", "dM", "qnw_dist", "amari"});
  for (const auto& r : rows)
    t.add_row({static_cast<double>(r.step), r.dW, r.dP, r.dQ, r.dM, r.qnw_dist, r.amari});
  return t;
}

LearningTrace run_learning_epoch(ReconNet& net, const std::vector<Vec>& inputs, const LearningConfig& cfg,
                                 Rng& rng, const EpochOptions& opt) {
  cfg.validate();
  net.validate();
  LearningTrace tr;
  if (cfg.all_zero()) return tr;
  const double f = std::pow(cfg.anneal, opt.epoch);
  const double eW = f * cfg.eta_W, eP = f * cfg.eta_P, eQ = f * cfg.eta_Q, eM = f * cfg.eta_M;
  const long every = std::max<long>(1, opt.trace_every);
  double acc[4] = {0, 0, 0, 0};
  Vec h_prev = Vec::Zero(net.h_dim());
  bool have_prev = false;
  long k = 0;
  for (const Vec& x : inputs) {
    Mat W0 = net.W;
    ica_update_W(net, x, eW);
    double dW = (net.W - W0).norm();

    Vec y = net.W * x;
    Vec x_ff = net.Q * (net.N * y);
    Vec g = net.P * x_ff;
    Vec s = scs_gate(y, g, net.theta, net.alpha);
    Vec h = net.N * s;
    Vec e = x - net.Q * h;

    Mat Q0 = net.Q;
    hebbian_update_Q(net, e, h, eQ, cfg.nonnegative_Q);
    double dQ = (net.Q - Q0).norm();

    Mat dPm = ica_update_P(net, g, x_ff, eP, cfg.p_mode, &rng, cfg.noise);
    double dP = dPm.norm();

    double dM = 0.0;
    if (have_prev && eM != 0.0) {
      Mat M0 = net.M;
      hebbian_update_M(net, h_prev, h - h_prev, eM, cfg.m_rule);
      dM = (net.M - M0).norm();
    }
    h_prev = h;
    have_prev = true;
    if (!net.W.allFinite() || !net.P.allFinite() || !net.Q.allFinite() || !net.M.allFinite())
      throw NetworkDiverged("learning produced non-finite weights");

    acc[0] += dW;
    acc[1] += dP;
    acc[2] += dQ;
    acc[3] += dM;
    tr.total_dW += dW;
    tr.total_dP += dP;
    tr.total_dQ += dQ;
    tr.total_dM += dM;
    ++k;
    if (k % every == 0 || k == static_cast<long>(inputs.size())) {
      double qnw = is_tuned(net, 0.0).distance;
      double am = opt.mixing ? amari_index(net.W, *opt.mixing) : std::nan("");
      tr.rows.push_back({opt.step_offset + k, acc[0], acc[1], acc[2], acc[3], qnw, am});
      acc[0] = acc[1] = acc[2] = acc[3] = 0.0;
    }
  }
  return tr;
}

}  // namespace chf
