#include "chf/deconv.hpp"

#include <cmath>

namespace chf {

DeconvUnit DeconvUnit::make(const Mat& U, const Vec& lambda, int depth) {
  require_shape(U.rows() == U.cols() && U.rows() == lambda.size(), "DeconvUnit shapes");
  for (int i = 0; i < lambda.size(); ++i)
    if (!(lambda[i] > 0.0)) throw NotPositiveDefinite("delay-line rates must be > 0");
  if ((U * U.transpose() - Mat::Identity(U.rows(), U.rows())).norm() > 1e-8)
    throw InvalidConfig("U must be orthogonal");
  if (depth < 2) throw InvalidConfig("delay depth must be >= 2");
  DeconvUnit d;
  d.U = U;
  d.lambda = lambda;
  d.depth = depth;
  d.buffers.assign(static_cast<std::size_t>(lambda.size()), {});
  return d;
}

void DeconvUnit::reset() {
  for (auto& b : buffers) b.clear();
}

DeconvUnit diagonalize(const Mat& W, const Mat& Q, int depth) {
  Mat WQ = W * Q;
  require_shape(WQ.rows() == WQ.cols(), "WQ must be square");
  double asym = (WQ - WQ.transpose()).norm();
  if (asym > 1e-12 * std::max(1.0, WQ.norm())) {
    warn("diagonalize: WQ asymmetric (|WQ - WQ^T| = " + format_double(asym) + "), symmetrizing");
    WQ = 0.5 * (WQ + WQ.transpose());
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(WQ);
  if (es.info() != Eigen::Success) throw NotPositiveDefinite("eigen-decomposition failed");
  if (es.eigenvalues().minCoeff() <= 0.0) throw NotPositiveDefinite("WQ is not positive definite");
  DeconvUnit d = DeconvUnit::make(es.eigenvectors(), es.eigenvalues(), depth);
  d.asymmetry = asym;
  return d;
}

Mat convolve(const DeconvUnit& unit, const Mat& xi, double dt) {
  require_shape(xi.cols() == unit.dim(), "convolve: component count");
  if (!(dt > 0.0)) throw InvalidConfig("convolve: dt must be > 0");
  Mat chi = Mat::Zero(xi.rows(), xi.cols());
  for (int c = 0; c < xi.cols(); ++c) {
    double a = std::exp(-unit.lambda[c] * dt);
    for (int k = 1; k < xi.rows(); ++k)
      chi(k, c) = a * chi(k - 1, c) + 0.5 * dt * (a * xi(k - 1, c) + xi(k, c));
  }
  return chi;
}

Vec deconvolve_sample(DeconvUnit& unit, const Vec& chi, double dt) {
  require_shape(chi.size() == unit.dim(), "deconvolve: component count");
  bool ready = true;
  for (int c = 0; c < unit.dim(); ++c) {
    auto& b = unit.buffers[static_cast<std::size_t>(c)];
    b.push_front(chi[c]);
    if (static_cast<int>(b.size()) > unit.depth) b.pop_back();
    if (b.size() < 2) ready = false;
  }
  if (!ready) throw NeedMoreSamples("delay line holds fewer than 2 samples");
  Vec out(unit.dim());
  for (int c = 0; c < unit.dim(); ++c) {
    const auto& b = unit.buffers[static_cast<std::size_t>(c)];
    out[c] = (b[0] - b[1]) / dt + unit.lambda[c] * b[0];
  }
  return out;
}

DeconvResult deconvolve(DeconvUnit& unit, const Mat& chi, double dt) {
  if (!(dt > 0.0)) throw InvalidConfig("deconvolve: dt must be > 0");
  unit.reset();
  DeconvResult r;
  r.xi = Mat::Zero(std::max<Eigen::Index>(0, chi.rows() - 1), chi.cols());
  for (int k = 0; k < chi.rows(); ++k) {
    Vec row = chi.row(k).transpose();
    try {
      Vec est = deconvolve_sample(unit, row, dt);
      r.xi.row(k - 1) = est.transpose();
    } catch (const NeedMoreSamples&) {
      if (k > 0) throw;
    }
  }
  if (chi.rows() < 2) throw NeedMoreSamples("deconvolve needs at least 2 samples");
  for (int c = 0; c < unit.dim(); ++c) {
    r.taps_used.push_back(2);
    r.time_constant.push_back(1.0 / unit.lambda[c]);
  }
  return r;
}

MixedCoordinates mix_coordinates(const DeconvUnit& unit, const Vec& h, const Mat& W, const Vec& x) {
  require_shape(h.size() == unit.dim() && W.rows() == unit.dim() && W.cols() == x.size(),
                "mix_coordinates shapes");
  return {unit.U.transpose() * h, unit.U.transpose() * (W * x)};
}

Vec unmix(const DeconvUnit& unit, const Vec& chi) {
  require_shape(chi.size() == unit.dim(), "unmix shape");
  return unit.U * chi;
}

CsvTable signal_table(const Mat& sig, double dt, const std::string& prefix) {
  std::vector<std::string> h{"t"};
  for (auto& s : indexed_names(prefix, static_cast<int>(sig.cols()))) h.push_back(s);
  CsvTable t(h);
  for (int k = 0; k < sig.rows(); ++k) {
    std::vector<double> r{k * dt};
    for (int c = 0; c < sig.cols(); ++c) r.push_back(sig(k, c));
    t.add_row(r);
  }
  return t;
}

Mat signal_from_csv(const NumericCsv& csv, double* dt_out) {
  if (csv.header.empty() || csv.header.front() != "t") throw IoError("signal csv must start with a t column");
  const int rows = static_cast<int>(csv.rows.size());
  const int cols = static_cast<int>(csv.header.size()) - 1;
  Mat m(rows, cols);
  for (int k = 0; k < rows; ++k)
    for (int c = 0; c < cols; ++c) m(k, c) = csv.rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(c + 1)];
  if (dt_out) {
    if (rows < 2) throw IoError("signal csv needs two rows to infer dt");
    *dt_out = csv.rows[1][0] - csv.rows[0][0];
  }
  return m;
}

}  // namespace chf
