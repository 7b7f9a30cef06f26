#pragma once

#include <functional>
#include <vector>

#include "chf/io.hpp"

namespace chf {

// Reconstruction network. x_hat = Q h is the top-down reconstruction,
// W carries the mismatch bottom-up, N maps the gated mismatch into the
// hidden layer, M is the recurrent/predictive matrix, P drives the gate
// and B_ctrl injects control.
//
// The mismatch is taken as e = x - x_hat. literal_sign switches the
// bottom-up term to W(x_hat - x) instead; with N = I that orientation is
// positive feedback, so it only makes sense together with a negated N.
struct ReconNet {
  Mat W, Q, N, M, P, B_ctrl;
  Vec h;
  double theta = 0.0;
  double alpha = 0.0;  // attenuation of closed gate components
  bool literal_sign = false;
  double blowup = 1e6;

  // N = I, M = 0, P = W, B_ctrl = I, h = 0.
  static ReconNet make(const Mat& W, const Mat& Q);
  int x_dim() const { return static_cast<int>(Q.rows()); }
  int h_dim() const { return static_cast<int>(Q.cols()); }
  void validate() const;
};

using InputSignal = std::function<Vec(double t)>;
using ControlField = std::function<Vec(const Vec& h)>;

// Rows are h(t_k), t_k = k dt, k = 0..steps. Starts from net.h.
Mat relax_simple(const ReconNet& net, const Vec& x, double dt, int steps);
Mat relax_simple(const ReconNet& net, const InputSignal& x, double dt, int steps);

// h(t) = exp(-WQ t) h0 + int_0^t exp(-WQ (t - s)) W x(s) ds by
// eigen-decomposition and composite Gauss-Legendre quadrature.
Vec convolution_oracle(const ReconNet& net, const InputSignal& x, double t, int panels = 64);
Vec convolution_oracle(const ReconNet& net, const Vec& x, double t, int panels = 64);

Vec scs_gate(const Vec& s, const Vec& gate, double theta, double alpha = 0.0);

// One explicit step; returns the new h and stores it in net.h.
const Vec& step_extended(ReconNet& net, const Vec& x, const Vec& v, double dt);
const Vec& step_extended(ReconNet& net, const Vec& x, const ControlField& v, double dt);

// Gated bottom-up signal s for the current h (before N).
Vec bu_signal(const ReconNet& net, const Vec& x);

struct TuningReport {
  bool tuned = false;
  double distance = 0.0;
};
TuningReport is_tuned(const ReconNet& net, double tol);

// Solves 0 = N W e(h) + M h + B_ctrl v for h with the gate fully open.
Vec equilibrium_linear(const ReconNet& net, const Vec& x, const Vec& v);

struct RelaxOptions {
  double dt = 0.05;
  double tol = 1e-3;
  int cap = 10000;
  bool reset_h = true;  // start every presentation from h = 0
  ControlField v;       // zero control when empty
};

struct RelaxationRecord {
  int steps_to_tolerance = 0;
  bool converged = false;
  std::vector<double> error_trace;        // |e| before each update
  std::vector<double> bu_activity_trace;  // |s|_1 before each update
  std::vector<Vec> unit_trace;            // |s_i| before each update
  Vec per_unit_activity;                  // final |s|
  Vec per_unit_peak;                      // max over the run of |s_i|

  CsvTable to_csv() const;
};

RelaxationRecord relaxation_time(ReconNet& net, const Vec& x, const RelaxOptions& opt);

}  // namespace chf
