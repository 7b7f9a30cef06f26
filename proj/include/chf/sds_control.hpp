#pragma once

#include <string>
#include <vector>

#include "chf/io.hpp"
#include "chf/plant.hpp"

namespace chf {

// x -> (A_hat(x), a_hat(x)); evaluates as A_hat(x) xdot + a_hat(x).
struct AffineIdModel {
  MatField A_hat;
  VecField a_hat;

  static AffineIdModel constant(const Mat& A, const Vec& a);
  static AffineIdModel constant(const Mat& A);
  static AffineIdModel zero(int m, int n);
  // Wraps a plant's own inverse dynamics (the perfect model).
  static AffineIdModel exact(const Plant& plant);
  // s * plant's B(x) with zero offset.
  static AffineIdModel scaled_plant(const Plant& plant, double s);

  Vec operator()(const Vec& x, const Vec& xdot) const { return A_hat(x) * xdot + a_hat(x); }
};

struct SdsController {
  AffineIdModel phi_hat;  // feedback integrand
  AffineIdModel psi_hat;  // feedforward
  double gain = 1.0;
  Vec w;

  SdsController() = default;
  SdsController(AffineIdModel phi, AffineIdModel psi, double gain, int ctrl_dim);
};

// Psi(x,v) - Psi(x,xdot); the offset term cancels.
Vec feedforward(const SdsController& ctrl, const Vec& x, const Vec& xdot, const Vec& v);
// One explicit Euler step of w' = gain * A_phi(x)(v - xdot).
const Vec& feedback_step(SdsController& ctrl, const Vec& x, const Vec& xdot, const Vec& v, double dt);
Vec control_output(const SdsController& ctrl, const Vec& x, const Vec& xdot, const Vec& v);

// The subtraction rule: the integrand is the difference of the model
// evaluated at the desired and at the experienced momentum.
struct SubtractionPair {
  Vec desired;
  Vec experienced;
  Vec difference() const { return desired - experienced; }
};
SubtractionPair subtraction_rule(const AffineIdModel& model, const Vec& x, const Vec& xdot, const Vec& v);

struct FieldPair {
  std::string label;
  MatField X;
  MatField Y;
};

struct PdCheckReport {
  double min_eigenvalue_observed = 0.0;
  int sample_count = 0;
  std::vector<Vec> failed_points;
  std::vector<std::string> pairs_checked;
  std::vector<std::string> failed_pairs;
  double epsilon = 1e-6;
  bool verdict = false;
};

// lambda_min of the symmetric part of X^T Y.
double min_sym_eigenvalue(const Mat& X, const Mat& Y);

PdCheckReport check_uniform_pd(const std::vector<FieldPair>& pairs, const Box& domain, int samples,
                               double epsilon = 1e-6, std::uint64_t seed = 0);

// All pairs X^T Y with X, Y in {A, A_hat, B_hat}; A is the plant's B(x).
// The corollary adds B^T B_hat, which coincides with A^T B_hat here.
std::vector<FieldPair> theorem_pairs(const Plant& plant, const SdsController& ctrl);

double lyapunov_value(const Vec& e, const Mat& A, const Mat& A_hat);

struct TrackOptions {
  double T = 10.0;
  double dt = 1e-3;
  double blowup = 1e6;
  double noise_before_std = 0.0;  // added inside the gain, ahead of the integrator
  double noise_after_std = 0.0;   // added to the control output
  std::uint64_t noise_seed = 0;
  int record_every = 1;
};

struct TrajectoryRecord {
  std::vector<double> t;
  std::vector<Vec> x, xdot, u, w;
  std::vector<double> e_norm, L;
  double asymptotic_error = 0.0;  // max |e| over the final 10 %
  Vec final_x, final_w;

  CsvTable to_csv() const;
};

class TrackingDiverged : public ControllerDiverged {
 public:
  TrackingDiverged(const std::string& msg, double t) : ControllerDiverged(msg), time(t) {}
  double time;
};

TrajectoryRecord track_speed_field(const Plant& plant, const SdsController& ctrl, const SpeedField& v,
                                   const Vec& x0, const TrackOptions& opt);

struct ScheduleEntry {
  double t_start = 0.0;
  AffineIdModel phi_hat;
  AffineIdModel psi_hat;
  double gain = 1.0;
};

// The entry with the largest t_start <= t is active; entries must be
// sorted and the first must start at 0.
TrajectoryRecord time_varying_track(const Plant& plant, const SdsController& ctrl,
                                    const std::vector<ScheduleEntry>& schedule, const SpeedField& v,
                                    const Vec& x0, const TrackOptions& opt);

// Cycles through models every period seconds up to T.
std::vector<ScheduleEntry> alternating_schedule(const std::vector<ScheduleEntry>& models, double period,
                                                double T);

}  // namespace chf
