#pragma once

#include <optional>
#include <vector>

#include "chf/io.hpp"
#include "chf/recon_net.hpp"
#include "chf/rng.hpp"

namespace chf {

// Extended infomax score phi(y) = y + k tanh(y), k = +1 for
// super-Gaussian and -1 for sub-Gaussian components. The Hebbian
// nonlinearity of the gating update is f = -phi.
Vec score(const Vec& y, const Vec& k);
Vec score(const Vec& y);  // k = +1 everywhere

enum class IcaMode { Full, GainOnly };
enum class InverseMode { NaturalGradient, InverseTranspose, InverseLiteral, Noise };
enum class MRule { Residual, Raw };

struct NoiseModel {
  double std = 0.1;
  int samples = 8;
};

// W += eta (I - phi(y) y^T) W with y = W x. GainOnly keeps only the
// diagonal of the bracket.
void ica_update_W(ReconNet& net, const Vec& x, double eta, IcaMode mode = IcaMode::Full,
                  const Vec* k = nullptr);

// P += eta (f(s) x_hat^T + inverse term). Returns the applied increment.
Mat ica_update_P(ReconNet& net, const Vec& s, const Vec& x_hat, double eta,
                 InverseMode mode = InverseMode::Noise, Rng* rng = nullptr,
                 const NoiseModel& noise = {}, IcaMode ica = IcaMode::Full, const Vec* k = nullptr);

// The inverse term alone: P^-T, P^-1, (QN)^T by noise probing, or the
// natural-gradient form (handled in ica_update_P).
Mat inverse_term(const ReconNet& net, InverseMode mode, Rng* rng, const NoiseModel& noise);

void hebbian_update_Q(ReconNet& net, const Vec& e, const Vec& h, double eta, bool nonnegative = false);

// Residual: M += eta N (h_dot - M h) h^T. Raw: M += eta (N h_dot) h^T.
void hebbian_update_M(ReconNet& net, const Vec& h, const Vec& h_dot, double eta,
                      MRule rule = MRule::Residual);

struct IcaState {
  Mat whitening;
  Mat separation;
  Mat covariance;
  Vec mean;
  long count = 0;
  Vec m2, m4;             // running moments of the separated outputs
  Vec kurt_sign;          // +1 / -1 per output
  double whiten_rate = 1.0;
  double separate_rate = 0.01;
  double moment_rate = 0.01;
  bool adaptive_sign = true;
  bool center = false;

  static IcaState make(int dim, double separate_rate = 0.01);
  Mat unmixing() const { return separation * whitening; }
};

// Updates the covariance estimate and moves the whitening matrix toward
// its symmetric inverse square root, then runs natural-gradient
// separation over the whitened batch. Returns false when the batch
// covariance was rank deficient (whitening left unchanged).
bool whiten_then_separate(IcaState& state, const std::vector<Vec>& batch);

double amari_index(const Mat& unmixing, const Mat& mixing);

struct LearningConfig {
  double eta_W = 0.01;
  double eta_P = 0.003;
  double eta_Q = 0.001;
  double eta_M = 0.001;
  NoiseModel noise;
  InverseMode p_mode = InverseMode::Noise;
  MRule m_rule = MRule::Residual;
  double anneal = 0.8;   // rates scale by anneal^epoch
  bool nonnegative_Q = false;

  static LearningConfig from_ratio(double eta_W);  // 10 : 3 : 1 : 1
  void validate() const;
  bool all_zero() const { return eta_W == 0 && eta_P == 0 && eta_Q == 0 && eta_M == 0; }
};

struct LearningTraceRow {
  long step;
  double dW, dP, dQ, dM, qnw_dist, amari;
};

struct LearningTrace {
  std::vector<LearningTraceRow> rows;
  double total_dW = 0, total_dP = 0, total_dQ = 0, total_dM = 0;
  CsvTable to_csv() const;
};

struct EpochOptions {
  int epoch = 0;
  long trace_every = 1;
  long step_offset = 0;
  const Mat* mixing = nullptr;  // planted mixing for the Amari column
};

// Per sample: W update, feedforward reconstruction x_ff = Q N W x, gated
// code s, delta rule for Q, gating-matrix update driven by P x_ff, and the
// M rule on consecutive codes.
LearningTrace run_learning_epoch(ReconNet& net, const std::vector<Vec>& inputs, const LearningConfig& cfg,
                                 Rng& rng, const EpochOptions& opt = {});

}  // namespace chf
