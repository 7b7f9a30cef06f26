#pragma once

#include <deque>
#include <vector>

#include "chf/io.hpp"

namespace chf {

// Eigenbasis of WQ (columns of U) with one first-order delay line per
// component. WQ = U diag(lambda) U^T; decoupled coordinates are U^T h.
struct DeconvUnit {
  Mat U;
  Vec lambda;
  int depth = 8;
  double asymmetry = 0.0;  // |WQ - WQ^T|_F before symmetrization
  std::vector<std::deque<double>> buffers;

  static DeconvUnit make(const Mat& U, const Vec& lambda, int depth = 8);
  int dim() const { return static_cast<int>(lambda.size()); }
  void reset();
};

DeconvUnit diagonalize(const Mat& W, const Mat& Q, int depth = 8);

// Rows are samples at spacing dt, columns are components; chi(0) = 0.
Mat convolve(const DeconvUnit& unit, const Mat& xi, double dt);

// Streaming inverse for one sample; throws NeedMoreSamples until the
// delay line holds two samples.
Vec deconvolve_sample(DeconvUnit& unit, const Vec& chi, double dt);

struct DeconvResult {
  Mat xi;              // estimates for samples first_index..end
  int first_index = 1;
  std::vector<int> taps_used;        // delay-line taps read per component
  std::vector<double> time_constant; // 1 / lambda per component
};

DeconvResult deconvolve(DeconvUnit& unit, const Mat& chi, double dt);

struct MixedCoordinates {
  Vec chi;
  Vec xi;
};
MixedCoordinates mix_coordinates(const DeconvUnit& unit, const Vec& h, const Mat& W, const Vec& x);
Vec unmix(const DeconvUnit& unit, const Vec& chi);

// Signal CSV: t plus one column per component.
CsvTable signal_table(const Mat& sig, double dt, const std::string& prefix);
Mat signal_from_csv(const NumericCsv& csv, double* dt_out = nullptr);

}  // namespace chf
