#include "chf/rng.hpp"

#include <cmath>
#include <iostream>

namespace chf {

namespace {
WarningSink& sink() {
  static WarningSink s = [](const std::string& m) { std::cerr << "warning: " << m << "\n"; };
  return s;
}
}  // namespace

void set_warning_sink(WarningSink s) { sink() = std::move(s); }
void warn(const std::string& msg) {
  if (sink()) sink()(msg);
}

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
  std::uint64_t key = mix64(seed_ ^ mix64(stream_ + 0x632be59bd9b4e019ULL));
  return mix64(key + 0x9e3779b97f4a7c15ULL * (++counter_));
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

Vec Rng::normal_vec(int n, double sd) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = sd * normal();
  return v;
}

Mat Rng::normal_mat(int rows, int cols, double sd) {
  Mat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = sd * normal();
  return m;
}

Vec Rng::uniform_vec(int n, double lo, double hi) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
  return v;
}

Rng Rng::split(std::uint64_t tag) const {
  return Rng(seed_, mix64(stream_ * 0x100000001b3ULL + tag + 1));
}

Mat random_orthogonal(Rng& rng, int n) {
  Eigen::HouseholderQR<Mat> qr(rng.normal_mat(n, n));
  Mat q = qr.householderQ();
  Vec d = qr.matrixQR().diagonal();
  for (int i = 0; i < n; ++i)
    if (d[i] < 0) q.col(i) *= -1.0;
  return q;
}

Mat random_spd(Rng& rng, int n, double min_eig, double max_eig) {
  Mat u = random_orthogonal(rng, n);
  Vec l = rng.uniform_vec(n, min_eig, max_eig);
  return u * l.asDiagonal() * u.transpose();
}

}  // namespace chf
