#include <gtest/gtest.h>

#include <cmath>

#include "chf/learning.hpp"

using namespace chf;

namespace {

struct QuietWarnings {
  std::vector<std::string> seen;
  QuietWarnings() {
    set_warning_sink([this](const std::string& m) { seen.push_back(m); });
  }
  ~QuietWarnings() { set_warning_sink(nullptr); }
};

Mat planted() { return (Mat(2, 2) << 1.0, 0.4, 0.3, 1.0).finished(); }

Vec sparse_sample(Rng& rng, const Mat& A, double p) {
  Vec c = Vec::Zero(2);
  for (int i = 0; i < 2; ++i)
    if (rng.uniform() < p) c[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (1.0 + 0.5 * rng.uniform());
  return A * c + 0.01 * rng.normal_vec(2);
}

ReconNet learner() {
  ReconNet net = ReconNet::make(0.5 * Mat::Identity(2, 2), Mat::Identity(2, 2));
  net.theta = 2.8;
  return net;
}

double train(ReconNet& net, std::uint64_t seed, bool noise, std::vector<double>* qnw = nullptr,
             std::vector<std::array<double, 3>>* changes = nullptr) {
  Rng data(seed, 1), learn(seed, 2);
  LearningConfig cfg = LearningConfig::from_ratio(0.01);
  Mat Q0 = net.Q;
  for (int ep = 0; ep < 25; ++ep) {
    std::vector<Vec> xs;
    for (int k = 0; k < 5000; ++k) xs.push_back(noise ? data.normal_vec(2, 0.6) : sparse_sample(data, planted(), 0.1));
    EpochOptions eo;
    eo.epoch = ep;
    eo.trace_every = 5000;
    auto tr = run_learning_epoch(net, xs, cfg, learn, eo);
    if (qnw) qnw->push_back(is_tuned(net, 0).distance);
    if (changes) changes->push_back({tr.total_dW, tr.total_dP, tr.total_dQ});
  }
  return (net.Q - Q0).norm();
}

}  // namespace

TEST(Score, ExtendedInfomaxSigns) {
  Vec y = (Vec(2) << 0.5, -2.0).finished();
  Vec k = (Vec(2) << 1.0, -1.0).finished();
  Vec s = score(y, k);
  EXPECT_DOUBLE_EQ(s[0], 0.5 + std::tanh(0.5));
  EXPECT_DOUBLE_EQ(s[1], -2.0 - std::tanh(-2.0));
}

TEST(IcaUpdateW, ZeroRateIsNoop) {
  ReconNet net = learner();
  Mat W0 = net.W;
  ica_update_W(net, Vec::Ones(2), 0.0);
  EXPECT_EQ(net.W, W0);
}

TEST(IcaUpdateW, GainOnlyKeepsDiagonalStructure) {
  ReconNet net = learner();
  ica_update_W(net, (Vec(2) << 1.0, -0.3).finished(), 0.1, IcaMode::GainOnly);
  EXPECT_EQ(net.W(0, 1), 0.0);
  EXPECT_EQ(net.W(1, 0), 0.0);
}

TEST(IcaUpdateP, ZeroRateIsNoop) {
  ReconNet net = learner();
  Mat P0 = net.P;
  Rng rng(1);
  Mat d = ica_update_P(net, Vec::Ones(2), Vec::Ones(2), 0.0, InverseMode::Noise, &rng);
  EXPECT_EQ(net.P, P0);
  EXPECT_EQ(d.norm(), 0.0);
}

TEST(IcaUpdateP, SeparatesTwoUniformSources) {
  Rng rng(12);
  Mat A;
  do {
    A = rng.normal_mat(2, 2);
  } while (A.jacobiSvd().singularValues()(0) / A.jacobiSvd().singularValues()(1) > 5.0);
  ReconNet net = ReconNet::make(Mat::Identity(2, 2), Mat::Identity(2, 2));
  Vec k = -Vec::Ones(2);  // uniform sources are sub-Gaussian
  for (int i = 0; i < 50000; ++i) {
    Vec x = A * rng.uniform_vec(2, -std::sqrt(3.0), std::sqrt(3.0));
    ica_update_P(net, net.P * x, x, 0.005, InverseMode::NaturalGradient, nullptr, {}, IcaMode::Full, &k);
  }
  EXPECT_LT(amari_index(net.P, A), 0.1);
}

TEST(IcaUpdateP, IndependentInputAtEquilibrium) {
  Rng rng(13);
  ReconNet net = ReconNet::make(Mat::Identity(2, 2), Mat::Identity(2, 2));
  Vec k = -Vec::Ones(2);
  auto draw = [&] { return Vec(rng.uniform_vec(2, -std::sqrt(3.0), std::sqrt(3.0))); };
  for (double eta : {0.002, 0.0002}) {
    for (int i = 0; i < 20000; ++i) {
      Vec x = draw();
      ica_update_P(net, net.P * x, x, eta, InverseMode::NaturalGradient, nullptr, {}, IcaMode::Full, &k);
    }
  }
  Mat mean = Mat::Zero(2, 2);
  double single = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    ReconNet probe = net;
    Vec x = draw();
    Mat d = ica_update_P(probe, probe.P * x, x, 1.0, InverseMode::NaturalGradient, nullptr, {}, IcaMode::Full, &k);
    mean += d / n;
    single += d.norm() / n;
  }
  EXPECT_LT(mean.norm(), 0.05 * single);
}

TEST(IcaUpdateP, SingularPFallsBackToNoise) {
  QuietWarnings q;
  ReconNet net = learner();
  net.P = Mat::Zero(2, 2);
  Rng rng(2);
  ica_update_P(net, Vec::Ones(2), Vec::Ones(2), 0.01, InverseMode::InverseTranspose, &rng);
  EXPECT_FALSE(q.seen.empty());
  EXPECT_GT(net.P.norm(), 0.0);
}

TEST(InverseTerm, NoiseEstimatesQNTranspose) {
  ReconNet net = learner();
  net.Q << 1.0, 0.5, -0.2, 2.0;
  Rng rng(3);
  NoiseModel nm{0.1, 20000};
  Mat est = inverse_term(net, InverseMode::Noise, &rng, nm);
  EXPECT_LT((est - (net.Q * net.N).transpose()).norm(), 0.05);
}

TEST(InverseTerm, ExactModes) {
  ReconNet net = learner();
  net.P << 2.0, 1.0, 0.0, 1.0;
  Mat inv = net.P.inverse();
  EXPECT_LT((inverse_term(net, InverseMode::InverseTranspose, nullptr, {}) - inv.transpose()).norm(), 1e-14);
  EXPECT_LT((inverse_term(net, InverseMode::InverseLiteral, nullptr, {}) - inv).norm(), 1e-14);
}

TEST(WhitenThenSeparate, WhiteInputKeepsOrthogonalWhitening) {
  Rng rng(4);
  IcaState st = IcaState::make(2);
  for (int b = 0; b < 20; ++b) {
    std::vector<Vec> batch;
    for (int i = 0; i < 500; ++i) batch.push_back(rng.normal_vec(2));
    EXPECT_TRUE(whiten_then_separate(st, batch));
  }
  Mat V = st.whitening;
  EXPECT_LT((V * V.transpose() - Mat::Identity(2, 2)).norm(), 0.05);
  EXPECT_LT((V * st.covariance * V.transpose() - Mat::Identity(2, 2)).norm(), 1e-3);
}

TEST(WhitenThenSeparate, RepeatedVectorWarns) {
  QuietWarnings q;
  IcaState st = IcaState::make(2);
  std::vector<Vec> batch(100, (Vec(2) << 1.0, 2.0).finished());
  EXPECT_FALSE(whiten_then_separate(st, batch));
  EXPECT_FALSE(q.seen.empty());
}

TEST(WhitenThenSeparate, DecorrelatesCorrelatedPairs) {
  Rng rng(5);
  IcaState st = IcaState::make(2);
  const double rho = 0.9;
  auto draw = [&] {
    double a = rng.normal(), b = rng.normal();
    return Vec((Vec(2) << a, rho * a + std::sqrt(1 - rho * rho) * b).finished());
  };
  for (int b = 0; b < 10; ++b) {
    std::vector<Vec> batch;
    for (int i = 0; i < 1000; ++i) batch.push_back(draw());
    whiten_then_separate(st, batch);
  }
  // fresh samples through the learned whitening
  double c01 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    Vec z = st.whitening * draw();
    c01 += z[0] * z[1] / n;
  }
  EXPECT_LT(std::abs(c01), 0.05);
}

TEST(WhitenThenSeparate, ThreeSourceBenchmark) {
  Rng rng(6);
  Mat A;
  do {
    A = rng.normal_mat(3, 3);
  } while (A.jacobiSvd().singularValues()(0) / A.jacobiSvd().singularValues()(2) > 10.0);
  IcaState st = IcaState::make(3, 0.01);
  for (int b = 0; b < 100; ++b) {
    std::vector<Vec> batch;
    for (int i = 0; i < 500; ++i) batch.push_back(A * rng.uniform_vec(3, -std::sqrt(3.0), std::sqrt(3.0)));
    whiten_then_separate(st, batch);
  }
  EXPECT_LT(amari_index(st.unmixing(), A), 0.1);
}

TEST(AmariIndex, PermutationIsZero) {
  Mat A = (Mat(2, 2) << 1, 2, 3, 4).finished();
  Mat Pm = (Mat(2, 2) << 0, 2, -0.5, 0).finished();
  EXPECT_NEAR(amari_index(Pm * A.inverse(), A), 0.0, 1e-12);
  EXPECT_GT(amari_index(Mat::Identity(2, 2), A), 0.1);
}

TEST(HebbianQ, ZeroErrorAndZeroRateAreFixedPoints) {
  ReconNet net = learner();
  Mat Q0 = net.Q;
  hebbian_update_Q(net, Vec::Zero(2), Vec::Ones(2), 0.1);
  EXPECT_EQ(net.Q, Q0);
  hebbian_update_Q(net, Vec::Ones(2), Vec::Ones(2), 0.0);
  EXPECT_EQ(net.Q, Q0);
}

TEST(HebbianQ, ScalarConvergence) {
  ReconNet net = ReconNet::make(Mat::Ones(1, 1), Mat::Zero(1, 1));
  Vec x = Vec::Ones(1), h = Vec::Ones(1);
  for (int i = 0; i < 2000; ++i) hebbian_update_Q(net, x - net.Q * h, h, 0.01);
  // closed form: Q_k = 1 - (1 - eta)^k
  EXPECT_NEAR(net.Q(0, 0), 1 - std::pow(0.99, 2000), 1e-12);
  EXPECT_LT(std::abs(1 - net.Q(0, 0)), 1e-8);
}

TEST(HebbianQ, DeltaRuleDescends) {
  Rng rng(7);
  ReconNet net = ReconNet::make(Mat::Identity(3, 3), rng.normal_mat(3, 3));
  Vec x = rng.normal_vec(3), h = rng.normal_vec(3);
  double before = (x - net.Q * h).squaredNorm();
  for (double eta : {0.1, 0.05, 0.025}) {
    ReconNet probe = net;
    hebbian_update_Q(probe, x - probe.Q * h, h, eta / h.squaredNorm());
    EXPECT_LT((x - probe.Q * h).squaredNorm(), before);
  }
}

TEST(HebbianQ, NonnegativeClamp) {
  ReconNet net = learner();
  hebbian_update_Q(net, (Vec(2) << -10, 0).finished(), Vec::Ones(2), 1.0, true);
  EXPECT_GE(net.Q.minCoeff(), 0.0);
}

TEST(HebbianM, StationaryHiddenState) {
  ReconNet net = learner();
  Mat M0 = net.M;
  hebbian_update_M(net, Vec::Ones(2), Vec::Zero(2), 0.1);
  EXPECT_EQ(net.M, M0);
  net.M << 0.2, 0, 0, 0.1;
  M0 = net.M;
  hebbian_update_M(net, Vec::Ones(2), Vec::Zero(2), 0.1, MRule::Raw);
  EXPECT_EQ(net.M, M0);
  hebbian_update_M(net, Vec::Ones(2), Vec::Ones(2), 0.0);
  EXPECT_EQ(net.M, M0);
}

TEST(HebbianM, LearnsOneStepPredictorOfSine) {
  ReconNet net = ReconNet::make(Mat::Ones(1, 1), Mat::Ones(1, 1));
  const double dt = 0.5;
  const int steps = 10000;
  double num = 0, den = 0;
  for (int k = 0; k < steps; ++k) {
    double h = std::sin(k * dt), hn = std::sin((k + 1) * dt);
    hebbian_update_M(net, Vec::Constant(1, h), Vec::Constant(1, hn - h), 0.001);
    num += (hn - h) * h;
    den += h * h;
  }
  double ls = num / den;  // least-squares increment coefficient on the same trace
  EXPECT_NEAR(net.M(0, 0), ls, 0.1 * std::abs(ls));
}

TEST(LearningConfig, RatioAndValidation) {
  auto c = LearningConfig::from_ratio(0.01);
  EXPECT_DOUBLE_EQ(c.eta_P, 0.003);
  EXPECT_DOUBLE_EQ(c.eta_Q, 0.001);
  EXPECT_NO_THROW(c.validate());
  c.eta_Q = 0.02;
  EXPECT_THROW(c.validate(), InvalidConfig);
  LearningConfig z;
  z.eta_W = z.eta_P = z.eta_Q = z.eta_M = 0;
  EXPECT_NO_THROW(z.validate());
}

TEST(LearningEpoch, ZeroRatesBitwiseUnchanged) {
  ReconNet net = learner(), before = net;
  LearningConfig z;
  z.eta_W = z.eta_P = z.eta_Q = z.eta_M = 0;
  Rng rng(8);
  std::vector<Vec> xs;
  for (int i = 0; i < 50; ++i) xs.push_back(rng.normal_vec(2));
  run_learning_epoch(net, xs, z, rng);
  EXPECT_EQ(net.W, before.W);
  EXPECT_EQ(net.P, before.P);
  EXPECT_EQ(net.Q, before.Q);
  EXPECT_EQ(net.M, before.M);
}

TEST(LearningEpoch, PlantedDictionaryTunesAndOrdersChanges) {
  ReconNet net = learner();
  std::vector<double> qnw;
  std::vector<std::array<double, 3>> ch;
  train(net, 1, false, &qnw, &ch);
  EXPECT_LT(qnw.back(), 0.05);
  EXPECT_LT((net.P - net.W).norm() / net.W.norm(), 0.1);
  EXPECT_LT(amari_index(net.W, planted()), 0.1);
  for (const auto& c : ch) {
    EXPECT_GT(c[0], c[1]);
    EXPECT_GT(c[1], c[2]);
  }
}

TEST(LearningEpoch, NoiseIsRejectedByGating) {
  ReconNet a = learner(), b = learner();
  double structured = train(a, 1, false);
  double noise = train(b, 1, true);
  EXPECT_LT(noise, 0.1 * structured);
}

TEST(LearningEpoch, NoiseInverseAgreesWithExactInverse) {
  ReconNet net = learner();
  Rng data(9), rng(10);
  LearningConfig cfg = LearningConfig::from_ratio(0.01);
  double cos_sum = 0;
  int count = 0;
  for (int ep = 0; ep < 10; ++ep) {
    std::vector<Vec> xs;
    for (int k = 0; k < 2000; ++k) xs.push_back(sparse_sample(data, planted(), 0.1));
    EpochOptions eo;
    eo.epoch = ep;
    eo.trace_every = 2000;
    run_learning_epoch(net, xs, cfg, rng, eo);
    for (int k = 0; k < 200; ++k) {
      Vec x = sparse_sample(data, planted(), 0.1);
      Vec x_ff = net.Q * net.N * net.W * x;
      Vec g = net.P * x_ff;
      ReconNet a = net, b = net;
      Mat dn = ica_update_P(a, g, x_ff, 1.0, InverseMode::Noise, &rng, cfg.noise);
      Mat de = ica_update_P(b, g, x_ff, 1.0, InverseMode::InverseTranspose, &rng);
      cos_sum += (dn.array() * de.array()).sum() / (dn.norm() * de.norm());
      ++count;
    }
  }
  EXPECT_GT(cos_sum / count, 0.8);
}
