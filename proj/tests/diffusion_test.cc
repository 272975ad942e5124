// Copyright 2026 The GPDP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gpdp/diffusion.h"

#include <cmath>

#include <gtest/gtest.h>

#include "gpdp/errors.h"
#include "gpdp/nn.h"
#include "test_support.h"

namespace gpdp {
namespace {

// Noise model returning a fixed matrix (or zeros).
class StubNoise : public NoiseModel {
 public:
  StubNoise(int d, int m, Eigen::MatrixXd out = {}) : d_(d), m_(m), out_(std::move(out)) {}
  int state_dim() const override { return d_; }
  int action_dim() const override { return m_; }
  Eigen::MatrixXd PredictNoise(const Eigen::MatrixXd& states, const Eigen::MatrixXd&,
                               std::span<const int>) const override {
    if (out_.size() == 0) return Eigen::MatrixXd::Zero(states.rows(), m_);
    return out_;
  }

 private:
  int d_, m_;
  Eigen::MatrixXd out_;
};

GprPosterior Posterior(Eigen::RowVectorXd mean, double variance) {
  GprPosterior p;
  p.mean = std::move(mean);
  p.variance = variance;
  return p;
}

TEST(ScheduleTest, LinearSingleStep) {
  const DiffusionSchedule s = DiffusionSchedule::Linear(1, 0.1, 0.1);
  ASSERT_EQ(s.steps(), 1);
  EXPECT_NEAR(s.beta(1), 0.1, 1e-15);
  EXPECT_NEAR(s.alpha_bar(1), 0.9, 1e-15);
}

TEST(ScheduleTest, LinearRejectsBetasReachingOne) {
  // (0.1 + k/4 * 9.9) / 5 reaches 2.0 at the last step.
  EXPECT_THROW(DiffusionSchedule::Linear(5, 0.1, 10.0), ContractError);
}

TEST(ScheduleTest, VpSdeMatchesDiscretizedIntegral) {
  const int n = 5;
  const double bmin = 0.1, bmax = 10.0;
  const DiffusionSchedule s = DiffusionSchedule::VpSde(n, bmin, bmax);
  // Independent evaluation: integral of beta(t) = bmin + t (bmax - bmin)
  // over [(i-1)/N, i/N], scaled by 1/N.
  for (int i = 1; i <= n; ++i) {
    const double t0 = (i - 1.0) / n, t1 = static_cast<double>(i) / n;
    const double integral = bmin * (t1 - t0) + 0.5 * (bmax - bmin) * (t1 * t1 - t0 * t0);
    EXPECT_NEAR(s.beta(i), 1.0 - std::exp(-integral), 1e-15) << i;
  }
  // Pinned values for the default configuration.
  const double pinned[5] = {0.19587455833344036, 0.4588181933847971, 0.6357810204284766,
                            0.7548781879608826, 0.8350313791773686};
  for (int i = 1; i <= n; ++i) EXPECT_NEAR(s.beta(i), pinned[i - 1], 1e-15) << i;
}

TEST(ScheduleTest, AlphaBarIsProductAndDecreasing) {
  for (const DiffusionSchedule& s :
       {DiffusionSchedule::VpSde(5, 0.1, 10.0), DiffusionSchedule::VpSde(20, 0.1, 20.0),
        DiffusionSchedule::Linear(10, 0.1, 5.0)}) {
    double product = 1.0;
    for (int i = 1; i <= s.steps(); ++i) {
      EXPECT_GT(s.beta(i), 0.0);
      EXPECT_LT(s.beta(i), 1.0);
      product *= 1.0 - s.beta(i);
      EXPECT_NEAR(s.alpha_bar(i), product, 1e-15);
      if (i > 1) EXPECT_LT(s.alpha_bar(i), s.alpha_bar(i - 1));
    }
  }
}

TEST(ScheduleTest, RejectsInvalidParameters) {
  EXPECT_THROW(DiffusionSchedule::VpSde(0, 0.1, 10.0), ContractError);
  EXPECT_THROW(DiffusionSchedule::VpSde(5, 0.0, 10.0), ContractError);
  EXPECT_THROW(DiffusionSchedule::VpSde(5, 2.0, 1.0), ContractError);
  EXPECT_THROW(DiffusionSchedule::FromBetas({0.5, 1.0}), ContractError);
  const DiffusionSchedule s = DiffusionSchedule::VpSde(5, 0.1, 10.0);
  EXPECT_THROW(s.beta(0), ContractError);
  EXPECT_THROW(s.beta(6), ContractError);
}

TEST(EmbeddingTest, SinusoidalLayout) {
  const Eigen::RowVectorXd e = TimestepEmbedding(3);
  ASSERT_EQ(e.size(), kTimestepEmbeddingDim);
  EXPECT_NEAR(e(0), std::sin(3.0), 1e-15);
  EXPECT_NEAR(e(8), std::cos(3.0), 1e-15);
  EXPECT_NEAR(e(1), std::sin(3.0 * std::pow(10000.0, -1.0 / 8.0)), 1e-15);
  EXPECT_NE(TimestepEmbedding(1), TimestepEmbedding(2));
}

TEST(ForwardNoiseTest, NoNoiseLimitReturnsInput) {
  const DiffusionSchedule s = DiffusionSchedule::FromBetas({1e-300});
  ASSERT_EQ(s.alpha_bar(1), 1.0);
  const Eigen::Vector2d a(0.3, -0.7);
  EXPECT_EQ(ForwardNoise(a, 1, Eigen::Vector2d(5.0, -2.0), s), a);
}

TEST(ForwardNoiseTest, ZeroNoiseScalesAction) {
  const DiffusionSchedule s = MakeSchedule(5, 0.1, 10.0);
  const Eigen::Vector2d a(0.3, -0.7);
  for (int i = 1; i <= 5; ++i) {
    EXPECT_TRUE(ForwardNoise(a, i, Eigen::Vector2d::Zero(), s)
                    .isApprox(std::sqrt(s.alpha_bar(i)) * a, 1e-15));
  }
}

TEST(ForwardNoiseTest, MonteCarloVariance) {
  const DiffusionSchedule s = MakeSchedule(5, 0.1, 10.0);
  Rng rng(4);
  const int n = 100000;
  for (int i = 1; i <= 5; ++i) {
    const Eigen::MatrixXd eps = StandardNormal(n, 1, rng);
    const std::vector<int> steps(n, i);
    const Eigen::MatrixXd x = ForwardNoise(Eigen::MatrixXd::Zero(n, 1), steps, eps, s);
    const double mean = x.mean();
    const double var = (x.array() - mean).square().sum() / (n - 1);
    EXPECT_NEAR(var / (1.0 - s.alpha_bar(i)), 1.0, 0.02) << i;
  }
}

TEST(ForwardNoiseTest, RejectsStepOutOfRange) {
  const DiffusionSchedule s = MakeSchedule(5, 0.1, 10.0);
  EXPECT_THROW(ForwardNoise(Eigen::Vector2d::Zero(), 0, Eigen::Vector2d::Zero(), s),
               ContractError);
  EXPECT_THROW(ForwardNoise(Eigen::Vector2d::Zero(), 6, Eigen::Vector2d::Zero(), s),
               ContractError);
}

TEST(EpsLossTest, PerfectPredictorHasZeroLoss) {
  const DiffusionSchedule s = MakeSchedule(5, 0.1, 10.0);
  Rng rng(5);
  const Eigen::MatrixXd states = StandardNormal(8, 3, rng);
  const Eigen::MatrixXd actions = Eigen::MatrixXd::Random(8, 2);
  const Eigen::MatrixXd noise = StandardNormal(8, 2, rng);
  const std::vector<int> steps = {1, 2, 3, 4, 5, 1, 2, 3};
  const StubNoise oracle(3, 2, noise);
  EXPECT_EQ(EpsLossValue(oracle, states, actions, steps, noise, s), 0.0);
}

TEST(EpsLossTest, ZeroPredictorLossIsActionDimension) {
  const DiffusionSchedule s = MakeSchedule(5, 0.1, 10.0);
  Rng rng(6);
  const std::vector<int> hidden = {8, 8, 8};
  EpsNet net = EpsNet::Create(3, 2, hidden, rng);
  for (auto& layer : net.mutable_net().mutable_layers()) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  const Eigen::MatrixXd states = StandardNormal(10000, 3, rng);
  const Eigen::MatrixXd actions = Eigen::MatrixXd::Random(10000, 2);
  const EpsLossResult r = EpsLoss(net, states, actions, s, rng);
  EXPECT_NEAR(r.loss, 2.0, 0.05 * 2.0);
}

TEST(EpsLossTest, GradientMatchesFiniteDifferences) {
  const DiffusionSchedule s = MakeSchedule(5, 0.1, 10.0);
  Rng rng(7);
  const std::vector<int> hidden = {6, 6, 6};
  EpsNet net = EpsNet::Create(2, 2, hidden, rng);
  const Eigen::MatrixXd states = StandardNormal(4, 2, rng);
  const Eigen::MatrixXd actions = Eigen::MatrixXd::Random(4, 2);
  const Eigen::MatrixXd noise = StandardNormal(4, 2, rng);
  const std::vector<int> steps = {1, 3, 5, 2};
  const EpsLossResult r = EpsLoss(net, states, actions, steps, noise, s);
  const double h = 1e-6;
  double& w = net.mutable_net().mutable_layers()[1].weight(2, 3);
  const double saved = w;
  w = saved + h;
  const double up = EpsLossValue(net, states, actions, steps, noise, s);
  w = saved - h;
  const double down = EpsLossValue(net, states, actions, steps, noise, s);
  w = saved;
  EXPECT_NEAR(r.gradients[1].weight(2, 3), (up - down) / (2 * h), 1e-7);
}

// Two well separated action modes, state-independent.
Eigen::MatrixXd MixtureActions(int n, Rng& rng) {
  Eigen::MatrixXd a(n, 2);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (int i = 0; i < n; ++i) {
    const double c = coin(rng) ? 0.5 : -0.5;
    a(i, 0) = c + jitter(rng);
    a(i, 1) = c + jitter(rng);
  }
  return a;
}

class MixtureTraining : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    Rng rng(2024);
    const std::vector<int> hidden = {32, 32, 32};
    net_ = new EpsNet(EpsNet::Create(1, 2, hidden, rng));
    AdamOptions opts;
    opts.learning_rate = 1e-3;
    AdamState adam(net_->net(), opts);
    const DiffusionSchedule s = MakeSchedule(5, 0.1, 10.0);
    const Eigen::MatrixXd data = MixtureActions(4096, rng);
    std::uniform_int_distribution<int> pick(0, 4095);
    for (int step = 0; step < 2000; ++step) {
      Eigen::MatrixXd batch(128, 2);
      for (int r = 0; r < 128; ++r) batch.row(r) = data.row(pick(rng));
      const EpsLossResult res = EpsLoss(*net_, Eigen::MatrixXd::Zero(128, 1), batch, s, rng);
      losses_.push_back(res.loss);
      AdamStep(net_->mutable_net(), res.gradients, adam);
    }
  }
  static void TearDownTestSuite() { delete net_; }
  static EpsNet* net_;
  static std::vector<double> losses_;
};
EpsNet* MixtureTraining::net_ = nullptr;
std::vector<double> MixtureTraining::losses_;

TEST_F(MixtureTraining, LossHalvesFromInitialMovingAverage) {
  auto window_mean = [](auto begin, auto end) {
    return std::accumulate(begin, end, 0.0) / static_cast<double>(end - begin);
  };
  const double first = window_mean(losses_.begin(), losses_.begin() + 50);
  const double last = window_mean(losses_.end() - 50, losses_.end());
  EXPECT_LE(last, 0.5 * first) << first << " -> " << last;
}

TEST_F(MixtureTraining, UnguidedSamplesCoverBothModes) {
  Rng rng(77);
  const Eigen::MatrixXd samples = SampleActions(*net_, Eigen::MatrixXd::Zero(10000, 1),
                                                MakeSchedule(5, 0.1, 10.0), {}, rng);
  int positive = 0;
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    // Nearest of (0.5, 0.5) and (-0.5, -0.5).
    if (samples(r, 0) + samples(r, 1) > 0.0) ++positive;
  }
  EXPECT_GE(positive, 2000);
  EXPECT_GE(10000 - positive, 2000);
}

TEST(GuidedMeanTest, ScalarArithmetic) {
  Eigen::VectorXd mu(1);
  mu << 1.0;
  const Eigen::VectorXd g = GuidedMean(mu, 0.1, Posterior(Eigen::RowVectorXd::Zero(1), 0.5));
  EXPECT_NEAR(g(0), 0.8, 1e-15);
}

TEST(GuidedMeanTest, MatchingMeanVanishes) {
  const Eigen::Vector2d mu(0.3, -0.4);
  const Eigen::VectorXd g = GuidedMean(mu, 0.6, Posterior(mu.transpose(), 0.2));
  EXPECT_EQ(g, Eigen::VectorXd(mu));
}

TEST(GuidedMeanTest, RejectsNonPositiveVariance) {
  const Eigen::Vector2d mu(0.3, -0.4);
  EXPECT_THROW(GuidedMean(mu, 0.1, Posterior(Eigen::RowVectorXd::Zero(2), 0.0)),
               ContractError);
  EXPECT_THROW(GuidedMean(mu, 0.1, Posterior(Eigen::RowVectorXd::Zero(2), -1.0)),
               ContractError);
}

TEST(GuidedMeanTest, EqualsScoreForm) {
  Rng rng(9);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 1 + trial % 3;
    const Eigen::VectorXd mu = StandardNormal(m, 1, rng);
    const Eigen::VectorXd mu_w = StandardNormal(m, 1, rng);
    const double beta = u(rng), var = u(rng);
    const Eigen::VectorXd a = GuidedMean(mu, beta, Posterior(mu_w.transpose(), var));
    const Eigen::VectorXd b =
        ScoreGuidedMean(mu, beta, mu_w, var * Eigen::MatrixXd::Identity(m, m));
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GuidedMeanTest, ContractsTowardGuidance) {
  Rng rng(10);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double var = u(rng);
    const double beta = var * u(rng) * 0.99;  // ratio in (0, 1)
    Eigen::VectorXd mu(1);
    mu << 3.0 * (u(rng) - 0.5);
    Eigen::RowVectorXd mu_w(1);
    mu_w << 3.0 * (u(rng) - 0.5);
    const Eigen::VectorXd g = GuidedMean(mu, beta, Posterior(mu_w, var));
    EXPECT_LT(std::abs(g(0) - mu_w(0)), std::abs(mu(0) - mu_w(0)) + 1e-15);
  }
}

TEST(ReverseStepTest, FinalStepIsDeterministicAndClipped) {
  const DiffusionSchedule s = DiffusionSchedule::FromBetas({0.3});
  const StubNoise zero(2, 2);
  Rng rng1(1), rng2(2);
  Eigen::MatrixXd a(1, 2);
  a << 0.5, 3.0;
  const Eigen::MatrixXd x = ReverseStep(zero, Eigen::MatrixXd::Zero(1, 2), a, 1, s, {}, rng1);
  const Eigen::MatrixXd y = ReverseStep(zero, Eigen::MatrixXd::Zero(1, 2), a, 1, s, {}, rng2);
  EXPECT_EQ(x, y);
  EXPECT_NEAR(x(0, 0), 0.5 / std::sqrt(0.7), 1e-15);
  EXPECT_EQ(x(0, 1), 1.0);
}

TEST(ReverseStepTest, DenoisingMeanFormula) {
  const DiffusionSchedule s = MakeSchedule(5, 0.1, 10.0);
  Eigen::MatrixXd eps(1, 2);
  eps << 0.2, -0.1;
  const StubNoise model(1, 2, eps);
  Eigen::MatrixXd a(1, 2);
  a << 0.4, 0.9;
  for (int i = 1; i <= 5; ++i) {
    const Eigen::MatrixXd mu = DenoisingMean(model, Eigen::MatrixXd::Zero(1, 1), a, i, s);
    const double b = s.beta(i), ab = s.alpha_bar(i);
    for (int c = 0; c < 2; ++c) {
      EXPECT_NEAR(mu(0, c), (a(0, c) - b / std::sqrt(1 - ab) * eps(0, c)) / std::sqrt(1 - b),
                  1e-15);
    }
  }
}

TEST(SampleTest, SingleStepClosedForm) {
  const DiffusionSchedule s = DiffusionSchedule::FromBetas({0.2});
  const StubNoise zero(3, 2);
  Rng rng(42), replay(42);
  const Eigen::VectorXd action = SampleAction(zero, Eigen::VectorXd::Zero(3), s, nullptr, rng);
  const Eigen::MatrixXd a_n = StandardNormal(1, 2, replay);
  for (int c = 0; c < 2; ++c) {
    EXPECT_EQ(action(c), std::clamp(a_n(0, c) / std::sqrt(0.8), -1.0, 1.0));
  }
}

TEST(SampleTest, FixedSeedIsBitIdentical) {
  Rng init(3);
  const std::vector<int> hidden = {8, 8, 8};
  const EpsNet net = EpsNet::Create(6, 2, hidden, init);
  const Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(6, -1, 1);
  const GprPosterior g = Posterior(Eigen::RowVector2d(0.1, 0.2), 0.3);
  Rng a(5), b(5);
  const DiffusionSchedule sched = MakeSchedule(5, 0.1, 10.0);
  EXPECT_EQ(SampleAction(net, s, sched, &g, a), SampleAction(net, s, sched, &g, b));
}

TEST(SampleTest, GuidanceAppliedAtEveryStep) {
  // With a zero noise model and tiny guidance variance the guided mean is
  // pulled hard to mu_omega at each step.
  const DiffusionSchedule sched = MakeSchedule(5, 0.1, 10.0);
  const StubNoise zero(2, 2);
  std::vector<GprPosterior> g = {Posterior(Eigen::RowVector2d(0.25, -0.5), 1e6)};
  Rng a(5), b(5);
  const Eigen::MatrixXd unguided = SampleActions(zero, Eigen::MatrixXd::Zero(3, 2), sched, {}, a);
  const Eigen::MatrixXd weak = SampleActions(zero, Eigen::MatrixXd::Zero(3, 2), sched, g, b);
  EXPECT_LT((unguided - weak).cwiseAbs().maxCoeff(), 1e-5);
}

}  // namespace
}  // namespace gpdp
