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

#include "gpdp/gpr.h"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "gpdp/binary_io.h"
#include "gpdp/errors.h"
#include "gpdp/random.h"

namespace gpdp {
namespace {

constexpr double kFirstJitter = 1e-10;
constexpr double kLastJitter = 1e-4;
constexpr double kVarianceRoundOff = 1e-12;

Eigen::MatrixXd SquaredDistances(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd d2(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d2(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = (x.row(i) - x.row(j)).squaredNorm();
      d2(i, j) = v;
      d2(j, i) = v;
    }
  }
  return d2;
}

Eigen::MatrixXd SignalKernel(const Eigen::MatrixXd& d2, const KernelHyperparams& hp) {
  const double inv_two_l2 = 0.5 / (hp.length_scale() * hp.length_scale());
  return hp.signal_variance() * (-inv_two_l2 * d2.array()).exp().matrix();
}

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

// Cholesky of K_f + sigma_n^2 I. Jitter is only added after a failure, then
// escalated by decades from 1e-10 to 1e-4 of sigma_p^2.
Factorization Factorize(const Eigen::MatrixXd& signal_kernel, const KernelHyperparams& hp) {
  const Eigen::Index n = signal_kernel.rows();
  Eigen::MatrixXd k = signal_kernel;
  k.diagonal().array() += hp.noise_variance();
  Factorization f;
  f.llt.compute(k);
  if (f.llt.info() == Eigen::Success) return f;
  for (double rel = kFirstJitter; rel <= kLastJitter * 1.0000001; rel *= 10.0) {
    const double jitter = rel * hp.signal_variance();
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    f.llt.compute(kj);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jitter;
      return f;
    }
  }
  std::ostringstream msg;
  msg << "kernel matrix (H=" << n << ") is not positive definite even with jitter "
      << kLastJitter << " * sigma_p^2 (sigma_n=" << hp.noise_std()
      << ", sigma_p=" << hp.signal_std() << ", l=" << hp.length_scale() << ")";
  throw FitError(msg.str());
}

double LogDetFromLlt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

KernelHyperparams Clamp(KernelHyperparams hp, double lo, double hi) {
  hp.log_noise = std::clamp(hp.log_noise, lo, hi);
  hp.log_signal = std::clamp(hp.log_signal, lo, hi);
  hp.log_length = std::clamp(hp.log_length, lo, hi);
  return hp;
}

void CheckTrainingData(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions, int cap) {
  if (states.rows() != actions.rows()) {
    throw ContractError("state and action matrices have different row counts");
  }
  if (states.rows() < 2) throw ContractError("GPR needs at least two training rows");
  if (states.rows() > cap) {
    throw ContractError("GPR training set of " + std::to_string(states.rows()) +
                        " rows exceeds cap " + std::to_string(cap));
  }
  if (states.cols() == 0 || actions.cols() == 0) {
    throw ContractError("GPR needs non-empty state and action dimensions");
  }
  if (!states.allFinite() || !actions.allFinite()) {
    throw ContractError("GPR training data must be finite");
  }
}

}  // namespace

KernelHyperparams KernelHyperparams::FromValues(double noise_std, double signal_std,
                                                double length_scale) {
  if (!(noise_std > 0.0 && signal_std > 0.0 && length_scale > 0.0)) {
    throw ContractError("kernel hyperparameters must be strictly positive");
  }
  return {std::log(noise_std), std::log(signal_std), std::log(length_scale)};
}

double SeKernel(std::span<const double> s1, std::span<const double> s2,
                const KernelHyperparams& hp) {
  if (s1.size() != s2.size()) throw ContractError("kernel arguments differ in dimension");
  double d2 = 0.0;
  for (std::size_t k = 0; k < s1.size(); ++k) {
    const double diff = s1[k] - s2[k];
    d2 += diff * diff;
  }
  const double l = hp.length_scale();
  return hp.signal_variance() * std::exp(-d2 / (2.0 * l * l));
}

Standardization Standardization::Identity(int dim) {
  return {Eigen::RowVectorXd::Zero(dim), Eigen::RowVectorXd::Ones(dim)};
}

Standardization Standardization::FromColumns(const Eigen::MatrixXd& states) {
  Standardization s;
  const double n = static_cast<double>(states.rows());
  s.mean = states.colwise().mean();
  s.scale.resize(states.cols());
  for (Eigen::Index c = 0; c < states.cols(); ++c) {
    const double var = (states.col(c).array() - s.mean(c)).square().sum() / n;
    const double sd = std::sqrt(var);
    s.scale(c) = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardization::Apply(const Eigen::MatrixXd& states) const {
  return (states.rowwise() - mean).array().rowwise() / scale.array();
}

Eigen::RowVectorXd Standardization::Apply(std::span<const double> state) const {
  if (static_cast<Eigen::Index>(state.size()) != mean.size()) {
    throw ContractError("query state dimension does not match GPR training states");
  }
  Eigen::RowVectorXd out(mean.size());
  for (Eigen::Index c = 0; c < mean.size(); ++c) out(c) = (state[c] - mean(c)) / scale(c);
  return out;
}

NllEvaluation EvaluateNll(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                          const KernelHyperparams& hp) {
  const Eigen::Index n = states.rows();
  const double m = static_cast<double>(actions.cols());
  const Eigen::MatrixXd d2 = SquaredDistances(states);
  const Eigen::MatrixXd kf = SignalKernel(d2, hp);
  const Factorization f = Factorize(kf, hp);
  const Eigen::MatrixXd alpha = f.llt.solve(actions);

  NllEvaluation out;
  out.jitter = f.jitter;
  out.value = 0.5 * actions.cwiseProduct(alpha).sum() + 0.5 * m * LogDetFromLlt(f.llt) +
              0.5 * m * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  // dNLL/dtheta = 0.5 tr((m K^-1 - alpha alpha^T) dK/dtheta)
  const Eigen::MatrixXd kinv = f.llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd w = m * kinv - alpha * alpha.transpose();
  const double l2 = hp.length_scale() * hp.length_scale();
  out.gradient(0) = hp.noise_variance() * w.trace();
  out.gradient(1) = w.cwiseProduct(kf).sum();
  out.gradient(2) = 0.5 * (w.array() * kf.array() * d2.array()).sum() / l2;
  return out;
}

GprModel GprModel::Build(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                         const KernelHyperparams& hp, bool standardize, int cap) {
  CheckTrainingData(states, actions, cap);
  GprModel model;
  model.states_ = states;
  model.actions_ = actions;
  model.hp_ = hp;
  model.standardization_ = standardize ? Standardization::FromColumns(states)
                                       : Standardization::Identity(static_cast<int>(states.cols()));
  model.kernel_states_ = model.standardization_.Apply(states);
  const Eigen::MatrixXd kf = SignalKernel(SquaredDistances(model.kernel_states_), hp);
  const Factorization f = Factorize(kf, hp);
  model.cholesky_ = f.llt.matrixL().toDenseMatrix();
  model.alpha_ = f.llt.solve(actions);
  model.jitter_ = f.jitter;
  return model;
}

GprModel GprModel::FromParts(Eigen::MatrixXd states, Eigen::MatrixXd actions,
                             KernelHyperparams hp, Standardization standardization,
                             Eigen::MatrixXd cholesky, Eigen::MatrixXd alpha, double jitter) {
  const Eigen::Index n = states.rows();
  if (actions.rows() != n || cholesky.rows() != n || cholesky.cols() != n ||
      alpha.rows() != n || alpha.cols() != actions.cols() ||
      standardization.mean.size() != states.cols() ||
      standardization.scale.size() != states.cols()) {
    throw ContractError("inconsistent GPR parts");
  }
  GprModel model;
  model.states_ = std::move(states);
  model.actions_ = std::move(actions);
  model.hp_ = hp;
  model.standardization_ = std::move(standardization);
  model.kernel_states_ = model.standardization_.Apply(model.states_);
  model.cholesky_ = std::move(cholesky);
  model.alpha_ = std::move(alpha);
  model.jitter_ = jitter;
  return model;
}

GprPosterior GprModel::Posterior(std::span<const double> state) const {
  if (states_.rows() == 0) throw ContractError("GPR model is empty");
  const Eigen::RowVectorXd query = standardization_.Apply(state);
  const double inv_two_l2 = 0.5 / (hp_.length_scale() * hp_.length_scale());
  Eigen::VectorXd k_star(states_.rows());
  for (Eigen::Index i = 0; i < states_.rows(); ++i) {
    k_star(i) = hp_.signal_variance() *
                std::exp(-inv_two_l2 * (kernel_states_.row(i) - query).squaredNorm());
  }
  GprPosterior post;
  post.mean = k_star.transpose() * alpha_;
  const Eigen::VectorXd v =
      cholesky_.triangularView<Eigen::Lower>().solve(k_star);
  double variance = hp_.signal_variance() - v.squaredNorm();
  if (variance < 0.0 && variance >= -kVarianceRoundOff) variance = 0.0;
  post.variance = std::max(variance, 0.0);
  return post;
}

double GprModel::MinScaledDistance(std::span<const double> state) const {
  const Eigen::RowVectorXd query = standardization_.Apply(state);
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < kernel_states_.rows(); ++i) {
    best = std::min(best, (kernel_states_.row(i) - query).norm());
  }
  return best / hp_.length_scale();
}

double GprModel::NegativeLogLikelihood() const {
  const double m = static_cast<double>(actions_.cols());
  const double n = static_cast<double>(states_.rows());
  const double log_det = 2.0 * cholesky_.diagonal().array().log().sum();
  return 0.5 * actions_.cwiseProduct(alpha_).sum() + 0.5 * m * log_det +
         0.5 * m * n * std::log(2.0 * std::numbers::pi);
}

GprModel FitGpr(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                const KernelHyperparams& init, const GprFitOptions& options) {
  CheckTrainingData(states, actions, options.cap);
  if (options.restarts < 1 || options.iterations < 0 || !(options.learning_rate > 0.0)) {
    throw ContractError("invalid GPR fit options");
  }
  const Standardization standardization =
      options.standardize ? Standardization::FromColumns(states)
                          : Standardization::Identity(static_cast<int>(states.cols()));
  const Eigen::MatrixXd kernel_states = standardization.Apply(states);

  Rng rng(options.seed);
  std::uniform_real_distribution<double> perturb(-options.restart_spread, options.restart_spread);

  double best_value = std::numeric_limits<double>::infinity();
  KernelHyperparams best_hp = Clamp(init, options.log_lower, options.log_upper);
  std::string last_failure;

  for (int restart = 0; restart < options.restarts; ++restart) {
    KernelHyperparams hp = init;
    if (restart > 0) {
      hp.log_noise += perturb(rng);
      hp.log_signal += perturb(rng);
      hp.log_length += perturb(rng);
    }
    hp = Clamp(hp, options.log_lower, options.log_upper);

    // Adam on the three log-parameters.
    Eigen::Vector3d m1 = Eigen::Vector3d::Zero();
    Eigen::Vector3d m2 = Eigen::Vector3d::Zero();
    constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
    for (int it = 0; it <= options.iterations; ++it) {
      NllEvaluation eval;
      try {
        eval = EvaluateNll(kernel_states, actions, hp);
      } catch (const FitError& e) {
        last_failure = e.what();
        break;
      }
      if (!std::isfinite(eval.value) || !eval.gradient.allFinite()) break;
      if (eval.value < best_value) {
        best_value = eval.value;
        best_hp = hp;
      }
      if (it == options.iterations) break;
      m1 = kB1 * m1 + (1.0 - kB1) * eval.gradient;
      m2 = kB2 * m2 + (1.0 - kB2) * eval.gradient.cwiseProduct(eval.gradient);
      const double c1 = 1.0 - std::pow(kB1, it + 1);
      const double c2 = 1.0 - std::pow(kB2, it + 1);
      const Eigen::Vector3d step =
          options.learning_rate * (m1 / c1).array() / ((m2 / c2).array().sqrt() + kEps);
      hp.log_noise -= step(0);
      hp.log_signal -= step(1);
      hp.log_length -= step(2);
      hp = Clamp(hp, options.log_lower, options.log_upper);
    }
  }
  if (!std::isfinite(best_value)) {
    throw FitError("GPR fit failed at every restart: " + last_failure);
  }
  return GprModel::Build(states, actions, best_hp, options.standardize, options.cap);
}

std::string SerializeGpr(const GprModel& model) {
  nlohmann::json header;
  header["d"] = model.state_dim();
  header["m"] = model.action_dim();
  header["H"] = model.num_points();
  const auto& hp = model.hyperparams();
  header["omega"] = {{"log_noise", hp.log_noise},
                     {"log_signal", hp.log_signal},
                     {"log_length", hp.log_length},
                     {"sigma_n", hp.noise_std()},
                     {"sigma_p", hp.signal_std()},
                     {"length_scale", hp.length_scale()}};
  const auto& st = model.standardization();
  header["standardization"] = {
      {"mean", std::vector<double>(st.mean.data(), st.mean.data() + st.mean.size())},
      {"scale", std::vector<double>(st.scale.data(), st.scale.data() + st.scale.size())}};
  header["jitter"] = model.jitter();
  const std::string text = header.dump();

  std::ostringstream out(std::ios::binary);
  out.write("GPDP", 4);
  binary::WriteU32(out, kGprSnapshotVersion);
  binary::WriteU32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  binary::WriteMatrix(out, model.states());
  binary::WriteMatrix(out, model.actions());
  binary::WriteMatrix(out, model.cholesky());
  binary::WriteMatrix(out, model.alpha());
  return out.str();
}

GprModel DeserializeGpr(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "GPDP") {
    throw IoError("not a GPR snapshot (bad magic)");
  }
  const std::uint32_t version = binary::ReadU32(in);
  if (version != kGprSnapshotVersion) {
    throw IoError("unsupported GPR snapshot version " + std::to_string(version));
  }
  const std::uint32_t length = binary::ReadU32(in);
  std::string text(length, '\0');
  if (!in.read(text.data(), length)) throw IoError("truncated GPR snapshot header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    const int d = header.at("d").get<int>();
    const int m = header.at("m").get<int>();
    const int h = header.at("H").get<int>();
    if (d <= 0 || m <= 0 || h <= 0) throw IoError("GPR snapshot has empty dimensions");
    KernelHyperparams hp{header.at("omega").at("log_noise").get<double>(),
                         header.at("omega").at("log_signal").get<double>(),
                         header.at("omega").at("log_length").get<double>()};
    const auto mean = header.at("standardization").at("mean").get<std::vector<double>>();
    const auto scale = header.at("standardization").at("scale").get<std::vector<double>>();
    if (static_cast<int>(mean.size()) != d || static_cast<int>(scale.size()) != d) {
      throw IoError("GPR snapshot standardization has wrong dimension");
    }
    Standardization st{Eigen::Map<const Eigen::RowVectorXd>(mean.data(), d),
                       Eigen::Map<const Eigen::RowVectorXd>(scale.data(), d)};
    Eigen::MatrixXd s(h, d), a(h, m), l(h, h), alpha(h, m);
    binary::ReadMatrix(in, s);
    binary::ReadMatrix(in, a);
    binary::ReadMatrix(in, l);
    binary::ReadMatrix(in, alpha);
    return GprModel::FromParts(std::move(s), std::move(a), hp, std::move(st), std::move(l),
                               std::move(alpha), header.at("jitter").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed GPR snapshot header: ") + e.what());
  } catch (const ContractError& e) {
    throw IoError(std::string("inconsistent GPR snapshot: ") + e.what());
  }
}

void SaveGprSnapshot(const GprModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const std::string bytes = SerializeGpr(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

GprModel LoadGprSnapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return DeserializeGpr(buffer.str());
}

}  // namespace gpdp
