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

#include "test_support.h"

#include <openssl/evp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace gpdp::testing {

Eigen::MatrixXd DenseKernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            const KernelHyperparams& hp) {
  const double sp2 = hp.signal_std() * hp.signal_std();
  const double l = hp.length_scale();
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double diff = a(i, c) - b(j, c);
        d2 += diff * diff;
      }
      k(i, j) = sp2 * std::exp(-d2 / (2.0 * l * l));
    }
  }
  return k;
}

GprPosterior ExplicitInversePosterior(const Eigen::MatrixXd& states,
                                      const Eigen::MatrixXd& actions,
                                      const KernelHyperparams& hp,
                                      const Eigen::RowVectorXd& query) {
  const Eigen::Index h = states.rows();
  const double sn2 = hp.noise_std() * hp.noise_std();
  const Eigen::MatrixXd k =
      DenseKernel(states, states, hp) + sn2 * Eigen::MatrixXd::Identity(h, h);
  const Eigen::MatrixXd k_inv = k.fullPivLu().inverse();
  const Eigen::MatrixXd k_star = DenseKernel(query, states, hp);  // 1 x H
  GprPosterior p;
  p.mean = k_star * k_inv * actions;
  p.variance = DenseKernel(query, query, hp)(0, 0) - (k_star * k_inv * k_star.transpose())(0, 0);
  return p;
}

double DenseNll(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                const KernelHyperparams& hp) {
  const Eigen::Index h = states.rows();
  const double sn2 = hp.noise_std() * hp.noise_std();
  const Eigen::MatrixXd k =
      DenseKernel(states, states, hp) + sn2 * Eigen::MatrixXd::Identity(h, h);
  const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues();
  const double log_det = eig.array().log().sum();
  const Eigen::MatrixXd k_inv = k.fullPivLu().inverse();
  double nll = 0.0;
  for (Eigen::Index c = 0; c < actions.cols(); ++c) {
    const Eigen::VectorXd y = actions.col(c);
    nll += 0.5 * y.dot(k_inv * y) + 0.5 * log_det +
           0.5 * static_cast<double>(h) * std::log(2.0 * M_PI);
  }
  return nll;
}

namespace {

double Objective(const MlpNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& upstream) {
  return net.Forward(x).cwiseProduct(upstream).sum();
}

}  // namespace

double MaxGradientRelativeError(const MlpNet& net, const Eigen::MatrixXd& x,
                                const Eigen::MatrixXd& upstream, double h, double floor) {
  const MlpGradients analytic = net.Backward(net.ForwardWithTrace(x), upstream);
  MlpNet probe = net;
  double worst = 0.0;
  auto check = [&](double& param, double grad) {
    const double saved = param;
    param = saved + h;
    const double up = Objective(probe, x, upstream);
    param = saved - h;
    const double down = Objective(probe, x, upstream);
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(grad), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(grad - numeric) / scale);
  };
  for (std::size_t k = 0; k < probe.layers().size(); ++k) {
    DenseLayer& layer = probe.mutable_layers()[k];
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        check(layer.weight(r, c), analytic[k].weight(r, c));
      }
      check(layer.bias(r), analytic[k].bias(r));
    }
  }
  return worst;
}

double TwoPointExpectile(double lo, double hi, double p_hi, double tau) {
  // g(v) = tau p_hi (hi - v) - (1 - tau)(1 - p_hi)(v - lo), decreasing in v.
  auto g = [&](double v) {
    return tau * p_hi * (hi - v) - (1.0 - tau) * (1.0 - p_hi) * (v - lo);
  };
  double a = lo, b = hi;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (a + b);
    if (g(mid) > 0.0) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string Sha256File(const std::string& path) {
  const std::string bytes = ReadFileBytes(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* kHex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::string MakeTempDir(const std::string& prefix) {
  namespace fs = std::filesystem;
  static std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const fs::path p = fs::temp_directory_path() / (prefix + "_" + std::to_string(rd()));
    if (fs::create_directory(p)) return p.string();
  }
  throw std::runtime_error("cannot create temp dir");
}

GprInstance RandomGprInstance(int max_points, int max_state_dim, int max_action_dim, Rng& rng) {
  std::uniform_int_distribution<int> points(2, max_points);
  std::uniform_int_distribution<int> sdim(1, max_state_dim);
  std::uniform_int_distribution<int> adim(1, max_action_dim);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> log_noise(std::log(0.05), std::log(0.5));
  std::uniform_real_distribution<double> log_signal(std::log(0.3), std::log(2.0));
  std::uniform_real_distribution<double> log_length(std::log(0.3), std::log(3.0));
  GprInstance inst;
  const int h = points(rng), d = sdim(rng), m = adim(rng);
  inst.states.resize(h, d);
  inst.actions.resize(h, m);
  for (int i = 0; i < h; ++i) {
    for (int c = 0; c < d; ++c) inst.states(i, c) = 2.0 * unit(rng);
    for (int c = 0; c < m; ++c) inst.actions(i, c) = unit(rng);
  }
  inst.hp.log_noise = log_noise(rng);
  inst.hp.log_signal = log_signal(rng);
  inst.hp.log_length = log_length(rng);
  return inst;
}

}  // namespace gpdp::testing
