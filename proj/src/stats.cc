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

#include "gpdp/stats.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gpdp/errors.h"

namespace gpdp {

double Mean(std::span<const double> values) {
  if (values.empty()) throw ContractError("mean of an empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

TestResult RankSumGreater(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw ContractError("rank-sum test needs two non-empty samples");
  const std::size_t n1 = x.size();
  const std::size_t n2 = y.size();
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n1 + n2);
  for (double v : x) pooled.emplace_back(v, 0);
  for (double v : y) pooled.emplace_back(v, 1);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  double rank_sum_x = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    const double ties = static_cast<double>(j - i);
    tie_term += ties * ties * ties - ties;
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second == 0) rank_sum_x += avg_rank;
    }
    i = j;
  }
  const double a = static_cast<double>(n1);
  const double b = static_cast<double>(n2);
  const double n = a + b;
  TestResult r;
  r.statistic = rank_sum_x - a * (a + 1.0) / 2.0;
  const double mean_u = a * b / 2.0;
  const double var_u = a * b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var_u <= 0.0) {
    r.p_value = r.statistic > mean_u ? 0.0 : 1.0;
    return r;
  }
  const double z = (r.statistic - mean_u - 0.5) / std::sqrt(var_u);
  r.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  return r;
}

TestResult EnergyDistanceTest(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                              int permutations, Rng& rng) {
  if (x.rows() == 0 || y.rows() == 0 || x.cols() != y.cols()) {
    throw ContractError("energy test needs two non-empty samples of equal dimension");
  }
  const Eigen::Index nx = x.rows();
  const Eigen::Index n = nx + y.rows();
  Eigen::MatrixXd pooled(n, x.cols());
  pooled << x, y;
  Eigen::MatrixXd dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = (pooled.row(i) - pooled.row(j)).norm();
      dist(i, j) = v;
      dist(j, i) = v;
    }
  }
  // With z the indicator of the first group, every block sum follows from
  // D z: xx = z'Dz, xy = r'z - xx (r = row sums), yy = total - 2 r'z + xx.
  const Eigen::VectorXd row_sums = dist.rowwise().sum();
  const double total = row_sums.sum();
  const double a = static_cast<double>(nx);
  const double b = static_cast<double>(n - nx);
  Eigen::VectorXd z(n);
  auto statistic = [&](const std::vector<Eigen::Index>& order) {
    for (Eigen::Index i = 0; i < n; ++i) z(order[i]) = i < nx ? 1.0 : 0.0;
    const double xx = z.dot(dist * z);
    const double rz = row_sums.dot(z);
    const double xy = rz - xx;
    const double yy = total - 2.0 * rz + xx;
    return 2.0 * xy / (a * b) - xx / (a * a) - yy / (b * b);
  };
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  TestResult r;
  r.statistic = statistic(order);
  int at_least = 0;
  for (int p = 0; p < permutations; ++p) {
    std::shuffle(order.begin(), order.end(), rng);
    if (statistic(order) >= r.statistic) ++at_least;
  }
  r.p_value = (1.0 + at_least) / (1.0 + permutations);
  return r;
}

}  // namespace gpdp
