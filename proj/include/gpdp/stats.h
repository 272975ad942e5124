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

#ifndef GPDP_STATS_H_
#define GPDP_STATS_H_

#include <span>

#include <Eigen/Core>

#include "gpdp/random.h"

namespace gpdp {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// One-sided Wilcoxon rank-sum (Mann-Whitney U) test of H1: `x` tends to be
// larger than `y`. Normal approximation with tie and continuity correction;
// `statistic` is U for `x`.
TestResult RankSumGreater(std::span<const double> x, std::span<const double> y);

// Two-sample energy distance between row samples, with a permutation
// p-value from `permutations` random relabelings.
TestResult EnergyDistanceTest(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                              int permutations, Rng& rng);

double Mean(std::span<const double> values);

}  // namespace gpdp

#endif  // GPDP_STATS_H_
