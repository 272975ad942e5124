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

#ifndef GPDP_NN_H_
#define GPDP_NN_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gpdp/random.h"

namespace gpdp {

// x * tanh(softplus(x)), overflow-safe.
double Mish(double x);
double MishDerivative(double x);

enum class Activation : std::uint8_t { kIdentity, kMish };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::kIdentity;
};

struct LayerGradient {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

using MlpGradients = std::vector<LayerGradient>;

// Intermediate values kept by ForwardWithTrace for the backward pass.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> inputs;           // input to each layer
  std::vector<Eigen::MatrixXd> pre_activations;  // batch x out per layer
  Eigen::MatrixXd output;
};

// Dense perceptron. Hidden layers use Mish, the output layer is affine.
// Batches are laid out one sample per row.
class MlpNet {
 public:
  MlpNet() = default;

  // Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static MlpNet Create(int input_size, std::span<const int> hidden_sizes,
                       int output_size, Rng& rng);

  // Validates that shapes compose and every parameter is finite.
  static MlpNet FromLayers(std::vector<DenseLayer> layers);

  int input_size() const;
  int output_size() const;
  int num_layers() const { return static_cast<int>(layers_.size()); }
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  Eigen::MatrixXd Forward(const Eigen::MatrixXd& x) const;
  ForwardTrace ForwardWithTrace(const Eigen::MatrixXd& x) const;

  // Reverse-mode gradients of sum(upstream .* output) w.r.t. parameters.
  MlpGradients Backward(const ForwardTrace& trace,
                        const Eigen::MatrixXd& upstream) const;

  MlpGradients ZeroGradients() const;
  bool AllFinite() const;

 private:
  void CheckInput(const Eigen::MatrixXd& x) const;

  std::vector<DenseLayer> layers_;
};

struct AdamOptions {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(const MlpNet& net, AdamOptions options);

  AdamOptions options;
  MlpGradients first_moment;
  MlpGradients second_moment;
  long step = 0;
};

// Bias-corrected Adam update. Throws ContractError on non-finite or
// mis-shaped gradients; the net and state are left untouched in that case.
void AdamStep(MlpNet& net, const MlpGradients& grads, AdamState& state);

// target <- rate * source + (1 - rate) * target, rate in (0, 1].
void SoftUpdate(MlpNet& target, const MlpNet& source, double rate);

// Checkpoint: "GPDP", u32 version, u32 layer count, then per layer
// u32 rows, u32 cols, row-major f64 weights, f64 biases (little-endian).
inline constexpr std::uint32_t kCheckpointVersion = 1;

void WriteCheckpoint(const MlpNet& net, std::ostream& out);
MlpNet ReadCheckpoint(std::istream& in);
void SaveCheckpoint(const MlpNet& net, const std::string& path);
MlpNet LoadCheckpoint(const std::string& path);

}  // namespace gpdp

#endif  // GPDP_NN_H_
