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

#include "gpdp/nn.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "gpdp/binary_io.h"
#include "gpdp/errors.h"

namespace gpdp {
namespace {

// Beyond this tanh(softplus(x)) rounds to 1.
constexpr double kMishLinear = 20.0;

bool SameShape(const LayerGradient& g, const DenseLayer& layer) {
  return g.weight.rows() == layer.weight.rows() &&
         g.weight.cols() == layer.weight.cols() &&
         g.bias.size() == layer.bias.size();
}

void CheckGradientShapes(const MlpNet& net, const MlpGradients& grads) {
  if (grads.size() != net.layers().size()) {
    throw ContractError("gradient layer count does not match network");
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!SameShape(grads[k], net.layers()[k])) {
      throw ContractError("gradient shape mismatch at layer " + std::to_string(k));
    }
  }
}

}  // namespace

// tanh(softplus(x)) = n / (n + 2) with n = e^x (e^x + 2); one exp per call.
double Mish(double x) {
  if (x > kMishLinear) return x;
  const double e = std::exp(x);
  const double n = e * (e + 2.0);
  return x * n / (n + 2.0);
}

double MishDerivative(double x) {
  if (x > kMishLinear) return 1.0;
  const double e = std::exp(x);
  const double n = e * (e + 2.0);
  const double d = n + 2.0;
  // t + x (1 - t^2) sigmoid(x), with 1 - t^2 = 4 (n + 1) / d^2.
  return n / d + x * (4.0 * (n + 1.0) / (d * d)) * (e / (1.0 + e));
}

MlpNet MlpNet::Create(int input_size, std::span<const int> hidden_sizes,
                      int output_size, Rng& rng) {
  if (input_size <= 0 || output_size <= 0) {
    throw ContractError("network widths must be positive");
  }
  std::vector<DenseLayer> layers;
  int fan_in = input_size;
  auto add_layer = [&](int fan_out, Activation activation) {
    if (fan_out <= 0) throw ContractError("network widths must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(fan_out, fan_in);
    layer.bias.resize(fan_out);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = dist(rng);
    }
    for (int r = 0; r < fan_out; ++r) layer.bias(r) = dist(rng);
    layer.activation = activation;
    layers.push_back(std::move(layer));
    fan_in = fan_out;
  };
  for (int width : hidden_sizes) add_layer(width, Activation::kMish);
  add_layer(output_size, Activation::kIdentity);

  MlpNet net;
  net.layers_ = std::move(layers);
  return net;
}

MlpNet MlpNet::FromLayers(std::vector<DenseLayer> layers) {
  if (layers.empty()) throw ContractError("network needs at least one layer");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& layer = layers[k];
    if (layer.weight.rows() != layer.bias.size() || layer.weight.rows() == 0 ||
        layer.weight.cols() == 0) {
      throw ContractError("layer " + std::to_string(k) + " has inconsistent shape");
    }
    if (k > 0 && layers[k - 1].weight.rows() != layer.weight.cols()) {
      throw ContractError("layer " + std::to_string(k) +
                          " input width does not match previous output");
    }
  }
  MlpNet net;
  net.layers_ = std::move(layers);
  if (!net.AllFinite()) throw ContractError("network parameters must be finite");
  return net;
}

int MlpNet::input_size() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int MlpNet::output_size() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

std::size_t MlpNet::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers_) {
    count += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return count;
}

void MlpNet::CheckInput(const Eigen::MatrixXd& x) const {
  if (layers_.empty()) throw ContractError("network has no layers");
  if (x.cols() != input_size()) {
    throw ContractError("input width " + std::to_string(x.cols()) +
                        " does not match network input " +
                        std::to_string(input_size()));
  }
  if (!x.allFinite()) throw ContractError("network input must be finite");
}

Eigen::MatrixXd MlpNet::Forward(const Eigen::MatrixXd& x) const {
  CheckInput(x);
  Eigen::MatrixXd h = x;
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = h * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (layer.activation == Activation::kMish) z = z.unaryExpr([](double v) { return Mish(v); });
    h = std::move(z);
  }
  return h;
}

ForwardTrace MlpNet::ForwardWithTrace(const Eigen::MatrixXd& x) const {
  CheckInput(x);
  ForwardTrace trace;
  trace.inputs.reserve(layers_.size());
  trace.pre_activations.reserve(layers_.size());
  Eigen::MatrixXd h = x;
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = h * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    trace.inputs.push_back(std::move(h));
    h = layer.activation == Activation::kMish ? Eigen::MatrixXd(z.unaryExpr([](double v) { return Mish(v); })) : z;
    trace.pre_activations.push_back(std::move(z));
  }
  trace.output = std::move(h);
  return trace;
}

MlpGradients MlpNet::Backward(const ForwardTrace& trace,
                              const Eigen::MatrixXd& upstream) const {
  if (trace.inputs.size() != layers_.size()) {
    throw ContractError("forward trace does not belong to this network");
  }
  if (upstream.rows() != trace.output.rows() || upstream.cols() != output_size()) {
    throw ContractError("upstream gradient shape does not match network output");
  }
  MlpGradients grads(layers_.size());
  Eigen::MatrixXd delta = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& layer = layers_[k];
    if (layer.activation == Activation::kMish) {
      delta = delta.cwiseProduct(trace.pre_activations[k].unaryExpr([](double v) { return MishDerivative(v); }));
    }
    grads[k].weight = delta.transpose() * trace.inputs[k];
    grads[k].bias = delta.colwise().sum().transpose();
    if (k > 0) delta = delta * layer.weight;
  }
  return grads;
}

MlpGradients MlpNet::ZeroGradients() const {
  MlpGradients grads(layers_.size());
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    grads[k].weight = Eigen::MatrixXd::Zero(layers_[k].weight.rows(), layers_[k].weight.cols());
    grads[k].bias = Eigen::VectorXd::Zero(layers_[k].bias.size());
  }
  return grads;
}

bool MlpNet::AllFinite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

AdamState::AdamState(const MlpNet& net, AdamOptions opts)
    : options(opts),
      first_moment(net.ZeroGradients()),
      second_moment(net.ZeroGradients()) {
  if (!(options.learning_rate > 0.0)) {
    throw ContractError("Adam learning rate must be positive");
  }
}

void AdamStep(MlpNet& net, const MlpGradients& grads, AdamState& state) {
  CheckGradientShapes(net, grads);
  CheckGradientShapes(net, state.first_moment);
  for (const auto& g : grads) {
    if (!g.weight.allFinite() || !g.bias.allFinite()) {
      throw NonFiniteError("Adam step rejected non-finite gradient");
    }
  }
  const auto& opt = state.options;
  ++state.step;
  const double correction1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
    v = opt.beta2 * v + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
    param.array() -= opt.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + opt.epsilon);
  };
  auto& layers = net.mutable_layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    update(layers[k].weight, grads[k].weight, state.first_moment[k].weight,
           state.second_moment[k].weight);
    update(layers[k].bias, grads[k].bias, state.first_moment[k].bias,
           state.second_moment[k].bias);
  }
}

void SoftUpdate(MlpNet& target, const MlpNet& source, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ContractError("soft update rate must lie in (0, 1]");
  }
  if (target.layers().size() != source.layers().size()) {
    throw ContractError("soft update between networks of different depth");
  }
  auto& dst = target.mutable_layers();
  for (std::size_t k = 0; k < dst.size(); ++k) {
    const auto& src = source.layers()[k];
    if (dst[k].weight.rows() != src.weight.rows() || dst[k].weight.cols() != src.weight.cols()) {
      throw ContractError("soft update shape mismatch at layer " + std::to_string(k));
    }
    if (rate == 1.0) {
      dst[k].weight = src.weight;
      dst[k].bias = src.bias;
    } else {
      dst[k].weight = rate * src.weight + (1.0 - rate) * dst[k].weight;
      dst[k].bias = rate * src.bias + (1.0 - rate) * dst[k].bias;
    }
  }
}

void WriteCheckpoint(const MlpNet& net, std::ostream& out) {
  out.write("GPDP", 4);
  binary::WriteU32(out, kCheckpointVersion);
  binary::WriteU32(out, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& layer : net.layers()) {
    binary::WriteU32(out, static_cast<std::uint32_t>(layer.weight.rows()));
    binary::WriteU32(out, static_cast<std::uint32_t>(layer.weight.cols()));
    binary::WriteMatrix(out, layer.weight);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) binary::WriteF64(out, layer.bias(r));
  }
  if (!out) throw IoError("failed writing network checkpoint");
}

MlpNet ReadCheckpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "GPDP") {
    throw IoError("not a GPDP checkpoint (bad magic)");
  }
  const std::uint32_t version = binary::ReadU32(in);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = binary::ReadU32(in);
  if (count == 0 || count > 1024) throw IoError("implausible checkpoint layer count");
  std::vector<DenseLayer> layers(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t rows = binary::ReadU32(in);
    const std::uint32_t cols = binary::ReadU32(in);
    if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20)) {
      throw IoError("implausible checkpoint layer shape");
    }
    layers[k].weight.resize(rows, cols);
    layers[k].bias.resize(rows);
    binary::ReadMatrix(in, layers[k].weight);
    for (std::uint32_t r = 0; r < rows; ++r) layers[k].bias(r) = binary::ReadF64(in);
    layers[k].activation = k + 1 == count ? Activation::kIdentity : Activation::kMish;
  }
  try {
    return MlpNet::FromLayers(std::move(layers));
  } catch (const ContractError& e) {
    throw IoError(std::string("corrupt checkpoint: ") + e.what());
  }
}

void SaveCheckpoint(const MlpNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  WriteCheckpoint(net, out);
}

MlpNet LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return ReadCheckpoint(in);
}

}  // namespace gpdp
