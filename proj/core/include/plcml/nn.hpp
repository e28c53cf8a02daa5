#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plcml/tensor.hpp"

namespace plcml {

enum class Activation { Identity, Relu, Tanh, Sigmoid, Softmax };
enum class LossKind { Mse, CrossEntropy };
enum class Optimizer { Sgd, Adam };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
  Tensor2 weights;  // out x in
  std::vector<double> biases;
  Activation activation = Activation::Identity;
};

struct MlpModel {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weights.cols; }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weights.rows; }
  std::size_t parameter_count() const;
  // Checks dimension chaining and that Softmax appears only on the final layer.
  void validate() const;
};

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
// dims has L+1 entries, acts has L.
MlpModel make_mlp(const std::vector<std::size_t>& dims,
                  const std::vector<Activation>& acts, std::uint64_t seed);

struct LabeledDataset {
  Tensor2 inputs;
  Tensor2 targets;
  std::size_t size() const { return inputs.rows; }
};

struct TrainConfig {
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  double dropout_rate = 0.0;  // applied to the model input (inverted dropout)
  std::uint64_t seed = 1;
  LossKind loss = LossKind::Mse;
};

// Optional multiplicative masks on the per-layer activations: masks[l]
// multiplies activation l (l = 0 is the input) before it feeds layer l+1.
// Empty tensors mean "no mask at this position".
using DropoutMasks = std::vector<Tensor2>;

struct ForwardPass {
  std::vector<Tensor2> activations;  // size L+1, activations[0] = (masked) input
  const Tensor2& output() const { return activations.back(); }
};

ForwardPass forward(const MlpModel& model, const Tensor2& batch,
                    const DropoutMasks* masks = nullptr);

// Mean over batch rows; MSE sums squared error over output dims per row,
// cross-entropy expects one-hot target rows and a Softmax head, and clamps
// predictions to [1e-12, 1] inside the log.
double loss_value(const Tensor2& predictions, const Tensor2& targets, LossKind kind);

struct Gradients {
  std::vector<Tensor2> weights;
  std::vector<std::vector<double>> biases;
  Tensor2 input;  // dL/d(input batch)
};

Gradients backward(const MlpModel& model, const ForwardPass& pass,
                   const Tensor2& targets, LossKind kind,
                   const DropoutMasks* masks = nullptr);

// Backpropagates an externally supplied dL/d(output) through the network.
// Used by composite graphs (autoencoder channel, adversarial generator).
Gradients backward_signal(const MlpModel& model, const ForwardPass& pass,
                          const Tensor2& output_grad,
                          const DropoutMasks* masks = nullptr);

struct AdamState {
  std::vector<Tensor2> m_w, v_w;
  std::vector<std::vector<double>> m_b, v_b;
  long long step = 0;
  void init(const MlpModel& model);
  bool initialized() const { return !m_w.empty(); }
};

// In-place parameter update.
void apply_sgd(MlpModel& model, const Gradients& g, double lr);
void apply_adam(MlpModel& model, const Gradients& g, AdamState& state,
                const TrainConfig& cfg);

struct TrainHistory {
  std::vector<double> epoch_loss;
};

// Mini-batch training with per-epoch shuffling. Throws std::runtime_error if
// the loss turns non-finite. Bit-identical for identical seeds.
TrainHistory train(MlpModel& model, const LabeledDataset& data, const TrainConfig& cfg);

// Central-difference check of backward() over every parameter. Returns the
// worst relative error |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
double grad_check(const MlpModel& model, const LabeledDataset& sample,
                  LossKind kind, double epsilon = 1e-5);

// JSON round-trip; numbers written with 17 significant digits.
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);
std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text);

}  // namespace plcml
