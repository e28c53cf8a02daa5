#include "plcml/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "plcml/csv.hpp"
#include "plcml/rng.hpp"

namespace plcml {

namespace {

constexpr double kLogClamp = 1e-12;

void apply_mask_inplace(Tensor2& t, const Tensor2& mask) {
  if (mask.size() == 0) return;
  if (!t.same_shape(mask)) throw std::invalid_argument("dropout mask shape mismatch");
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] *= mask.data[i];
}

Tensor2 masked_copy(const Tensor2& t, const DropoutMasks* masks, std::size_t idx) {
  if (!masks || idx >= masks->size() || (*masks)[idx].size() == 0) return t;
  Tensor2 out = t;
  apply_mask_inplace(out, (*masks)[idx]);
  return out;
}

void activate_inplace(Tensor2& z, Activation act) {
  switch (act) {
    case Activation::Identity:
      return;
    case Activation::Relu:
      for (double& v : z.data) v = v > 0.0 ? v : 0.0;
      return;
    case Activation::Tanh:
      for (double& v : z.data) v = std::tanh(v);
      return;
    case Activation::Sigmoid:
      for (double& v : z.data) v = 1.0 / (1.0 + std::exp(-v));
      return;
    case Activation::Softmax:
      for (std::size_t r = 0; r < z.rows; ++r) {
        auto row = z.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double& v : row) {
          v = std::exp(v - mx);
          sum += v;
        }
        for (double& v : row) v /= sum;
      }
      return;
  }
  throw std::logic_error("unknown activation");
}

// dL/dz from dL/da, using only post-activation values.
void chain_activation_inplace(Tensor2& g, const Tensor2& a, Activation act) {
  switch (act) {
    case Activation::Identity:
      return;
    case Activation::Relu:
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (a.data[i] <= 0.0) g.data[i] = 0.0;
      return;
    case Activation::Tanh:
      for (std::size_t i = 0; i < g.data.size(); ++i)
        g.data[i] *= 1.0 - a.data[i] * a.data[i];
      return;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < g.data.size(); ++i)
        g.data[i] *= a.data[i] * (1.0 - a.data[i]);
      return;
    case Activation::Softmax:
      for (std::size_t r = 0; r < g.rows; ++r) {
        auto grow = g.row(r);
        auto arow = a.row(r);
        double dot = 0.0;
        for (std::size_t j = 0; j < grow.size(); ++j) dot += grow[j] * arow[j];
        for (std::size_t j = 0; j < grow.size(); ++j)
          grow[j] = arow[j] * (grow[j] - dot);
      }
      return;
  }
  throw std::logic_error("unknown activation");
}

void check_one_hot(const Tensor2& targets) {
  for (std::size_t r = 0; r < targets.rows; ++r) {
    double sum = 0.0;
    for (const double v : targets.row(r)) {
      if (v != 0.0 && v != 1.0)
        throw std::invalid_argument("cross-entropy targets must be one-hot rows");
      sum += v;
    }
    if (sum != 1.0)
      throw std::invalid_argument("cross-entropy targets must be one-hot rows");
  }
}

// Shared core of backward()/backward_signal(): takes dL/d(final activation),
// or a pre-fused dL/dz for the last layer when fused_last is true.
Gradients backprop(const MlpModel& model, const ForwardPass& pass, Tensor2 delta,
                   bool fused_last, const DropoutMasks* masks) {
  const std::size_t L = model.layers.size();
  Gradients g;
  g.weights.resize(L);
  g.biases.resize(L);

  for (std::size_t li = L; li-- > 0;) {
    const DenseLayer& layer = model.layers[li];
    const Tensor2& a_out = pass.activations[li + 1];
    if (!(fused_last && li == L - 1)) chain_activation_inplace(delta, a_out, layer.activation);

    const Tensor2 a_in = masked_copy(pass.activations[li], masks, li);
    g.weights[li] = matmul_ta(delta, a_in);
    g.biases[li].assign(layer.weights.rows, 0.0);
    for (std::size_t r = 0; r < delta.rows; ++r) {
      auto row = delta.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) g.biases[li][c] += row[c];
    }

    Tensor2 g_prev = matmul(delta, layer.weights);
    if (masks && li < masks->size() && (*masks)[li].size() != 0)
      apply_mask_inplace(g_prev, (*masks)[li]);
    delta = std::move(g_prev);
  }
  g.input = std::move(delta);
  return g;
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
  }
  throw std::logic_error("unknown activation");
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "softmax") return Activation::Softmax;
  throw std::invalid_argument("unknown activation name: " + name);
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.biases.size();
  return n;
}

void MlpModel::validate() const {
  if (layers.empty()) throw std::invalid_argument("model has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weights.rows == 0 || l.weights.cols == 0)
      throw std::invalid_argument("layer with empty weight matrix");
    if (l.biases.size() != l.weights.rows)
      throw std::invalid_argument("bias size does not match layer width");
    if (i > 0 && layers[i - 1].weights.rows != l.weights.cols)
      throw std::invalid_argument("layer dimension chain is broken");
    if (l.activation == Activation::Softmax && i + 1 != layers.size())
      throw std::invalid_argument("softmax is only supported on the final layer");
  }
}

MlpModel make_mlp(const std::vector<std::size_t>& dims,
                  const std::vector<Activation>& acts, std::uint64_t seed) {
  if (dims.size() < 2 || acts.size() != dims.size() - 1)
    throw std::invalid_argument("make_mlp: need dims.size() == acts.size() + 1 >= 2");
  Rng rng(seed);
  MlpModel model;
  model.layers.resize(acts.size());
  for (std::size_t l = 0; l < acts.size(); ++l) {
    const std::size_t fan_in = dims[l];
    const std::size_t fan_out = dims[l + 1];
    DenseLayer& layer = model.layers[l];
    layer.weights = Tensor2(fan_out, fan_in);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& w : layer.weights.data) w = rng.uniform(-limit, limit);
    layer.biases.assign(fan_out, 0.0);
    layer.activation = acts[l];
  }
  model.validate();
  return model;
}

ForwardPass forward(const MlpModel& model, const Tensor2& batch,
                    const DropoutMasks* masks) {
  model.validate();
  if (batch.cols != model.input_dim())
    throw std::invalid_argument("forward: batch width does not match input dim");
  if (masks && masks->size() > model.layers.size())
    throw std::invalid_argument("forward: more masks than layers");

  ForwardPass pass;
  pass.activations.reserve(model.layers.size() + 1);
  pass.activations.push_back(batch);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const DenseLayer& layer = model.layers[l];
    const Tensor2 fed = masked_copy(pass.activations[l], masks, l);
    Tensor2 z = matmul_tb(fed, layer.weights);
    for (std::size_t r = 0; r < z.rows; ++r) {
      auto row = z.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.biases[c];
    }
    activate_inplace(z, layer.activation);
    pass.activations.push_back(std::move(z));
  }
  return pass;
}

double loss_value(const Tensor2& predictions, const Tensor2& targets, LossKind kind) {
  if (!predictions.same_shape(targets))
    throw std::invalid_argument("loss: prediction/target shape mismatch");
  if (predictions.rows == 0) throw std::invalid_argument("loss: empty batch");
  const double n = static_cast<double>(predictions.rows);
  double acc = 0.0;
  if (kind == LossKind::Mse) {
    for (std::size_t i = 0; i < predictions.data.size(); ++i) {
      const double d = predictions.data[i] - targets.data[i];
      acc += d * d;
    }
  } else {
    check_one_hot(targets);
    for (std::size_t i = 0; i < predictions.data.size(); ++i) {
      if (targets.data[i] != 0.0) {
        const double p = std::clamp(predictions.data[i], kLogClamp, 1.0);
        acc -= targets.data[i] * std::log(p);
      }
    }
  }
  return acc / n;
}

Gradients backward(const MlpModel& model, const ForwardPass& pass,
                   const Tensor2& targets, LossKind kind, const DropoutMasks* masks) {
  const Tensor2& out = pass.output();
  if (!out.same_shape(targets))
    throw std::invalid_argument("backward: target shape mismatch");
  const double n = static_cast<double>(out.rows);

  if (kind == LossKind::CrossEntropy) {
    if (model.layers.back().activation != Activation::Softmax)
      throw std::invalid_argument("cross-entropy requires a softmax output layer");
    check_one_hot(targets);
    Tensor2 delta(out.rows, out.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      delta.data[i] = (out.data[i] - targets.data[i]) / n;
    return backprop(model, pass, std::move(delta), /*fused_last=*/true, masks);
  }

  Tensor2 delta(out.rows, out.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    delta.data[i] = 2.0 * (out.data[i] - targets.data[i]) / n;
  return backprop(model, pass, std::move(delta), /*fused_last=*/false, masks);
}

Gradients backward_signal(const MlpModel& model, const ForwardPass& pass,
                          const Tensor2& output_grad, const DropoutMasks* masks) {
  if (!pass.output().same_shape(output_grad))
    throw std::invalid_argument("backward_signal: gradient shape mismatch");
  return backprop(model, pass, output_grad, /*fused_last=*/false, masks);
}

void AdamState::init(const MlpModel& model) {
  m_w.clear();
  v_w.clear();
  m_b.clear();
  v_b.clear();
  step = 0;
  for (const auto& l : model.layers) {
    m_w.emplace_back(l.weights.rows, l.weights.cols);
    v_w.emplace_back(l.weights.rows, l.weights.cols);
    m_b.emplace_back(l.biases.size(), 0.0);
    v_b.emplace_back(l.biases.size(), 0.0);
  }
}

void apply_sgd(MlpModel& model, const Gradients& g, double lr) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i)
      layer.weights.data[i] -= lr * g.weights[l].data[i];
    for (std::size_t i = 0; i < layer.biases.size(); ++i)
      layer.biases[i] -= lr * g.biases[l][i];
  }
}

void apply_adam(MlpModel& model, const Gradients& g, AdamState& state,
                const TrainConfig& cfg) {
  if (!state.initialized()) state.init(model);
  state.step += 1;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  auto update = [&](double& p, double grad, double& m, double& v) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad * grad;
    const double mhat = m / c1;
    const double vhat = v / c2;
    p -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i)
      update(layer.weights.data[i], g.weights[l].data[i], state.m_w[l].data[i],
             state.v_w[l].data[i]);
    for (std::size_t i = 0; i < layer.biases.size(); ++i)
      update(layer.biases[i], g.biases[l][i], state.m_b[l][i], state.v_b[l][i]);
  }
}

TrainHistory train(MlpModel& model, const LabeledDataset& data, const TrainConfig& cfg) {
  model.validate();
  if (data.inputs.rows != data.targets.rows)
    throw std::invalid_argument("train: inputs/targets row mismatch");
  if (data.inputs.rows == 0) throw std::invalid_argument("train: empty dataset");
  if (data.inputs.cols != model.input_dim() || data.targets.cols != model.output_dim())
    throw std::invalid_argument("train: dataset width does not match model");
  if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0))
    throw std::invalid_argument("train: dropout_rate must be in [0, 1)");
  if (cfg.loss == LossKind::CrossEntropy) {
    if (model.layers.back().activation != Activation::Softmax)
      throw std::invalid_argument("cross-entropy requires a softmax output layer");
    check_one_hot(data.targets);
  }

  Rng rng(cfg.seed);
  AdamState adam;
  const std::size_t n = data.inputs.rows;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainHistory history;
  history.epoch_loss.reserve(cfg.epochs);
  const double keep = 1.0 - cfg.dropout_rate;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                   order.begin() + static_cast<long>(stop));
      const Tensor2 bx = take_rows(data.inputs, idx);
      const Tensor2 by = take_rows(data.targets, idx);

      DropoutMasks masks;
      if (cfg.dropout_rate > 0.0) {
        Tensor2 mask(bx.rows, bx.cols);
        for (double& v : mask.data) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
        masks.push_back(std::move(mask));
      }
      const DropoutMasks* mp = masks.empty() ? nullptr : &masks;

      const ForwardPass pass = forward(model, bx, mp);
      const double batch_loss = loss_value(pass.output(), by, cfg.loss);
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "training aborted: non-finite loss at epoch " << epoch << ", batch offset "
            << start;
        throw std::runtime_error(msg.str());
      }
      epoch_loss += batch_loss * static_cast<double>(stop - start);

      const Gradients g = backward(model, pass, by, cfg.loss, mp);
      if (cfg.optimizer == Optimizer::Sgd)
        apply_sgd(model, g, cfg.learning_rate);
      else
        apply_adam(model, g, adam, cfg);
    }
    history.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
  }
  return history;
}

double grad_check(const MlpModel& model, const LabeledDataset& sample,
                  LossKind kind, double epsilon) {
  MlpModel probe = model;
  const ForwardPass pass = forward(probe, sample.inputs);
  const Gradients g = backward(probe, pass, sample.targets, kind);

  auto loss_at = [&]() {
    return loss_value(forward(probe, sample.inputs).output(), sample.targets, kind);
  };
  double worst = 0.0;
  auto check_param = [&](double& p, double analytic) {
    const double saved = p;
    p = saved + epsilon;
    const double lp = loss_at();
    p = saved - epsilon;
    const double lm = loss_at();
    p = saved;
    const double numeric = (lp - lm) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  };
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    auto& layer = probe.layers[l];
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i)
      check_param(layer.weights.data[i], g.weights[l].data[i]);
    for (std::size_t i = 0; i < layer.biases.size(); ++i)
      check_param(layer.biases[i], g.biases[l][i]);
  }
  return worst;
}

std::string model_to_json(const MlpModel& model) {
  std::ostringstream out;
  out << "{\"layers\":[";
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    if (l) out << ',';
    out << "{\"rows\":" << layer.weights.rows << ",\"cols\":" << layer.weights.cols
        << ",\"activation\":\"" << activation_name(layer.activation) << "\",\"weights\":[";
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
      if (i) out << ',';
      out << format_double(layer.weights.data[i]);
    }
    out << "],\"biases\":[";
    for (std::size_t i = 0; i < layer.biases.size(); ++i) {
      if (i) out << ',';
      out << format_double(layer.biases[i]);
    }
    out << "]}";
  }
  out << "]}";
  return out.str();
}

MlpModel model_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  MlpModel model;
  for (const auto& jl : j.at("layers")) {
    DenseLayer layer;
    const std::size_t rows = jl.at("rows").get<std::size_t>();
    const std::size_t cols = jl.at("cols").get<std::size_t>();
    layer.activation = activation_from_name(jl.at("activation").get<std::string>());
    layer.weights = Tensor2(rows, cols);
    const auto& w = jl.at("weights");
    if (w.size() != rows * cols)
      throw std::invalid_argument("model json: weight count mismatch");
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i)
      layer.weights.data[i] = w[i].get<double>();
    const auto& b = jl.at("biases");
    if (b.size() != rows) throw std::invalid_argument("model json: bias count mismatch");
    layer.biases.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) layer.biases[i] = b[i].get<double>();
    model.layers.push_back(std::move(layer));
  }
  model.validate();
  return model;
}

void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  out << model_to_json(model) << '\n';
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace plcml
