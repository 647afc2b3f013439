#pragma once

// One-hidden-layer perceptron: tanh hidden units, sigmoid output for two
// classes or softmax for more, trained by mini-batch gradient descent on
// cross-entropy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "pufsec/dataset.hpp"
#include "pufsec/error.hpp"
#include "pufsec/learners/logistic.hpp"
#include "pufsec/rng.hpp"

namespace pufsec {

struct MlpHyper {
  int hidden = 0;  ///< 0 means "same as the input width"
  double learning_rate = 0.01;
  int batch = 64;
  int epochs = 200;
};

/// Parameters live in one flat buffer: W1 (hidden x dim), b1, W2 (out x hidden), b2.
class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(std::size_t dim, std::size_t hidden, int classes)
      : dim_(dim), hidden_(hidden), classes_(classes) {
    if (classes < 2) throw InvalidArgument("network needs >= 2 classes");
    if (dim == 0 || hidden == 0) throw InvalidArgument("network layers must be non-empty");
    params_.assign(param_count(), 0.0);
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t hidden() const noexcept { return hidden_; }
  int classes() const noexcept { return classes_; }
  std::size_t outputs() const noexcept { return classes_ == 2 ? 1 : static_cast<std::size_t>(classes_); }
  std::size_t param_count() const noexcept {
    return hidden_ * dim_ + hidden_ + outputs() * hidden_ + outputs();
  }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  std::span<const double> w1() const { return {params_.data(), hidden_ * dim_}; }
  std::span<const double> b1() const { return {params_.data() + hidden_ * dim_, hidden_}; }
  std::span<const double> w2() const { return {params_.data() + offset_w2(), outputs() * hidden_}; }
  std::span<const double> b2() const { return {params_.data() + offset_b2(), outputs()}; }

  std::size_t offset_b1() const noexcept { return hidden_ * dim_; }
  std::size_t offset_w2() const noexcept { return offset_b1() + hidden_; }
  std::size_t offset_b2() const noexcept { return offset_w2() + outputs() * hidden_; }

  /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer.
  void initialize(Rng& rng) {
    const double a1 = 1.0 / std::sqrt(static_cast<double>(dim_));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (std::size_t i = 0; i < offset_w2(); ++i) params_[i] = (2.0 * uniform01(rng) - 1.0) * a1;
    for (std::size_t i = offset_w2(); i < params_.size(); ++i)
      params_[i] = (2.0 * uniform01(rng) - 1.0) * a2;
  }

  /// Hidden activations into `h` (size hidden) and output pre-activations into `z` (size outputs).
  void forward(std::span<const double> x, std::span<double> h, std::span<double> z) const {
    const double* w = params_.data();
    const double* b = params_.data() + offset_b1();
    for (std::size_t u = 0; u < hidden_; ++u) {
      const double* wu = w + u * dim_;
      double s = b[u];
      for (std::size_t j = 0; j < dim_; ++j) s += wu[j] * x[j];
      h[u] = std::tanh(s);
    }
    const double* v = params_.data() + offset_w2();
    const double* c = params_.data() + offset_b2();
    for (std::size_t o = 0; o < outputs(); ++o) {
      const double* vo = v + o * hidden_;
      double s = c[o];
      for (std::size_t u = 0; u < hidden_; ++u) s += vo[u] * h[u];
      z[o] = s;
    }
  }

  void probabilities(std::span<const double> x, std::span<double> out) const {
    if (x.size() != dim_) throw DimensionMismatch("network input width");
    std::vector<double> h(hidden_), z(outputs());
    forward(x, h, z);
    if (classes_ == 2) {
      const double p = sigmoid(z[0]);
      out[0] = 1.0 - p;
      out[1] = p;
    } else {
      std::copy(z.begin(), z.end(), out.begin());
      softmax_inplace(out.first(outputs()));
    }
  }

  /// Adds the cross-entropy gradient of one sample to `grad`; returns its loss.
  double accumulate(std::span<const double> x, int y, std::span<double> grad,
                    std::span<double> h, std::span<double> z, std::span<double> dh) const {
    forward(x, h, z);
    double loss;
    const std::size_t out = outputs();
    // dz := dL/dz, reusing z
    if (classes_ == 2) {
      const double s = y == 1 ? 1.0 : -1.0;
      loss = softplus(-s * z[0]);
      z[0] = sigmoid(z[0]) - (y == 1 ? 1.0 : 0.0);
    } else {
      softmax_inplace(z);
      loss = -std::log(std::max(z[y], 1e-300));
      z[y] -= 1.0;
    }
    const double* v = params_.data() + offset_w2();
    double* gv = grad.data() + offset_w2();
    double* gc = grad.data() + offset_b2();
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double dz = z[o];
      gc[o] += dz;
      for (std::size_t u = 0; u < hidden_; ++u) {
        gv[o * hidden_ + u] += dz * h[u];
        dh[u] += dz * v[o * hidden_ + u];
      }
    }
    double* gw = grad.data();
    double* gb = grad.data() + offset_b1();
    for (std::size_t u = 0; u < hidden_; ++u) {
      const double da = dh[u] * (1.0 - h[u] * h[u]);
      gb[u] += da;
      double* gwu = gw + u * dim_;
      for (std::size_t j = 0; j < dim_; ++j) gwu[j] += da * x[j];
    }
    return loss;
  }

 private:
  std::size_t dim_ = 0;
  std::size_t hidden_ = 0;
  int classes_ = 2;
  std::vector<double> params_;
};

/// Mean cross-entropy over the given rows and its gradient.
inline double mlp_loss(const MlpModel& model, const LabeledSet& data, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> h(model.hidden()), z(model.outputs()), dh(model.hidden());
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    loss += model.accumulate(data.x.row(i), data.y[i], grad, h, z, dh);
  const double n = static_cast<double>(data.size());
  for (double& g : grad) g /= n;
  return loss / n;
}

inline MlpModel train_mlp(const LabeledSet& data, int classes, const MlpHyper& hyper,
                          std::uint64_t seed) {
  data.check();
  if (hyper.batch < 1 || hyper.epochs < 0 || hyper.learning_rate <= 0.0)
    throw InvalidArgument("invalid network hyperparameters");
  const std::size_t hidden = hyper.hidden > 0 ? static_cast<std::size_t>(hyper.hidden) : data.dim();
  MlpModel model(data.dim(), hidden, classes);
  Rng rng = make_rng(seed);
  model.initialize(rng);

  // output bias starts at the smoothed class log-prior
  std::vector<double> counts(static_cast<std::size_t>(classes), 1.0);
  for (int y : data.y) counts[static_cast<std::size_t>(y)] += 1.0;
  auto params = model.params();
  if (classes == 2)
    params[model.offset_b2()] = std::log(counts[1] / counts[0]);
  else
    for (std::size_t k = 0; k < counts.size(); ++k) params[model.offset_b2() + k] = std::log(counts[k]);

  std::vector<double> grad(params.size());
  std::vector<double> h(hidden), z(model.outputs()), dh(hidden);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = static_cast<std::size_t>(hyper.batch);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t t = start; t < end; ++t)
        model.accumulate(data.x.row(order[t]), data.y[order[t]], grad, h, z, dh);
      const double step = hyper.learning_rate / static_cast<double>(end - start);
      for (std::size_t p = 0; p < params.size(); ++p) params[p] -= step * grad[p];
    }
  }
  return model;
}

}  // namespace pufsec
