#pragma once

// Logistic regression trained with full-batch RProp.
//
// Two classes use a single sigmoid unit; three or more use a softmax head.
// Parameters are stored per output row as [w_0 .. w_{d-1}, bias].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pufsec/dataset.hpp"
#include "pufsec/error.hpp"

namespace pufsec {

struct LogisticHyper {
  int max_epochs = 1000;
  double tolerance = 1e-6;
  double eta_plus = 1.2;
  double eta_minus = 0.5;
  double delta0 = 0.1;
  double delta_max = 50.0;
  double delta_min = 1e-6;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline void softmax_inplace(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double& v : z) s += (v = std::exp(v - m));
  for (double& v : z) v /= s;
}

class LogisticModel {
 public:
  LogisticModel() = default;
  LogisticModel(std::size_t dim, int classes)
      : dim_(dim), classes_(classes), params_(rows(classes) * (dim + 1), 0.0) {
    if (classes < 2) throw InvalidArgument("logistic model needs >= 2 classes");
  }
  LogisticModel(std::size_t dim, int classes, std::vector<double> params)
      : LogisticModel(dim, classes) {
    if (params.size() != params_.size()) throw DimensionMismatch("logistic parameter count");
    params_ = std::move(params);
  }

  static std::size_t rows(int classes) { return classes == 2 ? 1 : static_cast<std::size_t>(classes); }

  std::size_t dim() const noexcept { return dim_; }
  int classes() const noexcept { return classes_; }
  std::span<const double> params() const noexcept { return params_; }
  std::span<double> params() noexcept { return params_; }

  /// Class probabilities; for two classes entry 1 is sigmoid(w.x + b).
  void probabilities(std::span<const double> x, std::span<double> out) const {
    if (x.size() != dim_) throw DimensionMismatch("logistic input width");
    if (classes_ == 2) {
      const double p = sigmoid(linear(0, x));
      out[0] = 1.0 - p;
      out[1] = p;
      return;
    }
    for (int k = 0; k < classes_; ++k) out[k] = linear(static_cast<std::size_t>(k), x);
    softmax_inplace(out.first(static_cast<std::size_t>(classes_)));
  }

  double linear(std::size_t row, std::span<const double> x) const {
    const double* w = params_.data() + row * (dim_ + 1);
    double z = w[dim_];
    for (std::size_t j = 0; j < dim_; ++j) z += w[j] * x[j];
    return z;
  }

 private:
  std::size_t dim_ = 0;
  int classes_ = 2;
  std::vector<double> params_;
};

/// Mean cross-entropy over `data` (labels are class indices) and its gradient
/// with respect to model.params(). `grad` must have params().size() entries.
inline double logistic_loss(const LogisticModel& model, const LabeledSet& data,
                            std::span<double> grad) {
  const std::size_t d = model.dim();
  const int classes = model.classes();
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  std::vector<double> p(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.x.row(i);
    const int y = data.y[i];
    if (classes == 2) {
      const double z = model.linear(0, x);
      const double s = y == 1 ? 1.0 : -1.0;
      loss += softplus(-s * z);
      const double g = -s * sigmoid(-s * z);
      for (std::size_t j = 0; j < d; ++j) grad[j] += g * x[j];
      grad[d] += g;
    } else {
      for (int k = 0; k < classes; ++k) p[k] = model.linear(static_cast<std::size_t>(k), x);
      softmax_inplace(p);
      loss -= std::log(std::max(p[y], 1e-300));
      for (int k = 0; k < classes; ++k) {
        const double g = p[k] - (k == y ? 1.0 : 0.0);
        double* gr = grad.data() + static_cast<std::size_t>(k) * (d + 1);
        for (std::size_t j = 0; j < d; ++j) gr[j] += g * x[j];
        gr[d] += g;
      }
    }
  }
  const double n = static_cast<double>(data.size());
  for (double& g : grad) g /= n;
  return loss / n;
}

/// RProp with weight backtracking: an epoch whose loss exceeds the last
/// accepted loss is undone and all step sizes shrink by eta_minus. Training
/// ends when an accepted epoch improves the loss by less than `tolerance` or
/// after max_epochs. Labels must be class indices in [0, classes).
inline LogisticModel train_logistic(const LabeledSet& data, int classes, const LogisticHyper& h,
                                    std::vector<double>* loss_history = nullptr) {
  data.check();
  LogisticModel model(data.dim(), classes);
  auto w = model.params();
  const std::size_t m = w.size();
  std::vector<double> grad(m), prev_grad(m, 0.0), delta(m, h.delta0), prev_w(m, 0.0);

  double accepted = logistic_loss(model, data, grad);
  if (loss_history) loss_history->push_back(accepted);
  std::copy(w.begin(), w.end(), prev_w.begin());

  for (int epoch = 0; epoch < h.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < m; ++i) {
      const double sgn = grad[i] * prev_grad[i];
      if (sgn > 0.0) {
        delta[i] = std::min(delta[i] * h.eta_plus, h.delta_max);
      } else if (sgn < 0.0) {
        delta[i] = std::max(delta[i] * h.eta_minus, h.delta_min);
        grad[i] = 0.0;
      }
      if (grad[i] > 0.0)
        w[i] -= delta[i];
      else if (grad[i] < 0.0)
        w[i] += delta[i];
      prev_grad[i] = grad[i];
    }

    const double loss = logistic_loss(model, data, grad);
    if (loss > accepted) {
      std::copy(prev_w.begin(), prev_w.end(), w.begin());
      for (double& d : delta) d = std::max(d * h.eta_minus, h.delta_min);
      std::fill(prev_grad.begin(), prev_grad.end(), 0.0);
      logistic_loss(model, data, grad);
      continue;
    }
    const double improvement = accepted - loss;
    accepted = loss;
    std::copy(w.begin(), w.end(), prev_w.begin());
    if (loss_history) loss_history->push_back(accepted);
    if (improvement < h.tolerance) break;
  }
  return model;
}

}  // namespace pufsec
