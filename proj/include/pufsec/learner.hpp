#pragma once

// One train / predict surface over the three classifier families.
//
// Binary tasks use labels -1/+1 and predict() returns -1/+1. Multiclass
// tasks use labels 0..K-1 and predict() returns the argmax class. Internally
// every model works on class indices, with binary +1 mapped to class 1.

#include <algorithm>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pufsec/dataset.hpp"
#include "pufsec/error.hpp"
#include "pufsec/learners/forest.hpp"
#include "pufsec/learners/logistic.hpp"
#include "pufsec/learners/mlp.hpp"

namespace pufsec {

enum class LearnerKind { LR, RF, NN };

inline constexpr LearnerKind kAllLearnerKinds[] = {LearnerKind::LR, LearnerKind::RF, LearnerKind::NN};

inline std::string_view learner_name(LearnerKind k) {
  switch (k) {
    case LearnerKind::LR: return "lr";
    case LearnerKind::RF: return "rf";
    case LearnerKind::NN: return "nn";
  }
  return "?";
}

/// Upper-case tag used in report labels: LR, RF, NN.
inline std::string learner_tag(LearnerKind k) {
  std::string s(learner_name(k));
  for (char& c : s) c = static_cast<char>(c - 'a' + 'A');
  return s;
}

inline LearnerKind parse_learner_kind(std::string_view s) {
  if (s == "lr" || s == "LR") return LearnerKind::LR;
  if (s == "rf" || s == "RF") return LearnerKind::RF;
  if (s == "nn" || s == "NN") return LearnerKind::NN;
  throw InvalidArgument("unknown learner kind '" + std::string(s) + "'");
}

struct Hyperparameters {
  LogisticHyper lr;
  ForestHyper rf;
  MlpHyper nn;
  int threads = 1;  ///< forest trees may be grown in parallel
};

class Learner {
 public:
  using Model = std::variant<LogisticModel, ForestModel, MlpModel>;

  /// `binary` selects the -1/+1 label convention (the model then has 2 classes).
  Learner(Model model, bool binary) : model_(std::move(model)), binary_(binary) {
    if (binary_ && classes() != 2) throw InvalidArgument("binary learner must have 2 classes");
  }

  LearnerKind kind() const {
    switch (model_.index()) {
      case 0: return LearnerKind::LR;
      case 1: return LearnerKind::RF;
      default: return LearnerKind::NN;
    }
  }
  bool binary() const noexcept { return binary_; }
  int classes() const {
    return std::visit([](const auto& m) { return m.classes(); }, model_);
  }
  std::size_t dim() const {
    return std::visit([](const auto& m) { return m.dim(); }, model_);
  }
  const Model& model() const noexcept { return model_; }

  std::vector<double> class_probabilities(std::span<const double> x) const {
    std::vector<double> p(static_cast<std::size_t>(classes()));
    std::visit([&](const auto& m) { m.probabilities(x, p); }, model_);
    return p;
  }

  /// Probability of label +1 (binary) or of class 1 (two-class multiclass).
  double predict_proba(std::span<const double> x) const {
    if (classes() != 2) throw InvalidArgument("predict_proba needs a two-class learner");
    return class_probabilities(x)[1];
  }

  /// Binary: +1 iff predict_proba >= 0.5. Multiclass: argmax (lowest index on ties).
  int predict(std::span<const double> x) const {
    if (classes() == 2) {
      const bool plus = predict_proba(x) >= 0.5;
      if (binary_) return plus ? 1 : -1;
      return plus ? 1 : 0;
    }
    const auto p = class_probabilities(x);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  }

  /// Fraction of rows whose prediction equals the label.
  double accuracy(const LabeledSet& data) const {
    if (data.size() == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) hits += predict(data.x.row(i)) == data.y[i];
    return static_cast<double>(hits) / static_cast<double>(data.size());
  }

 private:
  Model model_;
  bool binary_;
};

namespace detail {

inline Learner::Model fit(LearnerKind kind, const LabeledSet& indexed, int classes,
                          const Hyperparameters& h, std::uint64_t seed) {
  switch (kind) {
    case LearnerKind::LR: return train_logistic(indexed, classes, h.lr);
    case LearnerKind::RF: return train_forest(indexed, classes, h.rf, seed, h.threads);
    case LearnerKind::NN: return train_mlp(indexed, classes, h.nn, seed);
  }
  throw InvalidArgument("unknown learner kind");
}

}  // namespace detail

/// Binary training on -1/+1 labels.
inline Learner train(LearnerKind kind, const LabeledSet& data, const Hyperparameters& h,
                     std::uint64_t seed) {
  data.check();
  LabeledSet indexed;
  indexed.x = data.x;
  indexed.y.reserve(data.size());
  for (int y : data.y) {
    if (y != 1 && y != -1) throw InvalidArgument("binary labels must be -1 or +1");
    indexed.y.push_back(y == 1 ? 1 : 0);
  }
  return Learner(detail::fit(kind, indexed, 2, h, seed), true);
}

/// Multiclass training on class indices 0..K-1 with K = max label + 1.
/// LR and NN use a softmax head (a single sigmoid when K = 2); RF votes natively.
inline Learner train_multiclass(const LabeledSet& data, LearnerKind kind, const Hyperparameters& h,
                                std::uint64_t seed) {
  data.check();
  std::set<int> present;
  for (int y : data.y) {
    if (y < 0) throw InvalidArgument("class labels must be >= 0");
    present.insert(y);
  }
  if (present.size() < 2) throw InvalidArgument("multiclass training needs at least 2 classes present");
  const int classes = *present.rbegin() + 1;
  return Learner(detail::fit(kind, data, classes, h, seed), false);
}

}  // namespace pufsec
