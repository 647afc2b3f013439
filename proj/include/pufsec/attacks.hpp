#pragma once

// Modeling attacks on simulated PUFs.
//
// clone() is the architecture-independent attack: learn challenge -> response
// from eavesdropped CRPs without knowing the PUF type. The brute-force
// baseline first classifies the architecture from responses to a shared probe
// set, then runs a cloner tuned for the predicted architecture, and scores the
// two stages with a harmonic mean.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "pufsec/dataset.hpp"
#include "pufsec/error.hpp"
#include "pufsec/features.hpp"
#include "pufsec/learner.hpp"
#include "pufsec/parallel.hpp"
#include "pufsec/puf.hpp"
#include "pufsec/rng.hpp"

namespace pufsec {

/// LR reads parity features; RF and NN read raw +-1 bits unless
/// `parity_for_all` is set.
inline FeatureMode default_feature_mode(LearnerKind kind, bool parity_for_all = false) {
  if (parity_for_all || kind == LearnerKind::LR) return FeatureMode::Parity;
  return FeatureMode::Raw;
}

/// A trained learner together with the challenge encoding it expects.
struct ClonedModel {
  Learner learner;
  FeatureMode features;
  int stages;

  std::vector<double> encode(std::span<const std::uint8_t> c) const {
    if (c.size() != static_cast<std::size_t>(stages))
      throw DimensionMismatch("challenge width differs from the clone's training width");
    return pufsec::encode(features, c);
  }
  Response respond(std::span<const std::uint8_t> c) const { return learner.predict(encode(c)); }
  double proba(std::span<const std::uint8_t> c) const { return learner.predict_proba(encode(c)); }
};

struct CloneResult {
  ClonedModel clone;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double test_accuracy = 0.0;
  double cloning_error = 1.0;
  double wall_time_seconds = 0.0;  ///< learner training only
  std::vector<Challenge> training_challenges;
  std::vector<Challenge> test_challenges;
};

struct CloneOptions {
  Hyperparameters hyper;
  std::optional<FeatureMode> features;  ///< overrides default_feature_mode
  bool parity_for_all = false;
};

inline std::string challenge_key(std::span<const std::uint8_t> c) {
  return std::string(c.begin(), c.end());
}

/// Fraction of challenges on which the clone agrees with the device's noiseless response.
inline double agreement(const ClonedModel& clone, const PufInstance& puf,
                        std::span<const Challenge> challenges) {
  if (challenges.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& c : challenges) hits += clone.respond(c) == puf.evaluate(c);
  return static_cast<double>(hits) / static_cast<double>(challenges.size());
}

namespace detail {

inline CloneResult fit_clone(const CrpDataset& train_set, LearnerKind kind, const CloneOptions& opt,
                             std::uint64_t seed) {
  const FeatureMode mode = opt.features.value_or(default_feature_mode(kind, opt.parity_for_all));
  const LabeledSet data = encode_crps(train_set, mode);
  const auto start = std::chrono::steady_clock::now();
  Learner learner = train(kind, data, opt.hyper, seed);
  const auto stop = std::chrono::steady_clock::now();
  CloneResult r{ClonedModel{std::move(learner), mode, train_set.stages()}, train_set.size(), 0, 0.0, 1.0,
                std::chrono::duration<double>(stop - start).count(), train_set.challenges, {}};
  return r;
}

inline void score_clone(CloneResult& r, std::span<const Challenge> test, std::span<const Response> truth) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) hits += r.clone.respond(test[i]) == truth[i];
  r.test_size = test.size();
  r.test_challenges.assign(test.begin(), test.end());
  r.test_accuracy = static_cast<double>(hits) / static_cast<double>(test.size());
  r.cloning_error = 1.0 - r.test_accuracy;
}

}  // namespace detail

/// Eavesdrops `train_count` CRPs, trains a learner of `kind`, and measures
/// accuracy on `test_count` fresh CRPs whose challenges never occur in the
/// training set (exact bitstring match). Test responses are noiseless truth.
inline CloneResult clone(const PufInstance& target, LearnerKind kind, std::size_t train_count,
                         std::size_t test_count, std::uint64_t seed, const CloneOptions& opt = {}) {
  if (train_count < 1 || test_count < 1) throw InvalidArgument("train and test counts must be >= 1");
  const CrpDataset train_set = generate_crps(target, train_count, derive_seed(seed, "clone-train"));
  CloneResult r = detail::fit_clone(train_set, kind, opt, derive_seed(seed, "clone-learner"));

  std::unordered_set<std::string> seen;
  for (const auto& c : train_set.challenges) seen.insert(challenge_key(c));
  Rng rng = make_rng(derive_seed(seed, "clone-test"));
  std::vector<Challenge> test;
  std::vector<Response> truth;
  const double space = std::ldexp(1.0, std::min(target.stages(), 62));
  if (static_cast<double>(seen.size()) >= space)
    throw InvalidArgument("training set covers the whole challenge space; no disjoint test set exists");
  while (test.size() < test_count) {
    Challenge c = random_challenge(target.stages(), rng);
    if (seen.contains(challenge_key(c))) continue;
    truth.push_back(target.evaluate(c));
    test.push_back(std::move(c));
  }
  detail::score_clone(r, test, truth);
  return r;
}

/// Attack on a recorded CRP file: the first `train_count` pairs train the
/// learner, the remaining pairs whose challenge is not among them test it.
inline CloneResult clone_from_crps(const CrpDataset& crps, LearnerKind kind, std::size_t train_count,
                                   std::uint64_t seed, const CloneOptions& opt = {}) {
  if (train_count < 1 || train_count >= crps.size())
    throw InvalidArgument("train count must be in [1, dataset size)");
  CrpDataset train_set{crps.arch, crps.seed, {}, {}};
  train_set.challenges.assign(crps.challenges.begin(), crps.challenges.begin() + static_cast<std::ptrdiff_t>(train_count));
  train_set.responses.assign(crps.responses.begin(), crps.responses.begin() + static_cast<std::ptrdiff_t>(train_count));
  CloneResult r = detail::fit_clone(train_set, kind, opt, derive_seed(seed, "clone-learner"));

  std::unordered_set<std::string> seen;
  for (const auto& c : train_set.challenges) seen.insert(challenge_key(c));
  std::vector<Challenge> test;
  std::vector<Response> truth;
  for (std::size_t i = train_count; i < crps.size(); ++i) {
    if (seen.contains(challenge_key(crps.challenges[i]))) continue;
    test.push_back(crps.challenges[i]);
    truth.push_back(crps.responses[i]);
  }
  if (test.empty()) throw InvalidArgument("no test pairs remain after removing training challenges");
  detail::score_clone(r, test, truth);
  return r;
}

/// 2ab / (a + b), and 0 when a + b = 0.
inline double harmonic_mean(double a, double b) {
  if (a < 0.0 || b < 0.0) throw InvalidArgument("harmonic_mean operands must be >= 0");
  const double s = a + b;
  return s == 0.0 ? 0.0 : 2.0 * a * b / s;
}

// ---------------------------------------------------------------------------
// Architecture identification

enum class ProbeDesign {
  Uniform,   ///< i.i.d. uniform challenges
  Clustered  ///< groups of 10: a uniform base plus 9 single-bit flips spread over the stages
};

inline std::string_view probe_design_name(ProbeDesign d) {
  return d == ProbeDesign::Uniform ? "uniform" : "clustered";
}

inline ProbeDesign parse_probe_design(std::string_view s) {
  if (s == "uniform") return ProbeDesign::Uniform;
  if (s == "clustered") return ProbeDesign::Clustered;
  throw InvalidArgument("unknown probe design '" + std::string(s) + "'");
}

inline std::vector<Challenge> make_probe_set(int stages, std::size_t count, ProbeDesign design,
                                             std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("probe count must be >= 1");
  Rng rng = make_rng(seed);
  std::vector<Challenge> probes;
  probes.reserve(count);
  if (design == ProbeDesign::Uniform) {
    while (probes.size() < count) probes.push_back(random_challenge(stages, rng));
    return probes;
  }
  constexpr std::size_t group = 10;
  while (probes.size() < count) {
    const Challenge base = random_challenge(stages, rng);
    probes.push_back(base);
    for (std::size_t v = 1; v < group && probes.size() < count; ++v) {
      Challenge c = base;
      const auto pos = (v - 1) * static_cast<std::size_t>(stages - 1) / (group - 2);
      c[pos] ^= 1U;
      probes.push_back(std::move(c));
    }
  }
  return probes;
}

inline std::vector<double> probe_vector(const PufInstance& puf, std::span<const Challenge> probes) {
  std::vector<double> v;
  v.reserve(probes.size());
  Rng noise = make_rng(derive_seed(puf.seed(), "probe-noise"));
  for (const auto& c : probes) v.push_back(static_cast<double>(puf.evaluate(c, noise)));
  return v;
}

struct ClassifyOptions {
  Hyperparameters hyper;
  ProbeDesign design = ProbeDesign::Uniform;
  double holdout_fraction = 0.5;  ///< share of each class's instances kept for evaluation
  bool shuffle_labels = false;    ///< ablation: permute training labels
  int threads = 1;
};

/// Multiclass architecture classifier over probe response vectors. With a
/// single class the classifier degenerates to a constant.
struct ArchClassifierResult {
  std::optional<Learner> classifier;
  std::vector<Challenge> probe_challenges;
  std::vector<std::string> labels;  ///< family label per class index
  double classification_rate = 0.0;
  std::vector<double> per_class_rate;
  std::vector<std::vector<std::size_t>> confusion;  ///< [true][predicted]

  int predict(const PufInstance& puf) const {
    if (!classifier) return 0;
    return classifier->predict(probe_vector(puf, probe_challenges));
  }

  std::optional<std::size_t> class_of(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels.begin());
  }
};

/// `population[k]` lists the instances of class k (all with the same stage
/// count). Each class is split into training and held-out instances; the rate
/// is measured on held-out instances only.
inline ArchClassifierResult classify_architecture(const std::vector<std::vector<PufInstance>>& population,
                                                  std::size_t probe_count, LearnerKind kind,
                                                  std::uint64_t seed, const ClassifyOptions& opt = {}) {
  if (population.empty()) throw InvalidArgument("population has no classes");
  if (probe_count < 1) throw InvalidArgument("probe count must be >= 1");
  const int stages = population.front().empty() ? 0 : population.front().front().stages();
  for (std::size_t k = 0; k < population.size(); ++k) {
    if (population[k].size() < 2)
      throw InvalidArgument("class " + std::to_string(k) + " has fewer than 2 instances");
    for (const auto& p : population[k])
      if (p.stages() != stages) throw DimensionMismatch("population mixes stage counts");
  }

  ArchClassifierResult result;
  result.probe_challenges = make_probe_set(stages, probe_count, opt.design, derive_seed(seed, "probes"));
  for (const auto& cls : population) result.labels.push_back(family_label(cls.front().spec()));

  struct Row {
    std::size_t cls;
    std::size_t idx;
    bool train;
  };
  std::vector<Row> rows;
  for (std::size_t k = 0; k < population.size(); ++k) {
    const std::size_t n = population[k].size();
    auto held = static_cast<std::size_t>(std::llround(opt.holdout_fraction * static_cast<double>(n)));
    held = std::clamp<std::size_t>(held, 1, n - 1);
    for (std::size_t i = 0; i < n; ++i) rows.push_back({k, i, i < n - held});
  }
  Matrix features(rows.size(), probe_count);
  parallel_for(rows.size(), opt.threads, [&](std::size_t r) {
    const auto v = probe_vector(population[rows[r].cls][rows[r].idx], result.probe_challenges);
    std::copy(v.begin(), v.end(), features.row(r).begin());
  });

  LabeledSet train_set, eval_set;
  for (std::size_t r = 0; r < rows.size(); ++r)
    (rows[r].train ? train_set : eval_set).add(features.row(r), static_cast<int>(rows[r].cls));
  if (opt.shuffle_labels) {
    Rng rng = make_rng(derive_seed(seed, "label-shuffle"));
    auto& y = train_set.y;
    for (std::size_t i = y.size(); i > 1; --i) std::swap(y[i - 1], y[uniform_index(rng, i)]);
  }

  if (population.size() >= 2) {
    Hyperparameters h = opt.hyper;
    h.threads = opt.threads;
    result.classifier = train_multiclass(train_set, kind, h, derive_seed(seed, "classifier"));
  }

  const std::size_t K = population.size();
  result.confusion.assign(K, std::vector<std::size_t>(K, 0));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    const int pred = result.classifier ? result.classifier->predict(eval_set.x.row(i)) : 0;
    const auto truth = static_cast<std::size_t>(eval_set.y[i]);
    ++result.confusion[truth][static_cast<std::size_t>(pred)];
    hits += static_cast<std::size_t>(pred) == truth;
  }
  result.classification_rate = static_cast<double>(hits) / static_cast<double>(eval_set.size());
  for (std::size_t k = 0; k < K; ++k) {
    const auto total = std::accumulate(result.confusion[k].begin(), result.confusion[k].end(), std::size_t{0});
    result.per_class_rate.push_back(total ? static_cast<double>(result.confusion[k][k]) / static_cast<double>(total)
                                          : 0.0);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Two-stage brute-force baseline

/// Stage-2 cloning pipeline registered for one architecture family.
struct StageTwoCloner {
  LearnerKind kind = LearnerKind::NN;
  FeatureMode features = FeatureMode::Parity;
  Hyperparameters hyper;
};

using ClonerRegistry = std::map<std::string, StageTwoCloner, std::less<>>;

struct BruteForceScore {
  std::string true_label;
  std::string predicted_label;
  bool misrouted = false;
  double classification_rate = 0.0;     ///< held-out rate of the target's true class
  double per_arch_cloning_rate = 0.0;   ///< stage-2 clone accuracy on the target
  double combined = 0.0;
};

/// Stage 1 predicts the target's family from its probe responses; stage 2
/// runs the cloner registered for the predicted family on the target.
inline BruteForceScore brute_force_attack(const PufInstance& target, const ArchClassifierResult& classifier,
                                          const ClonerRegistry& cloners, std::size_t train_count,
                                          std::size_t test_count, std::uint64_t seed) {
  BruteForceScore s;
  s.true_label = family_label(target.spec());
  const auto true_class = classifier.class_of(s.true_label);
  if (!true_class) throw InvalidArgument("classifier was not trained on family '" + s.true_label + "'");
  s.classification_rate = classifier.per_class_rate[*true_class];

  const int predicted = classifier.predict(target);
  s.predicted_label = classifier.labels[static_cast<std::size_t>(predicted)];
  s.misrouted = s.predicted_label != s.true_label;
  auto it = cloners.find(s.predicted_label);
  if (it == cloners.end()) throw InvalidArgument("no stage-2 cloner registered for '" + s.predicted_label + "'");

  CloneOptions opt;
  opt.hyper = it->second.hyper;
  opt.features = it->second.features;
  const CloneResult r = clone(target, it->second.kind, train_count, test_count, seed, opt);
  s.per_arch_cloning_rate = r.test_accuracy;
  s.combined = harmonic_mean(s.classification_rate, s.per_arch_cloning_rate);
  return s;
}

}  // namespace pufsec
