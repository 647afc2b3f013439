#pragma once

// Discriminator defense: tell an authentic device from a clone by the
// responses both give to one fixed probe batch.
//
// A dataset holds `batch_count` observation rounds over the same probe batch.
// Each round contributes one Authentic row (the device, with fresh evaluation
// noise) and one Cloned row (the clone, drawing its response to each probe
// from its own predictive distribution). A binary learner on the +-1 rows
// then plays the role of D(C, R) = p_auth / (p_auth + p_clone).

#include <algorithm>
#include <cmath>
#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "pufsec/attacks.hpp"
#include "pufsec/dataset.hpp"
#include "pufsec/error.hpp"
#include "pufsec/learner.hpp"
#include "pufsec/parallel.hpp"
#include "pufsec/puf.hpp"
#include "pufsec/rng.hpp"
#include "pufsec/text.hpp"

namespace pufsec {

enum class Origin { Authentic, Cloned };

inline int origin_label(Origin o) { return o == Origin::Authentic ? 1 : -1; }

struct DiscriminatorSample {
  std::vector<Response> probe_responses;
  Origin label;

  friend bool operator==(const DiscriminatorSample&, const DiscriminatorSample&) = default;
};

struct DiscriminatorDataset {
  std::vector<Challenge> probe_batch;  ///< may be empty when loaded from a file
  std::size_t width = 0;
  std::vector<DiscriminatorSample> samples;  ///< rounds in order: Authentic then Cloned
};

/// Answers one challenge; the engine carries any randomness of the answer.
using ResponseSource = std::function<Response(std::span<const std::uint8_t>, Rng&)>;

inline ResponseSource device_source(const PufInstance& puf) {
  return [&puf](std::span<const std::uint8_t> c, Rng& rng) { return puf.evaluate(c, rng); };
}

enum class CloneResponse {
  Sampled,   ///< +1 with probability predict_proba
  Predicted  ///< the hard prediction
};

inline ResponseSource clone_source(const ClonedModel& clone, CloneResponse mode = CloneResponse::Sampled) {
  if (mode == CloneResponse::Predicted)
    return [&clone](std::span<const std::uint8_t> c, Rng&) { return clone.respond(c); };
  return [&clone](std::span<const std::uint8_t> c, Rng& rng) {
    return uniform01(rng) < clone.proba(c) ? 1 : -1;
  };
}

/// Synthetic clone: the device's noiseless answer, flipped with probability `rate`.
inline ResponseSource bit_flip_source(const PufInstance& puf, double rate) {
  if (rate < 0.0 || rate > 1.0) throw InvalidArgument("flip rate must lie in [0, 1]");
  return [&puf, rate](std::span<const std::uint8_t> c, Rng& rng) {
    const Response r = puf.evaluate(c);
    return uniform01(rng) < rate ? -r : r;
  };
}

/// How the verifier picks its probe batch.
enum class ProbeSelection {
  Uniform,   ///< uniform random challenges
  LowMargin  ///< the least stable challenges of a uniform candidate pool
};

inline std::string_view probe_selection_name(ProbeSelection p) {
  return p == ProbeSelection::Uniform ? "uniform" : "low-margin";
}

inline ProbeSelection parse_probe_selection(std::string_view s) {
  if (s == "uniform") return ProbeSelection::Uniform;
  if (s == "low-margin") return ProbeSelection::LowMargin;
  throw InvalidArgument("unknown probe selection '" + std::string(s) + "'");
}

/// Distance of the device's response from flipping: the smallest |delay
/// difference| over its chains. Only the device owner can compute this.
inline double response_margin(const PufInstance& puf, std::span<const std::uint8_t> c) {
  double m = std::numeric_limits<double>::infinity();
  for (double d : puf.chain_deltas(c)) m = std::min(m, std::abs(d));
  return m;
}

inline constexpr std::size_t kLowMarginPoolFactor = 64;

/// Probe batch of `width` challenges, none of which occurs in `exclude`.
/// LowMargin draws kLowMarginPoolFactor * width candidates and keeps the
/// `width` with the smallest response margin, in draw order.
inline std::vector<Challenge> make_probe_batch(const PufInstance& puf, std::size_t width,
                                               std::span<const Challenge> exclude, std::uint64_t seed,
                                               ProbeSelection selection = ProbeSelection::Uniform) {
  std::unordered_set<std::string> seen;
  for (const auto& c : exclude) seen.insert(challenge_key(c));
  Rng rng = make_rng(seed);
  const double space = std::ldexp(1.0, std::min(puf.stages(), 62));
  const double free = space - static_cast<double>(seen.size());
  if (free < static_cast<double>(width))
    throw InvalidArgument("cannot draw a probe batch disjoint from the training challenges");
  std::size_t wanted = selection == ProbeSelection::Uniform ? width : width * kLowMarginPoolFactor;
  if (static_cast<double>(wanted) > free) wanted = static_cast<std::size_t>(free);
  std::vector<Challenge> pool;
  for (std::size_t guard = 0; pool.size() < wanted; ++guard) {
    if (guard > 1000 * (wanted + exclude.size()))
      throw InvalidArgument("cannot draw a probe batch disjoint from the training challenges");
    Challenge c = random_challenge(puf.stages(), rng);
    if (!seen.insert(challenge_key(c)).second) continue;
    pool.push_back(std::move(c));
  }
  if (selection == ProbeSelection::Uniform) return pool;

  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) ranked.emplace_back(response_margin(puf, pool[i]), i);
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(width), ranked.end());
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < width; ++i) keep.push_back(ranked[i].second);
  std::sort(keep.begin(), keep.end());
  std::vector<Challenge> batch;
  for (std::size_t i : keep) batch.push_back(std::move(pool[i]));
  return batch;
}

inline DiscriminatorDataset build_discriminator_dataset(const PufInstance& original, const ResponseSource& clone,
                                                        std::size_t batch_width, std::size_t batch_count,
                                                        std::uint64_t seed,
                                                        std::span<const Challenge> exclude = {},
                                                        ProbeSelection selection = ProbeSelection::Uniform) {
  if (batch_width < 1) throw InvalidArgument("batch width must be >= 1");
  if (batch_count < 2) throw InvalidArgument("batch count must be >= 2");
  DiscriminatorDataset ds;
  ds.width = batch_width;
  ds.probe_batch = make_probe_batch(original, batch_width, exclude, derive_seed(seed, "disc-probes"), selection);
  ds.samples.reserve(2 * batch_count);
  for (std::size_t round = 0; round < batch_count; ++round) {
    Rng device_rng = make_rng(derive_seed(seed, "disc-device", round));
    Rng clone_rng = make_rng(derive_seed(seed, "disc-clone", round));
    DiscriminatorSample a{{}, Origin::Authentic}, b{{}, Origin::Cloned};
    a.probe_responses.reserve(batch_width);
    b.probe_responses.reserve(batch_width);
    for (const auto& c : ds.probe_batch) {
      a.probe_responses.push_back(original.evaluate(c, device_rng));
      b.probe_responses.push_back(clone(c, clone_rng));
    }
    ds.samples.push_back(std::move(a));
    ds.samples.push_back(std::move(b));
  }
  return ds;
}

/// Overload for learned clones; checks the clone reads challenges of this width.
inline DiscriminatorDataset build_discriminator_dataset(const PufInstance& original, const ClonedModel& clone,
                                                        std::size_t batch_width, std::size_t batch_count,
                                                        std::uint64_t seed, std::span<const Challenge> exclude = {},
                                                        CloneResponse mode = CloneResponse::Sampled,
                                                        ProbeSelection selection = ProbeSelection::Uniform) {
  if (clone.stages != original.stages() ||
      clone.learner.dim() != feature_dim(clone.features, static_cast<std::size_t>(original.stages())))
    throw DimensionMismatch("clone input width is incompatible with the device's challenge encoding");
  return build_discriminator_dataset(original, clone_source(clone, mode), batch_width, batch_count, seed, exclude,
                                     selection);
}

struct DiscriminatorModel {
  Learner learner;
  std::vector<Challenge> probe_batch;
  std::size_t width = 0;
  double threshold = 0.5;

  /// Probability that the vector came from the authentic device.
  double score(std::span<const Response> probe_responses) const {
    if (probe_responses.size() != width)
      throw DimensionMismatch("response vector has width " + std::to_string(probe_responses.size()) +
                              ", discriminator expects " + std::to_string(width));
    std::vector<double> x(probe_responses.begin(), probe_responses.end());
    return learner.predict_proba(x);
  }

  Origin decide(std::span<const Response> probe_responses) const {
    return score(probe_responses) >= threshold ? Origin::Authentic : Origin::Cloned;
  }
};

struct DiscriminatorFit {
  DiscriminatorModel model;
  double heldout_accuracy = 0.0;
  double mean_score_authentic = 0.0;  ///< over held-out Authentic rows
  double mean_score_cloned = 0.0;     ///< over held-out Cloned rows
  std::size_t train_samples = 0;
  std::size_t heldout_samples = 0;
  double wall_time_seconds = 0.0;
};

inline std::vector<double> to_features(const DiscriminatorSample& s) {
  return {s.probe_responses.begin(), s.probe_responses.end()};
}

/// Trains on a share of the rounds and evaluates on the rest. Samples are
/// paired by round (Authentic, Cloned), so a split never separates a pair.
/// Without pairing (odd count or unordered labels) rows are split individually.
inline DiscriminatorFit train_discriminator(const DiscriminatorDataset& ds, LearnerKind kind,
                                            const Hyperparameters& hyper, std::uint64_t seed,
                                            double holdout_fraction = 0.5) {
  if (ds.samples.empty()) throw InvalidArgument("discriminator dataset is empty");
  const bool has_auth = std::any_of(ds.samples.begin(), ds.samples.end(),
                                    [](const auto& s) { return s.label == Origin::Authentic; });
  const bool has_clone = std::any_of(ds.samples.begin(), ds.samples.end(),
                                     [](const auto& s) { return s.label == Origin::Cloned; });
  if (!has_auth || !has_clone) throw InvalidArgument("discriminator training needs both labels");
  for (const auto& s : ds.samples)
    if (s.probe_responses.size() != ds.width) throw DimensionMismatch("sample width differs from dataset width");

  const bool paired = ds.samples.size() % 2 == 0 && [&] {
    for (std::size_t i = 0; i < ds.samples.size(); i += 2)
      if (ds.samples[i].label != Origin::Authentic || ds.samples[i + 1].label != Origin::Cloned) return false;
    return true;
  }();
  const std::size_t unit = paired ? 2 : 1;
  const std::size_t groups = ds.samples.size() / unit;
  if (groups < 2) throw InvalidArgument("need at least two rounds to hold some out");
  std::vector<std::size_t> order(groups);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(derive_seed(seed, "disc-split"));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  auto held = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(groups)));
  held = std::clamp<std::size_t>(held, 1, groups - 1);

  LabeledSet train_set, eval_set;
  for (std::size_t g = 0; g < groups; ++g) {
    auto& dst = g < groups - held ? train_set : eval_set;
    for (std::size_t u = 0; u < unit; ++u) {
      const auto& s = ds.samples[order[g] * unit + u];
      dst.add(to_features(s), origin_label(s.label));
    }
  }

  const auto start = std::chrono::steady_clock::now();
  Learner learner = train(kind, train_set, hyper, derive_seed(seed, "disc-learner"));
  const auto stop = std::chrono::steady_clock::now();

  DiscriminatorFit fit{DiscriminatorModel{std::move(learner), ds.probe_batch, ds.width, 0.5}, 0.0, 0.0, 0.0,
                       train_set.size(), eval_set.size(), std::chrono::duration<double>(stop - start).count()};
  std::size_t hits = 0, n_auth = 0, n_clone = 0;
  double sum_auth = 0.0, sum_clone = 0.0;
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    const double p = fit.model.learner.predict_proba(eval_set.x.row(i));
    const int decision = p >= fit.model.threshold ? 1 : -1;
    hits += decision == eval_set.y[i];
    if (eval_set.y[i] == 1) {
      sum_auth += p;
      ++n_auth;
    } else {
      sum_clone += p;
      ++n_clone;
    }
  }
  fit.heldout_accuracy = static_cast<double>(hits) / static_cast<double>(eval_set.size());
  fit.mean_score_authentic = n_auth ? sum_auth / static_cast<double>(n_auth) : 0.0;
  fit.mean_score_cloned = n_clone ? sum_clone / static_cast<double>(n_clone) : 0.0;
  return fit;
}

// ---------------------------------------------------------------------------
// pufdisc v1: header "pufdisc v1 width=<w> count=<m>", then m lines
// "<comma-separated +-1 vector> <authentic|cloned>".

inline void write_discriminator_dataset(std::ostream& out, const DiscriminatorDataset& ds) {
  out << "pufdisc v1 width=" << ds.width << " count=" << ds.samples.size() << '\n';
  for (const auto& s : ds.samples) {
    for (std::size_t i = 0; i < s.probe_responses.size(); ++i)
      out << (i ? "," : "") << (s.probe_responses[i] > 0 ? "+1" : "-1");
    out << (s.label == Origin::Authentic ? " authentic" : " cloned") << '\n';
  }
}

inline DiscriminatorDataset read_discriminator_dataset(std::istream& in) {
  const auto lines = text::read_lines(in);
  if (lines.empty()) throw ParseError(1, "empty discriminator file");
  const auto tokens = text::split(lines[0], ' ');
  if (tokens.size() < 2 || tokens[0] != "pufdisc" || tokens[1] != "v1")
    throw ParseError(1, "expected 'pufdisc v1' header");
  const auto f = text::header_fields(tokens, 2, 1);
  DiscriminatorDataset ds;
  ds.width = text::parse_or_throw<std::size_t>(text::require_field(f, "width", 1), 1, "width");
  const auto count = text::parse_or_throw<std::size_t>(text::require_field(f, "count", 1), 1, "count");
  if (lines.size() - 1 != count)
    throw ParseError(lines.size() - 1 < count ? lines.size() + 1 : count + 2, "header declares count=" + std::to_string(count) + " but file has " +
                            std::to_string(lines.size() - 1) + " data lines");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto parts = text::split(lines[i], ' ');
    if (parts.size() != 2) throw ParseError(i + 1, "expected '<vector> <authentic|cloned>'");
    DiscriminatorSample s;
    if (parts[1] == "authentic")
      s.label = Origin::Authentic;
    else if (parts[1] == "cloned")
      s.label = Origin::Cloned;
    else
      throw ParseError(i + 1, "label must be authentic or cloned");
    for (auto v : text::split(parts[0], ',')) {
      if (v == "+1")
        s.probe_responses.push_back(1);
      else if (v == "-1")
        s.probe_responses.push_back(-1);
      else
        throw ParseError(i + 1, "vector entries must be +1 or -1");
    }
    if (s.probe_responses.size() != ds.width) throw ParseError(i + 1, "vector width differs from header");
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Grid search over (attack model, discriminator model)

struct GridSettings {
  std::size_t train_count = 5000;
  std::size_t test_count = 2000;
  std::size_t batch_width = 64;
  std::size_t batch_count = 1000;
  double holdout_fraction = 0.5;
  CloneResponse clone_response = CloneResponse::Sampled;
  ProbeSelection probe_selection = ProbeSelection::LowMargin;
  CloneOptions clone_options;
  Hyperparameters disc_hyper;
  int threads = 1;
};

struct GridCell {
  LearnerKind attack = LearnerKind::LR;
  LearnerKind discriminator = LearnerKind::LR;
  double cloning_accuracy = 0.0;
  double discriminator_accuracy = 0.0;
  double clone_time_seconds = 0.0;
  double discriminator_time_seconds = 0.0;

  /// Diagonal cells: one model family does both jobs.
  bool single_model() const noexcept { return attack == discriminator; }

  /// "NN(CM)+LR(DM)" or, on the diagonal, "RF(CM+DM)".
  std::string label() const {
    if (single_model()) return learner_tag(attack) + "(CM+DM)";
    return learner_tag(attack) + "(CM)+" + learner_tag(discriminator) + "(DM)";
  }
};

struct GridSearchReport {
  std::array<GridCell, 9> cells;  ///< index = 3 * attack + discriminator, kinds in LR, RF, NN order

  const GridCell& at(LearnerKind attack, LearnerKind disc) const {
    return cells[3 * static_cast<std::size_t>(attack) + static_cast<std::size_t>(disc)];
  }
  const GridCell& best_cloning() const {
    return *std::max_element(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
      return a.cloning_accuracy < b.cloning_accuracy;
    });
  }
  const GridCell& best_discriminator() const {
    return *std::max_element(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
      return a.discriminator_accuracy < b.discriminator_accuracy;
    });
  }
};

/// Every cell's randomness is derived from (seed, cell), so the report does
/// not depend on thread count or execution order.
inline GridSearchReport grid_search(const PufInstance& target, const GridSettings& s, std::uint64_t seed) {
  std::array<std::optional<CloneResult>, 3> clones;
  parallel_for(3, s.threads, [&](std::size_t a) {
    clones[a] = clone(target, kAllLearnerKinds[a], s.train_count, s.test_count, derive_seed(seed, "grid-clone"),
                      s.clone_options);
  });
  GridSearchReport report;
  parallel_for(9, s.threads, [&](std::size_t cell) {
    const std::size_t a = cell / 3, d = cell % 3;
    const CloneResult& cr = *clones[a];
    const auto ds = build_discriminator_dataset(target, cr.clone, s.batch_width, s.batch_count,
                                                derive_seed(seed, "grid-disc-data", cell), cr.training_challenges,
                                                s.clone_response, s.probe_selection);
    const auto fit = train_discriminator(ds, kAllLearnerKinds[d], s.disc_hyper,
                                         derive_seed(seed, "grid-disc", cell), s.holdout_fraction);
    report.cells[cell] = GridCell{kAllLearnerKinds[a], kAllLearnerKinds[d], cr.test_accuracy,
                                  fit.heldout_accuracy, cr.wall_time_seconds, fit.wall_time_seconds};
  });
  return report;
}

}  // namespace pufsec
