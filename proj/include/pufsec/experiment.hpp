#pragma once

// Experiment configuration and the grid / brute-force drivers behind the CLI.
//
// Config files are flat "key = value" lines with section prefixes
// (puf., run., lr., nn., rf.). '#' starts a comment. Unknown keys and bad
// values are all collected and reported together.

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pufsec/attacks.hpp"
#include "pufsec/discriminator.hpp"
#include "pufsec/error.hpp"
#include "pufsec/parallel.hpp"
#include "pufsec/puf.hpp"
#include "pufsec/text.hpp"

namespace pufsec {

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s = "invalid configuration:";
    for (const auto& line : p) s += "\n  " + line;
    return s;
  }
  std::vector<std::string> problems_;
};

struct ExperimentConfig {
  // puf.
  std::vector<std::string> families{"apuf"};
  int stages = 64;
  double noise = 0.0;

  // run.
  std::uint64_t seed = 1;
  int repeats = 5;
  std::size_t train = 5000;
  std::size_t test = 2000;
  std::size_t batch_width = 64;
  std::size_t batch_count = 1000;
  double holdout = 0.5;
  bool parity_for_all = false;
  CloneResponse clone_response = CloneResponse::Sampled;
  ProbeSelection probe_selection = ProbeSelection::LowMargin;
  LearnerKind brute_kind = LearnerKind::NN;
  std::size_t probes = 100;
  std::size_t instances = 200;       ///< training instances per class
  std::size_t eval_instances = 200;  ///< held-out instances per class
  ProbeDesign probe_design = ProbeDesign::Clustered;
  std::map<std::string, StageTwoCloner, std::less<>> stage_two;  ///< overrides per family

  Hyperparameters hyper;

  std::vector<ArchSpec> arch_specs() const {
    std::vector<ArchSpec> out;
    for (const auto& f : families) out.push_back(parse_family_label(f, stages));
    return out;
  }

  /// Stage-2 cloner for a family: explicit override, else LR on parity
  /// features for the arbiter PUF and NN on parity features otherwise.
  StageTwoCloner stage_two_for(const std::string& family) const {
    if (auto it = stage_two.find(family); it != stage_two.end()) return it->second;
    StageTwoCloner c;
    c.hyper = hyper;
    c.features = FeatureMode::Parity;
    c.kind = family == "apuf" ? LearnerKind::LR : LearnerKind::NN;
    return c;
  }

  CloneOptions clone_options() const {
    CloneOptions o;
    o.hyper = hyper;
    o.parity_for_all = parity_for_all;
    return o;
  }

  GridSettings grid_settings() const {
    GridSettings g;
    g.train_count = train;
    g.test_count = test;
    g.batch_width = batch_width;
    g.batch_count = batch_count;
    g.holdout_fraction = holdout;
    g.clone_response = clone_response;
    g.probe_selection = probe_selection;
    g.clone_options = clone_options();
    g.disc_hyper = hyper;
    return g;
  }
};

namespace detail {

class ConfigReader {
 public:
  std::vector<std::string> problems;

  template <typename T>
  void number(const std::string& key, const std::string& v, T& out, T lo) {
    T tmp{};
    if (!text::parse_number(v, tmp))
      problems.push_back(key + ": '" + v + "' is not a valid number");
    else if (tmp < lo)
      problems.push_back(key + ": must be >= " + std::to_string(lo));
    else
      out = tmp;
  }

  void boolean(const std::string& key, const std::string& v, bool& out) {
    if (v == "true" || v == "1")
      out = true;
    else if (v == "false" || v == "0")
      out = false;
    else
      problems.push_back(key + ": expected true or false, got '" + v + "'");
  }

  template <typename F>
  void parsed(const std::string& key, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      problems.push_back(key + ": " + e.what());
    }
  }
};

}  // namespace detail

/// Parses and validates a config; throws ConfigError listing every problem.
inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  detail::ConfigReader r;
  std::map<std::string, std::string> stage_two_raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      r.problems.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key(text::trim(body.substr(0, eq)));
    const std::string v(text::trim(body.substr(eq + 1)));
    auto& h = cfg.hyper;

    if (key == "puf.families") {
      cfg.families.clear();
      for (auto f : text::split(v, ',')) cfg.families.emplace_back(text::trim(f));
    } else if (key == "puf.stages") r.number(key, v, cfg.stages, 2);
    else if (key == "puf.noise") r.number(key, v, cfg.noise, 0.0);
    else if (key == "run.seed") r.number(key, v, cfg.seed, std::uint64_t{0});
    else if (key == "run.repeats") r.number(key, v, cfg.repeats, 1);
    else if (key == "run.train") r.number(key, v, cfg.train, std::size_t{1});
    else if (key == "run.test") r.number(key, v, cfg.test, std::size_t{1});
    else if (key == "run.batch_width") r.number(key, v, cfg.batch_width, std::size_t{1});
    else if (key == "run.batch_count") r.number(key, v, cfg.batch_count, std::size_t{2});
    else if (key == "run.holdout") r.number(key, v, cfg.holdout, 0.0);
    else if (key == "run.features") {
      if (v == "parity") cfg.parity_for_all = true;
      else if (v == "default") cfg.parity_for_all = false;
      else r.problems.push_back(key + ": expected 'default' or 'parity', got '" + v + "'");
    } else if (key == "run.clone_response") {
      if (v == "sampled") cfg.clone_response = CloneResponse::Sampled;
      else if (v == "predicted") cfg.clone_response = CloneResponse::Predicted;
      else r.problems.push_back(key + ": expected 'sampled' or 'predicted', got '" + v + "'");
    } else if (key == "run.probe_selection") r.parsed(key, [&] { cfg.probe_selection = parse_probe_selection(v); });
    else if (key == "run.brute_kind") r.parsed(key, [&] { cfg.brute_kind = parse_learner_kind(v); });
    else if (key == "run.probes") r.number(key, v, cfg.probes, std::size_t{1});
    else if (key == "run.instances") r.number(key, v, cfg.instances, std::size_t{1});
    else if (key == "run.eval_instances") r.number(key, v, cfg.eval_instances, std::size_t{1});
    else if (key == "run.probe_design") r.parsed(key, [&] { cfg.probe_design = parse_probe_design(v); });
    else if (key.starts_with("run.stage2.")) stage_two_raw[key.substr(11)] = v;
    else if (key == "lr.max_epochs") r.number(key, v, h.lr.max_epochs, 1);
    else if (key == "lr.tolerance") r.number(key, v, h.lr.tolerance, 0.0);
    else if (key == "lr.eta_plus") r.number(key, v, h.lr.eta_plus, 1.0);
    else if (key == "lr.eta_minus") r.number(key, v, h.lr.eta_minus, 0.0);
    else if (key == "lr.delta0") r.number(key, v, h.lr.delta0, 0.0);
    else if (key == "lr.delta_max") r.number(key, v, h.lr.delta_max, 0.0);
    else if (key == "lr.delta_min") r.number(key, v, h.lr.delta_min, 0.0);
    else if (key == "nn.hidden") r.number(key, v, h.nn.hidden, 0);
    else if (key == "nn.learning_rate") r.number(key, v, h.nn.learning_rate, 0.0);
    else if (key == "nn.batch") r.number(key, v, h.nn.batch, 1);
    else if (key == "nn.epochs") r.number(key, v, h.nn.epochs, 0);
    else if (key == "rf.trees") r.number(key, v, h.rf.trees, 1);
    else if (key == "rf.max_depth") r.number(key, v, h.rf.max_depth, 0);
    else if (key == "rf.mtry") r.number(key, v, h.rf.mtry, 0);
    else if (key == "rf.bootstrap") r.boolean(key, v, h.rf.bootstrap);
    else r.problems.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }

  if (cfg.families.empty()) r.problems.push_back("puf.families: at least one family is required");
  std::vector<std::string> seen;
  for (const auto& f : cfg.families) {
    try {
      validate(parse_family_label(f, cfg.stages));
    } catch (const Error& e) {
      r.problems.push_back("puf.families: '" + f + "': " + e.what());
    }
    if (std::find(seen.begin(), seen.end(), f) != seen.end())
      r.problems.push_back("puf.families: '" + f + "' is listed twice");
    seen.push_back(f);
  }
  if (cfg.holdout <= 0.0 || cfg.holdout >= 1.0) r.problems.push_back("run.holdout: must lie strictly between 0 and 1");

  // "run.stage2.<family> = <kind>[:<features>]"
  for (const auto& [family, spec] : stage_two_raw) {
    const std::string key = "run.stage2." + family;
    r.parsed(key, [&] {
      parse_family_label(family, cfg.stages);
      StageTwoCloner c;
      c.hyper = cfg.hyper;
      const auto parts = text::split(spec, ':');
      c.kind = parse_learner_kind(text::trim(parts[0]));
      c.features = parts.size() > 1 ? parse_feature_mode(text::trim(parts[1])) : default_feature_mode(c.kind);
      cfg.stage_two[family] = c;
    });
  }
  if (!r.problems.empty()) throw ConfigError(std::move(r.problems));
  return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& s) {
  std::istringstream in(s);
  return parse_config(in);
}

/// Extra checks for the brute-force driver.
inline void validate_for_brute(const ExperimentConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.families.size() < 2) problems.push_back("puf.families: brute-force classification needs >= 2 families");
  if (cfg.instances < 1 || cfg.eval_instances < 1)
    problems.push_back("run.instances / run.eval_instances: need >= 1 each (>= 2 instances per class overall)");
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

// ---------------------------------------------------------------------------
// Report formatting

inline std::string pct(double fraction) { return text::format_fixed(100.0 * fraction, 2); }

/// One grid cell of one repeat.
struct GridRow {
  std::string family;
  int repeat = 0;
  GridCell cell;
};

struct GridRun {
  std::vector<GridRow> rows;  ///< family-major, then repeat, then cell
};

inline PufInstance experiment_target(const ExperimentConfig& cfg, const std::string& family, int repeat) {
  return create_instance(parse_family_label(family, cfg.stages), cfg.noise,
                         derive_seed(cfg.seed, "target/" + family, static_cast<std::uint64_t>(repeat)));
}

/// Runs grid_search for every (family, repeat); jobs run in parallel but each
/// is seeded by its own key, so rows are identical for any thread count.
inline GridRun run_grid(const ExperimentConfig& cfg, int threads) {
  const std::size_t reps = static_cast<std::size_t>(cfg.repeats);
  const std::size_t jobs = cfg.families.size() * reps;
  std::vector<GridSearchReport> reports(jobs);
  const GridSettings settings = cfg.grid_settings();
  parallel_for(jobs, threads, [&](std::size_t j) {
    const auto& family = cfg.families[j / reps];
    const int repeat = static_cast<int>(j % reps);
    const PufInstance target = experiment_target(cfg, family, repeat);
    reports[j] = grid_search(target, settings, derive_seed(cfg.seed, "grid/" + family, static_cast<std::uint64_t>(repeat)));
  });
  GridRun run;
  for (std::size_t j = 0; j < jobs; ++j)
    for (const auto& cell : reports[j].cells)
      run.rows.push_back({cfg.families[j / reps], static_cast<int>(j % reps), cell});
  return run;
}

inline constexpr const char* kGridHeader =
    "architecture,repeat,cm,dm,config,cloning_accuracy_pct,cloning_error_pct,discriminator_accuracy_pct,"
    "discriminator_error_pct";

inline void write_grid_csv(std::ostream& out, const std::vector<GridRow>& rows) {
  out << kGridHeader << '\n';
  for (const auto& r : rows)
    out << r.family << ',' << r.repeat << ',' << learner_tag(r.cell.attack) << ',' << learner_tag(r.cell.discriminator)
        << ',' << r.cell.label() << ',' << pct(r.cell.cloning_accuracy) << ',' << pct(1.0 - r.cell.cloning_accuracy)
        << ',' << pct(r.cell.discriminator_accuracy) << ',' << pct(1.0 - r.cell.discriminator_accuracy) << '\n';
}

inline void write_timing_csv(std::ostream& out, const std::vector<GridRow>& rows) {
  out << "architecture,repeat,cm,dm,clone_time_s,discriminator_time_s\n";
  for (const auto& r : rows)
    out << r.family << ',' << r.repeat << ',' << learner_tag(r.cell.attack) << ',' << learner_tag(r.cell.discriminator)
        << ',' << text::format_fixed(r.cell.clone_time_seconds, 4) << ','
        << text::format_fixed(r.cell.discriminator_time_seconds, 4) << '\n';
}

/// Per-architecture summary. Cells are first averaged over repeats; each family
/// then reports its best attack cell's error and its best discriminator
/// cell's error. With several families an "average" row follows.
struct SummaryRow {
  std::string family;
  std::string best_attack;
  double cloning_error = 0.0;
  std::string best_discriminator;
  double discriminator_error = 0.0;
  int repeats = 0;
};

inline std::vector<SummaryRow> summarize(const std::vector<GridRow>& rows) {
  std::vector<std::string> order;
  struct Acc {
    double clone = 0.0, disc = 0.0;
    int n = 0;
    GridCell cell;
  };
  std::map<std::string, std::array<Acc, 9>> acc;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.family) == order.end()) order.push_back(r.family);
    auto& a = acc[r.family][3 * static_cast<std::size_t>(r.cell.attack) + static_cast<std::size_t>(r.cell.discriminator)];
    a.clone += r.cell.cloning_accuracy;
    a.disc += r.cell.discriminator_accuracy;
    ++a.n;
    a.cell = r.cell;
  }
  std::vector<SummaryRow> out;
  for (const auto& family : order) {
    const auto& cells = acc[family];
    SummaryRow s;
    s.family = family;
    double best_clone = -1.0, best_disc = -1.0;
    for (const auto& a : cells) {
      if (a.n == 0) continue;
      s.repeats = a.n;
      if (a.clone / a.n > best_clone) {
        best_clone = a.clone / a.n;
        s.best_attack = learner_tag(a.cell.attack) + "(CM)";
      }
      if (a.disc / a.n > best_disc) {
        best_disc = a.disc / a.n;
        s.best_discriminator = a.cell.label();
      }
    }
    s.cloning_error = 1.0 - best_clone;
    s.discriminator_error = 1.0 - best_disc;
    out.push_back(s);
  }
  return out;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "architecture,best_attack,cloning_error_pct,best_discriminator,discriminator_error_pct,repeats\n";
  double ce = 0.0, de = 0.0;
  for (const auto& r : rows) {
    out << r.family << ',' << r.best_attack << ',' << pct(r.cloning_error) << ',' << r.best_discriminator << ','
        << pct(r.discriminator_error) << ',' << r.repeats << '\n';
    ce += r.cloning_error;
    de += r.discriminator_error;
  }
  if (rows.size() > 1) {
    const double n = static_cast<double>(rows.size());
    out << "average,," << pct(ce / n) << ",," << pct(de / n) << ",\n";
  }
}

/// Reads rows written by write_grid_csv (percentages back to fractions).
inline std::vector<GridRow> read_grid_csv(std::istream& in) {
  const auto lines = text::read_lines(in);
  if (lines.empty() || lines[0] != kGridHeader) throw ParseError(1, "not a grid CSV (header mismatch)");
  std::vector<GridRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = text::split(lines[i], ',');
    if (f.size() != 9) throw ParseError(i + 1, "expected 9 columns");
    GridRow r;
    r.family = std::string(f[0]);
    r.repeat = text::parse_or_throw<int>(f[1], i + 1, "repeat");
    try {
      r.cell.attack = parse_learner_kind(f[2]);
      r.cell.discriminator = parse_learner_kind(f[3]);
    } catch (const InvalidArgument& e) {
      throw ParseError(i + 1, e.what());
    }
    r.cell.cloning_accuracy = text::parse_or_throw<double>(f[5], i + 1, "percentage") / 100.0;
    r.cell.discriminator_accuracy = text::parse_or_throw<double>(f[7], i + 1, "percentage") / 100.0;
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Brute-force baseline driver

struct BruteRow {
  std::string family;
  double classification_rate = 0.0;
  double cloning_rate = 0.0;  ///< stage-2 accuracy
  double combined = 0.0;
  double direct = 0.0;        ///< best architecture-independent clone accuracy
  double misrouted = 0.0;     ///< fraction of repeats whose stage 1 picked the wrong family
};

struct BruteRun {
  std::vector<BruteRow> rows;
  double overall_rate = 0.0;
  std::size_t classes = 0;
};

struct BruteOptions {
  bool shuffle_labels = false;
  bool direct = true;  ///< also run the architecture-independent attack on each target
};

/// Instances of every configured family for one repeat:
/// run.instances + run.eval_instances per class.
inline std::vector<std::vector<PufInstance>> brute_population(const ExperimentConfig& cfg, int repeat) {
  const std::size_t per_class = cfg.instances + cfg.eval_instances;
  std::vector<std::vector<PufInstance>> population(cfg.families.size());
  for (std::size_t k = 0; k < cfg.families.size(); ++k) {
    const ArchSpec spec = parse_family_label(cfg.families[k], cfg.stages);
    for (std::size_t i = 0; i < per_class; ++i)
      population[k].push_back(create_instance(spec, cfg.noise,
                                              derive_seed(cfg.seed, "population/" + cfg.families[k],
                                                          static_cast<std::uint64_t>(repeat) * per_class + i)));
  }
  return population;
}

inline ArchClassifierResult brute_classifier(const ExperimentConfig& cfg, int repeat, int threads,
                                             bool shuffle_labels = false) {
  ClassifyOptions copt;
  copt.hyper = cfg.hyper;
  copt.design = cfg.probe_design;
  copt.holdout_fraction =
      static_cast<double>(cfg.eval_instances) / static_cast<double>(cfg.instances + cfg.eval_instances);
  copt.shuffle_labels = shuffle_labels;
  copt.threads = threads;
  return classify_architecture(brute_population(cfg, repeat), cfg.probes, cfg.brute_kind,
                               derive_seed(cfg.seed, "classifier", static_cast<std::uint64_t>(repeat)), copt);
}

inline BruteRun run_brute(const ExperimentConfig& cfg, int threads, const BruteOptions& opt = {}) {
  validate_for_brute(cfg);
  const std::size_t K = cfg.families.size();
  BruteRun run;
  run.classes = K;
  run.rows.resize(K);
  for (std::size_t k = 0; k < K; ++k) run.rows[k].family = cfg.families[k];

  for (int rep = 0; rep < cfg.repeats; ++rep) {
    const auto urep = static_cast<std::uint64_t>(rep);
    const auto cls = brute_classifier(cfg, rep, threads, opt.shuffle_labels);
    run.overall_rate += cls.classification_rate / cfg.repeats;

    ClonerRegistry registry;
    for (const auto& f : cfg.families) registry[f] = cfg.stage_two_for(f);

    std::vector<BruteForceScore> scores(K);
    std::vector<std::array<double, 3>> direct(K, std::array<double, 3>{});
    const std::size_t per_target_jobs = opt.direct ? 4 : 1;
    parallel_for(K * per_target_jobs, threads, [&](std::size_t j) {
      const std::size_t k = j / per_target_jobs, part = j % per_target_jobs;
      const PufInstance target = create_instance(parse_family_label(cfg.families[k], cfg.stages), cfg.noise,
                                                 derive_seed(cfg.seed, "brute-target/" + cfg.families[k], urep));
      // every attack on a target sees the same eavesdropped CRPs
      const std::uint64_t attack_seed = derive_seed(cfg.seed, "brute-attack/" + cfg.families[k], urep);
      if (part == 0)
        scores[k] = brute_force_attack(target, cls, registry, cfg.train, cfg.test, attack_seed);
      else
        direct[k][part - 1] =
            clone(target, kAllLearnerKinds[part - 1], cfg.train, cfg.test, attack_seed, cfg.clone_options())
                .test_accuracy;
    });
    for (std::size_t k = 0; k < K; ++k) {
      auto& row = run.rows[k];
      const double n = static_cast<double>(cfg.repeats);
      row.classification_rate += scores[k].classification_rate / n;
      row.cloning_rate += scores[k].per_arch_cloning_rate / n;
      row.combined += scores[k].combined / n;
      row.direct += *std::max_element(direct[k].begin(), direct[k].end()) / n;
      row.misrouted += (scores[k].misrouted ? 1.0 : 0.0) / n;
    }
  }
  return run;
}

inline void write_brute_csv(std::ostream& out, const BruteRun& run) {
  out << "architecture,classification_rate_pct,cloning_rate_pct,combined_pct,direct_clone_pct,misrouted_pct\n";
  for (const auto& r : run.rows)
    out << r.family << ',' << pct(r.classification_rate) << ',' << pct(r.cloning_rate) << ',' << pct(r.combined) << ','
        << pct(r.direct) << ',' << pct(r.misrouted) << '\n';
  out << "overall," << pct(run.overall_rate) << ",,,,\n";
  out << "chance," << pct(1.0 / static_cast<double>(run.classes)) << ",,,,\n";
}

}  // namespace pufsec
