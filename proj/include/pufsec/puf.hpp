#pragma once

// Strong-PUF simulation under the additive delay model.
//
// A chain with weights w (length n+1) answers challenge c with
// sign(w . phi(g(c)) + noise), where phi is the parity transform and g the
// per-chain input network (identity except for the lightweight PUF). XOR
// variants multiply the +-1 chain answers.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pufsec/error.hpp"
#include "pufsec/rng.hpp"

namespace pufsec {

using Challenge = std::vector<std::uint8_t>;

/// Response bits are encoded as -1 / +1. Zero is never produced.
using Response = int;

enum class Architecture { Arbiter, Xor, Lightweight };

inline constexpr int kMaxChains = 6;

struct ArchSpec {
  Architecture arch = Architecture::Arbiter;
  int stages = 64;
  int k = 1;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

inline std::string_view arch_name(Architecture a) {
  switch (a) {
    case Architecture::Arbiter: return "arbiter";
    case Architecture::Xor: return "xor";
    case Architecture::Lightweight: return "lw";
  }
  return "?";
}

inline Architecture parse_arch_name(std::string_view s) {
  if (s == "arbiter" || s == "apuf") return Architecture::Arbiter;
  if (s == "xor") return Architecture::Xor;
  if (s == "lw" || s == "lightweight") return Architecture::Lightweight;
  throw InvalidArgument("unknown architecture '" + std::string(s) + "'");
}

/// Short family label used in configs and reports: apuf, xor3, lw4, ...
inline std::string family_label(const ArchSpec& a) {
  switch (a.arch) {
    case Architecture::Arbiter: return "apuf";
    case Architecture::Xor: return "xor" + std::to_string(a.k);
    case Architecture::Lightweight: return "lw" + std::to_string(a.k);
  }
  return "?";
}

/// Inverse of family_label; the stage count is supplied separately.
inline ArchSpec parse_family_label(std::string_view s, int stages) {
  ArchSpec spec{Architecture::Arbiter, stages, 1};
  if (s == "apuf" || s == "arbiter") return spec;
  std::string_view digits;
  if (s.starts_with("xor")) {
    spec.arch = Architecture::Xor;
    digits = s.substr(3);
  } else if (s.starts_with("lw")) {
    spec.arch = Architecture::Lightweight;
    digits = s.substr(2);
  } else {
    throw InvalidArgument("unknown PUF family '" + std::string(s) + "'");
  }
  if (digits.size() != 1 || digits[0] < '0' || digits[0] > '9')
    throw InvalidArgument("bad chain count in family '" + std::string(s) + "'");
  spec.k = digits[0] - '0';
  return spec;
}

inline void validate(const ArchSpec& a) {
  if (a.stages < 2)
    throw InvalidArgument("stages must be >= 2, got " + std::to_string(a.stages));
  if (a.arch == Architecture::Arbiter) {
    if (a.k != 1) throw InvalidArgument("arbiter PUF requires k = 1");
  } else if (a.k < 2 || a.k > kMaxChains) {
    throw InvalidArgument(std::string(arch_name(a.arch)) + " PUF requires 2 <= k <= " +
                          std::to_string(kMaxChains) + ", got " + std::to_string(a.k));
  }
}

/// Challenge bits seen by chain `chain` of a lightweight PUF:
///   c'_i = c_{(i+l) mod n} xor c_{(i+l+1) mod n}   for i < n-1
///   c'_{n-1} = c_{(n-1+l) mod n}
inline void lightweight_map(std::span<const std::uint8_t> c, int chain,
                            std::span<std::uint8_t> out) {
  const std::size_t n = c.size();
  const std::size_t l = static_cast<std::size_t>(chain) % n;
  for (std::size_t i = 0; i + 1 < n; ++i)
    out[i] = c[(i + l) % n] ^ c[(i + l + 1) % n];
  out[n - 1] = c[(n - 1 + l) % n];
}

/// w . phi(c) computed with a running suffix product, O(n).
inline double delay_difference(std::span<const double> w, std::span<const std::uint8_t> c) {
  const std::size_t n = c.size();
  double sum = w[n];
  double parity = 1.0;
  for (std::size_t i = n; i-- > 0;) {
    parity *= c[i] ? -1.0 : 1.0;
    sum += w[i] * parity;
  }
  return sum;
}

inline Response sign_response(double x) { return x >= 0.0 ? 1 : -1; }

/// A simulated device. Immutable after construction; safe to share across threads.
class PufInstance {
 public:
  PufInstance(ArchSpec spec, std::vector<double> weights, double noise_sigma,
              std::uint64_t seed)
      : spec_(spec), weights_(std::move(weights)), noise_sigma_(noise_sigma), seed_(seed) {
    validate(spec_);
    if (noise_sigma_ < 0.0 || !std::isfinite(noise_sigma_))
      throw InvalidArgument("noise_sigma must be a finite value >= 0");
    if (weights_.size() != static_cast<std::size_t>(spec_.k) * row_length())
      throw DimensionMismatch("weight matrix must be k x (stages + 1)");
  }

  const ArchSpec& spec() const noexcept { return spec_; }
  Architecture arch() const noexcept { return spec_.arch; }
  int stages() const noexcept { return spec_.stages; }
  int chains() const noexcept { return spec_.k; }
  double noise_sigma() const noexcept { return noise_sigma_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t row_length() const noexcept { return static_cast<std::size_t>(spec_.stages) + 1; }

  std::span<const double> weights(int chain) const {
    return {weights_.data() + static_cast<std::size_t>(chain) * row_length(), row_length()};
  }
  std::span<const double> all_weights() const noexcept { return weights_; }

  /// Per-chain delay differences before the sign, without noise.
  std::vector<double> chain_deltas(std::span<const std::uint8_t> challenge) const {
    check_length(challenge);
    std::vector<double> out(static_cast<std::size_t>(spec_.k));
    if (spec_.arch == Architecture::Lightweight) {
      std::vector<std::uint8_t> mapped(challenge.size());
      for (int l = 0; l < spec_.k; ++l) {
        lightweight_map(challenge, l, mapped);
        out[l] = delay_difference(weights(l), mapped);
      }
    } else {
      for (int l = 0; l < spec_.k; ++l) out[l] = delay_difference(weights(l), challenge);
    }
    return out;
  }

  /// Noiseless response.
  Response evaluate(std::span<const std::uint8_t> challenge) const {
    Response r = 1;
    for (double d : chain_deltas(challenge)) r *= sign_response(d);
    return r;
  }

  /// Response with N(0, noise_sigma) added to each chain's delay difference.
  /// With noise_sigma == 0 no draws are consumed.
  Response evaluate(std::span<const std::uint8_t> challenge, Rng& noise) const {
    if (noise_sigma_ == 0.0) return evaluate(challenge);
    std::normal_distribution<double> eps(0.0, noise_sigma_);
    Response r = 1;
    for (double d : chain_deltas(challenge)) r *= sign_response(d + eps(noise));
    return r;
  }

 private:
  void check_length(std::span<const std::uint8_t> challenge) const {
    if (challenge.size() != static_cast<std::size_t>(spec_.stages))
      throw DimensionMismatch("challenge has " + std::to_string(challenge.size()) +
                              " bits, PUF has " + std::to_string(spec_.stages) + " stages");
  }

  ArchSpec spec_;
  std::vector<double> weights_;
  double noise_sigma_;
  std::uint64_t seed_;
};

/// Weights are i.i.d. N(0,1) from an engine seeded with `seed`, row by row.
inline PufInstance create_instance(ArchSpec spec, double noise_sigma, std::uint64_t seed) {
  validate(spec);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(spec.k) * (spec.stages + 1));
  for (double& x : w) x = normal(rng);
  return PufInstance(spec, std::move(w), noise_sigma, seed);
}

inline PufInstance create_instance(Architecture arch, int stages, int k, double noise_sigma,
                                   std::uint64_t seed) {
  return create_instance(ArchSpec{arch, stages, k}, noise_sigma, seed);
}

/// Uniform random challenge of `stages` bits.
inline Challenge random_challenge(int stages, Rng& rng) {
  Challenge c(static_cast<std::size_t>(stages));
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i % 64 == 0) word = rng();
    c[i] = static_cast<std::uint8_t>(word & 1U);
    word >>= 1;
  }
  return c;
}

inline std::string to_bitstring(std::span<const std::uint8_t> c) {
  std::string s(c.size(), '0');
  for (std::size_t i = 0; i < c.size(); ++i) s[i] = c[i] ? '1' : '0';
  return s;
}

struct CrpDataset {
  ArchSpec arch;
  std::uint64_t seed = 0;
  std::vector<Challenge> challenges;
  std::vector<Response> responses;

  int stages() const noexcept { return arch.stages; }
  std::size_t size() const noexcept { return challenges.size(); }
};

/// `count` challenges drawn uniformly (with replacement) from an engine
/// seeded with `seed`; evaluation noise comes from a separate derived stream.
inline CrpDataset generate_crps(const PufInstance& puf, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("CRP count must be >= 1");
  CrpDataset ds{puf.spec(), seed, {}, {}};
  ds.challenges.reserve(count);
  ds.responses.reserve(count);
  Rng challenge_rng = make_rng(seed);
  Rng noise_rng = make_rng(derive_seed(seed, "crp-noise"));
  for (std::size_t i = 0; i < count; ++i) {
    ds.challenges.push_back(random_challenge(puf.stages(), challenge_rng));
    ds.responses.push_back(puf.evaluate(ds.challenges.back(), noise_rng));
  }
  return ds;
}

inline double fractional_hd(std::span<const Response> a, std::span<const Response> b) {
  if (a.size() != b.size()) throw DimensionMismatch("response vectors differ in length");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

/// Reliability: mean pairwise fractional HD between repeated evaluations of
/// one device. Repeat r draws its noise from an engine seeded with noise_seeds[r].
inline double intra_hd(const PufInstance& puf, std::span<const Challenge> challenges,
                       std::span<const std::uint64_t> noise_seeds) {
  if (challenges.empty()) throw InvalidArgument("intra_hd needs at least one challenge");
  if (noise_seeds.size() < 2) throw InvalidArgument("intra_hd needs repeats >= 2");
  std::vector<std::vector<Response>> runs;
  for (std::uint64_t s : noise_seeds) {
    Rng noise = make_rng(s);
    auto& run = runs.emplace_back();
    for (const auto& c : challenges) run.push_back(puf.evaluate(c, noise));
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (std::size_t j = i + 1; j < runs.size(); ++j, ++pairs) total += fractional_hd(runs[i], runs[j]);
  return total / static_cast<double>(pairs);
}

inline double intra_hd(const PufInstance& puf, std::span<const Challenge> challenges, int repeats,
                       std::uint64_t seed) {
  if (repeats < 2) throw InvalidArgument("intra_hd needs repeats >= 2");
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < repeats; ++r) seeds.push_back(derive_seed(seed, "intra-hd", r));
  return intra_hd(puf, challenges, seeds);
}

/// Uniqueness: mean pairwise fractional HD between the noiseless response
/// vectors of distinct devices.
inline double inter_hd(std::span<const PufInstance> pufs, std::span<const Challenge> challenges) {
  if (pufs.size() < 2) throw InvalidArgument("inter_hd needs at least two instances");
  if (challenges.empty()) throw InvalidArgument("inter_hd needs at least one challenge");
  for (const auto& p : pufs)
    if (p.stages() != pufs.front().stages())
      throw DimensionMismatch("inter_hd instances have different stage counts");
  std::vector<std::vector<Response>> resp;
  for (const auto& p : pufs) {
    auto& r = resp.emplace_back();
    for (const auto& c : challenges) r.push_back(p.evaluate(c));
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < resp.size(); ++i)
    for (std::size_t j = i + 1; j < resp.size(); ++j, ++pairs) total += fractional_hd(resp[i], resp[j]);
  return total / static_cast<double>(pairs);
}

}  // namespace pufsec
