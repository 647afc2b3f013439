#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pufsec/error.hpp"
#include "pufsec/puf.hpp"

namespace pufsec {

enum class FeatureMode { Parity, Raw };

inline std::string_view feature_mode_name(FeatureMode m) {
  return m == FeatureMode::Parity ? "parity" : "raw";
}

inline FeatureMode parse_feature_mode(std::string_view s) {
  if (s == "parity") return FeatureMode::Parity;
  if (s == "raw") return FeatureMode::Raw;
  throw InvalidArgument("unknown feature mode '" + std::string(s) + "'");
}

/// phi_i = prod_{j >= i} (1 - 2 c_j) for i < n, phi_n = 1. Writes n+1 values.
inline void parity_transform(std::span<const std::uint8_t> c, std::span<double> out) {
  const std::size_t n = c.size();
  if (out.size() != n + 1) throw DimensionMismatch("parity features need n + 1 slots");
  out[n] = 1.0;
  double p = 1.0;
  for (std::size_t i = n; i-- > 0;) {
    p *= c[i] ? -1.0 : 1.0;
    out[i] = p;
  }
}

inline std::vector<double> parity_transform(std::span<const std::uint8_t> c) {
  std::vector<double> out(c.size() + 1);
  parity_transform(c, out);
  return out;
}

/// Bit b -> 1 - 2b. Writes n values.
inline void raw_transform(std::span<const std::uint8_t> c, std::span<double> out) {
  if (out.size() != c.size()) throw DimensionMismatch("raw features need n slots");
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i] ? -1.0 : 1.0;
}

inline std::vector<double> raw_transform(std::span<const std::uint8_t> c) {
  std::vector<double> out(c.size());
  raw_transform(c, out);
  return out;
}

inline std::size_t feature_dim(FeatureMode mode, std::size_t stages) {
  return mode == FeatureMode::Parity ? stages + 1 : stages;
}

inline void encode(FeatureMode mode, std::span<const std::uint8_t> c, std::span<double> out) {
  if (mode == FeatureMode::Parity)
    parity_transform(c, out);
  else
    raw_transform(c, out);
}

inline std::vector<double> encode(FeatureMode mode, std::span<const std::uint8_t> c) {
  std::vector<double> out(feature_dim(mode, c.size()));
  encode(mode, c, out);
  return out;
}

}  // namespace pufsec
