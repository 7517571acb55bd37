#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dspr/grid.hpp"

namespace dspr {

/// Trace-wise observation pattern: a trace is either fully observed or fully
/// missing.
class Mask {
 public:
  Mask(std::vector<bool> kept, std::uint64_t seed = 0);

  static Mask full(Eigen::Index nx) { return Mask(std::vector<bool>(static_cast<std::size_t>(nx), true)); }

  Eigen::Index nx() const { return static_cast<Eigen::Index>(kept_.size()); }
  bool kept(Eigen::Index j) const { return kept_.at(static_cast<std::size_t>(j)); }
  const std::vector<bool>& pattern() const { return kept_; }
  Eigen::Index kept_count() const;
  std::uint64_t seed() const { return seed_; }

  friend bool operator==(const Mask& a, const Mask& b) { return a.kept_ == b.kept_; }

 private:
  std::vector<bool> kept_;
  std::uint64_t seed_;
};

/// Keeps exactly round-half-even(keep_fraction * nx) traces, drawn uniformly
/// without replacement.
Mask make_random_mask(Eigen::Index nx, double keep_fraction, std::uint64_t seed);

/// Keeps trace j iff j mod factor == phase.
Mask make_regular_mask(Eigen::Index nx, Eigen::Index factor, Eigen::Index phase = 0);

/// Phase of the mask if it is exactly the regular pattern with this factor.
std::optional<Eigen::Index> regular_phase(const Mask& mask, Eigen::Index factor);

/// Zeroes the missing traces.
SeismicGrid apply_mask(const SeismicGrid& grid, const Mask& mask);

/// Observed traces where kept, reconstructed traces elsewhere.
SeismicGrid paste_observed(const SeismicGrid& recon, const SeismicGrid& observed, const Mask& mask);

/// Text form: "nx\n" followed by nx characters of '1' (kept) / '0' (missing).
std::string format_mask(const Mask& mask);
Mask parse_mask(const std::string& text);
void save_mask(const Mask& mask, const std::filesystem::path& path);
Mask load_mask(const std::filesystem::path& path);

}  // namespace dspr
