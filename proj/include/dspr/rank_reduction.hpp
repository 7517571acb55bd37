#pragma once

// Per-frequency Hankel rank reduction: SSA reconstruction for irregular
// decimation and the de-aliased Cadzow variant for factor-2 regular decimation.

#include <Eigen/Core>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dspr/grid.hpp"
#include "dspr/sampling.hpp"

namespace dspr {

using Index = Eigen::Index;

/// f-x domain: slices(m, j) is bin m of trace j, m in [0, nt/2].
struct SpectrumFX {
  Index nt = 0;
  double dt = 1.0;
  double dx = 1.0;
  Eigen::MatrixXcd slices;

  Index nf() const { return slices.rows(); }
  Index nx() const { return slices.cols(); }
  double bin_hz(Index m) const { return static_cast<double>(m) / (static_cast<double>(nt) * dt); }
};

SpectrumFX fft_time(const SeismicGrid& grid);
SeismicGrid ifft_time(const SpectrumFX& spectrum);

struct RankConfig {
  Index rank = 3;
  int n_iters = 10;
  /// Hankel rows; nx/2 + 1 when unset.
  std::optional<Index> embedding;
  /// Only bins with f_lo <= f <= f_hi (Hz) are processed.
  std::optional<std::pair<double, double>> freq_band;

  Index embedding_for(Index nx) const { return embedding.value_or(nx / 2 + 1); }
  void validate(Index nx) const;
};

/// H(i, j) = slice(i + j), shape L x (n - L + 1). Requires 2 <= L <= n - 1.
Eigen::MatrixXcd hankelize(const Eigen::VectorXcd& slice, Index L);

/// Averages each anti-diagonal i + j = s.
Eigen::VectorXcd dehankelize(const Eigen::MatrixXcd& H);

/// k leading left singular vectors, each scaled so that its largest-magnitude
/// entry is real and positive.
Eigen::MatrixXcd leading_left_vectors(const Eigen::MatrixXcd& H, Index k);

/// Best rank-k approximation by truncated SVD.
Eigen::MatrixXcd rank_reduce(const Eigen::MatrixXcd& H, Index k);

/// Rank reduction of every processed bin without reinsertion (plain Cadzow
/// filtering), repeated n_iters times.
SeismicGrid cadzow_filter(const SeismicGrid& grid, const RankConfig& cfg);

SeismicGrid ssa_reconstruct(const SeismicGrid& observed, const Mask& mask, const RankConfig& cfg);

/// One entry per band-B bin where the product basis was empty and free SVD
/// truncation was used instead.
struct BinNote {
  Index bin;
  std::string note;
};

/// Requires a regular factor-2 mask. Bins 0..nf/2 are reconstructed with SSA
/// iterations; each higher bin m is projected onto the span of element-wise
/// products of leading left vectors taken from bins m/2 and m - m/2.
SeismicGrid cadzow_dealiased(const SeismicGrid& observed, const Mask& mask, const RankConfig& cfg,
                             std::vector<BinNote>* log = nullptr);

/// Orthonormal basis (rank tolerance 1e-8) of {u_i(a) o u_j(b)}; pairs with
/// i <= j only when both sets are the same.
Eigen::MatrixXcd product_basis(const Eigen::MatrixXcd& ua, const Eigen::MatrixXcd& ub, bool same);

}  // namespace dspr
