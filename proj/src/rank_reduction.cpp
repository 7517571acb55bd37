#include "dspr/rank_reduction.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dspr {

namespace {

constexpr double kRankTolerance = 1e-8;

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

struct ThinSvd {
  MatrixXcd u;
  MatrixXcd v;
  Eigen::VectorXd sigma;
};

// One-sided Jacobi throughout: the divide-and-conquer SVD in Eigen 3.4.0
// returns NaNs or crashes on some exactly low-rank Hankel matrices.
ThinSvd thin_svd(const MatrixXcd& H, bool want_v) {
  const unsigned opts = Eigen::ComputeThinU | (want_v ? Eigen::ComputeThinV : 0u);
  Eigen::JacobiSVD<MatrixXcd> svd(H, opts);
  return {svd.matrixU(), want_v ? MatrixXcd(svd.matrixV()) : MatrixXcd(), svd.singularValues()};
}

// Singular vector phases are arbitrary; pin them for determinism.
void normalize_phases(MatrixXcd& u, MatrixXcd* v) {
  for (Index c = 0; c < u.cols(); ++c) {
    Index arg = 0;
    u.col(c).cwiseAbs().maxCoeff(&arg);
    const std::complex<double> z = u(arg, c);
    if (std::abs(z) == 0.0) continue;
    const std::complex<double> phase = std::conj(z) / std::abs(z);
    u.col(c) *= phase;
    if (v) v->col(c) *= phase;
  }
}

std::vector<bool> processed_bins(const SpectrumFX& s, const RankConfig& cfg) {
  std::vector<bool> on(static_cast<std::size_t>(s.nf()), true);
  if (cfg.freq_band) {
    const auto [lo, hi] = *cfg.freq_band;
    for (Index m = 0; m < s.nf(); ++m) on[static_cast<std::size_t>(m)] = s.bin_hz(m) >= lo && s.bin_hz(m) <= hi;
  }
  return on;
}

void require_observed(const SeismicGrid& observed, const Mask& mask, const char* op) {
  if (mask.nx() != observed.nx()) {
    std::ostringstream os;
    os << op << ": mask has " << mask.nx() << " traces, grid has " << observed.nx();
    throw ShapeError(os.str());
  }
}

void reinsert(VectorXcd& slice, const VectorXcd& observed, const Mask& mask) {
  for (Index j = 0; j < slice.size(); ++j)
    if (mask.kept(j)) slice(j) = observed(j);
}

// Missing entries are filled by linear interpolation between the nearest kept
// neighbours, or copied from the single nearest one at the edges.
VectorXcd interpolate_missing(const VectorXcd& slice, const Mask& mask) {
  VectorXcd out = slice;
  const Index n = slice.size();
  for (Index j = 0; j < n; ++j) {
    if (mask.kept(j)) continue;
    Index l = j - 1;
    while (l >= 0 && !mask.kept(l)) --l;
    Index r = j + 1;
    while (r < n && !mask.kept(r)) ++r;
    if (l >= 0 && r < n) {
      const double w = static_cast<double>(j - l) / static_cast<double>(r - l);
      out(j) = (1.0 - w) * slice(l) + w * slice(r);
    } else {
      out(j) = l >= 0 ? slice(l) : slice(r);
    }
  }
  return out;
}

VectorXcd ssa_iterate(VectorXcd slice, const VectorXcd& observed, const Mask& mask, const RankConfig& cfg,
                      Index L) {
  for (int it = 0; it < cfg.n_iters; ++it) {
    slice = dehankelize(rank_reduce(hankelize(slice, L), cfg.rank));
    reinsert(slice, observed, mask);
  }
  return slice;
}

}  // namespace

SpectrumFX fft_time(const SeismicGrid& grid) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  SpectrumFX s;
  s.nt = grid.nt();
  s.dt = grid.dt();
  s.dx = grid.dx();
  s.slices.resize(grid.nt() / 2 + 1, grid.nx());
  VectorXcd spec;
  for (Index j = 0; j < grid.nx(); ++j) {
    const Eigen::VectorXd trace = grid.values().col(j);
    fft.fwd(spec, trace);
    s.slices.col(j) = spec;
  }
  return s;
}

SeismicGrid ifft_time(const SpectrumFX& s) {
  if (s.nt < 2 || s.nf() != s.nt / 2 + 1) throw ShapeError("ifft_time: bin count does not match nt");
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  Eigen::MatrixXd v(s.nt, s.nx());
  Eigen::VectorXd trace;
  for (Index j = 0; j < s.nx(); ++j) {
    const VectorXcd col = s.slices.col(j);
    fft.inv(trace, col, s.nt);
    v.col(j) = trace;
  }
  return SeismicGrid(std::move(v), s.dt, s.dx);
}

void RankConfig::validate(Index nx) const {
  const Index L = embedding_for(nx);
  if (L < 2 || L > nx - 1) throw ParameterError("rank config: embedding must lie in [2, nx - 1]");
  if (rank < 1 || rank > std::min(L, nx - L + 1))
    throw ParameterError("rank config: rank must lie in [1, min(L, nx - L + 1)]");
  if (n_iters < 1) throw ParameterError("rank config: iterations must be >= 1");
  if (freq_band) {
    const auto [lo, hi] = *freq_band;
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo < 0.0 || hi < lo)
      throw ParameterError("rank config: frequency band must satisfy 0 <= f_lo <= f_hi");
  }
}

MatrixXcd hankelize(const VectorXcd& slice, Index L) {
  const Index n = slice.size();
  if (L < 2 || L > n - 1) {
    std::ostringstream os;
    os << "hankelize: L = " << L << " outside [2, " << n - 1 << "]";
    throw ParameterError(os.str());
  }
  MatrixXcd H(L, n - L + 1);
  for (Index j = 0; j < H.cols(); ++j) H.col(j) = slice.segment(j, L);
  return H;
}

VectorXcd dehankelize(const MatrixXcd& H) {
  const Index L = H.rows();
  const Index M = H.cols();
  if (L == 0 || M == 0) return VectorXcd();
  VectorXcd out = VectorXcd::Zero(L + M - 1);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(L + M - 1);
  for (Index j = 0; j < M; ++j)
    for (Index i = 0; i < L; ++i) {
      out(i + j) += H(i, j);
      count(i + j) += 1.0;
    }
  return out.cwiseQuotient(count.cast<std::complex<double>>());
}

MatrixXcd leading_left_vectors(const MatrixXcd& H, Index k) {
  if (k < 1 || k > std::min(H.rows(), H.cols())) throw ParameterError("leading_left_vectors: k out of range");
  MatrixXcd u = thin_svd(H, false).u.leftCols(k);
  normalize_phases(u, nullptr);
  return u;
}

MatrixXcd rank_reduce(const MatrixXcd& H, Index k) {
  if (k < 1 || k > std::min(H.rows(), H.cols())) {
    std::ostringstream os;
    os << "rank_reduce: k = " << k << " outside [1, " << std::min(H.rows(), H.cols()) << "]";
    throw ParameterError(os.str());
  }
  const ThinSvd svd = thin_svd(H, true);
  MatrixXcd u = svd.u.leftCols(k);
  MatrixXcd v = svd.v.leftCols(k);
  normalize_phases(u, &v);
  return u * svd.sigma.head(k).cast<std::complex<double>>().asDiagonal() * v.adjoint();
}

SeismicGrid cadzow_filter(const SeismicGrid& grid, const RankConfig& cfg) {
  cfg.validate(grid.nx());
  const Index L = cfg.embedding_for(grid.nx());
  SpectrumFX s = fft_time(grid);
  const auto on = processed_bins(s, cfg);
  for (Index m = 0; m < s.nf(); ++m) {
    if (!on[static_cast<std::size_t>(m)]) continue;
    VectorXcd slice = s.slices.row(m).transpose();
    for (int it = 0; it < cfg.n_iters; ++it) slice = dehankelize(rank_reduce(hankelize(slice, L), cfg.rank));
    s.slices.row(m) = slice.transpose();
  }
  return ifft_time(s);
}

SeismicGrid ssa_reconstruct(const SeismicGrid& observed, const Mask& mask, const RankConfig& cfg) {
  require_observed(observed, mask, "ssa_reconstruct");
  cfg.validate(observed.nx());
  const Index L = cfg.embedding_for(observed.nx());
  SpectrumFX s = fft_time(apply_mask(observed, mask));
  const auto on = processed_bins(s, cfg);
  for (Index m = 0; m < s.nf(); ++m) {
    if (!on[static_cast<std::size_t>(m)]) continue;
    const VectorXcd obs = s.slices.row(m).transpose();
    s.slices.row(m) = ssa_iterate(obs, obs, mask, cfg, L).transpose();
  }
  return paste_observed(ifft_time(s), observed, mask);
}

MatrixXcd product_basis(const MatrixXcd& ua, const MatrixXcd& ub, bool same) {
  if (ua.rows() != ub.rows()) throw ShapeError("product_basis: vector lengths differ");
  std::vector<VectorXcd> cols;
  for (Index i = 0; i < ua.cols(); ++i)
    for (Index j = same ? i : 0; j < ub.cols(); ++j) cols.push_back(ua.col(i).cwiseProduct(ub.col(j)));
  MatrixXcd P(ua.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) P.col(static_cast<Index>(c)) = cols[c];
  if (P.cols() == 0 || P.cwiseAbs().maxCoeff() == 0.0) return MatrixXcd(ua.rows(), 0);
  Eigen::ColPivHouseholderQR<MatrixXcd> qr(P);
  qr.setThreshold(kRankTolerance);
  const Index r = qr.rank();
  MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(P.rows(), r);
  return q;
}

SeismicGrid cadzow_dealiased(const SeismicGrid& observed, const Mask& mask, const RankConfig& cfg,
                             std::vector<BinNote>* log) {
  require_observed(observed, mask, "cadzow_dealiased");
  cfg.validate(observed.nx());
  // Nothing is missing, so there is nothing to de-alias.
  if (mask.kept_count() == mask.nx()) return observed;
  if (!regular_phase(mask, 2)) throw ContractError("cadzow_dealiased: mask is not regular with factor 2");
  const Index L = cfg.embedding_for(observed.nx());
  SpectrumFX s = fft_time(apply_mask(observed, mask));
  const auto on = processed_bins(s, cfg);
  const Index nf = s.nf();
  const Index split = nf / 2;
  const MatrixXcd obs_all = s.slices;

  // Band A: SSA from an interpolated start, since a zero-filled factor-2
  // slice carries its aliased replica at equal energy.
  for (Index m = 0; m <= split && m < nf; ++m) {
    if (!on[static_cast<std::size_t>(m)]) continue;
    const VectorXcd obs = obs_all.row(m).transpose();
    s.slices.row(m) = ssa_iterate(interpolate_missing(obs, mask), obs, mask, cfg, L).transpose();
  }

  // Signal subspace per band-A bin. Directions whose singular value is
  // negligible against the strongest band-A bin carry no signal and are dropped.
  std::vector<MatrixXcd> basis(static_cast<std::size_t>(split + 1));
  std::vector<Eigen::VectorXd> sigma(basis.size());
  double sigma_max = 0.0;
  for (Index m = 0; m <= split && m < nf; ++m) {
    const auto i = static_cast<std::size_t>(m);
    const ThinSvd svd = thin_svd(hankelize(s.slices.row(m).transpose(), L), false);
    basis[i] = svd.u.leftCols(cfg.rank);
    normalize_phases(basis[i], nullptr);
    sigma[i] = svd.sigma.head(cfg.rank);
    sigma_max = std::max(sigma_max, sigma[i].size() ? sigma[i][0] : 0.0);
  }
  for (std::size_t i = 0; i < basis.size(); ++i) {
    Index keep = 0;
    while (keep < sigma[i].size() && sigma[i][keep] > kRankTolerance * sigma_max) ++keep;
    basis[i] = basis[i].leftCols(keep).eval();
  }

  // Band B: project onto products of band-A subspaces whose bins sum to m.
  for (Index m = split + 1; m < nf; ++m) {
    if (!on[static_cast<std::size_t>(m)]) continue;
    const Index a = m / 2;
    const Index b = m - a;
    const MatrixXcd Q = product_basis(basis[static_cast<std::size_t>(a)], basis[static_cast<std::size_t>(b)], a == b);
    const VectorXcd obs = obs_all.row(m).transpose();
    VectorXcd slice = interpolate_missing(obs, mask);
    if (Q.cols() == 0) {
      if (log) log->push_back({m, "empty product basis; free rank reduction"});
      slice = ssa_iterate(slice, obs, mask, cfg, L);
    } else {
      for (int it = 0; it < cfg.n_iters; ++it) {
        const MatrixXcd H = hankelize(slice, L);
        slice = dehankelize(Q * (Q.adjoint() * H));
        reinsert(slice, obs, mask);
      }
    }
    s.slices.row(m) = slice.transpose();
  }
  return paste_observed(ifft_time(s), observed, mask);
}

}  // namespace dspr
