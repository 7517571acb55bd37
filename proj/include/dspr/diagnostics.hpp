#pragma once

#include <Eigen/Core>

#include <complex>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "dspr/grid.hpp"
#include "dspr/unet.hpp"

namespace dspr {

/// 10 log10(|X|_F^2 / |X - X*|_F^2). Returns +infinity for a zero residual.
double snr(const SeismicGrid& original, const SeismicGrid& recon);

/// "inf" for the zero-residual sentinel, otherwise fixed-point dB.
std::string format_snr(double db);

constexpr double kFkFloorDb = -80.0;

/// Magnitude over (frequency bin, wavenumber column) in dB relative to the
/// grid's peak, floored at -80 dB. Rows are non-negative frequencies
/// 0..nt/2; columns are wavenumbers with zero at column nx/2.
struct FkSpectrum {
  Eigen::MatrixXd db;
  Eigen::VectorXd freq_hz;
  Eigen::VectorXd wavenumber;  // cycles per trace spacing

  Eigen::Index zero_wavenumber_column() const { return db.cols() / 2; }
};

/// Complex 2D DFT over (time, trace), non-negative time frequencies only,
/// wavenumber axis shifted so that zero is at column nx/2.
Eigen::MatrixXcd fk_transform(const SeismicGrid& grid);

FkSpectrum fk_spectrum(const SeismicGrid& grid);

Eigen::VectorXd extract_trace(const SeismicGrid& grid, Eigen::Index j);

/// Scales a map to 8-bit grey (per-map min-max; constant maps become mid-grey)
/// and encodes it as binary PGM (P5).
std::string encode_pgm(const Eigen::MatrixXd& map);

std::string matrix_csv(const Eigen::MatrixXd& m);

struct FeatureRequest {
  std::string stage;  // e1..e5, d1..d5
  Eigen::Index channel;
};

/// Writes feature_{stage}_{channel}_{iter}.csv and .pgm under `dir` for each
/// request; returns the written paths.
template <typename Scalar>
std::vector<std::filesystem::path> export_feature_maps(const NetworkParameters<Scalar>& params,
                                                       const Tensor4<Scalar>& z,
                                                       const std::vector<FeatureRequest>& requests,
                                                       int iteration,
                                                       const std::filesystem::path& dir);

}  // namespace dspr
