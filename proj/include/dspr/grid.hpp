#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <utility>

#include "dspr/error.hpp"

namespace dspr {

/// nt x nx amplitudes (time down the rows, one column per trace) plus the
/// sampling intervals. Column-major storage keeps each trace contiguous.
class SeismicGrid {
 public:
  SeismicGrid(Eigen::MatrixXd values, double dt, double dx);

  static SeismicGrid zeros(Eigen::Index nt, Eigen::Index nx, double dt, double dx);

  Eigen::Index nt() const { return values_.rows(); }
  Eigen::Index nx() const { return values_.cols(); }
  double dt() const { return dt_; }
  double dx() const { return dx_; }
  const Eigen::MatrixXd& values() const { return values_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

  /// Same sampling metadata, new amplitudes (validated).
  SeismicGrid with_values(Eigen::MatrixXd values) const;

  bool same_shape(const SeismicGrid& other) const {
    return nt() == other.nt() && nx() == other.nx();
  }

  friend bool operator==(const SeismicGrid& a, const SeismicGrid& b) {
    return a.dt_ == b.dt_ && a.dx_ == b.dx_ && a.same_shape(b) && a.values_ == b.values_;
  }

 private:
  Eigen::MatrixXd values_;
  double dt_;
  double dx_;
};

struct NormParams {
  double vmin = 0.0;
  double vmax = 1.0;
  bool degenerate() const { return vmax == vmin; }
};

enum class GridFormat { Sgrd, Csv };

/// Picks the format from the file extension (.sgrd or .csv).
GridFormat format_for(const std::filesystem::path& path);

/// CSV files carry no sampling metadata; dt and dx are taken from the arguments.
SeismicGrid load_grid(const std::filesystem::path& path, GridFormat format, double csv_dt = 1.0,
                      double csv_dx = 1.0);
void save_grid(const SeismicGrid& grid, const std::filesystem::path& path, GridFormat format);

/// sgrd codec on in-memory bytes.
std::string encode_sgrd(const SeismicGrid& grid);
SeismicGrid decode_sgrd(std::string_view bytes);

/// Global min-max scaling to [0, 1]. A constant grid maps to zeros and the
/// returned params report degenerate().
std::pair<SeismicGrid, NormParams> normalize01(const SeismicGrid& grid);

SeismicGrid denormalize(const SeismicGrid& grid, const NormParams& p);

}  // namespace dspr
