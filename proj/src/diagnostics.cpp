#include "dspr/diagnostics.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "binary_io.hpp"

namespace dspr {

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

double snr(const SeismicGrid& original, const SeismicGrid& recon) {
  if (!original.same_shape(recon)) throw ShapeError("snr: grids differ in shape");
  const double signal = original.values().squaredNorm();
  if (signal == 0.0) throw UndefinedSnrError("snr: original grid is all zeros");
  const double residual = (original.values() - recon.values()).squaredNorm();
  if (residual == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / residual);
}

std::string format_snr(double db) {
  if (std::isinf(db) && db > 0) return "inf";
  return shortest(db);
}

Eigen::MatrixXcd fk_transform(const SeismicGrid& grid) {
  const Index nt = grid.nt();
  const Index nx = grid.nx();
  const Index nf = nt / 2 + 1;
  Eigen::FFT<double> fft;

  // Along time, per trace; keep non-negative frequencies.
  Eigen::MatrixXcd fx(nf, nx);
  Eigen::VectorXcd spec;
  for (Index j = 0; j < nx; ++j) {
    const Eigen::VectorXd trace = grid.values().col(j);
    fft.fwd(spec, trace);
    fx.col(j) = spec.head(nf);
  }
  // Along space, per frequency, then shift zero wavenumber to column nx/2.
  Eigen::MatrixXcd fk(nf, nx);
  Eigen::VectorXcd row, out;
  for (Index i = 0; i < nf; ++i) {
    row = fx.row(i).transpose();
    fft.fwd(out, row);
    for (Index k = 0; k < nx; ++k) fk(i, (k + nx / 2) % nx) = out(k);
  }
  return fk;
}

FkSpectrum fk_spectrum(const SeismicGrid& grid) {
  const Eigen::MatrixXcd fk = fk_transform(grid);
  const Eigen::MatrixXd mag = fk.cwiseAbs();
  const double peak = mag.maxCoeff();
  FkSpectrum s;
  s.db = Eigen::MatrixXd::Constant(mag.rows(), mag.cols(), kFkFloorDb);
  if (peak > 0.0) {
    for (Index c = 0; c < mag.cols(); ++c)
      for (Index r = 0; r < mag.rows(); ++r)
        if (mag(r, c) > 0.0) s.db(r, c) = std::max(kFkFloorDb, 20.0 * std::log10(mag(r, c) / peak));
  }
  const Index nt = grid.nt();
  const Index nx = grid.nx();
  s.freq_hz.resize(mag.rows());
  for (Index r = 0; r < mag.rows(); ++r) s.freq_hz(r) = static_cast<double>(r) / (static_cast<double>(nt) * grid.dt());
  s.wavenumber.resize(nx);
  for (Index c = 0; c < nx; ++c) s.wavenumber(c) = static_cast<double>(c - nx / 2) / static_cast<double>(nx);
  return s;
}

Eigen::VectorXd extract_trace(const SeismicGrid& grid, Index j) {
  if (j < 0 || j >= grid.nx()) {
    std::ostringstream os;
    os << "extract_trace: index " << j << " outside [0, " << grid.nx() << ")";
    throw ParameterError(os.str());
  }
  return grid.values().col(j);
}

std::string encode_pgm(const Eigen::MatrixXd& map) {
  if (map.size() == 0) throw ShapeError("encode_pgm: empty map");
  if (!map.allFinite()) throw ParameterError("encode_pgm: non-finite value");
  const double lo = map.minCoeff();
  const double hi = map.maxCoeff();
  std::string out = "P5\n" + std::to_string(map.cols()) + " " + std::to_string(map.rows()) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(map.size()));
  for (Index r = 0; r < map.rows(); ++r)
    for (Index c = 0; c < map.cols(); ++c) {
      const long level = hi > lo ? std::lround((map(r, c) - lo) / (hi - lo) * 255.0) : 128;
      out.push_back(static_cast<char>(static_cast<unsigned char>(level)));
    }
  return out;
}

std::string matrix_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += shortest(m(r, c));
    }
    out += '\n';
  }
  return out;
}

template <typename Scalar>
std::vector<std::filesystem::path> export_feature_maps(const NetworkParameters<Scalar>& params,
                                                       const Tensor4<Scalar>& z,
                                                       const std::vector<FeatureRequest>& requests,
                                                       int iteration,
                                                       const std::filesystem::path& dir) {
  std::vector<std::string> taps;
  for (const auto& r : requests) taps.push_back(StageId::parse(r.stage).name());
  const std::vector<Tensor4<Scalar>> acts = capture_activations(params, z, taps);

  std::vector<std::filesystem::path> written;
  if (requests.empty()) return written;
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < requests.size(); ++k) {
    const Tensor4<Scalar>& a = acts[k];
    const Index ch = requests[k].channel;
    if (ch < 0 || ch >= a.shape().c) {
      std::ostringstream os;
      os << "export_feature_maps: channel " << ch << " outside [0, " << a.shape().c << ") at " << taps[k];
      throw ParameterError(os.str());
    }
    const Eigen::MatrixXd map = a.plane(0, ch).template cast<double>();
    const std::string stem =
        "feature_" + taps[k] + "_" + std::to_string(ch) + "_" + std::to_string(iteration);
    const auto csv = dir / (stem + ".csv");
    const auto pgm = dir / (stem + ".pgm");
    detail::write_file_atomic(csv, matrix_csv(map));
    detail::write_file_atomic(pgm, encode_pgm(map));
    written.push_back(csv);
    written.push_back(pgm);
  }
  return written;
}

template std::vector<std::filesystem::path> export_feature_maps<float>(
    const NetworkParameters<float>&, const Tensor4<float>&, const std::vector<FeatureRequest>&, int,
    const std::filesystem::path&);
template std::vector<std::filesystem::path> export_feature_maps<double>(
    const NetworkParameters<double>&, const Tensor4<double>&, const std::vector<FeatureRequest>&, int,
    const std::filesystem::path&);

}  // namespace dspr
