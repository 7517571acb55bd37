#include "dspr/grid.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "binary_io.hpp"

namespace dspr {

namespace {

constexpr std::uint32_t kSgrdVersion = 1;
constexpr std::size_t kSgrdHeaderBytes = 24;

void check_dims(Eigen::Index nt, Eigen::Index nx) {
  if (nt < 2 || nx < 2) {
    std::ostringstream os;
    os << "grid must be at least 2x2, got " << nt << "x" << nx;
    throw ShapeError(os.str());
  }
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

SeismicGrid::SeismicGrid(Eigen::MatrixXd values, double dt, double dx)
    : values_(std::move(values)), dt_(dt), dx_(dx) {
  check_dims(values_.rows(), values_.cols());
  if (!(dt_ > 0.0) || !(dx_ > 0.0) || !std::isfinite(dt_) || !std::isfinite(dx_))
    throw ParameterError("grid sampling intervals dt and dx must be positive and finite");
  if (!values_.allFinite()) throw ParameterError("grid contains non-finite samples");
}

SeismicGrid SeismicGrid::zeros(Eigen::Index nt, Eigen::Index nx, double dt, double dx) {
  check_dims(nt, nx);
  return SeismicGrid(Eigen::MatrixXd::Zero(nt, nx), dt, dx);
}

SeismicGrid SeismicGrid::with_values(Eigen::MatrixXd values) const {
  return SeismicGrid(std::move(values), dt_, dx_);
}

GridFormat format_for(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".sgrd") return GridFormat::Sgrd;
  if (ext == ".csv") return GridFormat::Csv;
  throw ParameterError("cannot infer grid format from '" + path.string() + "' (use .sgrd or .csv)");
}

std::string encode_sgrd(const SeismicGrid& grid) {
  detail::ByteWriter w;
  w.bytes("SGRD");
  w.u32(kSgrdVersion);
  w.u32(static_cast<std::uint32_t>(grid.nt()));
  w.u32(static_cast<std::uint32_t>(grid.nx()));
  w.f32(static_cast<float>(grid.dt()));
  w.f32(static_cast<float>(grid.dx()));
  const Eigen::MatrixXd& v = grid.values();
  for (Eigen::Index j = 0; j < grid.nx(); ++j)
    for (Eigen::Index i = 0; i < grid.nt(); ++i) w.f32(static_cast<float>(v(i, j)));
  return w.buffer();
}

SeismicGrid decode_sgrd(std::string_view bytes) {
  if (bytes.size() < kSgrdHeaderBytes)
    throw ParseError(ParseError::Kind::Header, "sgrd: file shorter than its 24-byte header");
  detail::ByteReader r(bytes);
  const std::string_view magic = r.bytes(4);
  if (magic != "SGRD")
    throw ParseError(ParseError::Kind::Magic, "sgrd: bad magic '" + std::string(magic) + "'");
  const std::uint32_t version = r.u32();
  if (version != kSgrdVersion)
    throw ParseError(ParseError::Kind::Header, "sgrd: unsupported version " + std::to_string(version));
  const std::uint32_t nt = r.u32();
  const std::uint32_t nx = r.u32();
  const float dt = r.f32();
  const float dx = r.f32();
  if (nt < 2 || nx < 2)
    throw ParseError(ParseError::Kind::Header, "sgrd: nt and nx must both be >= 2");
  if (!(dt > 0.0f) || !(dx > 0.0f) || !std::isfinite(dt) || !std::isfinite(dx))
    throw ParseError(ParseError::Kind::Header, "sgrd: dt and dx must be positive and finite");
  const std::uint64_t expected = std::uint64_t{4} * nt * nx;
  if (r.remaining() != expected) {
    std::ostringstream os;
    os << "sgrd: header declares " << nt << "x" << nx << " samples (" << expected
       << " payload bytes) but file has " << r.remaining();
    throw ParseError(ParseError::Kind::SampleCount, os.str());
  }
  Eigen::MatrixXd values(nt, nx);
  for (Eigen::Index j = 0; j < nx; ++j) {
    for (Eigen::Index i = 0; i < nt; ++i) {
      const float s = r.f32();
      if (!std::isfinite(s)) {
        std::ostringstream os;
        os << "sgrd: non-finite sample at time " << i << ", trace " << j;
        throw ParseError(ParseError::Kind::NonFinite, os.str());
      }
      values(i, j) = s;
    }
  }
  return SeismicGrid(std::move(values), dt, dx);
}

SeismicGrid load_grid(const std::filesystem::path& path, GridFormat format, double csv_dt,
                      double csv_dx) {
  const std::string raw = detail::read_file(path);
  if (format == GridFormat::Sgrd) {
    try {
      return decode_sgrd(raw);
    } catch (const ParseError& e) {
      throw ParseError(e.kind(), path.string() + ": " + e.what());
    }
  }

  std::vector<std::vector<double>> rows;
  std::istringstream in(raw);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      while (p < end && *p == ' ') ++p;
      double v = 0.0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc{})
        throw ParseError(ParseError::Kind::Syntax,
                         path.string() + ":" + std::to_string(lineno) + ": malformed number");
      if (!std::isfinite(v))
        throw ParseError(ParseError::Kind::NonFinite,
                         path.string() + ":" + std::to_string(lineno) + ": non-finite value");
      row.push_back(v);
      p = res.ptr;
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      if (*p != ',')
        throw ParseError(ParseError::Kind::Syntax,
                         path.string() + ":" + std::to_string(lineno) + ": expected ','");
      ++p;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(ParseError::Kind::SampleCount,
                       path.string() + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2 || rows.front().size() < 2)
    throw ParseError(ParseError::Kind::Header, path.string() + ": csv grid must be at least 2x2");
  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return SeismicGrid(std::move(values), csv_dt, csv_dx);
}

void save_grid(const SeismicGrid& grid, const std::filesystem::path& path, GridFormat format) {
  if (format == GridFormat::Sgrd) {
    detail::write_file_atomic(path, encode_sgrd(grid));
    return;
  }
  std::string out;
  for (Eigen::Index i = 0; i < grid.nt(); ++i) {
    for (Eigen::Index j = 0; j < grid.nx(); ++j) {
      if (j) out += ',';
      out += format_double(grid(i, j));
    }
    out += '\n';
  }
  detail::write_file_atomic(path, out);
}

std::pair<SeismicGrid, NormParams> normalize01(const SeismicGrid& grid) {
  const NormParams p{grid.values().minCoeff(), grid.values().maxCoeff()};
  if (p.degenerate()) return {grid.with_values(Eigen::MatrixXd::Zero(grid.nt(), grid.nx())), p};
  const double span = p.vmax - p.vmin;
  Eigen::MatrixXd v = (grid.values().array() - p.vmin) / span;
  return {grid.with_values(std::move(v)), p};
}

SeismicGrid denormalize(const SeismicGrid& grid, const NormParams& p) {
  if (p.degenerate())
    throw ContractError("denormalize: normalization parameters are degenerate (constant grid)");
  if (!(p.vmax > p.vmin)) throw ContractError("denormalize: vmax must exceed vmin");
  return grid.with_values((grid.values().array() * (p.vmax - p.vmin) + p.vmin).matrix());
}

}  // namespace dspr
