#include "dspr/sampling.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "binary_io.hpp"

namespace dspr {

namespace {

void require_mask_fits(const SeismicGrid& grid, const Mask& mask, const char* op) {
  if (mask.nx() != grid.nx()) {
    std::ostringstream os;
    os << op << ": mask has " << mask.nx() << " traces, grid has " << grid.nx();
    throw ShapeError(os.str());
  }
}

}  // namespace

Mask::Mask(std::vector<bool> kept, std::uint64_t seed) : kept_(std::move(kept)), seed_(seed) {
  if (kept_.size() < 2) throw ParameterError("mask needs at least 2 traces");
  if (kept_count() == 0) throw ParameterError("mask must keep at least one trace");
}

Eigen::Index Mask::kept_count() const {
  return static_cast<Eigen::Index>(std::count(kept_.begin(), kept_.end(), true));
}

Mask make_random_mask(Eigen::Index nx, double keep_fraction, std::uint64_t seed) {
  if (nx < 2) throw ParameterError("random mask: nx must be >= 2");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw ParameterError("random mask: keep fraction must lie in (0, 1]");
  // nearbyint under the default rounding mode rounds half to even.
  const auto count = static_cast<Eigen::Index>(std::nearbyint(keep_fraction * static_cast<double>(nx)));
  if (count < 1) throw ParameterError("random mask: keep fraction rounds to zero kept traces");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(nx));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (Eigen::Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, nx - 1);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<bool> kept(static_cast<std::size_t>(nx), false);
  for (Eigen::Index i = 0; i < count; ++i) kept[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  return Mask(std::move(kept), seed);
}

Mask make_regular_mask(Eigen::Index nx, Eigen::Index factor, Eigen::Index phase) {
  if (nx < 2) throw ParameterError("regular mask: nx must be >= 2");
  if (factor < 2) throw ParameterError("regular mask: factor must be >= 2");
  if (phase < 0 || phase >= factor) throw ParameterError("regular mask: phase must lie in [0, factor)");
  if (phase >= nx) throw ParameterError("regular mask: phase leaves no kept trace");
  std::vector<bool> kept(static_cast<std::size_t>(nx));
  for (Eigen::Index j = 0; j < nx; ++j) kept[static_cast<std::size_t>(j)] = j % factor == phase;
  return Mask(std::move(kept));
}

std::optional<Eigen::Index> regular_phase(const Mask& mask, Eigen::Index factor) {
  if (factor < 2) return std::nullopt;
  for (Eigen::Index phase = 0; phase < factor && phase < mask.nx(); ++phase) {
    bool match = true;
    for (Eigen::Index j = 0; j < mask.nx() && match; ++j) match = mask.kept(j) == (j % factor == phase);
    if (match) return phase;
  }
  return std::nullopt;
}

SeismicGrid apply_mask(const SeismicGrid& grid, const Mask& mask) {
  require_mask_fits(grid, mask, "apply_mask");
  Eigen::MatrixXd v = grid.values();
  for (Eigen::Index j = 0; j < grid.nx(); ++j)
    if (!mask.kept(j)) v.col(j).setZero();
  return grid.with_values(std::move(v));
}

SeismicGrid paste_observed(const SeismicGrid& recon, const SeismicGrid& observed, const Mask& mask) {
  if (!recon.same_shape(observed)) throw ShapeError("paste_observed: grids differ in shape");
  require_mask_fits(recon, mask, "paste_observed");
  Eigen::MatrixXd v = recon.values();
  for (Eigen::Index j = 0; j < recon.nx(); ++j)
    if (mask.kept(j)) v.col(j) = observed.values().col(j);
  return recon.with_values(std::move(v));
}

std::string format_mask(const Mask& mask) {
  std::string out = std::to_string(mask.nx()) + "\n";
  for (bool k : mask.pattern()) out += k ? '1' : '0';
  out += '\n';
  return out;
}

Mask parse_mask(const std::string& text) {
  std::istringstream in(text);
  std::string count_line;
  std::string bits;
  if (!std::getline(in, count_line) || !std::getline(in, bits))
    throw ParseError(ParseError::Kind::Header, "mask: expected two lines (count, pattern)");
  if (!bits.empty() && bits.back() == '\r') bits.pop_back();
  if (!count_line.empty() && count_line.back() == '\r') count_line.pop_back();
  if (count_line.empty() || count_line.find_first_not_of("0123456789") != std::string::npos)
    throw ParseError(ParseError::Kind::Header, "mask: first line must be the trace count");
  const auto nx = std::stoull(count_line);
  if (bits.size() != nx)
    throw ParseError(ParseError::Kind::SampleCount, "mask: pattern length differs from trace count");
  std::vector<bool> kept;
  kept.reserve(bits.size());
  for (char c : bits) {
    if (c != '0' && c != '1') throw ParseError(ParseError::Kind::Syntax, "mask: pattern must be 0/1");
    kept.push_back(c == '1');
  }
  return Mask(std::move(kept));
}

void save_mask(const Mask& mask, const std::filesystem::path& path) {
  detail::write_file_atomic(path, format_mask(mask));
}

Mask load_mask(const std::filesystem::path& path) { return parse_mask(detail::read_file(path)); }

}  // namespace dspr
