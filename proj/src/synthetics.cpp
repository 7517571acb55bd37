#include "dspr/synthetics.hpp"

#include <cmath>
#include <numbers>

#include "json.hpp"

#include "binary_io.hpp"

namespace dspr {

double EventSpec::arrival(Eigen::Index trace, double dx) const {
  const double j = static_cast<double>(trace);
  if (kind == EventKind::Linear) return t0 + slope_or_v * j;
  const double offset_time = j * dx / slope_or_v;
  return std::sqrt(t0 * t0 + offset_time * offset_time);
}

double ricker(double t, double f) {
  const double a = std::numbers::pi * std::numbers::pi * f * f * t * t;
  return (1.0 - 2.0 * a) * std::exp(-a);
}

SeismicGrid make_events(Eigen::Index nt, Eigen::Index nx, double dt, double dx,
                        const std::vector<EventSpec>& events) {
  SeismicGrid empty = SeismicGrid::zeros(nt, nx, dt, dx);
  Eigen::MatrixXd v = empty.values();
  const double record = static_cast<double>(nt) * dt;
  for (const EventSpec& e : events) {
    if (!(e.t0 >= 0.0)) throw ParameterError("event t0 must be >= 0");
    if (!(e.ricker_f > 0.0)) throw ParameterError("event wavelet frequency must be > 0");
    if (e.kind == EventKind::Hyperbolic && !(e.slope_or_v > 0.0))
      throw ParameterError("hyperbolic event velocity must be > 0");
    for (Eigen::Index j = 0; j < nx; ++j) {
      const double tj = e.arrival(j, dx);
      if (!(tj >= 0.0 && tj < record)) continue;
      for (Eigen::Index i = 0; i < nt; ++i)
        v(i, j) += e.amplitude * ricker(static_cast<double>(i) * dt - tj, e.ricker_f);
    }
  }
  return empty.with_values(std::move(v));
}

std::vector<EventSpec> parse_events_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("events JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ConfigError("events JSON must be an array of event objects");
  std::vector<EventSpec> out;
  for (const auto& item : doc) {
    try {
      EventSpec e;
      const std::string kind = item.at("kind").get<std::string>();
      if (kind == "linear")
        e.kind = EventKind::Linear;
      else if (kind == "hyperbolic")
        e.kind = EventKind::Hyperbolic;
      else
        throw ConfigError("events JSON: unknown kind '" + kind + "'");
      e.t0 = item.at("t0").get<double>();
      e.slope_or_v = item.at("slope_or_v").get<double>();
      e.amplitude = item.at("amp").get<double>();
      e.ricker_f = item.at("f").get<double>();
      out.push_back(e);
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError(std::string("events JSON: ") + ex.what());
    }
  }
  return out;
}

std::vector<EventSpec> load_events(const std::filesystem::path& path) {
  return parse_events_json(detail::read_file(path));
}

std::string events_to_json(const std::vector<EventSpec>& events) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& e : events) {
    doc.push_back({{"kind", e.kind == EventKind::Linear ? "linear" : "hyperbolic"},
                   {"t0", e.t0},
                   {"slope_or_v", e.slope_or_v},
                   {"amp", e.amplitude},
                   {"f", e.ricker_f}});
  }
  return doc.dump(2);
}

SyntheticPreset preset(const std::string& name) {
  using K = EventKind;
  if (name == "three-events" || name == "fig5" || name == "fig7") {
    // Three curved events on a 256 x 256 shot gather.
    return {256, 256, 0.004, 6.0,
            {{K::Hyperbolic, 0.2, 2500.0, 1.0, 30.0},
             {K::Hyperbolic, 0.5, 3000.0, -0.8, 30.0},
             {K::Hyperbolic, 0.8, 4000.0, 0.6, 30.0}}};
  }
  if (name == "three-events-128") {
    return {128, 128, 0.004, 5.0,
            {{K::Hyperbolic, 0.10, 2000.0, 1.0, 25.0},
             {K::Hyperbolic, 0.22, 2300.0, -0.7, 25.0},
             {K::Hyperbolic, 0.34, 2800.0, 0.5, 25.0}}};
  }
  if (name == "three-linear-128") {
    return {128, 128, 0.004, 5.0,
            {{K::Linear, 0.10, 0.0015, 1.0, 25.0},
             {K::Linear, 0.22, 0.0008, -0.7, 25.0},
             {K::Linear, 0.40, -0.0006, 0.5, 25.0}}};
  }
  if (name == "two-linear-128" || name == "fig11") {
    // Dips of 0.75 and -0.5 samples per trace: unaliased when fully sampled,
    // aliased above ~42 Hz once every other trace is removed.
    return {128, 128, 0.008, 10.0,
            {{K::Linear, 0.096, 0.006, 1.0, 25.0}, {K::Linear, 0.88, -0.004, -0.8, 25.0}}};
  }
  throw ParameterError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() {
  return {"three-events", "fig5", "fig7", "three-events-128", "three-linear-128", "two-linear-128",
          "fig11"};
}

SeismicGrid plane_wave(Eigen::Index nt, Eigen::Index nx, double dt, double dx, Eigen::Index f_bin,
                       Eigen::Index k_bin) {
  Eigen::MatrixXd v(nt, nx);
  const double two_pi = 2.0 * std::numbers::pi;
  for (Eigen::Index j = 0; j < nx; ++j)
    for (Eigen::Index i = 0; i < nt; ++i)
      v(i, j) = std::cos(two_pi * (static_cast<double>(f_bin * i) / static_cast<double>(nt) -
                                   static_cast<double>(k_bin * j) / static_cast<double>(nx)));
  return SeismicGrid(std::move(v), dt, dx);
}

SeismicGrid fixture_grid(const std::string& name) {
  if (name == "plane-wave") return plane_wave(64, 64, 0.004, 10.0, 6, 3);
  return preset(name).render();
}

std::vector<std::string> fixture_names() {
  std::vector<std::string> names = preset_names();
  names.push_back("plane-wave");
  return names;
}

}  // namespace dspr
