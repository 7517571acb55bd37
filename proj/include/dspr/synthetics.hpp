#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dspr/grid.hpp"

namespace dspr {

enum class EventKind { Linear, Hyperbolic };

/// One reflection event. For linear events `slope_or_v` is the moveout in
/// seconds per trace, t(j) = t0 + slope * j. For hyperbolic events it is the
/// velocity v, t(j) = sqrt(t0^2 + (j * dx / v)^2).
struct EventSpec {
  EventKind kind = EventKind::Linear;
  double t0 = 0.0;
  double slope_or_v = 0.0;
  double amplitude = 1.0;
  double ricker_f = 30.0;

  double arrival(Eigen::Index trace, double dx) const;
};

/// Ricker wavelet (1 - 2 pi^2 f^2 t^2) exp(-pi^2 f^2 t^2).
double ricker(double t, double f);

/// Sum of amplitude * ricker(t_i - t_event(j)) over events, for every
/// trace whose arrival falls inside [0, nt * dt).
SeismicGrid make_events(Eigen::Index nt, Eigen::Index nx, double dt, double dx,
                        const std::vector<EventSpec>& events);

/// JSON: array of {"kind", "t0", "slope_or_v", "amp", "f"}.
std::vector<EventSpec> parse_events_json(const std::string& text);
std::vector<EventSpec> load_events(const std::filesystem::path& path);
std::string events_to_json(const std::vector<EventSpec>& events);

/// Grid dimensions plus the events rendered on them.
struct SyntheticPreset {
  Eigen::Index nt;
  Eigen::Index nx;
  double dt;
  double dx;
  std::vector<EventSpec> events;

  SeismicGrid render() const { return make_events(nt, nx, dt, dx, events); }
};

/// Named event fixtures: "three-events" (256 x 256 curved events, aliases
/// "fig5" and "fig7"), "three-events-128", "three-linear-128",
/// "two-linear-128" (alias "fig11").
SyntheticPreset preset(const std::string& name);
std::vector<std::string> preset_names();

/// Monochromatic plane wave cos(2 pi (f_bin * i / nt - k_bin * j / nx)).
SeismicGrid plane_wave(Eigen::Index nt, Eigen::Index nx, double dt, double dx, Eigen::Index f_bin,
                       Eigen::Index k_bin);

/// Any preset by name, plus "plane-wave": 64 x 64, f_bin 6, k_bin 3.
SeismicGrid fixture_grid(const std::string& name);
std::vector<std::string> fixture_names();

}  // namespace dspr
