#pragma once

// Deep-seismic-prior reconstruction: fit an untrained generator to the
// observed traces of a single grid, then paste the observed traces back.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dspr/grid.hpp"
#include "dspr/sampling.hpp"
#include "dspr/unet.hpp"

namespace dspr {

enum class Precision { Single, Double };

struct FitConfig {
  int iterations = 3000;
  double lr = 0.001;
  double perturb_sigma = 0.03;
  std::uint64_t z_seed = 1;
  std::uint64_t init_seed = 2;
  std::uint64_t perturb_seed = 3;
  std::vector<int> snapshot_iters;
  Precision precision = Precision::Single;
  /// SNR is logged every `snr_every` iterations and at the last one.
  int snr_every = 50;
  UNetSpec unet;

  void validate() const;
};

struct SnrPoint {
  int iter;
  double snr_db;
};

struct Snapshot {
  int iter;
  SeismicGrid grid;
};

/// loss[t-1] is the masked misfit evaluated at iteration t, before that
/// iteration's update. SNR points and snapshots describe the state after
/// `iter` updates, using the clean input.
struct FitReport {
  std::vector<double> loss;
  std::vector<SnrPoint> snr;
  std::vector<Snapshot> snapshots;
  double wall_seconds = 0.0;
};

template <typename Scalar>
struct FitResult {
  NetworkParameters<Scalar> params;
  Tensor4<Scalar> z;
  NormParams norm;
  FitReport report;
};

/// Called after each iteration with (iteration, loss).
using FitProgress = std::function<void(int, double)>;

/// Called with the current state before the first update (iteration 0) and
/// after every update.
template <typename Scalar>
using FitHook = std::function<void(int, const NetworkParameters<Scalar>&, const Tensor4<Scalar>&)>;

/// Uniform noise on [0, 0.1), shape (1, 1, h, w).
template <typename Scalar>
Tensor4<Scalar> init_input(Index h, Index w, std::uint64_t z_seed);

/// (1, 1, nt, nx) tensor of 0/1 that is constant down each trace.
template <typename Scalar>
Tensor4<Scalar> mask_tensor(const Mask& mask, Index nt);

template <typename Scalar>
FitResult<Scalar> fit(const SeismicGrid& observed, const Mask& mask, const FitConfig& config,
                      const std::optional<SeismicGrid>& ground_truth = std::nullopt,
                      const FitProgress& progress = {}, const FitHook<Scalar>& hook = {});

/// denormalize(f(Z)) with the observed traces pasted back.
template <typename Scalar>
SeismicGrid reconstruct(const NetworkParameters<Scalar>& params, const Tensor4<Scalar>& z,
                        const NormParams& norm, const SeismicGrid& observed, const Mask& mask);

/// Fit + reconstruct in the precision named by the config.
struct DspOutcome {
  SeismicGrid recon;
  FitReport report;
};
DspOutcome run_dsprecon(const SeismicGrid& observed, const Mask& mask, const FitConfig& config,
                        const std::optional<SeismicGrid>& ground_truth = std::nullopt,
                        const FitProgress& progress = {});

struct SweepArm {
  double lr;
  FitReport report;
  std::optional<std::string> error;
};

/// One fit per learning rate with otherwise identical config and seeds.
std::vector<SweepArm> lr_sweep(const SeismicGrid& observed, const Mask& mask,
                               const SeismicGrid& ground_truth, const std::vector<double>& lrs,
                               const FitConfig& config);

/// CSV with header "iter,loss,snr_db"; snr_db is blank where not logged.
std::string report_csv(const FitReport& report);

/// One row per logged iteration, one column per arm: "iter,lr=<a>,lr=<b>,...".
std::string sweep_csv(const std::vector<SweepArm>& arms);

}  // namespace dspr
