#include "dspr/dsprecon.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "dspr/adam.hpp"
#include "dspr/diagnostics.hpp"

namespace dspr {

namespace {

template <typename Scalar>
Tensor4<Scalar> grid_tensor(const SeismicGrid& grid) {
  Tensor4<Scalar> t(Shape4{1, 1, grid.nt(), grid.nx()});
  t.plane(0, 0) = grid.values().cast<Scalar>();
  return t;
}

template <typename Scalar>
SeismicGrid tensor_grid(const Tensor4<Scalar>& t, const SeismicGrid& like) {
  return like.with_values(t.plane(0, 0).template cast<double>());
}

}  // namespace

void FitConfig::validate() const {
  if (iterations < 1) throw ParameterError("fit: iterations must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ParameterError("fit: learning rate must be >= 0");
  if (!(perturb_sigma >= 0.0) || !std::isfinite(perturb_sigma))
    throw ParameterError("fit: perturbation sigma must be >= 0");
  if (snr_every < 1) throw ParameterError("fit: SNR cadence must be >= 1");
  for (int s : snapshot_iters)
    if (s < 0 || s > iterations) throw ParameterError("fit: snapshot iteration outside [0, iterations]");
  unet.validate();
}

template <typename Scalar>
Tensor4<Scalar> init_input(Index h, Index w, std::uint64_t z_seed) {
  if (h < 1 || w < 1) throw ShapeError("init_input: dimensions must be >= 1");
  std::mt19937_64 rng(z_seed);
  std::uniform_real_distribution<double> dist(0.0, 0.1);
  Tensor4<Scalar> z(Shape4{1, 1, h, w});
  for (Index i = 0; i < z.size(); ++i) {
    Scalar v = static_cast<Scalar>(dist(rng));
    // Rounding to Scalar may land on the excluded upper bound.
    while (static_cast<double>(v) >= 0.1) v = std::nextafter(v, Scalar(0));
    z.data()[i] = v;
  }
  return z;
}

template <typename Scalar>
Tensor4<Scalar> mask_tensor(const Mask& mask, Index nt) {
  Tensor4<Scalar> m(Shape4{1, 1, nt, mask.nx()});
  for (Index j = 0; j < mask.nx(); ++j)
    if (mask.kept(j)) m.plane(0, 0).col(j).setOnes();
  return m;
}

template <typename Scalar>
SeismicGrid reconstruct(const NetworkParameters<Scalar>& params, const Tensor4<Scalar>& z,
                        const NormParams& norm, const SeismicGrid& observed, const Mask& mask) {
  if (norm.degenerate()) throw ContractError("reconstruct: normalization parameters are degenerate");
  const Tensor4<Scalar> y = forward(params, z);
  if (y.shape().h != observed.nt() || y.shape().w != observed.nx())
    throw ShapeError("reconstruct: generator output does not match the observed grid");
  const SeismicGrid x = denormalize(tensor_grid(y, observed), norm);
  return paste_observed(x, observed, mask);
}

template <typename Scalar>
FitResult<Scalar> fit(const SeismicGrid& observed, const Mask& mask, const FitConfig& config,
                      const std::optional<SeismicGrid>& ground_truth, const FitProgress& progress,
                      const FitHook<Scalar>& hook) {
  config.validate();
  if (mask.nx() != observed.nx()) throw ShapeError("fit: mask and observed grid differ in trace count");
  if (ground_truth && !ground_truth->same_shape(observed))
    throw ShapeError("fit: ground truth and observed grid differ in shape");

  const auto start = std::chrono::steady_clock::now();
  const SeismicGrid masked = apply_mask(observed, mask);
  auto [normalized, norm] = normalize01(masked);
  if (norm.degenerate()) throw ContractError("fit: observed traces are constant; nothing to fit");

  const Index nt = observed.nt();
  const Index nx = observed.nx();
  const Tensor4<Scalar> target = grid_tensor<Scalar>(normalized);
  const Tensor4<Scalar> mask01 = mask_tensor<Scalar>(mask, nt);
  if (mask01.data().sum() == Scalar(0)) throw EmptyMaskError("fit: mask keeps no traces");

  FitResult<Scalar> result{build_unet<Scalar>(config.unet, config.init_seed),
                           init_input<Scalar>(nt, nx, config.z_seed), norm, {}};
  FitReport& report = result.report;
  report.loss.reserve(static_cast<std::size_t>(config.iterations));

  std::mt19937_64 perturb_rng(config.perturb_seed);
  std::normal_distribution<double> noise(0.0, config.perturb_sigma);
  AdamState<Scalar> adam;
  const AdamOptions opts{config.lr, 0.9, 0.999, 1e-8};

  std::vector<int> snapshot_iters = config.snapshot_iters;
  std::sort(snapshot_iters.begin(), snapshot_iters.end());
  snapshot_iters.erase(std::unique(snapshot_iters.begin(), snapshot_iters.end()), snapshot_iters.end());
  auto take_snapshot = [&](int iter) {
    if (std::binary_search(snapshot_iters.begin(), snapshot_iters.end(), iter))
      report.snapshots.push_back(
          {iter, reconstruct(result.params, result.z, norm, observed, mask)});
  };
  take_snapshot(0);
  if (hook) hook(0, result.params, result.z);

  std::vector<Tensor4<Scalar>*> param_ptrs;
  for (auto& t : result.params.tensors) param_ptrs.push_back(&t.value);

  for (int iter = 1; iter <= config.iterations; ++iter) {
    Tensor4<Scalar> z_t = result.z;
    if (config.perturb_sigma > 0.0)
      for (Index i = 0; i < z_t.size(); ++i) z_t.data()[i] += static_cast<Scalar>(noise(perturb_rng));

    Tape<Scalar> tape;
    const std::vector<Var> vars = bind_parameters(tape, result.params, true);
    const Var zv = tape.leaf(std::move(z_t), false);
    const Var y = forward(tape, config.unet, vars, zv);
    const Var loss = masked_mse(tape, y, target, mask01);
    const double loss_value = static_cast<double>(tape.value(loss).data()[0]);
    if (!std::isfinite(loss_value)) {
      std::ostringstream os;
      os << "fit diverged: non-finite loss at iteration " << iter << " (lr " << config.lr << ")";
      throw DivergenceError(iter, os.str());
    }
    report.loss.push_back(loss_value);

    tape.backward(loss);
    std::vector<Tensor4<Scalar>> grads;
    grads.reserve(vars.size());
    for (const Var v : vars) grads.push_back(tape.grad(v));
    adam_step(param_ptrs, grads, adam, opts);

    if (ground_truth && (iter % config.snr_every == 0 || iter == config.iterations)) {
      const SeismicGrid recon = reconstruct(result.params, result.z, norm, observed, mask);
      report.snr.push_back({iter, snr(*ground_truth, recon)});
    }
    take_snapshot(iter);
    if (hook) hook(iter, result.params, result.z);
    if (progress) progress(iter, loss_value);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

DspOutcome run_dsprecon(const SeismicGrid& observed, const Mask& mask, const FitConfig& config,
                        const std::optional<SeismicGrid>& ground_truth, const FitProgress& progress) {
  auto run = [&]<typename Scalar>(Scalar) {
    FitResult<Scalar> r = fit<Scalar>(observed, mask, config, ground_truth, progress);
    SeismicGrid recon = reconstruct(r.params, r.z, r.norm, observed, mask);
    return DspOutcome{std::move(recon), std::move(r.report)};
  };
  return config.precision == Precision::Double ? run(double{}) : run(float{});
}

std::vector<SweepArm> lr_sweep(const SeismicGrid& observed, const Mask& mask,
                               const SeismicGrid& ground_truth, const std::vector<double>& lrs,
                               const FitConfig& config) {
  std::vector<SweepArm> arms;
  for (double lr : lrs) {
    FitConfig arm_config = config;
    arm_config.lr = lr;
    SweepArm arm{lr, {}, std::nullopt};
    try {
      arm.report = run_dsprecon(observed, mask, arm_config, ground_truth).report;
    } catch (const Error& e) {
      arm.error = e.what();
    }
    arms.push_back(std::move(arm));
  }
  return arms;
}

std::string report_csv(const FitReport& report) {
  std::map<int, double> snr_at;
  for (const auto& p : report.snr) snr_at[p.iter] = p.snr_db;
  std::ostringstream os;
  os << std::setprecision(10);
  os << "iter,loss,snr_db\n";
  for (std::size_t k = 0; k < report.loss.size(); ++k) {
    const int iter = static_cast<int>(k) + 1;
    os << iter << ',' << report.loss[k] << ',';
    if (auto it = snr_at.find(iter); it != snr_at.end()) os << format_snr(it->second);
    os << '\n';
  }
  return os.str();
}

std::string sweep_csv(const std::vector<SweepArm>& arms) {
  std::map<int, std::vector<std::optional<double>>> rows;
  for (std::size_t a = 0; a < arms.size(); ++a)
    for (const auto& p : arms[a].report.snr) {
      auto& row = rows[p.iter];
      row.resize(arms.size());
      row[a] = p.snr_db;
    }
  std::ostringstream os;
  os << std::setprecision(10);
  os << "iter";
  for (const auto& arm : arms) os << ",lr=" << arm.lr;
  os << '\n';
  for (auto& [iter, row] : rows) {
    row.resize(arms.size());
    os << iter;
    for (const auto& v : row) {
      os << ',';
      if (v) os << format_snr(*v);
    }
    os << '\n';
  }
  return os.str();
}

#define DSPR_INSTANTIATE_DSPRECON(S)                                                              \
  template Tensor4<S> init_input<S>(Index, Index, std::uint64_t);                                 \
  template Tensor4<S> mask_tensor<S>(const Mask&, Index);                                         \
  template FitResult<S> fit<S>(const SeismicGrid&, const Mask&, const FitConfig&,                 \
                               const std::optional<SeismicGrid>&, const FitProgress&,            \
                               const FitHook<S>&);                                                \
  template SeismicGrid reconstruct<S>(const NetworkParameters<S>&, const Tensor4<S>&,             \
                                      const NormParams&, const SeismicGrid&, const Mask&);

DSPR_INSTANTIATE_DSPRECON(float)
DSPR_INSTANTIATE_DSPRECON(double)

}  // namespace dspr
