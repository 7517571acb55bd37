// End-to-end acceptance run: one PASS/FAIL line per criterion. Every
// threshold and run length is pinned here; the exit status is nonzero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "cli.hpp"
#include "dspr/diagnostics.hpp"
#include "dspr/dsprecon.hpp"
#include "dspr/grad_check.hpp"
#include "dspr/rank_reduction.hpp"
#include "dspr/sampling.hpp"
#include "dspr/synthetics.hpp"
#include "support.hpp"

using namespace dspr;
namespace fs = std::filesystem;

namespace {

// Criterion 1
constexpr double kGradTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kGradSeconds = 120.0;
constexpr int kGradInstances = 20;
// Criterion 2
constexpr int kConstraintTrials = 100;
// Criterion 3
constexpr double kOracleError = 1e-6;
constexpr double kOracleRank = 1e-8;
// Criterion 4
constexpr int kIrregularIters = 6000;
constexpr double kIrregularSnr = 20.0;
// Criterion 5
constexpr double kRegularSnr = 10.0;
constexpr double kSquareIdentity = 1e-10;
// Criterion 6
constexpr int kSweepIters = 3000;
constexpr int kSweepEarly = 300;
// Criterion 7
constexpr int kAliasIters = 1000;
constexpr double kReplicaWithin = 3.0;
constexpr double kReplicaCut = 20.0;
// Criterion 8
constexpr int kReplayIters = 5;

using T4 = Tensor4<double>;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s [%.0f s]\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(), s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string db(double v) { return fmt("%.2f", v); }

// ---- 1 -------------------------------------------------------------------

Outcome gradients() {
  using Fn = GradCheckFn;
  struct Case {
    const char* name;
    Fn fn;
    std::vector<Shape4> shapes;
  };
  const T4 target = testing::random_tensor<double>(Shape4{1, 1, 3, 4}, 77);
  T4 mask01(target.shape());
  mask01.plane(0, 0).col(0).setOnes();
  mask01.plane(0, 0).col(3).setOnes();
  const std::vector<Case> cases{
      {"conv2d", [](Tape<double>& t, std::span<const Var> in) { return conv2d(t, in[0], in[1], std::optional<Var>(in[2]), 1); },
       {{1, 2, 4, 5}, {3, 2, 3, 3}, {1, 3, 1, 1}}},
      {"conv2d stride 2", [](Tape<double>& t, std::span<const Var> in) { return conv2d(t, in[0], in[1], std::nullopt, 2); },
       {{1, 2, 5, 6}, {2, 2, 3, 3}}},
      {"batch_norm", [](Tape<double>& t, std::span<const Var> in) { return batch_norm(t, in[0], in[1], in[2]); },
       {{1, 2, 3, 4}, {1, 2, 1, 1}, {1, 2, 1, 1}}},
      {"leaky_relu", [](Tape<double>& t, std::span<const Var> in) { return leaky_relu(t, in[0], 0.2); }, {{1, 2, 3, 3}}},
      {"upsample", [](Tape<double>& t, std::span<const Var> in) { return upsample_bilinear2x(t, in[0]); }, {{1, 2, 3, 2}}},
      {"add", [](Tape<double>& t, std::span<const Var> in) { return add(t, in[0], in[1]); }, {{1, 2, 2, 3}, {1, 2, 2, 3}}},
      {"mul", [](Tape<double>& t, std::span<const Var> in) { return mul(t, in[0], in[1]); }, {{1, 2, 2, 3}, {1, 2, 2, 3}}},
      {"scale", [](Tape<double>& t, std::span<const Var> in) { return scale(t, in[0], -1.7); }, {{1, 2, 2, 3}}},
      {"sigmoid", [](Tape<double>& t, std::span<const Var> in) { return sigmoid(t, in[0]); }, {{1, 2, 3, 3}}},
      {"sum", [](Tape<double>& t, std::span<const Var> in) { return sum(t, in[0]); }, {{1, 2, 3, 3}}},
      {"crop", [](Tape<double>& t, std::span<const Var> in) { return crop(t, in[0], 2, 3); }, {{1, 2, 4, 4}}},
      {"masked_mse",
       [&](Tape<double>& t, std::span<const Var> in) { return masked_mse(t, in[0], target, mask01); },
       {{1, 1, 3, 4}}},
  };

  double worst = 0.0;
  Index checked = 0;
  std::string failed;
  for (const auto& c : cases)
    for (int trial = 0; trial < kGradInstances; ++trial) {
      std::vector<T4> inputs;
      for (std::size_t k = 0; k < c.shapes.size(); ++k)
        inputs.push_back(testing::random_tensor<double>(c.shapes[k], 7919 * trial + k + 11));
      GradCheckOptions o;
      o.step = kGradStep;
      o.tol = kGradTol;
      o.seed = static_cast<std::uint64_t>(trial);
      const auto r = grad_check(c.fn, inputs, o);
      worst = std::max(worst, r.max_rel_error);
      checked += r.checked;
      if (!r.passed && failed.empty()) failed = c.name;
    }

  // The full loss: masked misfit of the generator output, every parameter and z as inputs.
  const auto params = build_unet<double>(UNetSpec{}, 5);
  const UNetSpec spec = params.spec;
  for (Index n : {32, 64}) {
    std::vector<T4> inputs;
    for (const auto& t : params.tensors) inputs.push_back(t.value);
    inputs.push_back(testing::random_tensor<double>(Shape4{1, 1, n, n}, 21 + n, 0.0, 0.1));
    const T4 obs = testing::random_tensor<double>(Shape4{1, 1, n, n}, 31 + n, 0.0, 1.0);
    T4 m(obs.shape());
    for (Index j = 0; j < n; j += 2) m.plane(0, 0).col(j).setOnes();
    const GradCheckFn loss = [&](Tape<double>& t, std::span<const Var> in) {
      return masked_mse(t, forward(t, spec, in.first(in.size() - 1), in.back()), obs, m);
    };
    GradCheckOptions o;
    o.step = 1e-4;
    o.tol = kGradTol;
    o.coords = 30;
    o.seed = static_cast<std::uint64_t>(n);
    const auto r = grad_check(loss, inputs, o);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    if (!r.passed && failed.empty()) failed = "generator loss";
  }
  return {failed.empty(), fmt("max rel error %.2e", worst) + " <= 1e-4 over " + std::to_string(checked) +
                              " coordinates" + (failed.empty() ? "" : ", failed in " + failed)};
}

// ---- 2 -------------------------------------------------------------------

Outcome constraint() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<Index> width(32, 64);
  std::uniform_real_distribution<double> keep(0.2, 0.8);
  int bad[3] = {0, 0, 0};
  for (int trial = 0; trial < kConstraintTrials; ++trial) {
    const Index nx = width(rng);
    const SeismicGrid g = testing::random_grid(32, nx, 500 + trial);
    const Mask irregular = make_random_mask(nx, keep(rng), 900 + trial);
    const SeismicGrid obs = apply_mask(g, irregular);

    FitConfig fc;
    fc.iterations = 2;
    fc.snr_every = 2;
    fc.z_seed = 1 + trial;
    if (trial % 2) fc.precision = Precision::Double;
    if (!(apply_mask(run_dsprecon(obs, irregular, fc).recon, irregular) == obs)) ++bad[0];

    RankConfig rc;
    rc.rank = 1 + trial % 4;
    rc.n_iters = 3;
    if (!(apply_mask(ssa_reconstruct(obs, irregular, rc), irregular) == obs)) ++bad[1];

    const Mask regular = make_regular_mask(nx, 2, trial % 2);
    const SeismicGrid robs = apply_mask(g, regular);
    if (!(apply_mask(cadzow_dealiased(robs, regular, rc), regular) == robs)) ++bad[2];
  }
  const bool ok = bad[0] == 0 && bad[1] == 0 && bad[2] == 0;
  std::ostringstream d;
  d << "mismatching kept traces over " << kConstraintTrials << " trials: dsp " << bad[0] << ", ssa " << bad[1]
    << ", cadzow " << bad[2];
  return {ok, d.str()};
}

// ---- 3 -------------------------------------------------------------------

// Whole-sample moveout, so each frequency slice is an exact sum of K exponentials.
SeismicGrid integer_dip_events(const std::vector<int>& samples_per_trace, const std::vector<double>& t0s) {
  const double dt = 0.004;
  std::vector<EventSpec> ev;
  for (std::size_t e = 0; e < samples_per_trace.size(); ++e)
    ev.push_back({EventKind::Linear, t0s[e], samples_per_trace[e] * dt, 1.0 - 0.15 * static_cast<double>(e), 30.0});
  return make_events(256, 40, dt, 10.0, ev);
}

Outcome ssa_oracle() {
  const std::vector<int> dips{1, -2, 3, -1};
  const std::vector<double> t0s{0.15, 0.75, 0.3, 0.55};
  double worst_err = 0.0, worst_rank = 0.0;
  for (std::size_t k = 1; k <= dips.size(); ++k) {
    const SeismicGrid g = integer_dip_events({dips.begin(), dips.begin() + k}, {t0s.begin(), t0s.begin() + k});
    RankConfig c;
    c.rank = static_cast<Index>(k);
    c.n_iters = 1;
    const SeismicGrid f = cadzow_filter(g, c);
    worst_err = std::max(worst_err, (f.values() - g.values()).norm() / g.values().norm());

    // Bins below 1e-3 of the peak hold only rounding noise.
    const SpectrumFX s = fft_time(g);
    const double peak = s.slices.cwiseAbs().maxCoeff();
    for (Index m = 0; m < s.nf(); ++m) {
      if (s.slices.row(m).cwiseAbs().maxCoeff() < 1e-3 * peak) continue;
      const Eigen::MatrixXcd H = hankelize(s.slices.row(m).transpose(), c.embedding_for(g.nx()));
      const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(H).singularValues();
      worst_rank = std::max(worst_rank, sv[static_cast<Index>(k)] / sv[0]);
    }
  }
  return {worst_err <= kOracleError && worst_rank <= kOracleRank,
          fmt("K = 1..4: relative error %.2e <= 1e-6", worst_err) + fmt(", sigma_K+1 / sigma_1 %.2e <= 1e-8", worst_rank)};
}

// ---- 4 -------------------------------------------------------------------

Outcome irregular() {
  const SeismicGrid truth = fixture_grid("three-events-128");
  const Mask m = make_random_mask(truth.nx(), 0.5, 7);
  const SeismicGrid obs = apply_mask(truth, m);

  RankConfig rc;
  rc.rank = 3;
  rc.n_iters = 10;
  const double ssa_db = snr(truth, ssa_reconstruct(obs, m, rc));

  FitConfig fc;
  fc.iterations = kIrregularIters;
  fc.lr = 0.001;
  fc.perturb_sigma = 0.03;
  fc.snr_every = 500;
  const auto out = run_dsprecon(obs, m, fc, truth);
  const double dsp_db = snr(truth, out.recon);

  std::ostringstream d;
  d << "dsp " << db(dsp_db) << " dB after " << kIrregularIters << " iterations (>= 20), ssa "
    << db(ssa_db) << " dB, decimated " << db(snr(truth, obs)) << " dB";
  return {dsp_db >= kIrregularSnr && dsp_db > ssa_db, d.str()};
}

// ---- 5 -------------------------------------------------------------------

Eigen::VectorXcd exponential(Index n, double theta, std::complex<double> a = 1.0) {
  Eigen::VectorXcd v(n);
  for (Index j = 0; j < n; ++j) v[j] = a * std::polar(1.0, theta * static_cast<double>(j));
  return v;
}

Outcome regular() {
  const SeismicGrid truth = fixture_grid("two-linear-128");
  const Mask m = make_regular_mask(truth.nx(), 2, 0);
  const SeismicGrid obs = apply_mask(truth, m);
  RankConfig rc;
  rc.rank = 2;
  rc.n_iters = 10;
  const double cz = snr(truth, cadzow_dealiased(obs, m, rc));
  const double ss = snr(truth, ssa_reconstruct(obs, m, rc));

  // Squares of a K-exponential slice span the doubled-frequency slice.
  double identity = 0.0;
  const std::vector<std::vector<double>> thetas{{0.45}, {0.2, 0.9}, {0.3, 1.1, -0.7}};
  for (const auto& th : thetas) {
    Eigen::VectorXcd slice = Eigen::VectorXcd::Zero(41);
    for (std::size_t k = 0; k < th.size(); ++k) slice += exponential(41, th[k], std::polar(1.0 - 0.2 * k, 0.3 * k));
    const Index K = static_cast<Index>(th.size());
    const Eigen::MatrixXcd u = leading_left_vectors(hankelize(slice, 21), K);
    const Eigen::MatrixXcd q = product_basis(u, u, true);
    for (double a : th) {
      const Eigen::VectorXcd t = exponential(21, 2 * a).normalized();
      identity = std::max(identity, (t - q * (q.adjoint() * t)).norm());
    }
  }
  std::ostringstream d;
  d << "cadzow " << db(cz) << " dB (>= 10), ssa " << db(ss) << " dB"
    << fmt(", square identity residual %.2e <= 1e-10", identity);
  return {cz >= kRegularSnr && cz > ss && identity <= kSquareIdentity, d.str()};
}

// ---- 6 -------------------------------------------------------------------

std::optional<double> snr_at(const FitReport& r, int iter) {
  for (const auto& p : r.snr)
    if (p.iter == iter) return p.snr_db;
  return std::nullopt;
}

Outcome lr_curves() {
  const SeismicGrid truth = fixture_grid("three-events-128");
  const Mask m = make_random_mask(truth.nx(), 0.5, 7);
  FitConfig fc;
  fc.iterations = kSweepIters;
  fc.snr_every = kSweepEarly;
  const auto arms = lr_sweep(apply_mask(truth, m), m, truth, {0.1, 0.01, 0.001}, fc);

  // A diverged arm has no final SNR and ranks below every finite one.
  auto final_snr = [&](const SweepArm& a) -> double {
    if (a.error) return -std::numeric_limits<double>::infinity();
    return snr_at(a.report, kSweepIters).value_or(-std::numeric_limits<double>::infinity());
  };
  const double s1 = final_snr(arms[0]), s2 = final_snr(arms[1]), s3 = final_snr(arms[2]);
  const auto early = arms[2].error ? std::nullopt : snr_at(arms[2].report, kSweepEarly);
  const bool ok = s2 > s1 && s3 > s1 && early && s3 >= *early;

  std::ostringstream d;
  d << "final snr lr 0.1 " << (arms[0].error ? "diverged" : db(s1)) << ", lr 0.01 " << db(s2)
    << ", lr 0.001 " << db(s3) << "; lr 0.001 at " << kSweepEarly << " "
    << (early ? db(*early) : "missing");
  return {ok, d.str()};
}

// ---- 7 -------------------------------------------------------------------

Outcome aliasing() {
  const SeismicGrid g = fixture_grid("plane-wave");
  const Mask m = make_regular_mask(g.nx(), 2, 0);
  const SeismicGrid obs = apply_mask(g, m);

  const FkSpectrum full = fk_spectrum(g);
  Index pr = 0, pc = 0;
  full.db.maxCoeff(&pr, &pc);
  const Index rc = (pc + g.nx() / 2) % g.nx();

  const Eigen::MatrixXcd d = fk_transform(obs);
  const double within = 20.0 * std::log10(std::abs(d(pr, pc)) / std::abs(d(pr, rc)));

  FitConfig fc;
  fc.iterations = kAliasIters;
  fc.snr_every = kAliasIters;
  const auto out = run_dsprecon(obs, m, fc, g);
  const Eigen::MatrixXcd r = fk_transform(out.recon);
  const double cut = 20.0 * std::log10(std::abs(d(pr, rc)) / std::abs(r(pr, rc)));

  std::ostringstream s;
  s << fmt("decimated replica %.2f dB below primary (<= 3)", std::abs(within))
    << fmt(", reconstruction lowers it by %.2f dB (>= 20)", cut);
  return {std::abs(within) <= kReplicaWithin && cut >= kReplicaCut, s.str()};
}

// ---- 8 -------------------------------------------------------------------

Outcome replay() {
  const auto root = testing::scratch_dir("acceptance_replay");
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) { return cli::run(args, sink, sink); };
  const auto s = std::to_string(kReplayIters);
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands{
      {"synth", {"synth", "--preset", "three-events-128"}},
      {"decimate", {"decimate", "--in", (root / "a0" / "synth.sgrd").string(), "--random", "0.5", "--seed", "4"}},
      {"recon-dsp", {"recon", "dsp", "--preset", "plane-wave", "--iters", s, "--precision", "single"}},
      {"recon-dsp", {"recon", "dsp", "--preset", "plane-wave", "--iters", s, "--precision", "double"}},
      {"recon-ssa", {"recon", "ssa", "--preset", "three-events-128", "--rank", "3"}},
      {"recon-cadzow", {"recon", "cadzow", "--preset", "two-linear-128", "--rank", "2"}},
  };
  int n = 0, identical = 0;
  std::string failed;
  for (const auto& [name, args] : commands) {
    const auto a = root / ("a" + std::to_string(n));
    const auto b = root / ("b" + std::to_string(n));
    ++n;
    std::vector<std::string> first{"--out-dir", a.string()};
    first.insert(first.end(), args.begin(), args.end());
    const auto manifest = a / (name + ".manifest.json");
    if (run(first) != cli::kOk || run({"--config", manifest.string(), "--out-dir", b.string()}) != cli::kOk) {
      failed += " " + name + "(exit)";
      continue;
    }
    bool same = true;
    for (const auto& entry : fs::directory_iterator(a)) {
      const auto fname = entry.path().filename();
      if (fname.string().ends_with(".manifest.json")) continue;
      if (!fs::exists(b / fname) || testing::slurp(entry.path()) != testing::slurp(b / fname)) same = false;
    }
    if (same) ++identical;
    else failed += " " + name;
  }
  return {identical == n, std::to_string(identical) + "/" + std::to_string(n) +
                              " runs replayed bit-identically from their manifests" +
                              (failed.empty() ? "" : ", differing:" + failed)};
}

}  // namespace

int main() {
  report(1, "gradient integrity", [] {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = gradients();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.detail += fmt(", %.0f s <= 120 s", s);
    o.pass = o.pass && s <= kGradSeconds;
    return o;
  });
  report(2, "observed traces are kept exactly", constraint);
  report(3, "SSA oracle on integer-dip events", ssa_oracle);
  report(5, "regular decimation ordering", regular);
  report(7, "aliasing diagnostic", aliasing);
  report(8, "manifest replay", replay);
  report(4, "irregular decimation ordering", irregular);
  report(6, "learning-rate curve shape", lr_curves);
  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "PASSED", failures);
  return failures ? 1 : 0;
}
