#include "cli.hpp"

#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "binary_io.hpp"
#include "dspr/diagnostics.hpp"
#include "dspr/dsprecon.hpp"
#include "dspr/error.hpp"
#include "dspr/rank_reduction.hpp"
#include "dspr/synthetics.hpp"
#include "json_config.hpp"

namespace dspr::cli {

namespace fs = std::filesystem;

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  if (text.empty()) return out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    const char* first = text.data() + pos;
    const char* last = text.data() + end;
    while (first < last && *first == ' ') ++first;
    while (last > first && last[-1] == ' ') --last;
    T value{};
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last)
      throw ConfigError(std::string(what) + ": cannot parse list entry '" + std::string(first, last) + "'");
    out.push_back(value);
    pos = end + 1;
  }
  return out;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

SeismicGrid read_grid(const std::string& path) {
  if (path.empty()) throw ConfigError("missing input grid path");
  return load_grid(path, format_for(path));
}

struct Session {
  std::string out_dir = ".";
  std::string manifest;
  std::ostream& out;
  std::ostream& err;

  fs::path output(const std::string& name) const {
    fs::path p(name);
    if (p.is_relative()) p = fs::path(out_dir) / p;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return p;
  }

  void write_grid(const SeismicGrid& g, const std::string& name) const {
    const fs::path p = output(name);
    save_grid(g, p, format_for(p));
  }

  void write_text(const std::string& text, const std::string& name) const {
    detail::write_file_atomic(output(name), text);
  }
};

struct FitOpts {
  int iters = 3000;
  double lr = 0.001;
  double sigma = 0.03;
  std::uint64_t z_seed = 1;
  std::uint64_t init_seed = 2;
  std::uint64_t perturb_seed = 3;
  std::string precision = "single";
  int snr_every = 50;
  std::string snapshots;
  int progress = 0;

  void add(CLI::App* sub, bool with_iters) {
    if (with_iters) sub->add_option("--iters", iters, "Fit iterations");
    sub->add_option("--lr", lr, "ADAM learning rate");
    sub->add_option("--sigma", sigma, "Std. dev. of the per-iteration input perturbation");
    sub->add_option("--z-seed", z_seed, "Seed of the fixed network input");
    sub->add_option("--init-seed", init_seed, "Seed of the weight initialization");
    sub->add_option("--perturb-seed", perturb_seed, "Seed of the input perturbations");
    sub->add_option("--precision", precision, "single or double")
        ->check(CLI::IsMember({"single", "double"}));
    sub->add_option("--snr-every", snr_every, "SNR logging cadence (needs ground truth)");
    sub->add_option("--snapshots", snapshots, "Comma-separated iterations to snapshot");
    sub->add_option("--progress", progress, "Print the loss every N iterations (0 = never)")
        ->configurable(false);
  }

  FitConfig config() const {
    FitConfig c;
    c.iterations = iters;
    c.lr = lr;
    c.perturb_sigma = sigma;
    c.z_seed = z_seed;
    c.init_seed = init_seed;
    c.perturb_seed = perturb_seed;
    c.precision = precision == "double" ? Precision::Double : Precision::Single;
    c.snr_every = snr_every;
    c.snapshot_iters = parse_list<int>(snapshots, "--snapshots");
    return c;
  }

  FitProgress reporter(std::ostream& err) const {
    if (progress <= 0) return {};
    const int every = progress;
    return [&err, every](int iter, double loss) {
      if (iter % every == 0) err << "iter " << iter << " loss " << loss << "\n";
    };
  }
};

struct RankOpts {
  Index rank = 3;
  int iters = 10;
  Index embedding = 0;
  std::string band;

  void add(CLI::App* sub) {
    sub->add_option("--rank", rank, "Hankel rank k");
    sub->add_option("--iters", iters, "Reinsertion iterations");
    sub->add_option("--embedding", embedding, "Hankel rows L (0 = nx/2 + 1)");
    sub->add_option("--band", band, "Frequency band f_lo,f_hi in Hz (default: all bins)");
  }

  RankConfig config() const {
    RankConfig c;
    c.rank = rank;
    c.n_iters = iters;
    if (embedding > 0) c.embedding = embedding;
    if (!band.empty()) {
      const auto b = parse_list<double>(band, "--band");
      if (b.size() != 2) throw ConfigError("--band expects f_lo,f_hi");
      c.freq_band = std::make_pair(b[0], b[1]);
    }
    return c;
  }
};

struct Inputs {
  SeismicGrid observed;
  Mask mask;
  std::optional<SeismicGrid> truth;
};

bool regular_by_default(const std::string& fixture) {
  return fixture == "fig11" || fixture == "two-linear-128" || fixture == "plane-wave";
}

struct InputOpts {
  std::string in;
  std::string mask;
  std::string truth;
  std::string preset;
  std::string decimation = "auto";
  double keep = 0.5;
  std::uint64_t mask_seed = 7;
  bool save_inputs = false;

  void add(CLI::App* sub) {
    sub->add_option("--in", in, "Observed (decimated) grid, .sgrd or .csv");
    sub->add_option("--mask", mask, "Mask file written by 'decimate'");
    sub->add_option("--truth", truth, "Complete grid for SNR logging");
    sub->add_option("--preset", preset, "Build truth, mask and observed grid from a fixture")
        ->check(CLI::IsMember(fixture_names()));
    sub->add_option("--decimation", decimation, "With --preset: auto, random or regular (factor 2)")
        ->check(CLI::IsMember({"auto", "random", "regular"}));
    sub->add_option("--keep", keep, "With --preset and random decimation: kept fraction");
    sub->add_option("--mask-seed", mask_seed, "With --preset and random decimation: mask seed");
    sub->add_flag("--save-inputs", save_inputs, "Also write observed.sgrd, mask.txt and truth.sgrd");
  }

  Inputs resolve(const Session& s) const {
    if (!preset.empty()) {
      if (!in.empty() || !mask.empty() || !truth.empty())
        throw ConfigError("--preset cannot be combined with --in, --mask or --truth");
      SeismicGrid full = fixture_grid(preset);
      const bool regular =
          decimation == "regular" || (decimation == "auto" && regular_by_default(preset));
      Mask m = regular ? make_regular_mask(full.nx(), 2, 0) : make_random_mask(full.nx(), keep, mask_seed);
      SeismicGrid observed = apply_mask(full, m);
      Inputs r{std::move(observed), std::move(m), std::move(full)};
      save(s, r);
      return r;
    }
    if (in.empty() || mask.empty()) throw ConfigError("need either --preset or both --in and --mask");
    std::optional<SeismicGrid> t;
    if (!truth.empty()) t = read_grid(truth);
    Inputs r{read_grid(in), load_mask(mask), std::move(t)};
    save(s, r);
    return r;
  }

  void save(const Session& s, const Inputs& r) const {
    if (!save_inputs) return;
    s.write_grid(r.observed, "observed.sgrd");
    s.write_text(format_mask(r.mask), "mask.txt");
    if (r.truth) s.write_grid(*r.truth, "truth.sgrd");
  }
};

std::string key_value_csv(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::string out = "key,value\n";
  for (const auto& [k, v] : rows) out += k + "," + v + "\n";
  return out;
}

std::string grid_text(const SeismicGrid& g) {
  std::ostringstream os;
  os << g.nt() << "x" << g.nx();
  return os.str();
}

// ---------------------------------------------------------------------------

struct SynthCmd {
  std::string preset;
  std::string events;
  Index nt = 256;
  Index nx = 256;
  double dt = 0.004;
  double dx = 6.0;
  std::string out = "synth.sgrd";

  void add(CLI::App* sub) {
    sub->add_option("--preset", preset, "Named fixture")->check(CLI::IsMember(fixture_names()));
    sub->add_option("--events", events, "JSON array of {kind, t0, slope_or_v, amp, f}");
    sub->add_option("--nt", nt, "Time samples (with --events)");
    sub->add_option("--nx", nx, "Traces (with --events)");
    sub->add_option("--dt", dt, "Time step in seconds (with --events)");
    sub->add_option("--dx", dx, "Trace spacing (with --events)");
    sub->add_option("--out", out, "Output grid");
  }

  void run(const Session& s) const {
    if (preset.empty() == events.empty()) throw ConfigError("synth: give exactly one of --preset or --events");
    const SeismicGrid g = preset.empty() ? make_events(nt, nx, dt, dx, load_events(events)) : fixture_grid(preset);
    s.write_grid(g, out);
    s.out << "wrote " << grid_text(g) << " grid to " << s.output(out).string() << "\n";
  }
};

struct DecimateCmd {
  std::string in;
  double random = 0.0;
  Index regular = 0;
  Index phase = 0;
  std::uint64_t seed = 0;
  std::string out = "decimated.sgrd";
  std::string mask_out = "mask.txt";

  void add(CLI::App* sub) {
    sub->add_option("--in", in, "Complete grid")->required();
    sub->add_option("--random", random, "Keep this fraction of traces at random");
    sub->add_option("--regular", regular, "Keep every n-th trace");
    sub->add_option("--phase", phase, "Index of the first kept trace (regular)");
    sub->add_option("--seed", seed, "Mask seed (random)");
    sub->add_option("--out", out, "Decimated grid");
    sub->add_option("--mask-out", mask_out, "Mask file");
  }

  void run(const Session& s) const {
    const bool is_random = random != 0.0;
    const bool is_regular = regular != 0;
    if (is_random == is_regular) throw ConfigError("decimate: give exactly one of --random or --regular");
    const SeismicGrid g = read_grid(in);
    const Mask m = is_random ? make_random_mask(g.nx(), random, seed) : make_regular_mask(g.nx(), regular, phase);
    s.write_grid(apply_mask(g, m), out);
    s.write_text(format_mask(m), mask_out);
    s.out << "kept " << m.kept_count() << " of " << m.nx() << " traces\n";
  }
};

struct ReconDsp {
  InputOpts inputs;
  FitOpts fit;
  std::string out = "recon.sgrd";
  std::string report = "report.csv";

  void add(CLI::App* sub) {
    inputs.add(sub);
    fit.add(sub, true);
    sub->add_option("--out", out, "Reconstructed grid");
    sub->add_option("--report", report, "Per-iteration loss/SNR CSV");
  }

  void run(const Session& s) const {
    const Inputs in = inputs.resolve(s);
    const DspOutcome r = run_dsprecon(in.observed, in.mask, fit.config(), in.truth, fit.reporter(s.err));
    s.write_grid(r.recon, out);
    s.write_text(report_csv(r.report), report);
    for (const Snapshot& snap : r.report.snapshots)
      s.write_grid(snap.grid, "snapshot_" + std::to_string(snap.iter) + ".sgrd");
    s.out << "final loss " << r.report.loss.back() << "\n";
    if (in.truth) s.out << "snr_db " << format_snr(snr(*in.truth, r.recon)) << "\n";
  }
};

struct ReconRank {
  bool dealiased = false;
  InputOpts inputs;
  RankOpts rank;
  std::string out = "recon.sgrd";
  std::string report = "report.csv";
  std::string bins = "cadzow_bins.csv";

  void add(CLI::App* sub) {
    inputs.add(sub);
    rank.add(sub);
    sub->add_option("--out", out, "Reconstructed grid");
    sub->add_option("--report", report, "Summary CSV");
    if (dealiased) sub->add_option("--bins", bins, "Per-bin fallback log CSV");
  }

  void run(const Session& s) const {
    const Inputs in = inputs.resolve(s);
    std::vector<BinNote> log;
    const SeismicGrid recon = dealiased ? cadzow_dealiased(in.observed, in.mask, rank.config(), &log)
                                        : ssa_reconstruct(in.observed, in.mask, rank.config());
    s.write_grid(recon, out);
    std::vector<std::pair<std::string, std::string>> rows{{"method", dealiased ? "cadzow" : "ssa"}};
    if (in.truth) rows.emplace_back("snr_db", format_snr(snr(*in.truth, recon)));
    if (dealiased) {
      rows.emplace_back("fallback_bins", std::to_string(log.size()));
      std::string text = "bin,note\n";
      for (const auto& b : log) text += std::to_string(b.bin) + "," + b.note + "\n";
      s.write_text(text, bins);
    }
    s.write_text(key_value_csv(rows), report);
    if (in.truth) s.out << "snr_db " << rows[1].second << "\n";
  }
};

struct EvalSnr {
  std::string orig;
  std::string recon;
  std::string csv = "snr.csv";

  void add(CLI::App* sub) {
    sub->add_option("--orig", orig, "Complete grid")->required();
    sub->add_option("--recon", recon, "Reconstructed grid")->required();
    sub->add_option("--csv", csv, "Output CSV");
  }

  void run(const Session& s) const {
    const std::string v = format_snr(snr(read_grid(orig), read_grid(recon)));
    s.write_text("snr_db\n" + v + "\n", csv);
    s.out << v << "\n";
  }
};

struct EvalFk {
  std::string in;
  std::string csv = "fk.csv";

  void add(CLI::App* sub) {
    sub->add_option("--in", in, "Grid")->required();
    sub->add_option("--csv", csv, "Spectrum CSV: first row wavenumbers, first column Hz");
  }

  void run(const Session& s) const {
    const FkSpectrum fk = fk_spectrum(read_grid(in));
    Eigen::MatrixXd table(fk.db.rows() + 1, fk.db.cols() + 1);
    table(0, 0) = 0.0;
    table.row(0).tail(fk.db.cols()) = fk.wavenumber.transpose();
    table.col(0).tail(fk.db.rows()) = fk.freq_hz;
    table.bottomRightCorner(fk.db.rows(), fk.db.cols()) = fk.db;
    s.write_text(matrix_csv(table), csv);
    s.out << "wrote " << fk.db.rows() << "x" << fk.db.cols() << " f-k spectrum\n";
  }
};

struct EvalTrace {
  std::string orig;
  std::string recon;
  Index index = 0;
  bool one_based = false;
  std::string csv = "trace.csv";

  void add(CLI::App* sub) {
    sub->add_option("--orig", orig, "Complete grid")->required();
    sub->add_option("--recon", recon, "Reconstructed grid")->required();
    sub->add_option("--index", index, "Trace index")->required();
    sub->add_flag("--one-based", one_based, "Interpret --index as 1-based");
    sub->add_option("--csv", csv, "Two-column CSV (original, reconstructed)");
  }

  void run(const Session& s) const {
    const SeismicGrid a = read_grid(orig);
    const SeismicGrid b = read_grid(recon);
    if (!a.same_shape(b)) throw ShapeError("eval trace: grids differ in shape");
    const Index j = one_based ? index - 1 : index;
    const Eigen::VectorXd ta = extract_trace(a, j);
    const Eigen::VectorXd tb = extract_trace(b, j);
    Eigen::MatrixXd m(ta.size(), 2);
    m << ta, tb;
    s.write_text("original,reconstructed\n" + matrix_csv(m), csv);
    s.out << "wrote trace " << j << " (0-based)\n";
  }
};

struct EvalFeatures {
  InputOpts inputs;
  FitOpts fit;
  std::string taps = "e1";
  std::string channels = "2";
  std::string at = "0";
  std::string dir = "features";

  void add(CLI::App* sub) {
    inputs.add(sub);
    fit.add(sub, false);
    sub->add_option("--taps", taps, "Comma-separated stages (e1..e5, d1..d5)");
    sub->add_option("--channels", channels, "Comma-separated 0-based channel indices");
    sub->add_option("--at", at, "Comma-separated fit iterations at which to export");
    sub->add_option("--dir", dir, "Output directory for the maps");
  }

  void run(const Session& s) const {
    const Inputs in = inputs.resolve(s);
    std::vector<FeatureRequest> requests;
    for (const auto& t : split_names(taps))
      for (Index c : parse_list<Index>(channels, "--channels")) requests.push_back({t, c});
    if (requests.empty()) throw ConfigError("eval features: no taps or channels requested");
    std::vector<int> iters = parse_list<int>(at, "--at");
    if (iters.empty()) throw ConfigError("eval features: --at is empty");
    const int last = *std::max_element(iters.begin(), iters.end());
    if (*std::min_element(iters.begin(), iters.end()) < 0) throw ConfigError("eval features: negative --at");

    FitConfig cfg = fit.config();
    cfg.iterations = std::max(1, last);
    const fs::path target = s.output(dir);
    std::size_t files = 0;
    auto dispatch = [&]<typename Scalar>(Scalar) {
      const FitHook<Scalar> hook = [&](int iter, const NetworkParameters<Scalar>& p, const Tensor4<Scalar>& z) {
        if (std::find(iters.begin(), iters.end(), iter) != iters.end())
          files += export_feature_maps(p, z, requests, iter, target).size();
      };
      dspr::fit<Scalar>(in.observed, in.mask, cfg, in.truth, fit.reporter(s.err), hook);
    };
    if (cfg.precision == Precision::Double)
      dispatch(double{});
    else
      dispatch(float{});
    s.out << "wrote " << files << " feature files\n";
  }
};

struct EvalLrSweep {
  InputOpts inputs;
  FitOpts fit;
  std::string lrs = "0.1,0.01,0.001";
  std::string csv = "lrsweep.csv";

  void add(CLI::App* sub) {
    inputs.add(sub);
    fit.add(sub, true);
    sub->add_option("--lrs", lrs, "Comma-separated learning rates");
    sub->add_option("--csv", csv, "SNR curves, one column per learning rate");
  }

  void run(const Session& s) const {
    const Inputs in = inputs.resolve(s);
    if (!in.truth) throw ConfigError("eval lrsweep: ground truth required (--truth or --preset)");
    const std::vector<double> rates = parse_list<double>(lrs, "--lrs");
    if (rates.empty()) throw ConfigError("eval lrsweep: --lrs is empty");
    const auto arms = lr_sweep(in.observed, in.mask, *in.truth, rates, fit.config());
    s.write_text(sweep_csv(arms), csv);
    for (const auto& arm : arms) {
      s.out << "lr " << arm.lr << ": ";
      if (arm.error)
        s.out << "failed (" << *arm.error << ")\n";
      else
        s.out << "final snr_db " << format_snr(arm.report.snr.back().snr_db) << "\n";
    }
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Seismic trace reconstruction: deep seismic prior, SSA and de-aliased Cadzow", "dspr"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config or run manifest; command-line flags take precedence");
  app.option_defaults()->always_capture_default();
  app.fallthrough();
  app.require_subcommand(1);

  Session session{".", "", out, err};
  app.add_option("--out-dir", session.out_dir, "Output directory for relative output paths")->envname("DSPR_OUT");
  app.add_option("--manifest", session.manifest, "Manifest file name (default <command>.manifest.json)")
      ->configurable(false);

  auto* synth_app = app.add_subcommand("synth", "Render a synthetic grid")->configurable();
  auto* decimate_app = app.add_subcommand("decimate", "Remove traces")->configurable();
  auto* recon_app = app.add_subcommand("recon", "Reconstruct missing traces")->configurable()->require_subcommand(1);
  auto* dsp_app = recon_app->add_subcommand("dsp", "Fit an untrained generator")->configurable();
  auto* ssa_app = recon_app->add_subcommand("ssa", "SSA rank reduction")->configurable();
  auto* cadzow_app = recon_app->add_subcommand("cadzow", "De-aliased Cadzow (regular factor-2 masks)")->configurable();
  auto* eval_app = app.add_subcommand("eval", "Diagnostics")->configurable()->require_subcommand(1);
  auto* snr_app = eval_app->add_subcommand("snr", "SNR in dB")->configurable();
  auto* fk_app = eval_app->add_subcommand("fk", "f-k spectrum")->configurable();
  auto* trace_app = eval_app->add_subcommand("trace", "Single-trace comparison")->configurable();
  auto* features_app = eval_app->add_subcommand("features", "Export feature maps during a fit")->configurable();
  auto* lrsweep_app = eval_app->add_subcommand("lrsweep", "SNR curves for several learning rates")->configurable();

  SynthCmd synth;
  DecimateCmd decimate;
  ReconDsp dsp;
  ReconRank ssa;
  ReconRank cadzow;
  cadzow.dealiased = true;
  EvalSnr eval_snr;
  EvalFk eval_fk;
  EvalTrace eval_trace;
  EvalFeatures eval_features;
  EvalLrSweep eval_lrsweep;
  synth.add(synth_app);
  decimate.add(decimate_app);
  dsp.add(dsp_app);
  ssa.add(ssa_app);
  cadzow.add(cadzow_app);
  eval_snr.add(snr_app);
  eval_fk.add(fk_app);
  eval_trace.add(trace_app);
  eval_features.add(features_app);
  eval_lrsweep.add(lrsweep_app);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  const std::vector<std::pair<CLI::App*, std::function<void()>>> commands{
      {synth_app, [&] { synth.run(session); }},
      {decimate_app, [&] { decimate.run(session); }},
      {dsp_app, [&] { dsp.run(session); }},
      {ssa_app, [&] { ssa.run(session); }},
      {cadzow_app, [&] { cadzow.run(session); }},
      {snr_app, [&] { eval_snr.run(session); }},
      {fk_app, [&] { eval_fk.run(session); }},
      {trace_app, [&] { eval_trace.run(session); }},
      {features_app, [&] { eval_features.run(session); }},
      {lrsweep_app, [&] { eval_lrsweep.run(session); }},
  };

  try {
    for (const auto& [sub, action] : commands) {
      if (!sub->parsed()) continue;
      action();
      std::string name = sub->get_name();
      if (sub->get_parent() != &app) name = sub->get_parent()->get_name() + "-" + name;
      const std::string manifest = session.manifest.empty() ? name + ".manifest.json" : session.manifest;
      session.write_text(app.config_to_str(true, false), manifest);
      return kOk;
    }
    err << "error: no command selected\n";
    return kConfig;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kShape;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return kShape;
  } catch (const EmptyMaskError& e) {
    err << "error: " << e.what() << "\n";
    return kShape;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace dspr::cli
