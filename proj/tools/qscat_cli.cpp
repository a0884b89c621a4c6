// Batch entry point: assumption checks, path synthesis, scattering runs,
// analytic limit reports, and the Monte Carlo verification modes.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "qscat/config.hpp"
#include "qscat/limits.hpp"
#include "qscat/scattering.hpp"
#include "qscat/synthesis.hpp"
#include "qscat/verify.hpp"
#include "qscat/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qscat;

namespace {

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[64];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
  return buf;
}

struct Session {
  ParsedConfig pc;
  std::string out_dir;
  RunManifest manifest;

  fs::path out_path(const std::string& name) const { return fs::path(out_dir) / name; }

  void note_output(const fs::path& p) {
    manifest.outputs.emplace_back(p.string(), file_digest(p.string()));
  }

  void write_json(const std::string& name, const json& j) {
    fs::create_directories(out_dir);
    const auto p = out_path(name);
    std::ofstream os(p);
    os << j.dump(2) << "\n";
    os.close();
    note_output(p);
  }

  void finish() {
    if (out_dir.empty()) return;
    fs::create_directories(out_dir);
    manifest.finished = now_iso();
    std::ofstream os(out_path("manifest.json"));
    os << manifest.to_json().dump(2) << "\n";
  }
};

Session make_session(const std::string& config_path, std::uint64_t seed_override,
                     bool seed_set, std::size_t threads, bool threads_set,
                     std::string out_dir, bool validate = true) {
  Session s;
  if (!config_path.empty()) s.pc = parse_config(config_path);
  if (seed_set) s.pc.experiment.seed = seed_override;
  if (threads_set) s.pc.experiment.threads = threads;
  if (!out_dir.empty()) s.pc.experiment.out_dir = std::move(out_dir);
  if (validate && config_path.empty()) validate_experiment(s.pc.experiment);
  s.out_dir = s.pc.experiment.out_dir;
  s.manifest.config_snapshot = serialize_config(s.pc);
  s.manifest.master_seed = s.pc.experiment.seed;
  s.manifest.started = now_iso();
  return s;
}

json distance_entry_json(const DistanceEntry& e) {
  json j{{"jm", e.jm},
         {"ks", e.ks},
         {"ks_se", e.ks_se},
         {"w1", e.w1},
         {"w1_se", e.w1_se},
         {"ks_sigma_normalized", e.ks_sigma},
         {"ks_sigma_normalized_se", e.ks_sigma_se},
         {"mean_u_rescaled", e.mean_u},
         {"mean_u_rescaled_se", e.mean_u_se},
         {"sigma2_rescaled", e.sigma2_scaled},
         {"sigma2_rescaled_err", e.sigma2_scaled_err}};
  if (e.tv_bound > 0.0) {
    j["tv_bound"] = e.tv_bound;
    j["tv_bound_err"] = e.tv_bound_err;
  }
  return j;
}

json cov_check_json(const CovMatrixCheck& c) {
  return json{{"jm", c.jm},   {"dim", c.d},             {"empirical", c.emp},
              {"se", c.se},   {"analytic", c.analytic}, {"z", c.z},
              {"max_abs_z", c.max_abs_z()}};
}

void write_samples_csv(Session& s, const std::string& name,
                       const std::vector<JmEnsemble>& ensembles,
                       std::span<const double> times) {
  fs::create_directories(s.out_dir);
  const auto p = s.out_path(name);
  std::ofstream os(p);
  os << "replica,jM,time,value\n";
  char buf[96];
  for (const auto& ens : ensembles)
    for (std::size_t r = 0; r < ens.replicas; ++r)
      for (std::size_t c = 0; c < ens.ntimes; ++c) {
        std::snprintf(buf, sizeof buf, "%zu,%d,%.17g,%.17g\n", r, ens.jm, times[c],
                      ens.u[r * ens.ntimes + c]);
        os << buf;
      }
  os.close();
  s.note_output(p);
}

int run_check(const std::string& density_id, const std::string& wavelet_id,
              const std::string& out_dir) {
  const SpectralDensity sd = make_density(density_id);
  const WaveletSpec w = make_wavelet(wavelet_id);
  const auto rep = check_assumptions(sd, w);
  std::cout << "assumption report for (" << density_id << ", " << wavelet_id << ")\n"
            << rep.describe();
  std::cout << "  ||f_filtered||_1 = " << rep.filtered_l1
            << "\n  ||f_filtered||_inf = " << rep.filtered_sup << "\n";
  if (!out_dir.empty()) {
    json j{{"density", density_id}, {"wavelet", wavelet_id}, {"passed", rep.passed()}};
    auto& items = j["items"] = json::array();
    for (const auto& it : rep.items)
      items.push_back(json{{"name", it.name},
                           {"passed", it.passed},
                           {"witness_lambda", it.witness_lambda},
                           {"value", it.value}});
    fs::create_directories(out_dir);
    std::ofstream os(fs::path(out_dir) / "check.json");
    os << j.dump(2) << "\n";
  }
  return rep.passed() ? 0 : 1;
}

int run_synth(Session& s, std::size_t count, const std::string& bin_out,
              const std::string& csv_out) {
  const auto& e = s.pc.experiment;
  const SpectralDensity sd = make_density(e.density);
  const GridSpec grid{e.n, e.dt};
  SpectrumModel model(sd, grid);
  if (!s.out_dir.empty()) fs::create_directories(s.out_dir);
  for (std::size_t k = 0; k < count; ++k) {
    SampledPath p = model.synthesize(derive_seed(e.seed, "synth", k));
    s.manifest.stage_seeds["synth:" + std::to_string(k)] =
        derive_seed(e.seed, "synth", k);
    const std::string suffix = count > 1 ? "_" + std::to_string(k) : "";
    if (!bin_out.empty() || !s.out_dir.empty()) {
      const auto path = bin_out.empty()
                            ? s.out_path("path" + suffix + ".qsp").string()
                            : bin_out + suffix;
      write_path_binary(p, path);
      s.note_output(path);
    }
    if (!csv_out.empty()) {
      write_path_csv(p, csv_out + suffix);
      s.note_output(csv_out + suffix);
    }
  }
  std::cout << "synthesized " << count << " path(s), n=" << e.n << ", dt=" << e.dt
            << "\n";
  s.finish();
  return 0;
}

int run_scatter(Session& s, const std::vector<int>& scales_flag,
                const std::string& out_csv) {
  ExperimentConfig e = s.pc.experiment;
  std::vector<int> prefix = e.scales_prefix;
  int jm = e.jm.front();
  if (!scales_flag.empty()) {
    prefix.assign(scales_flag.begin(), scales_flag.end() - 1);
    jm = scales_flag.back();
  }
  const SpectralDensity sd = make_density(e.density);
  const WaveletSpec w = make_wavelet(e.wavelet);
  const auto ens = run_scattering_ensemble(sd, w, prefix, jm, grid_for(e, jm), e.times,
                                           e.replicas, e.seed, "scatter", e.threads,
                                           e.guard_frac);
  s.manifest.stage_seeds["scatter"] = derive_seed(e.seed, "scatter", 0);

  const auto p = out_csv.empty() ? s.out_path("scatter.csv").string() : out_csv;
  if (!s.out_dir.empty()) fs::create_directories(s.out_dir);
  std::ofstream os(p);
  os << "replica,time,value\n";
  char buf[96];
  for (std::size_t r = 0; r < ens.replicas; ++r)
    for (std::size_t c = 0; c < ens.ntimes; ++c) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r, e.times[c],
                    ens.u[r * ens.ntimes + c]);
      os << buf;
    }
  os.close();
  s.note_output(p);
  std::cout << "scatter: wrote " << ens.replicas << " x " << ens.ntimes
            << " rescaled samples to " << p << "\n";
  s.finish();
  return 0;
}

int run_limits(Session& s, int depth, double tol, const std::vector<int>& j2_list,
               const std::vector<double>& deltas) {
  const auto& e = s.pc.experiment;
  const SpectralDensity sd = make_density(e.density);
  const WaveletSpec w = make_wavelet(e.wavelet);
  IntegratorSettings st;
  st.rel_tol = tol;

  std::vector<int> prefix = e.scales_prefix;
  prefix.resize(static_cast<std::size_t>(depth - 1),
                prefix.empty() ? 0 : prefix.back());
  const auto lc = kappa_and_limits(sd, w, prefix, depth, st);

  json j;
  j["depth"] = depth;
  j["density"] = e.density;
  j["wavelet"] = e.wavelet;
  j["scales_prefix"] = prefix;
  auto& cs = j["c_constants"] = json::array();
  double kappa_err = 0.0;
  for (const auto& c : lc.c) {
    cs.push_back(json{{"order", c.order}, {"value", c.value}, {"error", c.error}});
    kappa_err += factorial(c.order) * c.error;
  }
  j["kappa"] = lc.kappa;
  j["kappa_error"] = kappa_err;
  j["psi_hat_l2"] = lc.psi_hat_l2;
  j["psi_hat_l2_rel_tol"] = 1e-10;
  j["limit_variance"] = lc.limit_variance;
  j["limit_variance_error"] = kappa_err * lc.psi_hat_l2;
  j["provenance"] = lc.provenance;

  auto& lcov = j["limit_cov"] = json::array();
  for (double d : deltas)
    lcov.push_back(json{{"delta", d},
                        {"cov_G", limit_cov_G(lc, w, d)},
                        {"cov_Gsq", limit_cov_Gsq(lc, w, d)},
                        {"rel_tol", 1e-9}});

  j["bound_constant"] = bound_constant(depth, sd, w, prefix.empty() ? 0 : prefix[0]);

  if (depth == 2) {
    auto& tv = j["tv_bound"] = json::array();
    for (int j2 : j2_list) {
      const auto b = tv_bound_m2_with_error(sd, w, prefix[0], j2);
      tv.push_back(json{{"j2", j2}, {"value", b.value}, {"error", b.error}});
    }
  }

  std::cout << j.dump(2) << "\n";
  if (!s.out_dir.empty()) s.write_json("limits.json", j);
  s.finish();
  return 0;
}

int run_verify(Session& s, const std::string& mode) {
  const auto& e = s.pc.experiment;
  const auto& checks = s.pc.checks;
  for (int jm : e.jm)
    s.manifest.stage_seeds["dist:j" + std::to_string(jm)] =
        derive_seed(e.seed, "dist:j" + std::to_string(jm), 0);
  bool pass = true;
  json j;
  j["mode"] = mode;

  if (mode == "dist" || mode == "rate") {
    std::vector<JmEnsemble> keep;
    const auto rep = run_distribution_test(e, &keep);
    j["kappa"] = rep.kappa;
    j["psi_hat_l2"] = rep.psi_hat_l2;
    j["limit_variance"] = rep.limit_variance;
    auto& per = j["per_jm"] = json::array();
    for (const auto& en : rep.per_jm) per.push_back(distance_entry_json(en));
    j["ks_slope"] = json{{"value", rep.ks_slope.slope},
                         {"lo", rep.ks_slope.lo},
                         {"hi", rep.ks_slope.hi},
                         {"excluded", rep.ks_slope.excluded},
                         {"valid", rep.ks_slope.valid}};
    if (!s.out_dir.empty()) write_samples_csv(s, "samples.csv", keep, e.times);

    if (checks.ks_max) pass = pass && rep.per_jm.back().ks <= *checks.ks_max;
    if (checks.require_decreasing_ks && rep.per_jm.size() >= 2) {
      const auto& a = rep.per_jm.front();
      const auto& b = rep.per_jm.back();
      pass = pass &&
             (a.ks - b.ks) > 3.0 * std::sqrt(a.ks_se * a.ks_se + b.ks_se * b.ks_se);
    }
  } else if (mode == "cov") {
    const auto rep = run_covariance_test(e);
    j["diag_limit"] = rep.diag_limit;
    auto& ju = j["u_cov"] = json::array();
    for (const auto& c : rep.u_check) ju.push_back(cov_check_json(c));
    auto& jt = j["t_cov"] = json::array();
    for (const auto& c : rep.t_check) jt.push_back(cov_check_json(c));
    if (checks.max_abs_z)
      for (const auto& c : rep.u_check)
        pass = pass && c.max_abs_z() <= *checks.max_abs_z;
  } else if (mode == "finite-cov") {
    const auto rep = run_finite_cov_check(e);
    auto& jt = j["t_cov_vs_finite"] = json::array();
    for (const auto& c : rep.t_check) jt.push_back(cov_check_json(c));
    j["gap_to_limit"] = rep.gap_to_limit;
    j["gaps_decreasing"] = rep.gaps_decreasing;
    if (checks.max_abs_z)
      for (const auto& c : rep.t_check)
        pass = pass && c.max_abs_z() <= *checks.max_abs_z;
  } else {
    throw std::invalid_argument("verify: unknown mode '" + mode + "'");
  }

  j["declared_checks_passed"] = pass;
  std::cout << j.dump(2) << "\n";
  if (!s.out_dir.empty()) s.write_json("verify_" + mode + ".json", j);
  s.finish();
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scattering-cascade simulation and verification toolkit"};
  app.set_version_flag("--version", QSCAT_VERSION);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  bool seed_set = false, threads_set = false;
  app.add_option("--config", config_path, "config file (key-value or JSON)");
  app.add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--threads", threads, "worker threads (0 = hardware)")
      ->each([&](const std::string&) { threads_set = true; });
  app.add_option("--out-dir", out_dir, "output directory for reports and manifests");

  app.fallthrough();
  auto* c_check = app.add_subcommand("check", "validate the standing assumptions");
  c_check->fallthrough();
  std::string density = "gauss-lrd:beta=0.5", wavelet = "mexican-hat";
  c_check->add_option("--density", density, "density catalog id");
  c_check->add_option("--wavelet", wavelet, "wavelet catalog id");

  auto* c_synth = app.add_subcommand("synth", "synthesize sample paths");
  c_synth->fallthrough();
  std::size_t synth_count = 1;
  std::string synth_out, synth_csv, synth_density, synth_n, synth_dt;
  c_synth->add_option("--count", synth_count, "number of paths");
  c_synth->add_option("--out", synth_out, "binary output path");
  c_synth->add_option("--csv", synth_csv, "csv output path");
  c_synth->add_option("--density", synth_density, "density catalog id override");
  c_synth->add_option("--n", synth_n, "samples per path (power of two)");
  c_synth->add_option("--dt", synth_dt, "grid spacing in seconds");

  auto* c_scatter = app.add_subcommand("scatter", "run the cascade on an ensemble");
  c_scatter->fallthrough();
  std::vector<int> scatter_scales;
  std::string scatter_out, scatter_density, scatter_wavelet, scatter_times;
  std::size_t scatter_replicas = 0;
  c_scatter->add_option("--scales", scatter_scales, "scales j1,j2,...")->delimiter(',');
  c_scatter->add_option("--wavelet", scatter_wavelet, "wavelet catalog id");
  c_scatter->add_option("--density", scatter_density, "density catalog id");
  c_scatter->add_option("--replicas", scatter_replicas, "replica count");
  c_scatter->add_option("--times", scatter_times, "sample times t1,t2,...");
  c_scatter->add_option("--out", scatter_out, "csv output path");

  auto* c_limits = app.add_subcommand("limits", "analytic limit constants report");
  c_limits->fallthrough();
  int depth = 2;
  double tol = 1e-3;
  std::vector<int> j2_list{6, 7, 8, 9, 10, 11};
  std::vector<double> deltas{0.0, 0.5, 1.0};
  std::string limits_prefix, limits_density, limits_wavelet;
  c_limits->add_option("--depth", depth, "cascade depth M");
  c_limits->add_option("--scales-prefix", limits_prefix, "j1,...,j_{M-1}");
  c_limits->add_option("--density", limits_density, "density catalog id");
  c_limits->add_option("--wavelet", limits_wavelet, "wavelet catalog id");
  c_limits->add_option("--tol", tol, "cubature relative tolerance");
  c_limits->add_option("--j2", j2_list, "final scales for the tv bound")->delimiter(',');
  c_limits->add_option("--deltas", deltas, "time offsets for covariance samples")
      ->delimiter(',');

  auto* c_verify = app.add_subcommand("verify", "Monte Carlo verification");
  c_verify->fallthrough();
  std::string mode;
  c_verify->add_option("mode", mode, "dist|cov|finite-cov|rate")->required();

  app.require_subcommand(1);
  CLI11_PARSE(app, argc, argv);

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (c_check->parsed()) return run_check(density, wavelet, out_dir);

    Session s = make_session(config_path, seed, seed_set, threads, threads_set,
                             out_dir, c_verify->parsed() || c_scatter->parsed());
    if (c_synth->parsed()) {
      if (!synth_density.empty()) s.pc.experiment.density = synth_density;
      if (!synth_n.empty()) s.pc.experiment.n = std::stoull(synth_n);
      if (!synth_dt.empty()) s.pc.experiment.dt = std::stod(synth_dt);
      return run_synth(s, synth_count, synth_out, synth_csv);
    }
    if (c_scatter->parsed()) {
      if (!scatter_density.empty()) s.pc.experiment.density = scatter_density;
      if (!scatter_wavelet.empty()) s.pc.experiment.wavelet = scatter_wavelet;
      if (scatter_replicas > 0) s.pc.experiment.replicas = scatter_replicas;
      if (!scatter_times.empty())
        s.pc.experiment.times = detail::parse_list<double>(scatter_times);
      return run_scatter(s, scatter_scales, scatter_out);
    }
    if (c_limits->parsed()) {
      if (!limits_density.empty()) s.pc.experiment.density = limits_density;
      if (!limits_wavelet.empty()) s.pc.experiment.wavelet = limits_wavelet;
      if (!limits_prefix.empty())
        s.pc.experiment.scales_prefix = detail::parse_list<int>(limits_prefix);
      return run_limits(s, depth, tol, j2_list, deltas);
    }
    if (c_verify->parsed()) return run_verify(s, mode);
  } catch (const std::exception& e) {
    std::cerr << "[" << stage << "] error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
