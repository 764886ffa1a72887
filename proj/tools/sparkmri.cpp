// Command-line front end: phantom generation, mask inspection, single-case
// reconstruction, SPARK correction, full sweeps and CSV evaluation.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>

#include "spark/model_io.hpp"
#include "spark/sweep.hpp"

namespace {

struct CommonArgs {
  std::string precision = "f64";
};

struct PhantomArgs {
  int n = 128;
  int coils = 8;
  double sigma = 5e-4;
  std::uint64_t seed = 1;
  std::string out = "out";
};

template <typename T>
int run_phantom(const PhantomArgs& a) {
  namespace fs = std::filesystem;
  fs::create_directories(a.out);
  const auto img = spark::shepp_logan<T>(a.n);
  const auto maps = spark::make_coil_maps<T>(a.n, a.coils);
  spark::AcquisitionParams p;
  p.n = a.n;
  p.n_c = a.coils;
  p.sigma = a.sigma;
  p.seed = a.seed;
  const auto full = spark::simulate_acquisition(img, maps, p);
  spark::export_pgm(a.out + "/phantom.pgm", img);
  spark::write_ksp(a.out + "/reference.ksp", full);
  spark::export_pgm(a.out + "/reference.pgm", spark::rss_combine(spark::ifft2c(full)));
  std::printf("wrote %s/phantom.pgm, reference.ksp, reference.pgm (n=%d, coils=%d, sigma=%g, seed=%llu)\n",
              a.out.c_str(), a.n, a.coils, a.sigma, static_cast<unsigned long long>(a.seed));
  return 0;
}

struct MaskArgs {
  int ny = 128;
  int r = 4;
  int acs = 24;
  std::string out;
};

int run_mask(const MaskArgs& a) {
  const auto mask = spark::make_uniform_mask(a.ny, a.r, a.acs);
  nlohmann::json j;
  j["ny"] = mask.ny;
  j["r"] = mask.r;
  j["acs_start"] = mask.acs.start;
  j["acs_count"] = mask.acs.count;
  std::vector<int> lines;
  for (int i = 0; i < mask.ny; ++i) {
    if (mask.is_acquired(i)) { lines.push_back(i); }
  }
  j["acquired_lines"] = lines;
  if (a.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream os(a.out);
    os << j.dump(2) << "\n";
    std::printf("wrote %s (%d of %d lines acquired)\n", a.out.c_str(), mask.acquired_count(), mask.ny);
  }
  return 0;
}

struct ReconArgs {
  std::string in;
  std::string method = "grappa";
  int r = 4;
  int acs = 24;
  int ky_taps = 4;
  int kx_taps = 5;
  double lambda = 1e-4;
  std::uint64_t seed = 1;
  int epochs = 0;  // 0: per-method default
  std::string out = "out";
  std::string initial = "grappa";   // spark subcommand only
  std::string save_model;           // spark subcommand only
  bool is_spark_cmd = false;
};

template <typename T>
int run_recon(const ReconArgs& a) {
  namespace fs = std::filesystem;
  fs::create_directories(a.out);
  const auto full = spark::read_ksp<T>(a.in);
  const auto mask = spark::make_uniform_mask(full.ny(), a.r, a.acs);
  const auto und = spark::apply_mask(full, mask);
  const auto ref = spark::rss_combine(spark::ifft2c(full));

  spark::ExperimentConfig cfg;
  cfg.seed = a.seed;
  cfg.n = full.ny();
  cfg.n_c = full.n_coils();
  cfg.grappa.ky_taps = a.ky_taps;
  cfg.grappa.kx_taps = a.kx_taps;
  cfg.grappa.lambda = a.lambda;
  if (a.epochs > 0) {
    cfg.spark.epochs = a.epochs;
    cfg.raki.epochs = a.epochs;
  }
  const auto geom = spark::fit_geometry({a.ky_taps, a.kx_taps, std::max(a.r, 2)}, a.acs);

  std::string method = a.method;
  if (a.is_spark_cmd) { method = "spark:" + a.initial; }

  const auto recon = spark::detail::reconstruct_method<T>(method, und, mask, cfg, geom);
  const auto mag = spark::rss_combine(spark::ifft2c(recon));
  const double err = static_cast<double>(spark::rmse(mag, ref));

  const std::string base = a.out + "/" + spark::detail::sanitize_method(method) + "_r" + std::to_string(a.r) +
                           "_acs" + std::to_string(a.acs);
  spark::write_ksp(base + ".ksp", recon);
  spark::export_pgm(base + "_mag.pgm", mag);
  spark::RealGrid<T> diff(mag.ny, mag.nx);
  for (std::size_t i = 0; i < diff.size(); ++i) { diff.data[i] = std::abs(mag.data[i] - ref.data[i]); }
  spark::export_pgm(base + "_diff.pgm", diff);

  if (a.is_spark_cmd && !a.save_model.empty()) {
    spark::SparkConfig sc = spark::make_spark_config(cfg, spark::InitialMethod::grappa, geom);
    if (a.initial == "vc-grappa") { sc.initial = spark::InitialMethod::vc_grappa; }
    if (a.initial == "svc-grappa") { sc.initial = spark::InitialMethod::svc_grappa; }
    spark::MultiCoilKspace<T> recon_ns;
    switch (sc.initial) {
      case spark::InitialMethod::grappa: recon_ns = spark::grappa_reconstruct(und, mask, geom, a.lambda, false); break;
      case spark::InitialMethod::vc_grappa: recon_ns = spark::vc_grappa_reconstruct(und, mask, geom, a.lambda); break;
      case spark::InitialMethod::svc_grappa: recon_ns = spark::svc_grappa_reconstruct(und, mask, geom, a.lambda, false); break;
    }
    const auto model = spark::train_spark(recon_ns, und, mask.acs, sc);
    spark::save_spark_model(a.save_model, model);
    std::printf("saved model to %s\n", a.save_model.c_str());
  }

  std::printf("%s R=%d acs=%d rmse %.6g -> %s\n", method.c_str(), a.r, a.acs, err, base.c_str());
  return 0;
}

struct SweepArgs {
  std::string config;
  std::string out;
};

template <typename T>
int run_sweep(const SweepArgs& a) {
  const auto cfg = spark::load_config(a.config);
  const auto result = spark::run_experiment<T>(cfg, a.out);
  int ok = 0;
  for (const auto& row : result.rows) { ok += row.ok(); }
  std::printf("sweep: %d cases, %d ok, %d failed -> %s/results.csv\n", static_cast<int>(result.rows.size()), ok,
              result.failures, (a.out.empty() ? cfg.out_dir : a.out).c_str());
  return result.failures > 0 ? 2 : 0;
}

struct EvalArgs {
  std::string csv;
  std::string baseline = "grappa";
};

int run_eval(const EvalArgs& a) {
  const auto rows = spark::read_csv(a.csv);
  std::map<std::tuple<int, int, std::uint64_t>, double> base;
  for (const auto& row : rows) {
    if (row.method == a.baseline && row.ok()) { base[{row.r, row.acs, row.seed}] = row.rmse; }
  }
  std::printf("%-18s %4s %5s %12s %16s\n", "method", "R", "acs", "rmse", "vs " );
  std::printf("%-18s %4s %5s %12s %16s\n", "", "", "", "", a.baseline.c_str());
  for (const auto& row : rows) {
    if (!row.ok()) {
      std::printf("%-18s %4d %5d %12s  error: %s\n", row.method.c_str(), row.r, row.acs, "-", row.error.c_str());
      continue;
    }
    const auto it = base.find({row.r, row.acs, row.seed});
    if (it != base.end() && row.rmse > 0) {
      std::printf("%-18s %4d %5d %12.6g %15.2fx\n", row.method.c_str(), row.r, row.acs, row.rmse,
                  it->second / row.rmse);
    } else {
      std::printf("%-18s %4d %5d %12.6g %16s\n", row.method.c_str(), row.r, row.acs, row.rmse, "-");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPARK k-space residual correction on simulated multi-coil phantom acquisitions"};
  app.require_subcommand(1);
  app.fallthrough();  // allow --precision after the subcommand

  CommonArgs common;
  app.add_option("--precision", common.precision, "compute precision")->check(CLI::IsMember({"f32", "f64"}));

  PhantomArgs pa;
  auto* phantom = app.add_subcommand("phantom", "simulate a fully sampled multi-coil acquisition");
  phantom->add_option("-n,--size", pa.n, "matrix size");
  phantom->add_option("--coils", pa.coils, "coil count");
  phantom->add_option("--sigma", pa.sigma, "k-space noise std relative to peak");
  phantom->add_option("--seed", pa.seed, "PRNG seed");
  phantom->add_option("--out", pa.out, "output directory");

  MaskArgs ma;
  auto* mask_cmd = app.add_subcommand("mask", "describe a uniform undersampling mask");
  mask_cmd->add_option("--ny", ma.ny, "line count");
  mask_cmd->add_option("-R", ma.r, "acceleration factor");
  mask_cmd->add_option("--acs", ma.acs, "ACS line count");
  mask_cmd->add_option("--out", ma.out, "output JSON path (default: stdout)");

  ReconArgs ra;
  auto* recon = app.add_subcommand("recon", "retrospectively undersample and reconstruct a KSP file");
  recon->add_option("--in", ra.in, "fully sampled KSP input")->required();
  recon->add_option("--method", ra.method, "reconstruction method")
      ->check(CLI::IsMember(spark::known_methods()));
  recon->add_option("-R", ra.r, "acceleration factor");
  recon->add_option("--acs", ra.acs, "ACS line count");
  recon->add_option("--ky-taps", ra.ky_taps, "kernel source lines");
  recon->add_option("--kx-taps", ra.kx_taps, "kernel readout taps");
  recon->add_option("--lambda", ra.lambda, "Tikhonov factor");
  recon->add_option("--seed", ra.seed, "training seed");
  recon->add_option("--epochs", ra.epochs, "training epochs override");
  recon->add_option("--out", ra.out, "output directory");

  ReconArgs sa;
  sa.is_spark_cmd = true;
  auto* spark_cmd = app.add_subcommand("spark", "SPARK-correct an initial reconstruction");
  spark_cmd->add_option("--in", sa.in, "fully sampled KSP input")->required();
  spark_cmd->add_option("--initial", sa.initial, "initial reconstruction")
      ->check(CLI::IsMember({"grappa", "vc-grappa", "svc-grappa"}));
  spark_cmd->add_option("-R", sa.r, "acceleration factor");
  spark_cmd->add_option("--acs", sa.acs, "ACS line count");
  spark_cmd->add_option("--ky-taps", sa.ky_taps, "kernel source lines");
  spark_cmd->add_option("--kx-taps", sa.kx_taps, "kernel readout taps");
  spark_cmd->add_option("--lambda", sa.lambda, "Tikhonov factor");
  spark_cmd->add_option("--seed", sa.seed, "training seed");
  spark_cmd->add_option("--epochs", sa.epochs, "training epochs override");
  spark_cmd->add_option("--save-model", sa.save_model, "write the trained model snapshot");
  spark_cmd->add_option("--out", sa.out, "output directory");

  SweepArgs swa;
  auto* sweep = app.add_subcommand("sweep", "run a configured experiment grid");
  sweep->add_option("--config", swa.config, "experiment JSON")->required();
  sweep->add_option("--out", swa.out, "output directory override");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "summarize a results CSV with RMSE ratios");
  eval->add_option("--csv", ea.csv, "results CSV path")->required();
  eval->add_option("--baseline", ea.baseline, "baseline method for ratios");

  CLI11_PARSE(app, argc, argv);

  const bool f32 = common.precision == "f32";
  try {
    if (phantom->parsed()) { return f32 ? run_phantom<float>(pa) : run_phantom<double>(pa); }
    if (mask_cmd->parsed()) { return run_mask(ma); }
    if (recon->parsed()) { return f32 ? run_recon<float>(ra) : run_recon<double>(ra); }
    if (spark_cmd->parsed()) { return f32 ? run_recon<float>(sa) : run_recon<double>(sa); }
    if (sweep->parsed()) { return f32 ? run_sweep<float>(swa) : run_sweep<double>(swa); }
    if (eval->parsed()) { return run_eval(ea); }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
