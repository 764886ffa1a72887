// Experiment harness: simulate one acquisition per seed, sweep the
// (method, R, ACS) grid, score every reconstruction against the fully
// sampled reference and leave k-space dumps, preview images, a CSV table and
// run metadata in the output directory. Per-case failures are recorded in
// the CSV error column; the sweep never aborts half way.
#pragma once

#include <chrono>
#include <filesystem>

#include "spark/config.hpp"
#include "spark/io.hpp"
#include "spark/raki.hpp"
#include "spark/sim.hpp"
#include "spark/spark.hpp"

namespace spark {

struct SweepResult {
  std::vector<ResultRow> rows;
  int failures = 0;
};

namespace detail {

inline std::string sanitize_method(std::string name) {
  for (auto& c : name) {
    if (c == ':') { c = '-'; }
  }
  return name;
}

struct GrappaChoice {
  KernelGeometry geom;
  double lambda = 0;
};

// Reconstruct with one named method. Throws on per-case errors; the sweep
// loop catches and records them.
template <typename T>
MultiCoilKspace<T> reconstruct_method(const std::string& method, const MultiCoilKspace<T>& und,
                                      const SamplingMask& mask, const ExperimentConfig& cfg,
                                      const KernelGeometry& geom) {
  if (method == "grappa") { return grappa_reconstruct(und, mask, geom, cfg.grappa.lambda, true); }
  if (method == "vc-grappa") {
    if (mask.r == 1) { return und; }
    return substitute_acquired(vc_grappa_reconstruct(und, mask, geom, cfg.grappa.lambda), und, mask);
  }
  if (method == "svc-grappa") { return svc_grappa_reconstruct(und, mask, geom, cfg.grappa.lambda, true); }
  if (method == "raki") {
    if (mask.r == 1) { return und; }
    RakiConfig rc;
    rc.epochs = cfg.raki.epochs;
    rc.lr = cfg.raki.lr;
    rc.lr_final = cfg.raki.lr_final;
    rc.hidden1 = cfg.raki.hidden1;
    rc.hidden2 = cfg.raki.hidden2;
    return raki_reconstruct(und, mask, train_raki(und, mask, rc, cfg.seed));
  }
  if (method.rfind("spark:", 0) == 0) {
    const std::string initial_name = method.substr(6);
    InitialMethod initial;
    if (initial_name == "grappa") {
      initial = InitialMethod::grappa;
    } else if (initial_name == "vc-grappa") {
      initial = InitialMethod::vc_grappa;
    } else if (initial_name == "svc-grappa") {
      initial = InitialMethod::svc_grappa;
    } else {
      throw std::invalid_argument("unknown spark initial method: " + initial_name);
    }
    return spark_reconstruct(und, mask, make_spark_config(cfg, initial, geom));
  }
  throw std::invalid_argument("unknown method: " + method);
}

// Grid search over kernel geometry and Tikhonov factor, scored by RMSE
// against the reference image.
template <typename T>
GrappaChoice optimize_grappa(const MultiCoilKspace<T>& und, const SamplingMask& mask, const RealGrid<T>& ref) {
  GrappaChoice best;
  double best_rmse = std::numeric_limits<double>::infinity();
  for (int ky : {2, 4}) {
    for (int kx : {3, 5, 7}) {
      KernelGeometry geom{ky, kx, mask.r};
      if (geom.line_span() > mask.acs.count) { continue; }
      for (double lambda : {1e-5, 1e-4, 1e-3, 1e-2}) {
        try {
          const auto recon = grappa_reconstruct(und, mask, geom, lambda, true);
          const double e = static_cast<double>(rmse(rss_combine(ifft2c(recon)), ref));
          if (e < best_rmse) {
            best_rmse = e;
            best.geom = geom;
            best.lambda = lambda;
          }
        } catch (const std::exception&) {
          // skip infeasible candidates
        }
      }
    }
  }
  if (!std::isfinite(best_rmse)) { throw std::runtime_error("insufficient calibration data"); }
  return best;
}

}  // namespace detail

template <typename T>
SweepResult run_experiment(const ExperimentConfig& cfg, std::string out_dir = "") {
  cfg.validate();
  if (out_dir.empty()) { out_dir = cfg.out_dir; }
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  const RealGrid<T> img = shepp_logan<T>(cfg.n);
  const CoilMaps<T> maps = make_coil_maps<T>(cfg.n, cfg.n_c);
  AcquisitionParams acq;
  acq.n = cfg.n;
  acq.n_c = cfg.n_c;
  acq.sigma = cfg.sigma;
  acq.seed = cfg.seed;
  const MultiCoilKspace<T> full = simulate_acquisition(img, maps, acq);
  const RealGrid<T> ref = rss_combine(ifft2c(full));

  write_ksp(out_dir + "/reference.ksp", full);
  export_pgm(out_dir + "/reference.pgm", ref);
  {
    nlohmann::json meta;
    meta["prng"] = Rng::id();
    meta["precision"] = std::is_same_v<T, float> ? "f32" : "f64";
    meta["seed"] = cfg.seed;
    meta["n"] = cfg.n;
    meta["n_c"] = cfg.n_c;
    meta["sigma"] = cfg.sigma;
    std::ofstream os(out_dir + "/metadata.json");
    os << meta.dump(2) << "\n";
  }

  SweepResult result;
  nlohmann::json optimized = nlohmann::json::array();
  for (int r : cfg.r_list) {
    for (int acs : cfg.acs_list) {
      SamplingMask mask;
      MultiCoilKspace<T> und;
      std::string mask_error;
      try {
        mask = make_uniform_mask(cfg.n, r, acs);
        und = apply_mask(full, mask);
      } catch (const std::exception& e) {
        mask_error = e.what();
      }
      KernelGeometry geom{cfg.grappa.ky_taps, cfg.grappa.kx_taps, std::max(r, 2)};
      if (mask_error.empty() && r > 1) {
        geom = fit_geometry(geom, acs, acs_lattice_offset(mask.acs, geom.r), cfg.n, cfg.n_c);
      }
      double opt_lambda = cfg.grappa.lambda;
      if (mask_error.empty() && cfg.grappa.optimize && r > 1) {
        try {
          const auto choice = detail::optimize_grappa(und, mask, ref);
          geom = choice.geom;
          opt_lambda = choice.lambda;
          optimized.push_back({{"r", r},
                               {"acs", acs},
                               {"ky_taps", choice.geom.ky_taps},
                               {"kx_taps", choice.geom.kx_taps},
                               {"lambda", choice.lambda}});
        } catch (const std::exception&) {
          // fall back to the configured geometry
        }
      }
      ExperimentConfig case_cfg = cfg;
      case_cfg.grappa.lambda = opt_lambda;
      for (const auto& method : cfg.methods) {
        ResultRow row;
        row.method = method;
        row.r = r;
        row.acs = acs;
        row.sigma = cfg.sigma;
        row.seed = cfg.seed;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          if (!mask_error.empty()) { throw std::runtime_error(mask_error); }
          const ExperimentConfig& used_cfg = cfg.grappa.optimize ? case_cfg : cfg;
          const MultiCoilKspace<T> recon = detail::reconstruct_method(method, und, mask, used_cfg, geom);
          const RealGrid<T> mag = rss_combine(ifft2c(recon));
          row.rmse = static_cast<double>(rmse(mag, ref));
          const std::string base =
              out_dir + "/" + detail::sanitize_method(method) + "_r" + std::to_string(r) + "_acs" + std::to_string(acs);
          write_ksp(base + ".ksp", recon);
          export_pgm(base + "_mag.pgm", mag);
          RealGrid<T> diff(mag.ny, mag.nx);
          for (std::size_t i = 0; i < diff.size(); ++i) { diff.data[i] = std::abs(mag.data[i] - ref.data[i]); }
          export_pgm(base + "_diff.pgm", diff);
        } catch (const std::exception& e) {
          row.error = e.what();
          result.failures += 1;
        }
        row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.rows.push_back(std::move(row));
      }
    }
  }
  std::sort(result.rows.begin(), result.rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.method, a.r, a.acs, a.seed) < std::tie(b.method, b.r, b.acs, b.seed);
  });
  write_csv(out_dir + "/results.csv", result.rows);
  if (cfg.grappa.optimize) {
    std::ofstream os(out_dir + "/grappa_optimized.json");
    os << optimized.dump(2) << "\n";
  }
  return result;
}

}  // namespace spark
