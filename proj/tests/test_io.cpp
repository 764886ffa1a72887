#include <catch2/catch.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "spark/config.hpp"
#include "spark/io.hpp"
#include "spark/model_io.hpp"
#include "spark/sweep.hpp"

using namespace spark;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    const auto tick = std::chrono::steady_clock::now().time_since_epoch().count();
    path = fs::temp_directory_path() /
           ("spark_test_" + std::to_string(tick) + "_" + std::to_string(counter.fetch_add(1)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("KSP round-trips bit-identically in both precisions", "[io]") {
  TempDir dir;
  Rng rng(121);
  const auto k64 = oracle::random_stack<double>(3, 12, 10, rng);
  write_ksp(dir.file("a.ksp"), k64);
  const auto back64 = read_ksp<double>(dir.file("a.ksp"));
  REQUIRE(back64.n_coils() == 3);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < k64.coils[c].size(); ++i) { CHECK(back64.coils[c].data[i] == k64.coils[c].data[i]); }
  }

  MultiCoilKspace<float> k32(2, 6, 6);
  for (auto& coil : k32.coils) {
    for (auto& v : coil.data) { v = Cx<float>(static_cast<float>(rng.uniform(-1, 1)), static_cast<float>(rng.uniform(-1, 1))); }
  }
  write_ksp(dir.file("b.ksp"), k32);
  const auto back32 = read_ksp<float>(dir.file("b.ksp"));
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < k32.coils[c].size(); ++i) { CHECK(back32.coils[c].data[i] == k32.coils[c].data[i]); }
  }
  // f32 file loads into an f64 pipeline losslessly
  const auto up = read_ksp<double>(dir.file("b.ksp"));
  for (std::size_t i = 0; i < k32.coils[0].size(); ++i) {
    CHECK(up.coils[0].data[i] == Cx<double>(k32.coils[0].data[i].real(), k32.coils[0].data[i].imag()));
  }
}

TEST_CASE("KSP error handling", "[io]") {
  TempDir dir;
  Rng rng(122);
  const auto k = oracle::random_stack<double>(2, 8, 8, rng);
  write_ksp(dir.file("good.ksp"), k);

  auto bytes = slurp(dir.file("good.ksp"));
  {
    std::ofstream os(dir.file("trunc.ksp"), std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_WITH(read_ksp<double>(dir.file("trunc.ksp")), Catch::Contains("unexpected end of KSP stream"));

  bytes[0] = 'X';
  {
    std::ofstream os(dir.file("magic.ksp"), std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_WITH(read_ksp<double>(dir.file("magic.ksp")), Catch::Contains("not a KSP file"));
}

TEST_CASE("PGM export", "[io]") {
  TempDir dir;
  RealGrid<double> img(2, 2);
  const double mx = 3.2;
  img.at(0, 0) = 0;
  img.at(0, 1) = mx;
  img.at(1, 0) = mx / 2;
  img.at(1, 1) = mx;
  export_pgm(dir.file("img.pgm"), img);
  const auto bytes = slurp(dir.file("img.pgm"));
  REQUIRE(bytes.size() >= 3u);
  CHECK(bytes[0] == 'P');
  CHECK(bytes[1] == '5');
  CHECK(bytes[2] == '\n');

  // independent reader: parse the header, read big-endian 16-bit pixels
  std::ifstream is(dir.file("img.pgm"), std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  is.get();
  REQUIRE(magic == "P5");
  REQUIRE(w == 2);
  REQUIRE(h == 2);
  REQUIRE(maxval == 65535);
  std::array<int, 4> pix{};
  for (auto& v : pix) {
    const int hi = is.get(), lo = is.get();
    v = hi * 256 + lo;
  }
  CHECK(pix[0] == 0);
  CHECK(pix[1] == 65535);
  CHECK(std::abs(pix[2] - 32768) <= 1);
  CHECK(pix[3] == 65535);

  RealGrid<double> zeros(3, 3);
  export_pgm(dir.file("zero.pgm"), zeros);
  std::ifstream zs(dir.file("zero.pgm"), std::ios::binary);
  zs >> magic >> w >> h >> maxval;
  zs.get();
  for (int i = 0; i < 9; ++i) {
    CHECK(zs.get() == 0);
    CHECK(zs.get() == 0);
  }

  RealGrid<double> bad(2, 2);
  bad.at(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(export_pgm(dir.file("bad.pgm"), bad), std::invalid_argument);
}

TEST_CASE("CSV writing and parsing", "[io]") {
  TempDir dir;
  SECTION("empty rows give a header-only file") {
    write_csv(dir.file("empty.csv"), {});
    const auto bytes = slurp(dir.file("empty.csv"));
    CHECK(std::string(bytes.begin(), bytes.end()) == std::string(csv_header()) + "\n");
  }
  SECTION("rows round-trip") {
    ResultRow row;
    row.method = "spark:grappa";
    row.r = 4;
    row.acs = 24;
    row.sigma = 5e-4;
    row.seed = 17;
    row.rmse = 0.123456789;
    row.wall_time_s = 1.5;
    ResultRow fail = row;
    fail.method = "raki";
    fail.error = "insufficient calibration data";
    write_csv(dir.file("rows.csv"), {row, fail});
    const auto rows = read_csv(dir.file("rows.csv"));
    REQUIRE(rows.size() == 2u);
    CHECK(rows[0].method == "spark:grappa");
    CHECK(rows[0].r == 4);
    CHECK(rows[0].acs == 24);
    CHECK(rows[0].sigma == 5e-4);
    CHECK(rows[0].seed == 17u);
    CHECK(rows[0].rmse == Approx(0.123456789).epsilon(1e-9));
    CHECK(rows[0].ok());
    CHECK(!rows[1].ok());
    CHECK(std::isnan(rows[1].rmse));
    CHECK(rows[1].error == "insufficient calibration data");
  }
}

TEST_CASE("config parsing is strict about keys", "[io][config]") {
  const auto base = nlohmann::json{{"seed", 1},
                                   {"n", 32},
                                   {"n_c", 4},
                                   {"sigma", 0.0},
                                   {"r_list", {2}},
                                   {"acs_list", {12}},
                                   {"methods", {"grappa"}}};
  CHECK_NOTHROW(parse_config(base));

  auto typo = base;
  typo["methodss"] = nlohmann::json::array({"grappa"});
  CHECK_THROWS_WITH(parse_config(typo), Catch::Contains("unknown key") && Catch::Contains("methodss"));

  auto nested = base;
  nested["grappa"] = {{"ky_tapss", 4}};
  CHECK_THROWS_WITH(parse_config(nested), Catch::Contains("unknown key") && Catch::Contains("grappa.ky_tapss"));

  auto bad_r = base;
  bad_r["r_list"] = {3};  // 32 % 3 != 0
  CHECK_THROWS_WITH(parse_config(bad_r), Catch::Contains("grid not divisible"));

  auto bad_method = base;
  bad_method["methods"] = {"grappaa"};
  CHECK_THROWS_WITH(parse_config(bad_method), Catch::Contains("unknown method"));
}

TEST_CASE("network and model snapshots round-trip", "[io]") {
  TempDir dir;
  SparkConfig cfg;
  cfg.trunk_width = 5;
  cfg.head_widths = {4, 2};
  SparkModel<float> model;
  model.scale = 0.03125f;
  model.seed = 99;
  model.initial = InitialMethod::svc_grappa;
  for (int i = 0; i < 4; ++i) {
    auto net = spark_network<float>(2, cfg);
    Rng rng(7, i);
    net.init_weights(rng, false);
    model.nets.push_back(std::move(net));
  }
  save_spark_model(dir.file("model.bin"), model);
  const auto back = load_spark_model<float>(dir.file("model.bin"));
  CHECK(back.scale == model.scale);
  CHECK(back.seed == model.seed);
  CHECK(back.initial == model.initial);
  REQUIRE(back.nets.size() == model.nets.size());
  for (std::size_t i = 0; i < model.nets.size(); ++i) {
    const auto a = model.nets[i].snapshot_params();
    const auto b = back.nets[i].snapshot_params();
    REQUIRE(a.size() == b.size());
    for (std::size_t j = 0; j < a.size(); ++j) { CHECK(a[j] == b[j]); }
  }
  CHECK_THROWS_WITH(load_spark_model<double>(dir.file("model.bin")), Catch::Contains("dtype mismatch"));
}

TEST_CASE("a small sweep is complete, sorted and deterministic", "[io][sweep]") {
  TempDir dir;
  ExperimentConfig cfg;
  cfg.seed = 5;
  cfg.n = 32;
  cfg.n_c = 4;
  cfg.sigma = 0;
  cfg.r_list = {1, 2};
  cfg.acs_list = {12};
  cfg.methods = {"grappa", "vc-grappa"};
  cfg.out_dir = dir.file("run1");

  const auto res = run_experiment<double>(cfg);
  CHECK(res.failures == 0);
  REQUIRE(res.rows.size() == 4u);  // |methods| * |r| * |acs|
  CHECK(std::is_sorted(res.rows.begin(), res.rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.method, a.r, a.acs) < std::tie(b.method, b.r, b.acs);
  }));
  for (const auto& row : res.rows) {
    if (row.r == 1) { CHECK(row.rmse < 1e-6); }
  }
  CHECK(fs::exists(dir.file("run1") + "/results.csv"));
  CHECK(fs::exists(dir.file("run1") + "/grappa_r2_acs12.ksp"));
  CHECK(fs::exists(dir.file("run1") + "/grappa_r2_acs12_mag.pgm"));
  CHECK(fs::exists(dir.file("run1") + "/grappa_r2_acs12_diff.pgm"));
  CHECK(fs::exists(dir.file("run1") + "/metadata.json"));

  // determinism: identical CSV apart from the wall-time column
  cfg.out_dir = dir.file("run2");
  run_experiment<double>(cfg);
  auto strip_wall = [](const std::string& path) {
    std::ifstream is(path);
    std::string line, all;
    while (std::getline(is, line)) {
      const auto last = line.rfind(',');
      const auto prev = line.rfind(',', last - 1);
      all += line.substr(0, prev) + line.substr(last) + "\n";
    }
    return all;
  };
  CHECK(strip_wall(dir.file("run1") + "/results.csv") == strip_wall(dir.file("run2") + "/results.csv"));

  // failures are recorded, not dropped
  cfg.out_dir = dir.file("run3");
  cfg.acs_list = {6};
  cfg.methods = {"grappa"};
  cfg.r_list = {4};  // ACS of 6 cannot calibrate ky_taps>=2 at r=4 (span 5 fits; use raki to fail)
  cfg.methods = {"raki"};
  const auto res3 = run_experiment<double>(cfg);
  REQUIRE(res3.rows.size() == 1u);
  CHECK(res3.failures == 1);
  CHECK(!res3.rows[0].ok());
  CHECK(res3.rows[0].error.find("insufficient calibration data") != std::string::npos);
}

TEST_CASE("grappa optimization writes a sidecar and helps", "[io][sweep]") {
  TempDir dir;
  ExperimentConfig cfg;
  cfg.seed = 2;
  cfg.n = 32;
  cfg.n_c = 4;
  cfg.sigma = 1e-3;
  cfg.r_list = {2};
  cfg.acs_list = {16};
  cfg.methods = {"grappa"};
  cfg.grappa.optimize = true;
  cfg.out_dir = dir.file("opt");
  const auto res = run_experiment<double>(cfg);
  REQUIRE(res.rows.size() == 1u);
  CHECK(res.rows[0].ok());
  REQUIRE(fs::exists(dir.file("opt") + "/grappa_optimized.json"));
  std::ifstream is(dir.file("opt") + "/grappa_optimized.json");
  nlohmann::json j;
  is >> j;
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 1u);
  CHECK(j[0].contains("ky_taps"));
  CHECK(j[0].contains("lambda"));
}
