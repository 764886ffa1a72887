// Binary snapshots of trained correction models (weights + config + seed):
// "KSPN" | u32 version=1 | u32 dtype | u64 seed | f64 scale | u32 initial |
// u32 n_nets | serialized networks.
#pragma once

#include "spark/io.hpp"
#include "spark/spark.hpp"

namespace spark {

template <typename T>
void save_spark_model(const std::string& path, const SparkModel<T>& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw std::runtime_error("cannot open for writing: " + path); }
  os.write("KSPN", 4);
  detail::write_u32(os, 1);
  detail::write_u32(os, detail::dtype_code<T>());
  detail::write_u64(os, model.seed);
  const double scale = static_cast<double>(model.scale);
  os.write(reinterpret_cast<const char*>(&scale), 8);
  detail::write_u32(os, static_cast<std::uint32_t>(model.initial));
  detail::write_u32(os, static_cast<std::uint32_t>(model.nets.size()));
  for (const auto& net : model.nets) { write_network(os, net); }
  if (!os) { throw std::runtime_error("write failed: " + path); }
}

template <typename T>
SparkModel<T> load_spark_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) { throw std::runtime_error("cannot open: " + path); }
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, "KSPN", 4) != 0) { throw std::runtime_error("not a KSPN file: " + path); }
  if (detail::read_u32(is, "KSPN") != 1) { throw std::runtime_error("unsupported KSPN version"); }
  if (detail::read_u32(is, "KSPN") != detail::dtype_code<T>()) { throw std::runtime_error("KSPN dtype mismatch"); }
  SparkModel<T> model;
  model.seed = detail::read_u64(is, "KSPN");
  double scale = 0;
  detail::read_scalars(is, &scale, 1, "KSPN");
  model.scale = static_cast<T>(scale);
  model.initial = static_cast<InitialMethod>(detail::read_u32(is, "KSPN"));
  const int n_nets = static_cast<int>(detail::read_u32(is, "KSPN"));
  model.nets.reserve(n_nets);
  for (int i = 0; i < n_nets; ++i) { model.nets.push_back(read_network<T>(is)); }
  return model;
}

}  // namespace spark
