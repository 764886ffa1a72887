// On-disk formats of the experiment harness.
//
//   KSP   multi-coil complex arrays, bit-exact:
//         "KSPC" | u32 version=1 | u32 dtype (0=f32, 1=f64) | u32 n_c |
//         u32 ny | u32 nx | payload of (re, im) IEEE-754 little-endian
//         pairs, coil-major then row-major.
//   KSPN  network weight snapshots (same header style, op list + tensors).
//   PGM   16-bit binary, linear map [0, max] -> [0, 65535].
//   CSV   one result row per sweep case, 9 significant digits, LF endings.
#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spark/core.hpp"
#include "spark/net.hpp"

namespace spark {
namespace detail {

template <typename T>
constexpr std::uint32_t dtype_code() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? 0u : 1u;
}

inline void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

inline std::uint32_t read_u32(std::istream& is, const char* stream_name) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) { throw std::runtime_error(std::string("unexpected end of ") + stream_name + " stream"); }
  return v;
}

inline std::uint64_t read_u64(std::istream& is, const char* stream_name) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) { throw std::runtime_error(std::string("unexpected end of ") + stream_name + " stream"); }
  return v;
}

template <typename S>
void write_scalars(std::ostream& os, const S* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(S)));
}

template <typename S>
void read_scalars(std::istream& is, S* p, std::size_t n, const char* stream_name) {
  if (!is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(S)))) {
    throw std::runtime_error(std::string("unexpected end of ") + stream_name + " stream");
  }
}

}  // namespace detail

template <typename T>
void write_ksp(const std::string& path, const MultiCoilKspace<T>& ksp) {
  ksp.check_uniform();
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw std::runtime_error("cannot open for writing: " + path); }
  os.write("KSPC", 4);
  detail::write_u32(os, 1);
  detail::write_u32(os, detail::dtype_code<T>());
  detail::write_u32(os, static_cast<std::uint32_t>(ksp.n_coils()));
  detail::write_u32(os, static_cast<std::uint32_t>(ksp.ny()));
  detail::write_u32(os, static_cast<std::uint32_t>(ksp.nx()));
  for (const auto& coil : ksp.coils) { detail::write_scalars(os, coil.data.data(), coil.data.size()); }
  if (!os) { throw std::runtime_error("write failed: " + path); }
}

template <typename T>
MultiCoilKspace<T> read_ksp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) { throw std::runtime_error("cannot open: " + path); }
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, "KSPC", 4) != 0) { throw std::runtime_error("not a KSP file: " + path); }
  const std::uint32_t version = detail::read_u32(is, "KSP");
  if (version != 1) { throw std::runtime_error("unsupported KSP version"); }
  const std::uint32_t dtype = detail::read_u32(is, "KSP");
  if (dtype > 1) { throw std::runtime_error("unsupported KSP dtype"); }
  const int n_c = static_cast<int>(detail::read_u32(is, "KSP"));
  const int ny = static_cast<int>(detail::read_u32(is, "KSP"));
  const int nx = static_cast<int>(detail::read_u32(is, "KSP"));
  if (n_c < 1 || ny < 1 || nx < 1) { throw std::runtime_error("invalid KSP dimensions"); }
  MultiCoilKspace<T> ksp(n_c, ny, nx);
  for (auto& coil : ksp.coils) {
    if (dtype == detail::dtype_code<T>()) {
      detail::read_scalars(is, coil.data.data(), coil.data.size(), "KSP");
    } else if (dtype == 0) {
      std::vector<Cx<float>> buf(coil.data.size());
      detail::read_scalars(is, buf.data(), buf.size(), "KSP");
      for (std::size_t i = 0; i < buf.size(); ++i) { coil.data[i] = Cx<T>(buf[i].real(), buf[i].imag()); }
    } else {
      std::vector<Cx<double>> buf(coil.data.size());
      detail::read_scalars(is, buf.data(), buf.size(), "KSP");
      for (std::size_t i = 0; i < buf.size(); ++i) {
        coil.data[i] = Cx<T>(static_cast<T>(buf[i].real()), static_cast<T>(buf[i].imag()));
      }
    }
  }
  return ksp;
}

// 16-bit binary PGM, most significant byte first, [0, max(img)] -> [0, 65535].
template <typename T>
void export_pgm(const std::string& path, const RealGrid<T>& img) {
  T max_v = 0;
  for (const auto& v : img.data) {
    if (!std::isfinite(v)) { throw std::invalid_argument("export_pgm: non-finite values"); }
    max_v = std::max(max_v, v);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw std::runtime_error("cannot open for writing: " + path); }
  os << "P5\n" << img.nx << " " << img.ny << "\n65535\n";
  const double scale = max_v > 0 ? 65535.0 / static_cast<double>(max_v) : 0.0;
  std::vector<unsigned char> row(static_cast<std::size_t>(img.nx) * 2);
  for (int y = 0; y < img.ny; ++y) {
    for (int x = 0; x < img.nx; ++x) {
      const double v = static_cast<double>(img.at(y, x)) * scale;
      const long pix = std::lround(std::clamp(v, 0.0, 65535.0));
      row[2 * x] = static_cast<unsigned char>((pix >> 8) & 0xFF);
      row[2 * x + 1] = static_cast<unsigned char>(pix & 0xFF);
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) { throw std::runtime_error("write failed: " + path); }
}

struct ResultRow {
  std::string method;
  int r = 0;
  int acs = 0;
  double sigma = 0;
  std::uint64_t seed = 0;
  double rmse = 0;
  double wall_time_s = 0;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

inline const char* csv_header() { return "method,r,acs,sigma,seed,rmse,wall_time_s,error"; }

inline std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string to_csv_line(const ResultRow& row) {
  std::string err = row.error;
  for (auto& ch : err) {
    if (ch == ',' || ch == '\n') { ch = ';'; }
  }
  std::ostringstream os;
  os << row.method << ',' << row.r << ',' << row.acs << ',' << format_g9(row.sigma) << ',' << row.seed << ',';
  if (row.ok()) { os << format_g9(row.rmse); }
  os << ',' << format_g9(row.wall_time_s) << ',' << err;
  return os.str();
}

inline void write_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream os(path, std::ios::binary);  // binary: LF endings everywhere
  if (!os) { throw std::runtime_error("cannot open for writing: " + path); }
  os << csv_header() << "\n";
  for (const auto& row : rows) { os << to_csv_line(row) << "\n"; }
  if (!os) { throw std::runtime_error("write failed: " + path); }
}

inline std::vector<ResultRow> read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) { throw std::runtime_error("cannot open: " + path); }
  std::string line;
  if (!std::getline(is, line)) { throw std::runtime_error("empty CSV: " + path); }
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) { continue; }
    std::array<std::string, 8> field;
    std::size_t pos = 0;
    for (int i = 0; i < 7; ++i) {
      const std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) { throw std::runtime_error("malformed CSV row: " + line); }
      field[i] = line.substr(pos, comma - pos);
      pos = comma + 1;
    }
    field[7] = line.substr(pos);
    ResultRow row;
    row.method = field[0];
    row.r = std::stoi(field[1]);
    row.acs = std::stoi(field[2]);
    row.sigma = std::stod(field[3]);
    row.seed = std::stoull(field[4]);
    row.rmse = field[5].empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(field[5]);
    row.wall_time_s = std::stod(field[6]);
    row.error = field[7];
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- network weight snapshots ------------------------------------------------

template <typename T>
void write_network(std::ostream& os, const Network<T>& net) {
  net.finish();
  detail::write_u32(os, static_cast<std::uint32_t>(net.in_channels()));
  detail::write_u32(os, static_cast<std::uint32_t>(net.ops().size()));
  for (const auto& op : net.ops()) {
    detail::write_u32(os, static_cast<std::uint32_t>(op.kind));
    if (op.kind == NetOp::Kind::conv) {
      const auto& c = net.convs()[op.conv_id];
      detail::write_u32(os, static_cast<std::uint32_t>(c.out_c));
      detail::write_u32(os, static_cast<std::uint32_t>(c.kh));
      detail::write_u32(os, static_cast<std::uint32_t>(c.kw));
    }
  }
  for (const auto& c : net.convs()) {
    detail::write_scalars(os, c.weights.data(), c.weights.size());
    detail::write_scalars(os, c.bias.data(), c.bias.size());
  }
}

template <typename T>
Network<T> read_network(std::istream& is) {
  const int in_c = static_cast<int>(detail::read_u32(is, "KSPN"));
  const int n_ops = static_cast<int>(detail::read_u32(is, "KSPN"));
  Network<T> net(in_c);
  for (int i = 0; i < n_ops; ++i) {
    const auto kind = static_cast<NetOp::Kind>(detail::read_u32(is, "KSPN"));
    switch (kind) {
      case NetOp::Kind::conv: {
        const int out_c = static_cast<int>(detail::read_u32(is, "KSPN"));
        const int kh = static_cast<int>(detail::read_u32(is, "KSPN"));
        const int kw = static_cast<int>(detail::read_u32(is, "KSPN"));
        net.conv(out_c, kh, kw);
        break;
      }
      case NetOp::Kind::relu: net.relu(); break;
      case NetOp::Kind::res_begin: net.residual_begin(); break;
      case NetOp::Kind::res_end: net.residual_end(); break;
      default: throw std::runtime_error("not a KSPN stream");
    }
  }
  for (auto& c : net.convs()) {
    detail::read_scalars(is, c.weights.data(), c.weights.size(), "KSPN");
    detail::read_scalars(is, c.bias.data(), c.bias.size(), "KSPN");
  }
  return net;
}

}  // namespace spark
