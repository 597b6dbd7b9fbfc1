#include "ntklab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ntklab/errors.hpp"

namespace ntklab {

namespace {

constexpr int kVersion = 1;

void write_f64_array(std::ofstream& out, const double* data, std::size_t count) {
  std::vector<unsigned char> buf;
  buf.reserve(8 * 8192);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(data[i]);
    for (int b = 0; b < 8; ++b) buf.push_back(static_cast<unsigned char>(u >> (8 * b)));
    if (buf.size() == buf.capacity()) {
      out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  if (!buf.empty())
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void read_f64_array(std::ifstream& in, double* data, std::size_t count, const std::string& field) {
  std::vector<unsigned char> buf(8 * count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw ConfigError("checkpoint truncated while reading " + field);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(buf[8 * i + b]) << (8 * b);
    data[i] = std::bit_cast<double>(u);
  }
}

}  // namespace

void save_checkpoint(const NetworkParams& p, int step, const std::filesystem::path& file) {
  p.config.validate();
  nlohmann::json offsets = nlohmann::json::object();
  std::uint64_t pos = 0;
  for (int l = 1; l <= p.config.depth; ++l) {
    offsets["W" + std::to_string(l)] = pos;
    pos += 8 * p.layers[l - 1].size();
  }
  offsets["out_signs"] = pos;
  pos += 8 * p.out_signs.size();

  nlohmann::json header = {
      {"version", kVersion},
      {"depth", p.config.depth},
      {"width", p.config.width},
      {"input_dim", p.config.input_dim},
      {"seed", p.config.seed},
      {"step", step},
      {"offsets", offsets},
      {"payload_bytes", pos},
  };

  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + file.string() + " for writing");
  out << header.dump() << '\n';
  for (const Matrix& w : p.layers) write_f64_array(out, w.data(), w.size());
  write_f64_array(out, p.out_signs.data(), p.out_signs.size());
  if (!out) throw ConfigError("write failed for " + file.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("checkpoint missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  for (const char* field : {"version", "depth", "width", "input_dim", "seed", "step", "offsets",
                            "payload_bytes"})
    if (!header.contains(field))
      throw ConfigError(std::string("checkpoint header missing field ") + field);
  if (header["version"].get<int>() != kVersion)
    throw ConfigError("unsupported checkpoint version " + header["version"].dump());

  Checkpoint ck;
  ck.step = header["step"].get<int>();
  ck.params.config.depth = header["depth"].get<int>();
  ck.params.config.width = header["width"].get<int>();
  ck.params.config.input_dim = header["input_dim"].get<int>();
  ck.params.config.seed = header["seed"].get<std::uint64_t>();
  ck.params.config.validate();

  std::size_t m = static_cast<std::size_t>(ck.params.config.width);
  for (int l = 1; l <= ck.params.config.depth; ++l) {
    std::size_t cols = (l == 1) ? static_cast<std::size_t>(ck.params.config.input_dim) : m;
    Matrix w(m, cols);
    read_f64_array(in, w.data(), w.size(), "W" + std::to_string(l));
    ck.params.layers.push_back(std::move(w));
  }
  ck.params.out_signs.resize(m);
  read_f64_array(in, ck.params.out_signs.data(), m, "out_signs");
  return ck;
}

void save_matrix_checkpoint(const Matrix& m, const std::filesystem::path& file) {
  nlohmann::json header = {
      {"version", kVersion},
      {"kind", "matrix"},
      {"rows", m.rows()},
      {"cols", m.cols()},
      {"payload_bytes", 8 * m.size()},
  };
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + file.string() + " for writing");
  out << header.dump() << '\n';
  write_f64_array(out, m.data(), m.size());
  if (!out) throw ConfigError("write failed for " + file.string());
}

Matrix load_matrix_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("matrix checkpoint missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("matrix checkpoint header is not valid JSON: ") + e.what());
  }
  for (const char* field : {"version", "kind", "rows", "cols"})
    if (!header.contains(field))
      throw ConfigError(std::string("matrix checkpoint header missing field ") + field);
  if (header["version"].get<int>() != kVersion)
    throw ConfigError("unsupported checkpoint version " + header["version"].dump());
  if (header["kind"].get<std::string>() != "matrix")
    throw ConfigError("checkpoint kind is not matrix");
  Matrix m(header["rows"].get<std::size_t>(), header["cols"].get<std::size_t>());
  read_f64_array(in, m.data(), m.size(), "payload");
  return m;
}

}  // namespace ntklab
