#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <ntklab/checkpoint.hpp>
#include <ntklab/errors.hpp>
#include <ntklab/network.hpp>
#include <string>
#include <unistd.h>

using namespace ntklab;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("ntklab-ckpt-" + std::to_string(::getpid()) + "-" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoint: bit-exact round trip") {
  NetworkParams p = perturb_layers(init_symmetric({3, 10, 4, 5}), 1.3, 2);
  TempDir dir;
  std::filesystem::path file = dir.path / "net.ckpt";
  save_checkpoint(p, 42, file);
  Checkpoint back = load_checkpoint(file);
  CHECK(back.step == 42);
  CHECK(back.params.config.depth == 3);
  CHECK(back.params.config.width == 10);
  CHECK(back.params.config.input_dim == 4);
  CHECK(back.params.config.seed == p.config.seed);
  REQUIRE(back.params.layers.size() == p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) CHECK(back.params.layers[l] == p.layers[l]);
  CHECK(back.params.out_signs == p.out_signs);

  // Saving the loaded params again reproduces the same bytes.
  std::filesystem::path file2 = dir.path / "net2.ckpt";
  save_checkpoint(back.params, 42, file2);
  CHECK(slurp(file) == slurp(file2));
}

TEST_CASE("checkpoint: truncation is detected") {
  NetworkParams p = init_symmetric({1, 4, 3, 1});
  TempDir dir;
  std::filesystem::path file = dir.path / "net.ckpt";
  save_checkpoint(p, 0, file);
  std::string bytes = slurp(file);
  spit(file, bytes.substr(0, bytes.size() - 9));
  CHECK_THROWS_AS(load_checkpoint(file), ConfigError);
}

TEST_CASE("checkpoint: corrupt header is detected") {
  NetworkParams p = init_symmetric({1, 4, 3, 1});
  TempDir dir;
  std::filesystem::path file = dir.path / "net.ckpt";
  save_checkpoint(p, 0, file);
  std::string bytes = slurp(file);
  std::size_t nl = bytes.find('\n');
  REQUIRE(nl != std::string::npos);
  spit(file, "{\"version\":999}" + bytes.substr(nl));
  CHECK_THROWS_AS(load_checkpoint(file), ConfigError);
  CHECK_THROWS_AS(load_checkpoint(dir.path / "absent.ckpt"), ConfigError);
}

TEST_CASE("matrix checkpoint: round trip and shape errors") {
  Matrix m(3, 5);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      m(i, j) = 0.1 * static_cast<double>(i) - 1.0 / static_cast<double>(j + 1);
  TempDir dir;
  std::filesystem::path file = dir.path / "w.ckpt";
  save_matrix_checkpoint(m, file);
  Matrix back = load_matrix_checkpoint(file);
  CHECK(back == m);

  std::string bytes = slurp(file);
  spit(file, bytes.substr(0, bytes.size() - 1));
  CHECK_THROWS_AS(load_matrix_checkpoint(file), ConfigError);
}
