#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "pathwise/gen.hpp"
#include "pathwise/io.hpp"

using namespace pathwise;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("pathwise_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("CSV matrices round-trip at full precision", "[io]") {
  TempDir tmp;
  std::mt19937_64 rng(81);
  const Matrix m = random_matrix(rng, 7, 4);
  io::write_csv_matrix(tmp.file("m.csv"), m);
  const Matrix back = io::read_csv_matrix(tmp.file("m.csv"));
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("CSV errors carry file and line", "[io]") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("bad.csv"));
    out << "1.0,2.0\n1.0,oops\n";
  }
  try {
    io::read_csv_matrix(tmp.file("bad.csv"));
    FAIL("expected an InputError");
  } catch (const io::InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad.csv:2") != std::string::npos);
  }
  CHECK_THROWS_AS(io::read_csv_matrix(tmp.file("missing.csv")), io::InputError);
}

TEST_CASE("P5 images round-trip bit for bit", "[io]") {
  TempDir tmp;
  io::PgmImage img;
  img.width = 5;
  img.height = 3;
  img.maxval = 255;
  img.binary = true;
  for (int i = 0; i < 15; ++i) img.pixels.push_back(static_cast<std::uint16_t>(i * 17 % 256));
  io::write_pgm(tmp.file("a.pgm"), img);
  const io::PgmImage back = io::read_pgm(tmp.file("a.pgm"));
  CHECK(back.pixels == img.pixels);
  io::write_pgm(tmp.file("b.pgm"), back);
  CHECK(slurp(tmp.file("a.pgm")) == slurp(tmp.file("b.pgm")));
}

TEST_CASE("16-bit P5 and ASCII P2 read back value-identical", "[io]") {
  TempDir tmp;
  io::PgmImage img;
  img.width = 4;
  img.height = 2;
  img.maxval = 65535;
  img.binary = true;
  img.pixels = {0, 1, 700, 65535, 32768, 2, 3, 40000};
  io::write_pgm(tmp.file("w.pgm"), img);
  CHECK(io::read_pgm(tmp.file("w.pgm")).pixels == img.pixels);

  img.binary = false;
  img.maxval = 4000;
  img.pixels = {0, 1, 700, 4000, 3000, 2, 3, 1234};
  io::write_pgm(tmp.file("a2.pgm"), img);
  const io::PgmImage back = io::read_pgm(tmp.file("a2.pgm"));
  CHECK_FALSE(back.binary);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("PGM reader tolerates comments and rejects junk", "[io]") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("c.pgm"), std::ios::binary);
    out << "P2\n# a comment\n2 2\n# another\n10\n1 2\n3 4\n";
  }
  const io::PgmImage img = io::read_pgm(tmp.file("c.pgm"));
  CHECK(img.width == 2);
  CHECK(img.pixels == std::vector<std::uint16_t>{1, 2, 3, 4});
  {
    std::ofstream out(tmp.file("bad.pgm"), std::ios::binary);
    out << "P7\n2 2\n10\n";
  }
  CHECK_THROWS_AS(io::read_pgm(tmp.file("bad.pgm")), io::InputError);
}

TEST_CASE("quantize and to_float invert within half a step", "[io]") {
  std::mt19937_64 rng(82);
  Matrix values = random_matrix(rng, 6, 5);
  io::ImageMeta meta;
  meta.maxval = 65535;
  const io::PgmImage img = io::quantize(values, meta);
  const Matrix back = io::to_float(img, meta);
  CHECK((back - values).cwiseAbs().maxCoeff() <= 0.5 * meta.scale + 1e-12);
}

TEST_CASE("path files round-trip records and header", "[io]") {
  TempDir tmp;
  io::PathFile file;
  file.header["method"] = "lasso";
  file.header["n"] = 10;
  io::PathRecord rec;
  rec.index = 0;
  rec.lambda = 0.5;
  rec.coefficients = (Vector(3) << 0.1, 0.0, -2.5).finished();
  rec.objective = 1.25;
  rec.sweeps = 7;
  rec.converged = true;
  rec.certified = true;
  file.records.push_back(rec);
  io::write_path_file(tmp.file("p.jsonl"), file);
  const io::PathFile back = io::read_path_file(tmp.file("p.jsonl"));
  CHECK(back.header.at("method") == "lasso");
  REQUIRE(back.records.size() == 1);
  CHECK(back.records[0].lambda == 0.5);
  CHECK((back.records[0].coefficients - rec.coefficients).cwiseAbs().maxCoeff() == 0.0);

  {
    std::ofstream out(tmp.file("empty.jsonl"));
  }
  CHECK_THROWS_AS(io::read_path_file(tmp.file("empty.jsonl")), io::InputError);
}

TEST_CASE("generation is deterministic in the seed", "[io]") {
  gen::GenSpec spec;
  spec.kind = gen::GenSpec::Kind::Regression;
  spec.n = 50;
  spec.p = 8;
  spec.rho = 0.3;
  spec.seed = 123;
  const gen::RegressionData a = gen::make_regression(spec);
  const gen::RegressionData b = gen::make_regression(spec);
  CHECK((a.X - b.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
  spec.seed = 124;
  const gen::RegressionData c = gen::make_regression(spec);
  CHECK((a.X - c.X).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("empirical correlation tracks rho", "[io]") {
  gen::GenSpec spec;
  spec.n = 10000;
  spec.p = 4;
  spec.rho = 0.5;
  spec.seed = 7;
  const gen::RegressionData data = gen::make_regression(spec);
  const double band = 3.0 / std::sqrt(10000.0);
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      const Vector xa = data.X.col(a).array() - data.X.col(a).mean();
      const Vector xb = data.X.col(b).array() - data.X.col(b).mean();
      const double corr = xa.dot(xb) / std::sqrt(xa.squaredNorm() * xb.squaredNorm());
      CHECK(corr == Catch::Approx(0.5).margin(band));
    }
}

TEST_CASE("empirical signal-to-noise ratio lands near the target", "[io]") {
  gen::GenSpec spec;
  spec.n = 10000;
  spec.p = 10;
  spec.rho = 0.2;
  spec.snr = 3.0;
  spec.seed = 11;
  const gen::RegressionData data = gen::make_regression(spec);
  const Vector signal = data.X * data.beta_true;
  const Vector noise = data.y - signal;
  const double var_s =
      (signal.array() - signal.mean()).square().sum() / (spec.n - 1.0);
  const double var_n = (noise.array() - noise.mean()).square().sum() / (spec.n - 1.0);
  CHECK(var_s / var_n == Catch::Approx(3.0).epsilon(0.10));
}

TEST_CASE("alternating-sign coefficients follow the stated decay", "[io]") {
  const Vector beta = gen::decaying_coefficients(5);
  CHECK(beta[0] == Catch::Approx(-1.0));
  CHECK(beta[1] == Catch::Approx(std::exp(-0.1)));
  CHECK(beta[2] == Catch::Approx(-std::exp(-0.2)));
}

TEST_CASE("image generators respect their shape contracts", "[io]") {
  gen::GenSpec spec;
  spec.kind = gen::GenSpec::Kind::PlusImage;
  spec.side = 10;
  spec.sigma = 0.0;
  spec.seed = 3;
  const gen::ImageData plus = gen::make_plus_image(spec);
  const int width = 2;  // ceil(10/5)
  const int start = (10 - width) / 2;
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) {
      const bool in_plus =
          (r >= start && r < start + width) || (c >= start && c < start + width);
      CHECK(plus.truth(r, c) == (in_plus ? 1.0 : 0.0));
    }

  spec.kind = gen::GenSpec::Kind::BlocksImage;
  spec.side = 32;
  spec.sigma = 1.0;
  spec.seed = 4;
  const gen::ImageData blocks = gen::make_blocks_image(spec);
  int nonzero = 0;
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) {
      const double v = blocks.truth(r, c);
      CHECK((v == 0.0 || (v >= 1.0 && v <= 4.0)));
      nonzero += v != 0.0;
    }
  CHECK(nonzero > 0);
  CHECK((blocks.noisy - blocks.truth).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("generator rejects invalid specs", "[io]") {
  gen::GenSpec spec;
  spec.rho = 1.0;
  CHECK_THROWS_AS(gen::validate(spec), InvalidArgumentError);
  spec.rho = 0.0;
  spec.snr = 0.0;
  CHECK_THROWS_AS(gen::validate(spec), InvalidArgumentError);
}
