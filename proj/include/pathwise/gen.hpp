#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pathwise/core.hpp"
#include "pathwise/errors.hpp"

namespace pathwise::gen {

struct GenSpec {
  enum class Kind { Regression, PlusImage, BlocksImage };
  Kind kind = Kind::Regression;
  int n = 100;
  int p = 10;
  double rho = 0.0;   // pairwise predictor correlation
  double snr = 3.0;   // signal-to-noise ratio
  int side = 64;      // image side length
  double sigma = 1.0; // image noise standard deviation
  std::uint64_t seed = 1;
  int blocks = 6;     // rectangles in the blocks image
  bool orthonormal_groups = false;
  int group_size = 0; // used with orthonormal_groups
};

inline void validate(const GenSpec& spec) {
  if (spec.rho < 0.0 || spec.rho >= 1.0) throw InvalidArgumentError("rho must be in [0, 1)");
  if (!(spec.snr > 0.0)) throw InvalidArgumentError("snr must be > 0");
  if (spec.kind != GenSpec::Kind::Regression && spec.side < 1)
    throw InvalidArgumentError("side must be positive");
  if (spec.kind == GenSpec::Kind::Regression && (spec.n < 1 || spec.p < 1))
    throw InvalidArgumentError("n and p must be positive");
  if (spec.sigma < 0.0) throw InvalidArgumentError("sigma must be >= 0");
  if (spec.orthonormal_groups) {
    if (spec.group_size < 1 || spec.p % spec.group_size != 0)
      throw InvalidArgumentError("group_size must divide p");
    if (spec.n < spec.group_size)
      throw InvalidArgumentError("orthonormal groups need n >= group_size");
  }
}

/// Alternating-sign, exponentially decaying coefficients: (-1)^j exp(-2(j-1)/20)
/// for j = 1..p.
inline Vector decaying_coefficients(int p) {
  Vector beta(p);
  for (int j = 1; j <= p; ++j)
    beta[j - 1] = (j % 2 == 0 ? 1.0 : -1.0) * std::exp(-2.0 * (j - 1) / 20.0);
  return beta;
}

struct RegressionData {
  Matrix X;
  Vector y;
  Vector beta_true;
  double noise_scale = 0.0;  // the k in y = X beta + k Z
};

/// Equicorrelated Gaussian predictors (sqrt(rho) common + sqrt(1-rho)
/// idiosyncratic) with the noise scale solved so the population
/// signal-to-noise ratio equals snr. With orthonormal_groups, predictor
/// blocks are orthonormalized by QR and the empirical signal variance is
/// used instead.
inline RegressionData make_regression(const GenSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  RegressionData out;
  out.X.resize(spec.n, spec.p);
  for (int i = 0; i < spec.n; ++i) {
    const double common = gauss(rng);
    for (int j = 0; j < spec.p; ++j)
      out.X(i, j) = std::sqrt(spec.rho) * common + std::sqrt(1.0 - spec.rho) * gauss(rng);
  }
  if (spec.orthonormal_groups) {
    for (int g = 0; g < spec.p / spec.group_size; ++g) {
      Matrix block = out.X.middleCols(g * spec.group_size, spec.group_size);
      Eigen::HouseholderQR<Matrix> qr(block);
      Matrix thin_q = qr.householderQ() * Matrix::Identity(spec.n, spec.group_size);
      out.X.middleCols(g * spec.group_size, spec.group_size) = thin_q;
    }
  }
  out.beta_true = decaying_coefficients(spec.p);
  const Vector signal = out.X * out.beta_true;

  double signal_var;
  if (spec.orthonormal_groups) {
    const double mean = signal.mean();
    signal_var = (signal.array() - mean).square().sum() / static_cast<double>(spec.n);
  } else {
    const double sum_beta = out.beta_true.sum();
    signal_var = (1.0 - spec.rho) * out.beta_true.squaredNorm() + spec.rho * sum_beta * sum_beta;
  }
  out.noise_scale = std::sqrt(signal_var / spec.snr);

  out.y.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) out.y[i] = signal[i] + out.noise_scale * gauss(rng);
  return out;
}

struct ImageData {
  Matrix noisy;
  Matrix truth;
};

/// Plus-shaped image: centered arms of width ceil(side/5), amplitude 1, plus
/// N(0, sigma^2) noise.
inline ImageData make_plus_image(const GenSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int s = spec.side;
  const int width = (s + 4) / 5;
  const int start = (s - width) / 2;
  ImageData out;
  out.truth = Matrix::Zero(s, s);
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c)
      if ((r >= start && r < start + width) || (c >= start && c < start + width))
        out.truth(r, c) = 1.0;
  out.noisy = out.truth;
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c) out.noisy(r, c) += spec.sigma * gauss(rng);
  return out;
}

/// Blocks image: non-overlapping axis-aligned rectangles with constant values
/// drawn uniformly from [1, 4] on a zero background, plus noise.
inline ImageData make_blocks_image(const GenSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> value_dist(1.0, 4.0);
  const int s = spec.side;
  ImageData out;
  out.truth = Matrix::Zero(s, s);

  std::vector<std::array<int, 4>> placed;  // r0, c0, r1, c1 inclusive
  std::uniform_int_distribution<int> size_dist(std::max(1, s / 8), std::max(1, s / 3));
  int attempts = 0;
  while (static_cast<int>(placed.size()) < spec.blocks && attempts < 10000) {
    ++attempts;
    const int h = size_dist(rng);
    const int w = size_dist(rng);
    if (h >= s || w >= s) continue;
    std::uniform_int_distribution<int> rpos(0, s - h - 1 >= 0 ? s - h : 0);
    std::uniform_int_distribution<int> cpos(0, s - w - 1 >= 0 ? s - w : 0);
    const int r0 = std::min(rpos(rng), s - h);
    const int c0 = std::min(cpos(rng), s - w);
    const std::array<int, 4> rect{r0, c0, r0 + h - 1, c0 + w - 1};
    bool overlaps = false;
    for (const auto& other : placed) {
      const bool sep = rect[2] < other[0] - 1 || other[2] < rect[0] - 1 ||
                       rect[3] < other[1] - 1 || other[3] < rect[1] - 1;
      if (!sep) {
        overlaps = true;
        break;
      }
    }
    if (overlaps) continue;
    const double value = value_dist(rng);
    for (int r = rect[0]; r <= rect[2]; ++r)
      for (int c = rect[1]; c <= rect[3]; ++c) out.truth(r, c) = value;
    placed.push_back(rect);
  }

  out.noisy = out.truth;
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c) out.noisy(r, c) += spec.sigma * gauss(rng);
  return out;
}

inline ImageData make_image(const GenSpec& spec) {
  switch (spec.kind) {
    case GenSpec::Kind::PlusImage:
      return make_plus_image(spec);
    case GenSpec::Kind::BlocksImage:
      return make_blocks_image(spec);
    default:
      throw InvalidArgumentError("not an image spec");
  }
}

}  // namespace pathwise::gen
