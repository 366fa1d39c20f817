#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "falldet/ml/knn.hpp"
#include "falldet/ml/standardizer.hpp"

namespace falldet::ml {

struct SvmParams {
  double lambda = 1e-3;
  std::size_t epochs = 50;
};

/// L2-regularised hinge loss minimised by Pegasos-style subgradient steps
/// with step size 1/(lambda * t). The bias is folded in as a constant
/// feature, so it is regularised along with the weights.
class LinearSvm {
public:
  explicit LinearSvm(SvmParams params = {}) : params_(params) {}

  const SvmParams &params() const { return params_; }
  const std::vector<double> &weights() const { return w_; }
  double bias() const { return b_; }
  bool fitted() const { return !w_.empty(); }

  void set_state(std::vector<double> w, double b) {
    w_ = std::move(w);
    b_ = b;
  }

  void fit(std::span<const Row> rows, std::span<const Label> labels, std::uint64_t seed) {
    const std::size_t n = rows.size();
    const std::size_t d = n ? rows.front().size() : 0;
    std::vector<double> w(d + 1, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    const double radius = 1.0 / std::sqrt(params_.lambda);

    std::uint64_t t = 0;
    for (std::size_t epoch = 0; epoch < params_.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i : order) {
        ++t;
        const double eta = 1.0 / (params_.lambda * static_cast<double>(t));
        const double y = labels[i] == Label::Fall ? 1.0 : -1.0;
        double margin = w[d];
        for (std::size_t j = 0; j < d; ++j) margin += w[j] * rows[i][j];
        const double shrink = 1.0 - eta * params_.lambda;
        for (double &wj : w) wj *= shrink;
        if (y * margin < 1.0) {
          for (std::size_t j = 0; j < d; ++j) w[j] += eta * y * rows[i][j];
          w[d] += eta * y;
        }
        double norm = 0.0;
        for (double wj : w) norm += wj * wj;
        norm = std::sqrt(norm);
        if (norm > radius)
          for (double &wj : w) wj *= radius / norm;
      }
    }
    b_ = w[d];
    w.pop_back();
    w_ = std::move(w);
  }

  double margin(std::span<const double> x) const {
    double m = b_;
    for (std::size_t j = 0; j < w_.size(); ++j) m += w_[j] * x[j];
    return m;
  }

  /// Sign of the margin; a zero margin counts as Fall.
  Prediction predict(std::span<const double> x) const {
    const double m = margin(x);
    return {m >= 0.0 ? Label::Fall : Label::ADL, m};
  }

private:
  SvmParams params_;
  std::vector<double> w_;
  double b_ = 0.0;
};

} // namespace falldet::ml
