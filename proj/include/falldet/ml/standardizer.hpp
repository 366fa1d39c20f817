#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "falldet/error.hpp"

namespace falldet::ml {

using Row = std::vector<double>;

/// Features whose development std falls below this map to zero.
inline constexpr double kConstantFeatureStd = 1e-9;

/// Per-feature z-scoring fitted on development rows only.
class Standardizer {
public:
  Standardizer() = default;
  Standardizer(std::vector<double> mean, std::vector<double> std)
      : mean_(std::move(mean)), std_(std::move(std)) {}

  static Standardizer fit(std::span<const Row> rows) {
    if (rows.empty()) throw Error(ErrorCode::SingleClassTrainingSet, "cannot standardise zero rows");
    const std::size_t d = rows.front().size();
    std::vector<double> mean(d, 0.0), sd(d, 0.0);
    for (const auto &r : rows)
      for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
    for (double &m : mean) m /= static_cast<double>(rows.size());
    for (const auto &r : rows)
      for (std::size_t j = 0; j < d; ++j) sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
    for (double &s : sd) s = std::sqrt(s / static_cast<double>(rows.size()));
    return Standardizer(std::move(mean), std::move(sd));
  }

  std::size_t dim() const { return mean_.size(); }
  bool fitted() const { return !mean_.empty(); }
  bool is_constant(std::size_t j) const { return std_[j] < kConstantFeatureStd; }

  Row transform(std::span<const double> x) const {
    Row out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
      out[j] = is_constant(j) ? 0.0 : (x[j] - mean_[j]) / std_[j];
    return out;
  }

  const std::vector<double> &mean() const { return mean_; }
  const std::vector<double> &stddev() const { return std_; }

private:
  std::vector<double> mean_;
  std::vector<double> std_;
};

} // namespace falldet::ml
