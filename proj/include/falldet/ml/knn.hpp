#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "falldet/ml/standardizer.hpp"
#include "falldet/signal.hpp"

namespace falldet::ml {

struct Prediction {
  Label label = Label::ADL;
  double score = 0.0;
};

/// Brute-force k nearest neighbours in Euclidean distance.
/// Distance ties go to the lower training index; vote ties go to Fall.
class KnnClassifier {
public:
  explicit KnnClassifier(std::size_t k = 5) : k_(k) {}

  void fit(std::vector<Row> rows, std::vector<Label> labels) {
    rows_ = std::move(rows);
    labels_ = std::move(labels);
  }

  std::size_t k() const { return k_; }
  bool fitted() const { return !rows_.empty(); }
  const std::vector<Row> &rows() const { return rows_; }
  const std::vector<Label> &labels() const { return labels_; }

  /// Indices of the k nearest stored rows, nearest first.
  std::vector<std::size_t> neighbours(std::span<const double> x) const {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        double diff = rows_[i][j] - x[j];
        d += diff * diff;
      }
      dist.emplace_back(d, i);
    }
    const std::size_t k = std::min(k_, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(dist[i].second);
    return out;
  }

  Prediction predict(std::span<const double> x) const {
    auto nn = neighbours(x);
    std::size_t falls = 0;
    for (auto i : nn) falls += labels_[i] == Label::Fall ? 1 : 0;
    Prediction p;
    p.score = nn.empty() ? 0.0 : static_cast<double>(falls) / static_cast<double>(nn.size());
    p.label = 2 * falls >= nn.size() ? Label::Fall : Label::ADL;
    return p;
  }

private:
  std::size_t k_;
  std::vector<Row> rows_;
  std::vector<Label> labels_;
};

} // namespace falldet::ml
