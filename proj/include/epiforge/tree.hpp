#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "epiforge/matrix.hpp"

namespace epiforge {

inline constexpr int kUnlimitedDepth = -1;

struct TreeOptions {
  int max_depth = kUnlimitedDepth;
  std::size_t min_samples_leaf = 1;
};

/// CART regression tree. Splits scan every feature and every midpoint
/// between consecutive distinct values, keeping the one with the lowest
/// summed child squared error; the first best split in (feature, threshold)
/// order wins ties. Leaves predict the mean target of their rows.
class RegressionTree {
 public:
  /// Fits on `rows` of `x` (repeats allowed, as in bootstrap samples).
  static RegressionTree fit(const RowMatrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                            const TreeOptions& options = {});
  static RegressionTree fit(const RowMatrix& x, std::span<const double> y, const TreeOptions& options = {});

  double predict(std::span<const double> row) const;
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t leaf_count() const;
  int depth() const { return depth_; }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  class Builder;
  std::vector<Node> nodes_;
  int depth_ = 0;
};

}  // namespace epiforge
