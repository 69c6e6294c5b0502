#include "epiforge/tree.hpp"

#include <algorithm>
#include <numeric>

#include "epiforge/error.hpp"

namespace epiforge {

class RegressionTree::Builder {
 public:
  Builder(RegressionTree& tree, const RowMatrix& x, std::span<const double> y, const TreeOptions& options)
      : tree_(tree), x_(x), y_(y), options_(options) {}

  int grow(std::vector<std::size_t> rows, int depth) {
    tree_.depth_ = std::max(tree_.depth_, depth);
    const int id = static_cast<int>(tree_.nodes_.size());
    tree_.nodes_.push_back({});

    double sum = 0.0, lo = y_[rows[0]], hi = lo;
    for (auto r : rows) {
      sum += y_[r];
      lo = std::min(lo, y_[r]);
      hi = std::max(hi, y_[r]);
    }
    const double n = static_cast<double>(rows.size());
    tree_.nodes_[id].value = sum / n;

    const bool depth_left = options_.max_depth == kUnlimitedDepth || depth < options_.max_depth;
    if (!depth_left || lo == hi || rows.size() < 2 * options_.min_samples_leaf) return id;

    // Maximizing sum_L^2/n_L + sum_R^2/n_R minimizes the children's SSE.
    const double parent_score = sum * sum / n;
    double best_score = parent_score;
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::size_t> order(rows.size());
    for (std::size_t f = 0; f < x_.cols(); ++f) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return x_(rows[a], f) < x_(rows[b], f); });
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        left_sum += y_[rows[order[i]]];
        const std::size_t nl = i + 1, nr = order.size() - nl;
        const double xa = x_(rows[order[i]], f), xb = x_(rows[order[i + 1]], f);
        if (xa == xb || nl < options_.min_samples_leaf || nr < options_.min_samples_leaf) continue;
        const double right_sum = sum - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(nl) +
                             right_sum * right_sum / static_cast<double>(nr);
        if (score > best_score) {
          best_score = score;
          best_feature = static_cast<int>(f);
          double mid = 0.5 * (xa + xb);
          best_threshold = mid < xb ? mid : xa;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (x_(r, best_feature) <= best_threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int rgt = grow(std::move(right), depth + 1);
    auto& node = tree_.nodes_[id];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = rgt;
    return id;
  }

 private:
  RegressionTree& tree_;
  const RowMatrix& x_;
  std::span<const double> y_;
  const TreeOptions& options_;
};

RegressionTree RegressionTree::fit(const RowMatrix& x, std::span<const double> y,
                                   std::span<const std::size_t> rows, const TreeOptions& options) {
  if (rows.empty()) throw Error(Errc::EmptyTrainingSet, "mlmodels", "tree fit on zero rows");
  if (x.rows() != y.size()) throw Error(Errc::LengthMismatch, "mlmodels", "feature/target row counts differ");
  RegressionTree tree;
  Builder(tree, x, y, options).grow({rows.begin(), rows.end()}, 0);
  return tree;
}

RegressionTree RegressionTree::fit(const RowMatrix& x, std::span<const double> y, const TreeOptions& options) {
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return fit(x, y, rows, options);
}

double RegressionTree::predict(std::span<const double> row) const {
  int i = 0;
  while (nodes_[i].feature >= 0)
    i = row[static_cast<std::size_t>(nodes_[i].feature)] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
  return nodes_[i].value;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
}

}  // namespace epiforge
