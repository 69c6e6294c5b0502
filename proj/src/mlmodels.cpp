#include "epiforge/mlmodels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <fmt/format.h>

#include "epiforge/error.hpp"
#include "epiforge/rng.hpp"

namespace epiforge {

namespace {

constexpr const char* kModule = "mlmodels";

void check_training_set(const RowMatrix& x, std::span<const double> y) {
  if (x.rows() == 0 || y.empty()) throw Error(Errc::EmptyTrainingSet, kModule, "no training rows");
  if (x.rows() != y.size())
    throw Error(Errc::LengthMismatch, kModule, fmt::format("{} rows vs {} targets", x.rows(), y.size()));
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
  return d;
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string_view to_string(RegressorKind kind) {
  switch (kind) {
    case RegressorKind::RandomForest: return "random_forest";
    case RegressorKind::GradientBoosting: return "gradient_boosting";
    case RegressorKind::KNN: return "knn";
    case RegressorKind::KernelRidge: return "kernel_ridge";
  }
  return "unknown";
}

RegressorKind kind_of(const Hyperparameters& hp) { return static_cast<RegressorKind>(hp.index()); }

std::string describe(const Hyperparameters& hp) {
  return std::visit(
      overloaded{
          [](const ForestParams& p) {
            return fmt::format("max_depth={} n_estimators={}{}",
                               p.max_depth == kUnlimitedDepth ? std::string("none") : std::to_string(p.max_depth),
                               p.n_estimators, p.bootstrap ? "" : " bootstrap=false");
          },
          [](const BoostingParams& p) {
            return fmt::format("learning_rate={} n_estimators={} max_depth={}", p.learning_rate, p.n_estimators,
                               p.max_depth);
          },
          [](const KnnParams& p) { return fmt::format("k={}", p.k); },
          [](const KernelRidgeParams& p) { return fmt::format("alpha={} gamma={}", p.alpha, p.gamma); },
      },
      hp);
}

void to_json(nlohmann::json& j, const Hyperparameters& hp) {
  std::visit(overloaded{
                 [&](const ForestParams& p) {
                   j = {{"max_depth", p.max_depth == kUnlimitedDepth ? nlohmann::json() : nlohmann::json(p.max_depth)},
                        {"n_estimators", p.n_estimators},
                        {"bootstrap", p.bootstrap}};
                 },
                 [&](const BoostingParams& p) {
                   j = {{"learning_rate", p.learning_rate}, {"n_estimators", p.n_estimators}, {"max_depth", p.max_depth}};
                 },
                 [&](const KnnParams& p) { j = {{"k", p.k}}; },
                 [&](const KernelRidgeParams& p) { j = {{"alpha", p.alpha}, {"gamma", p.gamma}}; },
             },
             hp);
}

// ---------------------------------------------------------------------------

RandomForest RandomForest::fit(const RowMatrix& x, std::span<const double> y, const ForestParams& params,
                               std::uint64_t seed) {
  check_training_set(x, y);
  if (params.n_estimators < 1) throw Error(Errc::InvalidArgument, kModule, "n_estimators must be >= 1");
  RandomForest forest;
  const std::size_t n = x.rows();
  std::vector<std::size_t> rows(n);
  for (int t = 0; t < params.n_estimators; ++t) {
    if (params.bootstrap) {
      CounterRng rng(seed, static_cast<std::uint64_t>(t));
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    forest.trees_.push_back(RegressionTree::fit(x, y, rows, TreeOptions{params.max_depth, 1}));
  }
  return forest;
}

double RandomForest::predict(std::span<const double> row) const {
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(row);
  return sum / static_cast<double>(trees_.size());
}

GradientBoosting GradientBoosting::fit(const RowMatrix& x, std::span<const double> y, const BoostingParams& params) {
  check_training_set(x, y);
  if (params.n_estimators < 1) throw Error(Errc::InvalidArgument, kModule, "n_estimators must be >= 1");
  if (!(params.learning_rate > 0.0)) throw Error(Errc::InvalidArgument, kModule, "learning_rate must be > 0");
  GradientBoosting gb;
  gb.learning_rate_ = params.learning_rate;
  gb.init_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  std::vector<double> current(y.size(), gb.init_), residual(y.size());
  for (int m = 0; m < params.n_estimators; ++m) {
    for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - current[i];
    auto tree = RegressionTree::fit(x, residual, TreeOptions{params.max_depth, 1});
    for (std::size_t i = 0; i < y.size(); ++i) current[i] += gb.learning_rate_ * tree.predict(x.row(i));
    gb.trees_.push_back(std::move(tree));
  }
  return gb;
}

double GradientBoosting::predict(std::span<const double> row, std::size_t stages) const {
  double v = init_;
  for (std::size_t m = 0; m < std::min(stages, trees_.size()); ++m) v += learning_rate_ * trees_[m].predict(row);
  return v;
}

KnnRegressor KnnRegressor::fit(const RowMatrix& x, std::span<const double> y, const KnnParams& params) {
  check_training_set(x, y);
  if (params.k < 1 || static_cast<std::size_t>(params.k) > x.rows())
    throw Error(Errc::InvalidArgument, kModule, fmt::format("k={} with {} training rows", params.k, x.rows()));
  KnnRegressor knn;
  knn.x_ = x;
  knn.y_.assign(y.begin(), y.end());
  knn.k_ = static_cast<std::size_t>(params.k);
  return knn;
}

double KnnRegressor::predict(std::span<const double> row) const {
  std::vector<std::pair<double, std::size_t>> d(x_.rows());
  for (std::size_t i = 0; i < x_.rows(); ++i) d[i] = {squared_distance(row, x_.row(i)), i};
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k_), d.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < k_; ++i) sum += y_[d[i].second];
  return sum / static_cast<double>(k_);
}

KernelRidge KernelRidge::fit(const RowMatrix& x, std::span<const double> y, const KernelRidgeParams& params) {
  check_training_set(x, y);
  if (!(params.alpha >= 0.0) || !(params.gamma > 0.0))
    throw Error(Errc::InvalidArgument, kModule, "alpha must be >= 0 and gamma > 0");
  const auto n = static_cast<Eigen::Index>(x.rows());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      double v = std::exp(-params.gamma * squared_distance(x.row(i), x.row(j)));
      k(i, j) = v;
      k(j, i) = v;
    }
  k.diagonal().array() += params.alpha;
  Eigen::Map<const Eigen::VectorXd> rhs(y.data(), n);
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success)
    throw Error(Errc::SingularKernel, kModule, fmt::format("K + {} I is not positive definite", params.alpha));
  Eigen::VectorXd w = llt.solve(rhs);
  if (!w.allFinite()) throw Error(Errc::SingularKernel, kModule, "non-finite dual coefficients");

  KernelRidge krr;
  krr.x_ = x;
  krr.dual_.assign(w.data(), w.data() + n);
  krr.gamma_ = params.gamma;
  return krr;
}

double KernelRidge::predict(std::span<const double> row) const {
  double v = 0.0;
  for (std::size_t i = 0; i < x_.rows(); ++i) v += dual_[i] * std::exp(-gamma_ * squared_distance(row, x_.row(i)));
  return v;
}

// ---------------------------------------------------------------------------

RegressorKind TrainedRegressor::kind() const { return kind_of(hp_); }

double TrainedRegressor::predict(std::span<const double> row) const {
  if (row.size() != width_)
    throw Error(Errc::WidthMismatch, kModule,
                fmt::format("{} expects {} features, got {}", to_string(kind()), width_, row.size()));
  return std::visit([&](const auto& m) { return m.predict(row); }, model_);
}

std::vector<double> TrainedRegressor::predict(const RowMatrix& rows) const {
  std::vector<double> out(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i) out[i] = predict(rows.row(i));
  return out;
}

TrainedRegressor fit_regressor(RegressorKind kind, const RowMatrix& x, std::span<const double> y,
                               const Hyperparameters& hp, std::uint64_t seed) {
  if (kind_of(hp) != kind)
    throw Error(Errc::InvalidArgument, kModule,
                fmt::format("{} hyperparameters given for {}", to_string(kind_of(hp)), to_string(kind)));
  check_training_set(x, y);
  auto model = std::visit(
      overloaded{
          [&](const ForestParams& p) -> TrainedRegressor::Model { return RandomForest::fit(x, y, p, seed); },
          [&](const BoostingParams& p) -> TrainedRegressor::Model { return GradientBoosting::fit(x, y, p); },
          [&](const KnnParams& p) -> TrainedRegressor::Model { return KnnRegressor::fit(x, y, p); },
          [&](const KernelRidgeParams& p) -> TrainedRegressor::Model { return KernelRidge::fit(x, y, p); },
      },
      hp);
  return TrainedRegressor(std::move(model), hp, x.cols(), seed);
}

// ---------------------------------------------------------------------------

HyperGrid default_grid(RegressorKind kind) {
  HyperGrid g;
  switch (kind) {
    case RegressorKind::RandomForest:
      for (int depth : {4, 8, 16, kUnlimitedDepth})
        for (int n : {50, 100, 200}) g.candidates.push_back(ForestParams{depth, n, true});
      break;
    case RegressorKind::GradientBoosting:
      for (double lr : {0.01, 0.05, 0.1, 0.3})
        for (int n : {50, 100, 200}) g.candidates.push_back(BoostingParams{lr, n, 6});
      break;
    case RegressorKind::KNN:
      for (int k = 2; k <= 15; ++k) g.candidates.push_back(KnnParams{k});
      break;
    case RegressorKind::KernelRidge:
      for (double a : {1e-3, 1e-2, 1e-1, 1.0, 10.0})
        for (double gm : {1e-3, 1e-2, 1e-1, 1.0, 10.0}) g.candidates.push_back(KernelRidgeParams{a, gm});
      break;
  }
  return g;
}

GridSearchResult grid_search(RegressorKind kind, const RowMatrix& x, std::span<const double> y,
                             const HyperGrid& grid, std::uint64_t seed) {
  if (grid.candidates.empty()) throw Error(Errc::EmptyGrid, kModule, fmt::format("no {} candidates", to_string(kind)));
  check_training_set(x, y);
  const std::size_t n = x.rows(), k = grid.folds;
  if (k < 2 || k > n)
    throw Error(Errc::InvalidArgument, kModule, fmt::format("{} folds over {} rows", k, n));

  GridSearchResult result;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& cand : grid.candidates) {
    double total = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t lo = f * n / k, hi = (f + 1) * n / k;
      std::vector<std::size_t> train, held;
      for (std::size_t i = 0; i < n; ++i) (i >= lo && i < hi ? held : train).push_back(i);
      auto xt = x.select_rows(train);
      std::vector<double> yt;
      for (auto i : train) yt.push_back(y[i]);
      auto model = fit_regressor(kind, xt, yt, cand, seed);
      double ss = 0.0;
      for (auto i : held) {
        double r = model.predict(x.row(i)) - y[i];
        ss += r * r;
      }
      total += std::sqrt(ss / static_cast<double>(held.size()));
    }
    const double mean = total / static_cast<double>(k);
    result.mean_fold_rmse.push_back(mean);
    if (mean < best) {
      best = mean;
      result.best = cand;
    }
  }
  if (!std::isfinite(best)) throw Error(Errc::EmptyGrid, kModule, "no candidate produced a finite CV score");
  return result;
}

}  // namespace epiforge
