#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "epiforge/dates.hpp"
#include "epiforge/features.hpp"
#include "epiforge/matrix.hpp"
#include "epiforge/tree.hpp"

namespace epiforge {

enum class RegressorKind { RandomForest, GradientBoosting, KNN, KernelRidge };

inline constexpr std::array<RegressorKind, 4> kRegressorKinds = {
    RegressorKind::RandomForest, RegressorKind::GradientBoosting, RegressorKind::KNN, RegressorKind::KernelRidge};

std::string_view to_string(RegressorKind kind);

// Hyperparameters -------------------------------------------------------------

struct ForestParams {
  int max_depth = kUnlimitedDepth;
  int n_estimators = 100;
  bool bootstrap = true;
};

struct BoostingParams {
  double learning_rate = 0.1;
  int n_estimators = 100;
  int max_depth = 6;
};

struct KnnParams {
  int k = 5;
};

struct KernelRidgeParams {
  double alpha = 1.0;
  double gamma = 0.1;
};

using Hyperparameters = std::variant<ForestParams, BoostingParams, KnnParams, KernelRidgeParams>;

RegressorKind kind_of(const Hyperparameters& hp);
std::string describe(const Hyperparameters& hp);
void to_json(nlohmann::json& j, const Hyperparameters& hp);

// Regressors ----------------------------------------------------------------

/// Bagged CART trees over all features; prediction is the mean over trees.
/// Tree t draws its bootstrap rows from CounterRng(seed, t).
class RandomForest {
 public:
  static RandomForest fit(const RowMatrix& x, std::span<const double> y, const ForestParams& params,
                          std::uint64_t seed);
  double predict(std::span<const double> row) const;
  const std::vector<RegressionTree>& trees() const { return trees_; }

 private:
  std::vector<RegressionTree> trees_;
};

/// Squared-loss gradient boosting: starts at the target mean, each stage fits
/// a tree to the current residuals and adds it scaled by the learning rate.
class GradientBoosting {
 public:
  static GradientBoosting fit(const RowMatrix& x, std::span<const double> y, const BoostingParams& params);
  double predict(std::span<const double> row) const { return predict(row, trees_.size()); }
  /// Prediction using only the first `stages` trees.
  double predict(std::span<const double> row, std::size_t stages) const;
  std::size_t stages() const { return trees_.size(); }

 private:
  double init_ = 0.0;
  double learning_rate_ = 0.1;
  std::vector<RegressionTree> trees_;
};

/// Mean target of the k nearest training rows (Euclidean); distance ties go
/// to the earlier training row.
class KnnRegressor {
 public:
  static KnnRegressor fit(const RowMatrix& x, std::span<const double> y, const KnnParams& params);
  double predict(std::span<const double> row) const;

 private:
  RowMatrix x_;
  std::vector<double> y_;
  std::size_t k_ = 1;
};

/// Kernel ridge regression with k(x, x') = exp(-gamma |x - x'|^2); the dual
/// weights solve (K + alpha I) w = y.
class KernelRidge {
 public:
  static KernelRidge fit(const RowMatrix& x, std::span<const double> y, const KernelRidgeParams& params);
  double predict(std::span<const double> row) const;
  std::span<const double> dual_coefficients() const { return dual_; }

 private:
  RowMatrix x_;
  std::vector<double> dual_;
  double gamma_ = 0.1;
};

/// An immutable fitted model of any kind.
class TrainedRegressor {
 public:
  RegressorKind kind() const;
  const Hyperparameters& hyperparameters() const { return hp_; }
  std::size_t feature_count() const { return width_; }
  std::uint64_t seed() const { return seed_; }

  /// Throws Error(WidthMismatch) for rows of the wrong width.
  double predict(std::span<const double> row) const;
  std::vector<double> predict(const RowMatrix& rows) const;

  /// The underlying model, e.g. std::get<RandomForest>(m.model()).
  using Model = std::variant<RandomForest, GradientBoosting, KnnRegressor, KernelRidge>;
  const Model& model() const { return model_; }

 private:
  friend TrainedRegressor fit_regressor(RegressorKind, const RowMatrix&, std::span<const double>,
                                        const Hyperparameters&, std::uint64_t);
  TrainedRegressor(Model model, Hyperparameters hp, std::size_t width, std::uint64_t seed)
      : model_(std::move(model)), hp_(hp), width_(width), seed_(seed) {}

  Model model_;
  Hyperparameters hp_;
  std::size_t width_ = 0;
  std::uint64_t seed_ = 0;
};

TrainedRegressor fit_regressor(RegressorKind kind, const RowMatrix& x, std::span<const double> y,
                               const Hyperparameters& hp, std::uint64_t seed);

// Model selection -------------------------------------------------------------

struct HyperGrid {
  std::vector<Hyperparameters> candidates;
  std::size_t folds = 5;
};

HyperGrid default_grid(RegressorKind kind);

struct GridSearchResult {
  Hyperparameters best;
  std::vector<double> mean_fold_rmse;  ///< one per candidate, in grid order
};

/// Contiguous (unshuffled) k-fold cross-validation; lowest mean fold RMSE
/// wins, earlier candidates win ties.
GridSearchResult grid_search(RegressorKind kind, const RowMatrix& x, std::span<const double> y,
                             const HyperGrid& grid, std::uint64_t seed);

// Recurrent forecasting -----------------------------------------------------

/// Maps one standardized feature row to a standardized prediction.
using OneStepModel = std::function<double(std::span<const double>)>;

/// Table-driven multi-step forecast from anchor day n: step k predicts day
/// n+k with lag_1..lag_{k-1} set to the previous predictions (most recent
/// first), the remaining lags observed, and exogenous inputs from day
/// n+k-exog_lag. Rows are standardized with `scaler` before the model sees
/// them; outputs are inverse-transformed and clamped at zero, and those
/// clamped values are what gets fed back.
std::vector<double> recurrent_forecast(const OneStepModel& model, const RegionPanel& panel, Date anchor,
                                       std::size_t horizon, int scenario, const ScalerParams& scaler,
                                       const FeatureOptions& options = {});

std::vector<double> recurrent_forecast(const TrainedRegressor& model, const RegionPanel& panel, Date anchor,
                                       std::size_t horizon, int scenario, const ScalerParams& scaler,
                                       const FeatureOptions& options = {});

}  // namespace epiforge
