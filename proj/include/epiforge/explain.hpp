#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "epiforge/matrix.hpp"

namespace epiforge {

using PredictFn = std::function<double(std::span<const double>)>;

/// Exact enumeration is capped here: 2^12 coalitions per instance.
inline constexpr std::size_t kMaxExactFeatures = 12;

/// Column means of the background rows; absent features take these values.
std::vector<double> background_mean(const RowMatrix& background);

struct ShapleyResult {
  std::vector<double> phi;
  double base_value = 0.0;  ///< f(background mean)
  double prediction = 0.0;  ///< f(instance)
};

/// Exact Shapley values by coalition enumeration with the |S|!(d-|S|-1)!/d!
/// weights. Throws TooManyFeatures above kMaxExactFeatures.
ShapleyResult shapley_exact(const PredictFn& f, std::span<const double> instance, std::span<const double> baseline);

/// Average marginal contribution over n_permutations permutations drawn
/// from CounterRng(seed, instance_stream). With `exhaustive` every one of
/// the d! permutations is walked once instead and n_permutations is ignored.
ShapleyResult shapley_sampled(const PredictFn& f, std::span<const double> instance,
                              std::span<const double> baseline, std::size_t n_permutations, std::uint64_t seed,
                              std::uint64_t instance_stream = 0, bool exhaustive = false);

struct ExplainedModel {
  std::string name;
  PredictFn fn;
  std::size_t feature_count = 0;
};

struct ShapleyOptions {
  std::size_t permutations = 64;
  std::uint64_t seed = 42;
  /// Use exact enumeration when the feature count allows it.
  bool prefer_exact = false;
};

struct AttributionReport {
  std::vector<std::string> features;
  std::vector<std::string> models;
  /// values[m] is a rows x features matrix of phi for model m.
  std::vector<RowMatrix> values;
  std::vector<double> base_values;            ///< per model
  std::vector<std::vector<double>> per_model;  ///< mean |phi| per model and feature
  std::vector<double> mean_abs;               ///< cross-model mean of per_model
  std::vector<double> std_across_models;      ///< population std of per_model
};

/// Attributes every row of `rows` for every model against the background
/// mean. Throws SchemaMismatch when a model's width differs from the schema.
AttributionReport importance_summary(std::span<const ExplainedModel> models, const std::vector<std::string>& features,
                                     const RowMatrix& rows, const RowMatrix& background,
                                     const ShapleyOptions& options);

/// Scales mean_abs and std_across_models so the largest importance is 1.
void normalize_importance(AttributionReport& report);

struct DependencePoint {
  double raw_value;
  double shap_value;
};

/// (raw value, phi) per row for `feature`, averaged across the report's
/// models and multiplied by `shap_scale` (e.g. the target std to express phi
/// in cases). Throws UnknownFeature.
std::vector<DependencePoint> dependence_export(const AttributionReport& report, const RowMatrix& raw_rows,
                                               const std::string& feature, double shap_scale = 1.0);

/// Direct form for a single model: attributes each row of `rows` and pairs
/// the chosen feature's raw value with its phi.
std::vector<DependencePoint> dependence_export(const PredictFn& f, const RowMatrix& rows,
                                               std::span<const double> baseline,
                                               const std::vector<std::string>& features, const std::string& feature,
                                               const ShapleyOptions& options);

std::string importance_csv(const AttributionReport& report);
std::string dependence_csv(std::span<const DependencePoint> points);

}  // namespace epiforge
