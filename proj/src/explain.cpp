#include "epiforge/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "epiforge/error.hpp"
#include "epiforge/rng.hpp"

namespace epiforge {

namespace {

constexpr const char* kModule = "explain";

void check_widths(std::span<const double> instance, std::span<const double> baseline) {
  if (instance.size() != baseline.size())
    throw Error(Errc::SchemaMismatch, kModule,
                fmt::format("instance has {} features, baseline {}", instance.size(), baseline.size()));
}

// Walks one permutation, adding each feature's marginal contribution.
void accumulate_permutation(const PredictFn& f, std::span<const double> instance, std::span<const double> baseline,
                            std::span<const std::size_t> order, double base, std::vector<double>& z,
                            std::vector<double>& phi) {
  z.assign(baseline.begin(), baseline.end());
  double prev = base;
  for (auto i : order) {
    z[i] = instance[i];
    const double cur = f(z);
    phi[i] += cur - prev;
    prev = cur;
  }
}

}  // namespace

std::vector<double> background_mean(const RowMatrix& background) {
  if (background.empty()) throw Error(Errc::EmptyTrainingSet, kModule, "empty background set");
  std::vector<double> mean(background.cols(), 0.0);
  for (std::size_t r = 0; r < background.rows(); ++r)
    for (std::size_t c = 0; c < background.cols(); ++c) mean[c] += background(r, c);
  for (auto& m : mean) m /= static_cast<double>(background.rows());
  return mean;
}

ShapleyResult shapley_exact(const PredictFn& f, std::span<const double> instance, std::span<const double> baseline) {
  check_widths(instance, baseline);
  const std::size_t d = instance.size();
  if (d > kMaxExactFeatures)
    throw Error(Errc::TooManyFeatures, kModule,
                fmt::format("{} features exceeds the exact bound of {}", d, kMaxExactFeatures));

  const std::size_t subsets = std::size_t{1} << d;
  std::vector<double> value(subsets);
  std::vector<double> z(d);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    for (std::size_t i = 0; i < d; ++i) z[i] = (mask >> i) & 1 ? instance[i] : baseline[i];
    value[mask] = f(z);
  }

  // weight[s] = s! (d-s-1)! / d!
  std::vector<double> weight(d, 0.0);
  for (std::size_t s = 0; s < d; ++s)
    weight[s] = std::exp(std::lgamma(double(s) + 1) + std::lgamma(double(d - s)) - std::lgamma(double(d) + 1));

  ShapleyResult out;
  out.phi.assign(d, 0.0);
  out.base_value = value[0];
  out.prediction = value[subsets - 1];
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double acc = 0.0;
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      acc += weight[static_cast<std::size_t>(std::popcount(mask))] * (value[mask | bit] - value[mask]);
    }
    out.phi[i] = acc;
  }
  return out;
}

ShapleyResult shapley_sampled(const PredictFn& f, std::span<const double> instance, std::span<const double> baseline,
                              std::size_t n_permutations, std::uint64_t seed, std::uint64_t instance_stream,
                              bool exhaustive) {
  check_widths(instance, baseline);
  const std::size_t d = instance.size();
  if (!exhaustive && n_permutations == 0)
    throw Error(Errc::InvalidArgument, kModule, "n_permutations must be >= 1");
  if (exhaustive && d > kMaxExactFeatures)
    throw Error(Errc::TooManyFeatures, kModule, fmt::format("{}! permutations is too many to walk", d));

  ShapleyResult out;
  out.phi.assign(d, 0.0);
  out.base_value = f(baseline);
  out.prediction = f(instance);

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> z;
  std::size_t walked = 0;
  if (exhaustive) {
    do {
      accumulate_permutation(f, instance, baseline, order, out.base_value, z, out.phi);
      ++walked;
    } while (std::next_permutation(order.begin(), order.end()));
  } else {
    CounterRng rng(seed, instance_stream);
    for (std::size_t p = 0; p < n_permutations; ++p) {
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = d; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      accumulate_permutation(f, instance, baseline, order, out.base_value, z, out.phi);
      ++walked;
    }
  }
  for (auto& v : out.phi) v /= static_cast<double>(walked);
  return out;
}

AttributionReport importance_summary(std::span<const ExplainedModel> models, const std::vector<std::string>& features,
                                     const RowMatrix& rows, const RowMatrix& background,
                                     const ShapleyOptions& options) {
  if (models.empty()) throw Error(Errc::InvalidArgument, kModule, "no models to explain");
  const std::size_t d = features.size();
  for (const auto& m : models)
    if (m.feature_count != d)
      throw Error(Errc::SchemaMismatch, kModule,
                  fmt::format("model '{}' takes {} features, schema has {}", m.name, m.feature_count, d));
  if (rows.cols() != d || background.cols() != d)
    throw Error(Errc::SchemaMismatch, kModule, fmt::format("rows have {} columns, schema has {}", rows.cols(), d));

  const auto baseline = background_mean(background);
  const bool exact = options.prefer_exact && d <= kMaxExactFeatures;

  AttributionReport report;
  report.features = features;
  for (const auto& m : models) {
    report.models.push_back(m.name);
    RowMatrix phi(rows.rows(), d);
    double base = 0.0;
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      auto res = exact ? shapley_exact(m.fn, rows.row(r), baseline)
                       : shapley_sampled(m.fn, rows.row(r), baseline, options.permutations, options.seed, r);
      std::copy(res.phi.begin(), res.phi.end(), phi.row(r).begin());
      base = res.base_value;
    }
    std::vector<double> mean_abs(d, 0.0);
    for (std::size_t r = 0; r < rows.rows(); ++r)
      for (std::size_t c = 0; c < d; ++c) mean_abs[c] += std::abs(phi(r, c));
    if (!rows.empty())
      for (auto& v : mean_abs) v /= static_cast<double>(rows.rows());
    report.values.push_back(std::move(phi));
    report.base_values.push_back(base);
    report.per_model.push_back(std::move(mean_abs));
  }

  report.mean_abs.assign(d, 0.0);
  report.std_across_models.assign(d, 0.0);
  const double nm = static_cast<double>(models.size());
  for (std::size_t c = 0; c < d; ++c) {
    double m = 0.0;
    for (const auto& pm : report.per_model) m += pm[c];
    m /= nm;
    double ss = 0.0;
    for (const auto& pm : report.per_model) ss += (pm[c] - m) * (pm[c] - m);
    report.mean_abs[c] = m;
    report.std_across_models[c] = std::sqrt(ss / nm);
  }
  return report;
}

void normalize_importance(AttributionReport& report) {
  const double top = report.mean_abs.empty() ? 0.0 : *std::max_element(report.mean_abs.begin(), report.mean_abs.end());
  if (!(top > 0.0)) return;
  for (auto& v : report.mean_abs) v /= top;
  for (auto& v : report.std_across_models) v /= top;
}

namespace {

std::size_t feature_column(const std::vector<std::string>& features, const std::string& feature) {
  auto it = std::find(features.begin(), features.end(), feature);
  if (it == features.end()) throw Error(Errc::UnknownFeature, kModule, fmt::format("no feature named '{}'", feature));
  return static_cast<std::size_t>(it - features.begin());
}

}  // namespace

std::vector<DependencePoint> dependence_export(const AttributionReport& report, const RowMatrix& raw_rows,
                                               const std::string& feature, double shap_scale) {
  const std::size_t c = feature_column(report.features, feature);
  if (report.values.empty() || raw_rows.rows() != report.values.front().rows())
    throw Error(Errc::SchemaMismatch, kModule, "raw rows do not match the attributed rows");
  std::vector<DependencePoint> out(raw_rows.rows());
  for (std::size_t r = 0; r < raw_rows.rows(); ++r) {
    double phi = 0.0;
    for (const auto& v : report.values) phi += v(r, c);
    out[r] = {raw_rows(r, c), shap_scale * phi / static_cast<double>(report.values.size())};
  }
  return out;
}

std::vector<DependencePoint> dependence_export(const PredictFn& f, const RowMatrix& rows,
                                               std::span<const double> baseline,
                                               const std::vector<std::string>& features, const std::string& feature,
                                               const ShapleyOptions& options) {
  const std::size_t c = feature_column(features, feature);
  if (rows.cols() != features.size())
    throw Error(Errc::SchemaMismatch, kModule, fmt::format("rows have {} columns, schema has {}", rows.cols(),
                                                           features.size()));
  const bool exact = options.prefer_exact && features.size() <= kMaxExactFeatures;
  std::vector<DependencePoint> out(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    auto res = exact ? shapley_exact(f, rows.row(r), baseline)
                     : shapley_sampled(f, rows.row(r), baseline, options.permutations, options.seed, r);
    out[r] = {rows(r, c), res.phi[c]};
  }
  return out;
}

std::string importance_csv(const AttributionReport& report) {
  std::string s = "feature,mean_abs_shap,std_across_models\n";
  for (std::size_t c = 0; c < report.features.size(); ++c)
    s += fmt::format("{},{},{}\n", report.features[c], report.mean_abs[c], report.std_across_models[c]);
  return s;
}

std::string dependence_csv(std::span<const DependencePoint> points) {
  std::string s = "raw_value,shap_value\n";
  for (const auto& p : points) s += fmt::format("{},{}\n", p.raw_value, p.shap_value);
  return s;
}

}  // namespace epiforge
