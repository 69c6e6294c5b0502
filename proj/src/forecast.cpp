#include <algorithm>

#include <fmt/format.h>

#include "epiforge/error.hpp"
#include "epiforge/mlmodels.hpp"

namespace epiforge {

std::vector<double> recurrent_forecast(const OneStepModel& model, const RegionPanel& panel, Date anchor,
                                       std::size_t horizon, int scenario, const ScalerParams& scaler,
                                       const FeatureOptions& options) {
  if (horizon == 0) throw Error(Errc::InvalidArgument, "mlmodels", "horizon must be >= 1");
  if (horizon > options.exog_lag)
    throw Error(Errc::InsufficientHistory, "mlmodels",
                fmt::format("horizon {} would read exogenous data after the anchor (lag {})", horizon,
                            options.exog_lag));
  const std::size_t n = panel.index_of(anchor);
  const std::size_t width = feature_names(scenario, options).size();
  std::vector<double> raw(width), scaled(width), preds, feedback;
  preds.reserve(horizon);
  for (std::size_t k = 1; k <= horizon; ++k) {
    // Most recent prediction first, at most kCaseLags of them.
    feedback.assign(preds.rbegin(), preds.rbegin() + static_cast<std::ptrdiff_t>(std::min(preds.size(), kCaseLags)));
    fill_feature_row(panel, n + k, scenario, options, feedback, raw);
    scaler.transform_row(raw, scaled);
    double y = scaler.target.inverse(model(scaled));
    preds.push_back(std::max(0.0, y));
  }
  return preds;
}

std::vector<double> recurrent_forecast(const TrainedRegressor& model, const RegionPanel& panel, Date anchor,
                                       std::size_t horizon, int scenario, const ScalerParams& scaler,
                                       const FeatureOptions& options) {
  return recurrent_forecast([&](std::span<const double> row) { return model.predict(row); }, panel, anchor,
                            horizon, scenario, scaler, options);
}

}  // namespace epiforge
