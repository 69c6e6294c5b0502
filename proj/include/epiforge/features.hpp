#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epiforge/dates.hpp"
#include "epiforge/ingest.hpp"
#include "epiforge/matrix.hpp"

namespace epiforge {

// Vaccination ---------------------------------------------------------------

enum class VaxProvenance { Anchor, Interpolated, Extrapolated };

struct DailyVaxSeries {
  DateRange calendar;
  std::vector<double> dose1_rate;
  std::vector<double> dose2_rate;
  std::vector<VaxProvenance> provenance;
};

/// Natural cubic spline (zero second derivative at both ends) through
/// strictly increasing knots.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::vector<double> x, std::vector<double> y);

  /// Evaluates inside [x.front(), x.back()]; outside, returns the end value.
  double operator()(double at) const;

 private:
  std::vector<double> x_, y_, m_;  // m_ = second derivatives at the knots
};

/// Turns weekly dose totals into daily dose rates.
///
/// Each ISO week contributes an anchor on its Sunday equal to the weekly total
/// divided by 7 (a dose number missing from a present week counts as zero).
/// Up to `interp_cutoff` (snapped back to a Sunday) days come from a natural
/// cubic spline through the anchors; days before the first anchor repeat it.
/// After the cutoff each day extends the latest anchor already known on that
/// day with the slope between it and the preceding anchor, so no value ever
/// looks ahead. All rates are clamped at zero.
DailyVaxSeries daily_vaccination(std::span<const WeeklyDoseRecord> weekly, DateRange calendar,
                                 Date interp_cutoff);

// Mobility ------------------------------------------------------------------

/// Total flux into `region` on `day` (intra plus all incoming). For "ES",
/// the total over all communities.
double mobility_flux(std::span<const FluxRecord> fluxes, std::string_view region, Date day,
                     const RegionRegistry& registry = RegionRegistry::builtin());

enum class MobilitySource { ObservedWed, ObservedSun, Assigned };

struct MobilityDailySeries {
  DateRange calendar;
  std::vector<double> flux;
  std::vector<MobilitySource> source;
};

/// Fills the week from Wednesday and Sunday observations: Mon/Tue take the
/// previous Wednesday, Thu/Fri the current Wednesday, Sat the previous
/// Sunday. `observed` may hold days before the calendar start.
MobilityDailySeries assign_mobility_days(const std::map<Date, double>& observed, DateRange calendar);

// Smoothing -----------------------------------------------------------------

/// Trailing mean over `window` days; the first window-1 days average what is
/// available so far.
std::vector<double> rolling_average(std::span<const double> series, std::size_t window = 7);

// Design matrix -------------------------------------------------------------

inline constexpr std::size_t kCaseLags = 14;

struct FeatureOptions {
  std::size_t exog_lag = 14;
  bool weekday_feature = false;
};

/// Number of exogenous columns used by scenarios 1-4: none, vaccination,
/// + mobility, + weather.
std::size_t exogenous_width(int scenario);
std::vector<std::string> feature_names(int scenario, const FeatureOptions& options = {});

class DesignMatrix {
 public:
  int scenario = 1;
  std::vector<std::string> columns;
  std::vector<std::size_t> day_index;  ///< panel index of each row's target day
  RowMatrix features;
  std::vector<double> target;
  std::vector<Split> split;

  std::size_t rows() const { return features.rows(); }
  std::size_t width() const { return features.cols(); }
  std::vector<std::size_t> rows_in(Split s) const;
};

/// Writes the raw feature vector for predicting panel day `target` into
/// `out`. `lag_override`, when non-empty, replaces lag_1..lag_m with the
/// given values (most recent first); the remaining lags come from observed
/// cases.
void fill_feature_row(const RegionPanel& panel, std::size_t target, int scenario,
                      const FeatureOptions& options, std::span<const double> lag_override,
                      std::span<double> out);

/// One row per day with full history: lag_k = cases(d-k), exogenous columns
/// taken at d - exog_lag.
DesignMatrix build_design_matrix(const RegionPanel& panel, int scenario,
                                 const FeatureOptions& options = {});

/// Debug dump with columns lag_1..lag_14,[exogenous...],target,split.
std::string to_csv(const DesignMatrix& m);

// Standardization -----------------------------------------------------------

struct ColumnScaler {
  double mean = 0.0;
  double std = 1.0;

  double transform(double x) const { return (x - mean) / std; }
  double inverse(double z) const { return z * std + mean; }
};

struct ScalerParams {
  std::vector<std::string> names;
  std::vector<ColumnScaler> features;
  ColumnScaler target;
  std::string fit_range;

  /// Mean 0 / std 1 for every column; handy for probes.
  static ScalerParams identity(std::size_t width);

  void transform_row(std::span<const double> raw, std::span<double> out) const;
};

struct Standardized {
  DesignMatrix matrix;
  ScalerParams params;
};

/// Fits per-column mean and population standard deviation (target included)
/// on `fit_rows` and applies them to every row.
Standardized standardize(const DesignMatrix& m, std::span<const std::size_t> fit_rows);

}  // namespace epiforge
