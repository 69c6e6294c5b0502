#include "epiforge/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "epiforge/error.hpp"

namespace epiforge {

namespace {

constexpr const char* kModule = "features";

double day_number(Date d) { return static_cast<double>(d.time_since_epoch().count()); }

}  // namespace

// ---------------------------------------------------------------------------
// Natural cubic spline

NaturalCubicSpline::NaturalCubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 3 || y_.size() != n)
    throw Error(Errc::InsufficientAnchors, kModule, fmt::format("spline needs >= 3 knots, got {}", n));
  for (std::size_t i = 1; i < n; ++i)
    if (!(x_[i] > x_[i - 1])) throw Error(Errc::InvalidArgument, kModule, "spline knots must increase");

  // Tridiagonal system for interior second derivatives; m[0] = m[n-1] = 0.
  m_.assign(n, 0.0);
  std::vector<double> diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
    diag[i] = 2.0 * (h0 + h1);
    upper[i] = h1;
    rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
  }
  // Thomas algorithm over rows 1..n-2; the sub-diagonal of row i is h_{i-1}.
  for (std::size_t i = 2; i + 1 < n; ++i) {
    double lower = x_[i] - x_[i - 1];
    double w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
    if (i == 1) break;
  }
}

double NaturalCubicSpline::operator()(double at) const {
  if (at <= x_.front()) return y_.front();
  if (at >= x_.back()) return y_.back();
  auto it = std::upper_bound(x_.begin(), x_.end(), at);
  std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
  double h = x_[i + 1] - x_[i];
  double a = (x_[i + 1] - at) / h, b = (at - x_[i]) / h;
  return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

// ---------------------------------------------------------------------------
// Vaccination

namespace {

struct Anchor {
  Date day;
  double dose1 = 0.0;
  double dose2 = 0.0;
};

Date snap_to_sunday(Date d) { return d - std::chrono::days{iso_weekday(d) % 7}; }

}  // namespace

DailyVaxSeries daily_vaccination(std::span<const WeeklyDoseRecord> weekly, DateRange calendar,
                                 Date interp_cutoff) {
  if (interp_cutoff > calendar.last())
    throw Error(Errc::InvalidArgument, kModule,
                fmt::format("interpolation cutoff {} after calendar end {}", format_date(interp_cutoff),
                            format_date(calendar.last())));

  std::map<Date, Anchor> by_sunday;
  for (const auto& w : weekly) {
    if (w.doses < 0)
      throw Error(Errc::NegativeDoses, kModule,
                  fmt::format("week {} dose {}: {} doses", format_iso_week(w.iso_week), w.dose_number, w.doses));
    Date sunday = iso_week_sunday(w.iso_week);
    auto& a = by_sunday[sunday];
    a.day = sunday;
    (w.dose_number == 1 ? a.dose1 : a.dose2) += static_cast<double>(w.doses) / 7.0;
  }
  std::vector<Anchor> anchors;
  for (const auto& [_, a] : by_sunday) anchors.push_back(a);

  const Date cutoff = snap_to_sunday(interp_cutoff);
  std::vector<double> kx, k1, k2;
  for (const auto& a : anchors)
    if (a.day <= cutoff) {
      kx.push_back(day_number(a.day));
      k1.push_back(a.dose1);
      k2.push_back(a.dose2);
    }
  if (kx.size() < 3)
    throw Error(Errc::InsufficientAnchors, kModule,
                fmt::format("{} weekly anchors up to {}; the spline needs 3", kx.size(), format_date(cutoff)));
  NaturalCubicSpline s1(kx, k1), s2(kx, k2);

  DailyVaxSeries out;
  out.calendar = calendar;
  out.dose1_rate.resize(calendar.size());
  out.dose2_rate.resize(calendar.size());
  out.provenance.resize(calendar.size());

  for (std::size_t i = 0; i < calendar.size(); ++i) {
    Date d = calendar.at(i);
    // Latest anchor known on day d.
    auto it = std::upper_bound(anchors.begin(), anchors.end(), d,
                               [](Date day, const Anchor& a) { return day < a.day; });
    if (it != anchors.begin() && std::prev(it)->day == d) {
      out.dose1_rate[i] = std::prev(it)->dose1;
      out.dose2_rate[i] = std::prev(it)->dose2;
      out.provenance[i] = VaxProvenance::Anchor;
    } else if (d <= cutoff) {
      out.dose1_rate[i] = s1(day_number(d));
      out.dose2_rate[i] = s2(day_number(d));
      out.provenance[i] = VaxProvenance::Interpolated;
    } else {
      // d > cutoff >= the third knot, so at least two anchors precede d.
      const Anchor& last = *std::prev(it);
      const Anchor& prev = *std::prev(it, 2);
      double span_days = (last.day - prev.day).count();
      double k = (d - last.day).count();
      out.dose1_rate[i] = last.dose1 + k * (last.dose1 - prev.dose1) / span_days;
      out.dose2_rate[i] = last.dose2 + k * (last.dose2 - prev.dose2) / span_days;
      out.provenance[i] = VaxProvenance::Extrapolated;
    }
    out.dose1_rate[i] = std::max(0.0, out.dose1_rate[i]);
    out.dose2_rate[i] = std::max(0.0, out.dose2_rate[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mobility

double mobility_flux(std::span<const FluxRecord> fluxes, std::string_view region, Date day,
                     const RegionRegistry& registry) {
  const bool national = region == kNationalCode;
  if (!national && registry.at(region).kind != RegionKind::Community)
    throw Error(Errc::UnknownRegion, kModule, fmt::format("no mobility aggregate for '{}'", region));

  auto community = [&](const std::string& code) { return registry.at(code).kind == RegionKind::Community; };
  double total = 0.0;
  bool anchor_seen = false;
  for (const auto& f : fluxes) {
    if (f.date != day || !community(f.origin) || !community(f.destination)) continue;
    if (national) {
      total += f.flux;
      anchor_seen = true;
    } else if (f.destination == region) {
      total += f.flux;
      if (f.origin == region) anchor_seen = true;
    }
  }
  if (!anchor_seen)
    throw Error(Errc::NoFluxData, kModule,
                fmt::format("no {} flux for {} on {}", national ? "" : "intra-region", region, format_date(day)));
  return total;
}

MobilityDailySeries assign_mobility_days(const std::map<Date, double>& observed, DateRange calendar) {
  // Offset (in days) from each ISO weekday to the observation it reuses.
  static constexpr int kSourceOffset[8] = {0, -5, -6, 0, -1, -2, -6, 0};
  MobilityDailySeries out;
  out.calendar = calendar;
  out.flux.resize(calendar.size());
  out.source.resize(calendar.size());
  for (std::size_t i = 0; i < calendar.size(); ++i) {
    Date d = calendar.at(i);
    unsigned wd = iso_weekday(d);
    Date src = d + std::chrono::days{kSourceOffset[wd]};
    auto it = observed.find(src);
    if (it == observed.end())
      throw Error(Errc::MissingObservation, kModule,
                  fmt::format("{} needs the {} observation of {}", format_date(d),
                              iso_weekday(src) == 3 ? "Wednesday" : "Sunday", format_date(src)));
    out.flux[i] = it->second;
    out.source[i] = wd == 3 ? MobilitySource::ObservedWed : wd == 7 ? MobilitySource::ObservedSun
                                                                   : MobilitySource::Assigned;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Smoothing

std::vector<double> rolling_average(std::span<const double> series, std::size_t window) {
  if (series.empty()) throw Error(Errc::EmptySeries, kModule, "rolling average of an empty series");
  if (window == 0) throw Error(Errc::InvalidArgument, kModule, "rolling window must be >= 1");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = lo; j <= i; ++j) sum += series[j];
    out[i] = sum / static_cast<double>(i - lo + 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Design matrix

std::size_t exogenous_width(int scenario) {
  switch (scenario) {
    case 1: return 0;
    case 2: return 2;
    case 3: return 3;
    case 4: return 5;
  }
  throw Error(Errc::InvalidArgument, kModule, fmt::format("scenario {} not in 1..4", scenario));
}

std::vector<std::string> feature_names(int scenario, const FeatureOptions& options) {
  static const char* kExog[] = {"vax1", "vax2", "mob", "temp", "precip"};
  std::vector<std::string> names;
  for (std::size_t k = 1; k <= kCaseLags; ++k) names.push_back(fmt::format("lag_{}", k));
  for (std::size_t j = 0; j < exogenous_width(scenario); ++j) names.emplace_back(kExog[j]);
  if (options.weekday_feature) names.emplace_back("weekday");
  return names;
}

std::vector<std::size_t> DesignMatrix::rows_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

void fill_feature_row(const RegionPanel& panel, std::size_t target, int scenario, const FeatureOptions& options,
                      std::span<const double> lag_override, std::span<double> out) {
  const std::size_t width = kCaseLags + exogenous_width(scenario) + (options.weekday_feature ? 1 : 0);
  if (out.size() != width)
    throw Error(Errc::WidthMismatch, kModule, fmt::format("row buffer {} != width {}", out.size(), width));
  if (lag_override.size() > kCaseLags)
    throw Error(Errc::InvalidArgument, kModule, "more lag overrides than lags");
  if (target < std::max(kCaseLags, options.exog_lag) || target - options.exog_lag >= panel.size() ||
      target > panel.size() + lag_override.size())
    throw Error(Errc::InsufficientHistory, kModule,
                fmt::format("day index {} lacks {} case lags / exogenous lag {} in a {}-day panel", target,
                            kCaseLags, options.exog_lag, panel.size()));

  for (std::size_t k = 1; k <= kCaseLags; ++k)
    out[k - 1] = k <= lag_override.size() ? lag_override[k - 1] : panel.cases[target - k];

  const std::size_t e = target - options.exog_lag;
  const std::size_t nx = exogenous_width(scenario);
  const double exog[5] = {panel.vax_dose1[e], panel.vax_dose2[e], panel.mobility[e], panel.temperature[e],
                          panel.precipitation[e]};
  for (std::size_t j = 0; j < nx; ++j) out[kCaseLags + j] = exog[j];
  if (options.weekday_feature)
    out[kCaseLags + nx] = static_cast<double>(iso_weekday(panel.calendar.first() + std::chrono::days{static_cast<long>(target)}));
}

DesignMatrix build_design_matrix(const RegionPanel& panel, int scenario, const FeatureOptions& options) {
  DesignMatrix m;
  m.scenario = scenario;
  m.columns = feature_names(scenario, options);
  const std::size_t first = std::max(kCaseLags, options.exog_lag);
  if (panel.size() <= first)
    throw Error(Errc::InsufficientHistory, kModule,
                fmt::format("panel has {} days; the first target row needs {} leading days", panel.size(), first));
  std::vector<double> row(m.columns.size());
  for (std::size_t t = first; t < panel.size(); ++t) {
    fill_feature_row(panel, t, scenario, options, {}, row);
    m.features.append_row(row);
    m.target.push_back(panel.cases[t]);
    m.split.push_back(panel.splits[t]);
    m.day_index.push_back(t);
  }
  return m;
}

std::string to_csv(const DesignMatrix& m) {
  std::string out;
  for (const auto& c : m.columns) out += c + ",";
  out += "target,split\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (double v : m.features.row(r)) out += fmt::format("{},", v);
    out += fmt::format("{},{}\n", m.target[r], to_string(m.split[r]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardization

ScalerParams ScalerParams::identity(std::size_t width) {
  ScalerParams p;
  p.features.assign(width, ColumnScaler{});
  p.names.assign(width, "");
  p.fit_range = "identity";
  return p;
}

void ScalerParams::transform_row(std::span<const double> raw, std::span<double> out) const {
  if (raw.size() != features.size() || out.size() != features.size())
    throw Error(Errc::WidthMismatch, kModule,
                fmt::format("row width {} vs scaler width {}", raw.size(), features.size()));
  for (std::size_t j = 0; j < raw.size(); ++j) out[j] = features[j].transform(raw[j]);
}

namespace {

ColumnScaler fit_column(std::span<const std::size_t> rows, auto&& value, const std::string& name) {
  double lo = value(rows[0]), hi = lo, sum = 0.0;
  for (auto r : rows) {
    double v = value(r);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  if (lo == hi) throw Error(Errc::ConstantColumn, kModule, fmt::format("column '{}' is constant on fit rows", name));
  const double n = static_cast<double>(rows.size());
  double mean = sum / n, ss = 0.0;
  for (auto r : rows) ss += (value(r) - mean) * (value(r) - mean);
  return {mean, std::sqrt(ss / n)};
}

}  // namespace

Standardized standardize(const DesignMatrix& m, std::span<const std::size_t> fit_rows) {
  if (fit_rows.empty()) throw Error(Errc::EmptyTrainingSet, kModule, "no rows to fit the scaler on");
  Standardized s;
  s.params.names = m.columns;
  for (std::size_t j = 0; j < m.width(); ++j)
    s.params.features.push_back(
        fit_column(fit_rows, [&](std::size_t r) { return m.features(r, j); }, m.columns[j]));
  s.params.target = fit_column(fit_rows, [&](std::size_t r) { return m.target[r]; }, "target");
  s.params.fit_range = fmt::format("rows {}..{}", fit_rows.front(), fit_rows.back());

  s.matrix = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    s.params.transform_row(m.features.row(r), s.matrix.features.row(r));
    s.matrix.target[r] = s.params.target.transform(m.target[r]);
  }
  return s;
}

}  // namespace epiforge
