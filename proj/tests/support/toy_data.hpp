#pragma once

// Small hand-built feeds and panels shared by the unit and acceptance tests.

#include <chrono>
#include <map>
#include <string>
#include <vector>

#include "epiforge/dates.hpp"
#include "epiforge/ingest.hpp"

namespace epiforge::testing {

inline Date D(const char* s) { return parse_date(s); }

/// Feeds covering [first, last] for `cases` (region -> daily counts starting
/// at `first`). Vaccination is flat at 700 doses/week for both doses,
/// mobility has intra-region flux only (1000 per region) on every Wednesday
/// and Sunday from two weeks before `first`, and each region has one weather
/// station reporting 20 degrees and no rain.
inline DatasetBundle toy_bundle(Date first, const std::map<std::string, std::vector<std::int64_t>>& cases) {
  DatasetBundle b;
  std::size_t days = 0;
  for (const auto& [region, series] : cases) {
    days = std::max(days, series.size());
    for (std::size_t i = 0; i < series.size(); ++i)
      b.cases.push_back({first + std::chrono::days(static_cast<int>(i)), region, series[i]});
  }
  const Date last = first + std::chrono::days(static_cast<int>(days) - 1);
  for (Date d = iso_week_monday(iso_week_of(first - std::chrono::days(35)));
       d <= last + std::chrono::days(35); d += std::chrono::days(7))
    for (int dose = 1; dose <= 2; ++dose) b.vaccination.push_back({iso_week_of(d), dose, 700});
  for (Date d = first - std::chrono::days(14); d <= last + std::chrono::days(7); d += std::chrono::days(1)) {
    const auto wd = iso_weekday(d);
    for (const auto& [region, series] : cases) {
      if (wd == 3 || wd == 7) b.mobility.push_back({d, region, region, 1000.0});
      b.weather.push_back({d, region, region + "01", 20.0, 0.0});
    }
  }
  return b;
}

/// A panel built directly (no ingest) with the given cases; every exogenous
/// series is set to a distinct affine function of the day index so tests can
/// tell which day a value came from.
inline RegionPanel synthetic_panel(const std::vector<double>& cases, Date first = D("2021-01-01"),
                                   std::size_t val_start = 0, std::size_t test_start = 0) {
  RegionPanel p;
  p.region = "ES";
  p.calendar = DateRange(first, first + std::chrono::days(static_cast<int>(cases.size()) - 1));
  p.cases = cases;
  const std::size_t n = cases.size();
  p.vax_dose1.resize(n);
  p.vax_dose2.resize(n);
  p.mobility.resize(n);
  p.temperature.resize(n);
  p.precipitation.resize(n);
  p.splits.assign(n, Split::Train);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i);
    p.vax_dose1[i] = 1000.0 + x;
    p.vax_dose2[i] = 2000.0 + x;
    p.mobility[i] = 3000.0 + x;
    p.temperature[i] = 4000.0 + x;
    p.precipitation[i] = 5000.0 + x;
    if (val_start && i >= val_start) p.splits[i] = Split::Val;
    if (test_start && i >= test_start) p.splits[i] = Split::Test;
  }
  return p;
}

}  // namespace epiforge::testing
