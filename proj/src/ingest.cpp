#include "epiforge/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <utility>

#include <fmt/format.h>

#include "epiforge/csv.hpp"
#include "epiforge/error.hpp"
#include "epiforge/features.hpp"

namespace epiforge {

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Cases: return "cases";
    case DatasetKind::Vaccination: return "vaccination";
    case DatasetKind::Mobility: return "mobility";
    case DatasetKind::Weather: return "weather";
  }
  return "unknown";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "unknown";
}

namespace {

constexpr const char* kModule = "ingest";

/// Resolves schema columns by name and hands out typed fields per row.
class RowReader {
 public:
  RowReader(const CsvTable& table, std::string_view feed, std::initializer_list<std::string_view> schema)
      : table_(table), feed_(feed) {
    for (auto name : schema) {
      auto idx = table.column(name);
      if (!idx)
        throw Error(Errc::MissingColumn, kModule, fmt::format("{}: header lacks column '{}'", feed, name));
      columns_.emplace(std::string(name), *idx);
    }
  }

  std::size_t rows() const { return table_.rows.size(); }

  const std::string& text(std::size_t row, std::string_view column) const {
    const auto& fields = table_.rows[row];
    if (fields.size() != table_.header.size())
      throw Error(Errc::UnparsableValue, kModule,
                  fmt::format("{}: row {}: expected {} fields, found {}", feed_, row + 1,
                              table_.header.size(), fields.size()));
    return fields[columns_.at(std::string(column))];
  }

  [[noreturn]] void fail(std::size_t row, std::string_view column, std::string_view why) const {
    throw Error(Errc::UnparsableValue, kModule,
                fmt::format("{}: row {}, column '{}': {}", feed_, row + 1, column, why));
  }

  Date date(std::size_t row, std::string_view column) const {
    const auto& s = text(row, column);
    auto d = try_parse_date(s);
    if (!d) fail(row, column, fmt::format("'{}' is not a YYYY-MM-DD date", s));
    return *d;
  }

  std::int64_t count(std::size_t row, std::string_view column) const {
    const auto& s = text(row, column);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
      fail(row, column, fmt::format("'{}' is not an integer", s));
    if (v < 0) fail(row, column, fmt::format("negative count {}", v));
    return v;
  }

  double real(std::size_t row, std::string_view column) const {
    const auto& s = text(row, column);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
      fail(row, column, fmt::format("'{}' is not a number", s));
    return v;
  }

  std::string region(std::size_t row, std::string_view column, const RegionRegistry& registry) const {
    const auto& s = text(row, column);
    if (!registry.contains(s) || s == kNationalCode)
      throw Error(Errc::UnknownRegion, kModule,
                  fmt::format("{}: row {}, column '{}': '{}' is not a registered region", feed_, row + 1,
                              column, s));
    return s;
  }

  [[noreturn]] void duplicate(std::size_t row, std::string_view key) const {
    throw Error(Errc::DuplicateKey, kModule, fmt::format("{}: row {}: duplicate key {}", feed_, row + 1, key));
  }

 private:
  const CsvTable& table_;
  std::string_view feed_;
  std::map<std::string, std::size_t> columns_;
};

std::string fmt_real(double v) { return fmt::format("{}", v); }

}  // namespace

std::vector<CaseRecord> parse_cases(std::string_view csv_text, const RegionRegistry& registry) {
  auto table = parse_csv(csv_text);
  RowReader in(table, "cases", {"date", "region", "new_cases"});
  std::vector<CaseRecord> out;
  out.reserve(in.rows());
  std::set<std::pair<Date, std::string>> seen;
  for (std::size_t r = 0; r < in.rows(); ++r) {
    CaseRecord rec{in.date(r, "date"), in.region(r, "region", registry), in.count(r, "new_cases")};
    if (!seen.emplace(rec.date, rec.region).second)
      in.duplicate(r, fmt::format("({}, {})", format_date(rec.date), rec.region));
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<WeeklyDoseRecord> parse_vaccination(std::string_view csv_text) {
  auto table = parse_csv(csv_text);
  RowReader in(table, "vaccination", {"iso_week", "dose_number", "doses"});
  std::vector<WeeklyDoseRecord> out;
  out.reserve(in.rows());
  std::set<std::pair<IsoWeek, int>> seen;
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const auto& wk = in.text(r, "iso_week");
    auto week = try_parse_iso_week(wk);
    if (!week) in.fail(r, "iso_week", fmt::format("'{}' is not a YYYY-Www week", wk));
    auto dose = in.count(r, "dose_number");
    if (dose != 1 && dose != 2) in.fail(r, "dose_number", fmt::format("dose number {} not in {{1, 2}}", dose));
    WeeklyDoseRecord rec{*week, static_cast<int>(dose), in.count(r, "doses")};
    if (!seen.emplace(rec.iso_week, rec.dose_number).second)
      in.duplicate(r, fmt::format("({}, {})", wk, dose));
    out.push_back(rec);
  }
  return out;
}

std::vector<FluxRecord> parse_mobility(std::string_view csv_text, const RegionRegistry& registry) {
  auto table = parse_csv(csv_text);
  RowReader in(table, "mobility", {"date", "origin", "destination", "flux"});
  std::vector<FluxRecord> out;
  out.reserve(in.rows());
  std::set<std::tuple<Date, std::string, std::string>> seen;
  for (std::size_t r = 0; r < in.rows(); ++r) {
    FluxRecord rec{in.date(r, "date"), in.region(r, "origin", registry),
                   in.region(r, "destination", registry), in.real(r, "flux")};
    if (rec.flux < 0) in.fail(r, "flux", fmt::format("negative flux {}", rec.flux));
    if (!seen.emplace(rec.date, rec.origin, rec.destination).second)
      in.duplicate(r, fmt::format("({}, {}, {})", format_date(rec.date), rec.origin, rec.destination));
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<WeatherRecord> parse_weather(std::string_view csv_text, const RegionRegistry& registry) {
  auto table = parse_csv(csv_text);
  RowReader in(table, "weather", {"date", "region", "station_id", "mean_temp", "precipitation"});
  std::vector<WeatherRecord> out;
  out.reserve(in.rows());
  std::set<std::pair<Date, std::string>> seen;
  for (std::size_t r = 0; r < in.rows(); ++r) {
    WeatherRecord rec{in.date(r, "date"), in.region(r, "region", registry), in.text(r, "station_id"),
                      in.real(r, "mean_temp"), in.real(r, "precipitation")};
    if (rec.station_id.empty()) in.fail(r, "station_id", "empty station id");
    if (rec.precipitation < 0) in.fail(r, "precipitation", fmt::format("negative precipitation {}", rec.precipitation));
    if (!seen.emplace(rec.date, rec.station_id).second)
      in.duplicate(r, fmt::format("({}, {})", format_date(rec.date), rec.station_id));
    out.push_back(std::move(rec));
  }
  return out;
}

std::string to_csv(const std::vector<CaseRecord>& records) {
  std::string out = "date,region,new_cases\n";
  for (const auto& r : records) out += fmt::format("{},{},{}\n", format_date(r.date), r.region, r.new_cases);
  return out;
}

std::string to_csv(const std::vector<WeeklyDoseRecord>& records) {
  std::string out = "iso_week,dose_number,doses\n";
  for (const auto& r : records)
    out += fmt::format("{},{},{}\n", format_iso_week(r.iso_week), r.dose_number, r.doses);
  return out;
}

std::string to_csv(const std::vector<FluxRecord>& records) {
  std::string out = "date,origin,destination,flux\n";
  for (const auto& r : records)
    out += fmt::format("{},{},{},{}\n", format_date(r.date), r.origin, r.destination, fmt_real(r.flux));
  return out;
}

std::string to_csv(const std::vector<WeatherRecord>& records) {
  std::string out = "date,region,station_id,mean_temp,precipitation\n";
  for (const auto& r : records)
    out += fmt::format("{},{},{},{},{}\n", format_date(r.date), r.region, r.station_id, fmt_real(r.mean_temp),
                       fmt_real(r.precipitation));
  return out;
}

void load_dataset(DatasetKind kind, const std::filesystem::path& path, DatasetBundle& into,
                  const RegionRegistry& registry) {
  auto text = read_file(path);
  switch (kind) {
    case DatasetKind::Cases: into.cases = parse_cases(text, registry); break;
    case DatasetKind::Vaccination: into.vaccination = parse_vaccination(text); break;
    case DatasetKind::Mobility: into.mobility = parse_mobility(text, registry); break;
    case DatasetKind::Weather: into.weather = parse_weather(text, registry); break;
  }
}

DatasetBundle load_bundle(const DatasetPaths& paths, const RegionRegistry& registry) {
  DatasetBundle b;
  load_dataset(DatasetKind::Cases, paths.cases, b, registry);
  load_dataset(DatasetKind::Vaccination, paths.vaccination, b, registry);
  load_dataset(DatasetKind::Mobility, paths.mobility, b, registry);
  load_dataset(DatasetKind::Weather, paths.weather, b, registry);
  return b;
}

// ---------------------------------------------------------------------------
// Panel assembly

std::size_t RegionPanel::first_index(Split s) const {
  auto it = std::find(splits.begin(), splits.end(), s);
  return static_cast<std::size_t>(it - splits.begin());
}

namespace {

bool is_community(const RegionRegistry& registry, const std::string& code) {
  return registry.at(code).kind == RegionKind::Community;
}

std::vector<double> assemble_cases(const DatasetBundle& data, std::string_view region, DateRange calendar) {
  const bool national = region == kNationalCode;
  std::vector<double> cases(calendar.size(), 0.0);
  std::vector<bool> covered(calendar.size(), false);
  std::set<std::string> regions_in_feed;
  for (const auto& r : data.cases) {
    if (!national && r.region != region) continue;
    regions_in_feed.insert(r.region);
    if (!calendar.contains(r.date)) continue;
    auto i = calendar.index_of(r.date);
    cases[i] += static_cast<double>(r.new_cases);
  }
  if (regions_in_feed.empty())
    throw Error(Errc::UnknownRegion, kModule, fmt::format("no case records for region '{}'", region));
  // Coverage: every contributing region must report every day.
  for (const auto& code : regions_in_feed) {
    std::fill(covered.begin(), covered.end(), false);
    for (const auto& r : data.cases)
      if (r.region == code && calendar.contains(r.date)) covered[calendar.index_of(r.date)] = true;
    for (std::size_t i = 0; i < covered.size(); ++i)
      if (!covered[i])
        throw Error(Errc::MissingCoverage, kModule,
                    fmt::format("cases for region {} missing on {}", code, format_date(calendar.at(i))));
  }
  return cases;
}

void assemble_weather(const DatasetBundle& data, std::string_view region, DateRange calendar,
                      const RegionRegistry& registry, std::size_t window, std::vector<double>& temp,
                      std::vector<double>& precip) {
  const bool national = region == kNationalCode;
  std::vector<double> tsum(calendar.size(), 0.0), psum(calendar.size(), 0.0);
  std::vector<int> n(calendar.size(), 0);
  for (const auto& r : data.weather) {
    if (!calendar.contains(r.date)) continue;
    if (national ? !is_community(registry, r.region) : r.region != region) continue;
    auto i = calendar.index_of(r.date);
    tsum[i] += r.mean_temp;
    psum[i] += r.precipitation;
    ++n[i];
  }
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] == 0)
      throw Error(Errc::MissingCoverage, kModule,
                  fmt::format("no weather station reports for {} on {}", region, format_date(calendar.at(i))));
    tsum[i] /= n[i];
    psum[i] /= n[i];
  }
  temp = rolling_average(tsum, window);
  precip = rolling_average(psum, window);
}

std::vector<double> assemble_mobility(const DatasetBundle& data, std::string_view region, DateRange calendar,
                                      const RegionRegistry& registry) {
  std::set<Date> observed_days;
  for (const auto& r : data.mobility) {
    auto wd = iso_weekday(r.date);
    if ((wd == 3 || wd == 7) && r.date <= calendar.last()) observed_days.insert(r.date);
  }
  std::map<Date, double> observed;
  for (Date d : observed_days) {
    try {
      observed[d] = mobility_flux(data.mobility, region, d, registry);
    } catch (const Error& e) {
      // A region without records on an observation day leaves a hole that
      // assign_mobility_days reports if the calendar needs it.
      if (e.code() != Errc::NoFluxData) throw;
    }
  }
  return assign_mobility_days(observed, calendar).flux;
}

}  // namespace

RegionPanel build_panel(const DatasetBundle& data, std::string_view region, DateRange calendar,
                        SplitDates splits, const PanelOptions& options, const RegionRegistry& registry) {
  const auto& reg = registry.at(region);
  if (reg.kind == RegionKind::City)
    throw Error(Errc::UnknownRegion, kModule,
                fmt::format("'{}' is an autonomous city; only communities and ES have panels", region));
  if (!calendar.contains(splits.val_start) || !calendar.contains(splits.test_start) ||
      !(splits.val_start < splits.test_start) || splits.val_start == calendar.first())
    throw Error(Errc::InvalidArgument, kModule,
                fmt::format("split boundaries {} / {} must lie inside {}..{} in order",
                            format_date(splits.val_start), format_date(splits.test_start),
                            format_date(calendar.first()), format_date(calendar.last())));

  RegionPanel p;
  p.region = std::string(region);
  p.calendar = calendar;
  p.cases = assemble_cases(data, region, calendar);

  auto vax = daily_vaccination(data.vaccination, calendar, options.vax_interp_cutoff);
  p.vax_dose1 = std::move(vax.dose1_rate);
  p.vax_dose2 = std::move(vax.dose2_rate);
  p.mobility = assemble_mobility(data, region, calendar, registry);
  assemble_weather(data, region, calendar, registry, options.weather_window, p.temperature, p.precipitation);

  p.splits.resize(calendar.size());
  for (std::size_t i = 0; i < calendar.size(); ++i) {
    Date d = calendar.at(i);
    p.splits[i] = d < splits.val_start ? Split::Train : d < splits.test_start ? Split::Val : Split::Test;
  }
  return p;
}

std::string to_csv(const RegionPanel& p) {
  std::string out = "date,region,cases,vax_dose1,vax_dose2,mobility,temperature,precipitation,split\n";
  for (std::size_t i = 0; i < p.size(); ++i)
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", format_date(p.calendar.at(i)), p.region, p.cases[i],
                       p.vax_dose1[i], p.vax_dose2[i], p.mobility[i], p.temperature[i], p.precipitation[i],
                       to_string(p.splits[i]));
  return out;
}

}  // namespace epiforge
