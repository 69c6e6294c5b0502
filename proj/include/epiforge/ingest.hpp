#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "epiforge/dates.hpp"
#include "epiforge/regions.hpp"

namespace epiforge {

// Raw feed records ----------------------------------------------------------

struct CaseRecord {
  Date date;
  std::string region;
  std::int64_t new_cases = 0;

  bool operator==(const CaseRecord&) const = default;
};

struct WeeklyDoseRecord {
  IsoWeek iso_week;
  int dose_number = 1;
  std::int64_t doses = 0;

  bool operator==(const WeeklyDoseRecord&) const = default;
};

/// Origin-destination person flux observed on one day. origin == destination
/// is intra-region mobility.
struct FluxRecord {
  Date date;
  std::string origin;
  std::string destination;
  double flux = 0.0;

  bool operator==(const FluxRecord&) const = default;
};

struct WeatherRecord {
  Date date;
  std::string region;
  std::string station_id;
  double mean_temp = 0.0;
  double precipitation = 0.0;

  bool operator==(const WeatherRecord&) const = default;
};

enum class DatasetKind { Cases, Vaccination, Mobility, Weather };

std::string_view to_string(DatasetKind kind);

// Parsing validates every row and reports the first violation with its data
// row number (1-based, header excluded) and column. Rows keep file order.

std::vector<CaseRecord> parse_cases(std::string_view csv_text,
                                    const RegionRegistry& registry = RegionRegistry::builtin());
std::vector<WeeklyDoseRecord> parse_vaccination(std::string_view csv_text);
std::vector<FluxRecord> parse_mobility(std::string_view csv_text,
                                       const RegionRegistry& registry = RegionRegistry::builtin());
std::vector<WeatherRecord> parse_weather(std::string_view csv_text,
                                         const RegionRegistry& registry = RegionRegistry::builtin());

std::string to_csv(const std::vector<CaseRecord>& records);
std::string to_csv(const std::vector<WeeklyDoseRecord>& records);
std::string to_csv(const std::vector<FluxRecord>& records);
std::string to_csv(const std::vector<WeatherRecord>& records);

/// All four feeds for one experiment.
struct DatasetBundle {
  std::vector<CaseRecord> cases;
  std::vector<WeeklyDoseRecord> vaccination;
  std::vector<FluxRecord> mobility;
  std::vector<WeatherRecord> weather;
};

struct DatasetPaths {
  std::filesystem::path cases;
  std::filesystem::path vaccination;
  std::filesystem::path mobility;
  std::filesystem::path weather;
};

/// Loads a single feed of `kind` into the matching member of `into`.
void load_dataset(DatasetKind kind, const std::filesystem::path& path, DatasetBundle& into,
                  const RegionRegistry& registry = RegionRegistry::builtin());
DatasetBundle load_bundle(const DatasetPaths& paths,
                          const RegionRegistry& registry = RegionRegistry::builtin());

// Panel ---------------------------------------------------------------------

enum class Split { Train, Val, Test };

std::string_view to_string(Split s);

/// First day labeled validation and first day labeled test.
struct SplitDates {
  Date val_start;
  Date test_start;
};

struct PanelOptions {
  /// Last day whose weekly vaccination anchors feed the spline.
  Date vax_interp_cutoff;
  std::size_t weather_window = 7;
};

/// Per-region daily-aligned table of cases and exogenous features.
struct RegionPanel {
  std::string region;
  DateRange calendar;
  std::vector<double> cases;
  std::vector<double> vax_dose1;
  std::vector<double> vax_dose2;
  std::vector<double> mobility;
  std::vector<double> temperature;
  std::vector<double> precipitation;
  std::vector<Split> splits;

  std::size_t size() const { return cases.size(); }
  std::size_t index_of(Date d) const { return calendar.index_of(d); }
  /// Index of the first day carrying the given label; size() if absent.
  std::size_t first_index(Split s) const;

  bool operator==(const RegionPanel&) const = default;
};

/// Assembles the panel for `region` (a community code or "ES"). The national
/// panel sums cases over every region in the feed, autonomous cities
/// included; mobility is summed and weather averaged over communities only.
/// Vaccination is a national feed and is shared by all panels.
RegionPanel build_panel(const DatasetBundle& data, std::string_view region, DateRange calendar,
                        SplitDates splits, const PanelOptions& options,
                        const RegionRegistry& registry = RegionRegistry::builtin());

/// Stable text rendering used for determinism checks and debugging.
std::string to_csv(const RegionPanel& panel);

}  // namespace epiforge
