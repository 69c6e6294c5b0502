#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "epiforge/dates.hpp"
#include "epiforge/ensemble.hpp"
#include "epiforge/features.hpp"
#include "epiforge/ingest.hpp"
#include "epiforge/mlmodels.hpp"
#include "epiforge/popmodels.hpp"

namespace epiforge {

struct ExplainConfig {
  bool enabled = true;
  int scenario = 4;
  std::size_t permutations = 64;
  /// Features that get a dependence_<feature>.csv.
  std::vector<std::string> dependence_features = {"lag_1", "lag_7", "lag_14", "vax1", "temp"};
};

struct ExperimentConfig {
  DatasetPaths data;
  std::string region = "ES";
  Date start = parse_date("2021-01-01");
  Date end = parse_date("2021-12-31");
  SplitDates splits{parse_date("2021-09-02"), parse_date("2021-10-02")};
  Date vax_interp_cutoff = parse_date("2021-08-29");
  Date omicron_date = parse_date("2021-11-15");

  std::vector<int> scenarios = {1, 2, 3, 4};
  Subset models = Subset::All;
  std::vector<Aggregation> aggregations = {Aggregation::Mean, Aggregation::Median, Aggregation::Wavg};
  std::vector<GrowthModelKind> pop_models{kGrowthModelKinds.begin(), kGrowthModelKinds.end()};
  std::vector<RegressorKind> ml_models{kRegressorKinds.begin(), kRegressorKinds.end()};
  std::map<RegressorKind, HyperGrid> grids;

  std::size_t window = 30;
  std::size_t horizon = 14;
  FeatureOptions features;
  std::uint64_t seed = 42;

  ExplainConfig explain;
  std::filesystem::path out_dir = "out";
  bool charts = true;

  DateRange calendar() const { return DateRange(start, end); }
  /// Throws InvalidConfig when an invariant fails.
  void validate() const;
};

/// Defaults with the built-in grids filled in.
ExperimentConfig default_config();

/// Parses an INI file with sections [data], [experiment], [grids],
/// [explain] and [output]. Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view ini_text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace epiforge
