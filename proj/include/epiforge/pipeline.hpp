#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "epiforge/config.hpp"
#include "epiforge/ensemble.hpp"
#include "epiforge/explain.hpp"
#include "epiforge/features.hpp"
#include "epiforge/ingest.hpp"
#include "epiforge/mlmodels.hpp"
#include "epiforge/popmodels.hpp"

namespace epiforge {

/// One member forecast launched from one anchor. ML members carry their
/// scenario; population members do not depend on it.
struct MemberRun {
  Split split = Split::Test;
  std::optional<int> scenario;
  Date anchor;
  std::string model;
  ModelFamily family = ModelFamily::ML;
  std::vector<double> values;
};

std::string forecasts_csv(const std::vector<MemberRun>& runs);
std::vector<MemberRun> parse_forecasts_csv(std::string_view text);

/// Forecast anchors: each anchor n has all of n+1..n+horizon in `split`, at
/// least `history` days before it, and at least `window` days for the
/// population fits.
std::vector<Date> anchors_for(const RegionPanel& panel, Split split, std::size_t horizon, std::size_t min_index);

struct ModelScore {
  std::string model;
  ModelFamily family = ModelFamily::ML;
  std::optional<int> scenario;
  double val_rmse = 0.0;
  double test_mape = 0.0;
  double test_rmse = 0.0;
};

struct MpeRow {
  Split split = Split::Test;
  std::optional<int> scenario;
  ModelFamily family = ModelFamily::ML;
  std::vector<double> mean;
  std::vector<double> std;
};

struct Evaluation {
  std::vector<MetricsCell> cells;
  std::vector<ModelScore> models;
  std::map<int, EnsembleWeights> weights;  ///< keyed by scenario; 0 when no ML ran
  std::vector<MpeRow> mpe;
  std::size_t val_anchors = 0;
  std::size_t test_anchors = 0;
};

/// Scores member forecasts against the panel's observed cases: per-model
/// errors, validation-RMSE weights, every (scenario, aggregation, subset,
/// period) ensemble cell and the per-step MPE curves.
Evaluation evaluate_forecasts(const std::vector<MemberRun>& runs, const RegionPanel& panel,
                              const ExperimentConfig& config);

nlohmann::json metrics_json(const Evaluation& e, const ExperimentConfig& config);
std::string mpe_csv(const Evaluation& e);

struct TrainedScenario {
  int scenario = 1;
  DesignMatrix design;
  Standardized standardized;
  std::vector<std::size_t> train_rows;
  std::vector<TrainedRegressor> models;
  std::vector<double> cv_rmse;  ///< best candidate's mean fold RMSE per model
};

/// Builds the scenario's design matrix, standardizes on the train split,
/// grid-searches and fits every configured regressor.
TrainedScenario train_scenario(const RegionPanel& panel, int scenario, const ExperimentConfig& config);

struct PopFitRecord {
  Split split;
  Date anchor;
  GrowthModelFit fit;
};

struct Attribution {
  int scenario = 4;
  AttributionReport report;  ///< raw (unnormalized) importances
  std::map<std::string, std::vector<DependencePoint>> dependence;
};

struct PipelineStages {
  bool forecast = true;
  bool explain = true;
};

struct PipelineResult {
  RegionPanel panel;
  std::vector<MemberRun> forecasts;
  std::vector<PopFitRecord> pop_fits;
  std::size_t pop_fallbacks = 0;
  nlohmann::json models = nlohmann::json::array();
  std::optional<Evaluation> evaluation;
  std::optional<Attribution> attribution;
};

RegionPanel build_experiment_panel(const DatasetBundle& data, const ExperimentConfig& config);

PipelineResult run_pipeline(const ExperimentConfig& config, const DatasetBundle& data,
                            const PipelineStages& stages = {});

/// Writes forecasts.csv, metrics.json, mpe_timestep.csv, models.json,
/// pop_fits.json, importance.csv, dependence_<feature>.csv and, when
/// enabled, SVG charts into config.out_dir. Every file is replaced
/// atomically.
void write_reports(const PipelineResult& result, const ExperimentConfig& config);

}  // namespace epiforge
