#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "epiforge/dates.hpp"

namespace epiforge {

enum class ModelFamily { ML, Pop };
enum class Aggregation { Mean, Median, Wavg };
enum class Subset { ML, Pop, All };

std::string_view to_string(ModelFamily f);
std::string_view to_string(Aggregation a);
std::string_view to_string(Subset s);
Aggregation aggregation_from_string(std::string_view s);
Subset subset_from_string(std::string_view s);

bool in_subset(ModelFamily f, Subset s);

struct MemberForecast {
  std::string id;
  ModelFamily family = ModelFamily::ML;
  std::vector<double> values;
};

/// All member forecasts launched from one anchor day.
class ForecastSet {
 public:
  explicit ForecastSet(Date anchor) : anchor_(anchor) {}

  /// Throws InvalidArgument on a duplicate id, LengthMismatch on a horizon
  /// different from the members already present.
  void add(MemberForecast member);

  Date anchor() const { return anchor_; }
  std::size_t horizon() const { return members_.empty() ? 0 : members_.front().values.size(); }
  const std::vector<MemberForecast>& members() const { return members_; }
  const MemberForecast* find(std::string_view id) const;

 private:
  Date anchor_;
  std::vector<MemberForecast> members_;
};

/// Mean absolute percentage error as a fraction.
double mape(std::span<const double> pred, std::span<const double> actual);
double rmse(std::span<const double> pred, std::span<const double> actual);
/// Signed relative errors (pred - actual) / actual per step.
std::vector<double> relative_errors(std::span<const double> pred, std::span<const double> actual);

class EnsembleWeights {
 public:
  EnsembleWeights() = default;
  /// Weights must be non-negative with a positive sum; they are normalized.
  explicit EnsembleWeights(std::map<std::string, double> raw);

  const std::map<std::string, double>& weights() const { return w_; }
  std::optional<double> weight(std::string_view id) const;

 private:
  std::map<std::string, double> w_;
};

/// weight_i proportional to 1 / rmse_i.
EnsembleWeights wavg_weights(const std::map<std::string, double>& validation_rmse);

/// Element-wise aggregation of the subset's members. Wavg weights are
/// renormalized over the subset.
std::vector<double> aggregate(const ForecastSet& set, Aggregation method, Subset subset,
                              const EnsembleWeights* weights = nullptr);

struct AnchoredForecast {
  const ForecastSet* set = nullptr;
  std::span<const double> actual;
};

struct FamilyMpe {
  std::vector<double> mean;  ///< per step, over anchors and members
  std::vector<double> std;   ///< per step, population std across members' own mean curves
  std::size_t members = 0;
};

std::map<ModelFamily, FamilyMpe> mpe_per_timestep(std::span<const AnchoredForecast> forecasts);

/// One Tables 4-5 cell: errors averaged over anchors of per-forecast errors.
struct MetricsCell {
  std::optional<int> scenario;
  Aggregation aggregation = Aggregation::Mean;
  Subset subset = Subset::All;
  std::string period = "all";
  std::size_t anchors = 0;
  double mape = 0.0;
  double rmse = 0.0;
  std::vector<double> per_timestep_mpe;
};

void to_json(nlohmann::json& j, const MetricsCell& cell);

/// Scores the aggregate of each set against its actuals.
MetricsCell evaluate_cell(std::span<const AnchoredForecast> forecasts, Aggregation method, Subset subset,
                          const EnsembleWeights* weights = nullptr);

}  // namespace epiforge
