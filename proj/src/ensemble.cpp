#include "epiforge/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "epiforge/error.hpp"

namespace epiforge {

namespace {

constexpr const char* kModule = "ensemble";

void check_lengths(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size())
    throw Error(Errc::LengthMismatch, kModule, fmt::format("{} predictions vs {} actuals", pred.size(), actual.size()));
  if (pred.empty()) throw Error(Errc::LengthMismatch, kModule, "empty series");
}

void check_actuals(std::span<const double> actual) {
  for (std::size_t i = 0; i < actual.size(); ++i)
    if (!(actual[i] > 0.0))
      throw Error(Errc::ZeroActual, kModule, fmt::format("actual at step {} is {}", i + 1, actual[i]));
}

double population_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

std::string_view to_string(ModelFamily f) { return f == ModelFamily::ML ? "ML" : "Pop"; }

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::Mean: return "mean";
    case Aggregation::Median: return "median";
    case Aggregation::Wavg: return "wavg";
  }
  return "unknown";
}

std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::ML: return "ML";
    case Subset::Pop: return "Pop";
    case Subset::All: return "All";
  }
  return "unknown";
}

Aggregation aggregation_from_string(std::string_view s) {
  if (s == "mean") return Aggregation::Mean;
  if (s == "median") return Aggregation::Median;
  if (s == "wavg") return Aggregation::Wavg;
  throw Error(Errc::InvalidArgument, kModule, fmt::format("unknown aggregation '{}'", s));
}

Subset subset_from_string(std::string_view s) {
  if (s == "ml" || s == "ML") return Subset::ML;
  if (s == "pop" || s == "Pop") return Subset::Pop;
  if (s == "all" || s == "All") return Subset::All;
  throw Error(Errc::InvalidArgument, kModule, fmt::format("unknown model subset '{}'", s));
}

bool in_subset(ModelFamily f, Subset s) {
  return s == Subset::All || (s == Subset::ML && f == ModelFamily::ML) || (s == Subset::Pop && f == ModelFamily::Pop);
}

void ForecastSet::add(MemberForecast member) {
  if (find(member.id))
    throw Error(Errc::InvalidArgument, kModule, fmt::format("duplicate model id '{}'", member.id));
  if (!members_.empty() && member.values.size() != horizon())
    throw Error(Errc::LengthMismatch, kModule,
                fmt::format("'{}' has horizon {}, expected {}", member.id, member.values.size(), horizon()));
  members_.push_back(std::move(member));
}

const MemberForecast* ForecastSet::find(std::string_view id) const {
  for (const auto& m : members_)
    if (m.id == id) return &m;
  return nullptr;
}

double mape(std::span<const double> pred, std::span<const double> actual) {
  check_lengths(pred, actual);
  check_actuals(actual);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - actual[i]) / actual[i];
  return sum / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> actual) {
  check_lengths(pred, actual);
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - actual[i]) * (pred[i] - actual[i]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

std::vector<double> relative_errors(std::span<const double> pred, std::span<const double> actual) {
  check_lengths(pred, actual);
  check_actuals(actual);
  std::vector<double> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) out[i] = (pred[i] - actual[i]) / actual[i];
  return out;
}

EnsembleWeights::EnsembleWeights(std::map<std::string, double> raw) {
  double total = 0.0;
  for (const auto& [id, w] : raw) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw Error(Errc::InvalidArgument, kModule, fmt::format("weight for '{}' is {}", id, w));
    total += w;
  }
  if (!(total > 0.0)) throw Error(Errc::InvalidArgument, kModule, "weights sum to zero");
  for (auto& [id, w] : raw) w /= total;
  w_ = std::move(raw);
}

std::optional<double> EnsembleWeights::weight(std::string_view id) const {
  auto it = w_.find(std::string(id));
  if (it == w_.end()) return std::nullopt;
  return it->second;
}

EnsembleWeights wavg_weights(const std::map<std::string, double>& validation_rmse) {
  std::map<std::string, double> inv;
  for (const auto& [id, r] : validation_rmse) {
    if (!(r > 0.0) || !std::isfinite(r))
      throw Error(Errc::ZeroRmse, kModule, fmt::format("validation RMSE of '{}' is {}", id, r));
    inv[id] = 1.0 / r;
  }
  return EnsembleWeights(std::move(inv));
}

std::vector<double> aggregate(const ForecastSet& set, Aggregation method, Subset subset,
                              const EnsembleWeights* weights) {
  std::vector<const MemberForecast*> chosen;
  for (const auto& m : set.members())
    if (in_subset(m.family, subset)) chosen.push_back(&m);
  if (chosen.empty())
    throw Error(Errc::EmptySubset, kModule,
                fmt::format("no {} members at anchor {}", to_string(subset), format_date(set.anchor())));

  std::vector<double> w(chosen.size(), 1.0);
  if (method == Aggregation::Wavg) {
    if (!weights) throw Error(Errc::MissingWeight, kModule, "wavg needs validation weights");
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      auto wi = weights->weight(chosen[i]->id);
      if (!wi) throw Error(Errc::MissingWeight, kModule, fmt::format("no weight for '{}'", chosen[i]->id));
      w[i] = *wi;
    }
  }

  const std::size_t h = set.horizon();
  std::vector<double> out(h);
  // Per-step values are sorted before reduction so member order cannot
  // change the floating-point result.
  std::vector<std::pair<double, double>> step(chosen.size());
  for (std::size_t k = 0; k < h; ++k) {
    for (std::size_t i = 0; i < chosen.size(); ++i) step[i] = {chosen[i]->values[k], w[i]};
    std::sort(step.begin(), step.end());
    const double lo = step.front().first, hi = step.back().first;
    double v = 0.0;
    switch (method) {
      case Aggregation::Mean: {
        for (const auto& [x, _] : step) v += x;
        v /= static_cast<double>(step.size());
        break;
      }
      case Aggregation::Median: {
        const std::size_t n = step.size();
        v = n % 2 ? step[n / 2].first : 0.5 * (step[n / 2 - 1].first + step[n / 2].first);
        break;
      }
      case Aggregation::Wavg: {
        double sw = 0.0;
        for (const auto& [x, wi] : step) {
          v += wi * x;
          sw += wi;
        }
        if (!(sw > 0.0)) throw Error(Errc::MissingWeight, kModule, "subset weights sum to zero");
        v /= sw;
        break;
      }
    }
    out[k] = std::clamp(v, lo, hi);
  }
  return out;
}

std::map<ModelFamily, FamilyMpe> mpe_per_timestep(std::span<const AnchoredForecast> forecasts) {
  if (forecasts.empty()) throw Error(Errc::InvalidArgument, kModule, "no forecasts to score");
  const std::size_t h = forecasts.front().set->horizon();

  // id -> (family, summed relative error per step, anchor count)
  struct Acc {
    ModelFamily family;
    std::vector<double> sum;
    std::size_t count = 0;
  };
  std::map<std::string, Acc> per_model;
  for (const auto& f : forecasts) {
    if (f.set->horizon() != h)
      throw Error(Errc::LengthMismatch, kModule, "forecast sets have different horizons");
    for (const auto& m : f.set->members()) {
      auto err = relative_errors(m.values, f.actual);
      auto [it, fresh] = per_model.try_emplace(m.id, Acc{m.family, std::vector<double>(h, 0.0), 0});
      for (std::size_t k = 0; k < h; ++k) it->second.sum[k] += err[k];
      ++it->second.count;
    }
  }

  std::map<ModelFamily, FamilyMpe> out;
  std::map<ModelFamily, std::vector<std::vector<double>>> curves;
  std::map<ModelFamily, std::vector<double>> pooled_sum;
  std::map<ModelFamily, std::size_t> pooled_n;
  for (const auto& [id, acc] : per_model) {
    std::vector<double> curve(h);
    for (std::size_t k = 0; k < h; ++k) curve[k] = acc.sum[k] / static_cast<double>(acc.count);
    curves[acc.family].push_back(std::move(curve));
    auto& ps = pooled_sum[acc.family];
    ps.resize(h, 0.0);
    for (std::size_t k = 0; k < h; ++k) ps[k] += acc.sum[k];
    pooled_n[acc.family] += acc.count;
  }
  for (auto& [family, cs] : curves) {
    FamilyMpe fm;
    fm.members = cs.size();
    fm.mean.resize(h);
    fm.std.resize(h);
    std::vector<double> column(cs.size());
    for (std::size_t k = 0; k < h; ++k) {
      fm.mean[k] = pooled_sum[family][k] / static_cast<double>(pooled_n[family]);
      for (std::size_t i = 0; i < cs.size(); ++i) column[i] = cs[i][k];
      fm.std[k] = population_std(column);
    }
    out.emplace(family, std::move(fm));
  }
  return out;
}

MetricsCell evaluate_cell(std::span<const AnchoredForecast> forecasts, Aggregation method, Subset subset,
                          const EnsembleWeights* weights) {
  MetricsCell cell;
  cell.aggregation = method;
  cell.subset = subset;
  cell.anchors = forecasts.size();
  if (forecasts.empty()) return cell;
  const std::size_t h = forecasts.front().set->horizon();
  cell.per_timestep_mpe.assign(h, 0.0);
  for (const auto& f : forecasts) {
    auto agg = aggregate(*f.set, method, subset, weights);
    cell.mape += mape(agg, f.actual);
    cell.rmse += rmse(agg, f.actual);
    auto err = relative_errors(agg, f.actual);
    for (std::size_t k = 0; k < h; ++k) cell.per_timestep_mpe[k] += err[k];
  }
  const double n = static_cast<double>(forecasts.size());
  cell.mape /= n;
  cell.rmse /= n;
  for (auto& v : cell.per_timestep_mpe) v /= n;
  return cell;
}

void to_json(nlohmann::json& j, const MetricsCell& cell) {
  j = nlohmann::json{{"scenario", cell.scenario ? nlohmann::json(*cell.scenario) : nlohmann::json()},
                     {"aggregation", to_string(cell.aggregation)},
                     {"subset", to_string(cell.subset)},
                     {"period", cell.period},
                     {"anchors", cell.anchors},
                     {"mape", cell.mape},
                     {"rmse", cell.rmse},
                     {"per_timestep_mpe", cell.per_timestep_mpe}};
}

}  // namespace epiforge
