#include "epiforge/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "epiforge/charts.hpp"
#include "epiforge/csv.hpp"
#include "epiforge/error.hpp"

namespace epiforge {

namespace {

constexpr const char* kModule = "pipeline";
using std::chrono::days;

std::string scenario_text(const std::optional<int>& s) { return s ? std::to_string(*s) : std::string(); }

nlohmann::json scenario_json(const std::optional<int>& s) { return s ? nlohmann::json(*s) : nlohmann::json(); }

std::vector<double> actual_after(const RegionPanel& panel, Date anchor, std::size_t horizon) {
  const std::size_t n = panel.index_of(anchor);
  if (n + horizon >= panel.size())
    throw Error(Errc::InsufficientHistory, kModule,
                fmt::format("anchor {} + {} days runs past the panel", format_date(anchor), horizon));
  return {panel.cases.begin() + static_cast<std::ptrdiff_t>(n + 1),
          panel.cases.begin() + static_cast<std::ptrdiff_t>(n + 1 + horizon)};
}

bool is_numeric_failure(Errc c) {
  return c == Errc::DegenerateWindow || c == Errc::OptimizerDiverged || c == Errc::ParamDomain;
}

}  // namespace

// ---------------------------------------------------------------------------
// forecasts.csv

std::string forecasts_csv(const std::vector<MemberRun>& runs) {
  std::string out = "split,scenario,anchor,model,family,step,value\n";
  for (const auto& r : runs)
    for (std::size_t k = 0; k < r.values.size(); ++k)
      out += fmt::format("{},{},{},{},{},{},{}\n", to_string(r.split), scenario_text(r.scenario),
                         format_date(r.anchor), r.model, to_string(r.family), k + 1, r.values[k]);
  return out;
}

std::vector<MemberRun> parse_forecasts_csv(std::string_view text) {
  auto table = parse_csv(text);
  auto col = [&](std::string_view name) {
    auto c = table.column(name);
    if (!c) throw Error(Errc::MissingColumn, kModule, fmt::format("forecasts file lacks column '{}'", name));
    return *c;
  };
  const auto c_split = col("split"), c_scen = col("scenario"), c_anchor = col("anchor"), c_model = col("model"),
             c_family = col("family"), c_step = col("step"), c_value = col("value");
  std::vector<MemberRun> runs;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    auto fail = [&](std::string_view column, const std::string& value) {
      throw Error(Errc::UnparsableValue, kModule,
                  fmt::format("forecasts row {}, column {}: '{}'", i + 1, column, value));
    };
    MemberRun r;
    const auto& sp = row[c_split];
    if (sp == "train") r.split = Split::Train;
    else if (sp == "val") r.split = Split::Val;
    else if (sp == "test") r.split = Split::Test;
    else fail("split", sp);
    if (!row[c_scen].empty()) {
      int s = 0;
      auto [p, ec] = std::from_chars(row[c_scen].data(), row[c_scen].data() + row[c_scen].size(), s);
      if (ec != std::errc() || p != row[c_scen].data() + row[c_scen].size()) fail("scenario", row[c_scen]);
      r.scenario = s;
    }
    auto anchor = try_parse_date(row[c_anchor]);
    if (!anchor) fail("anchor", row[c_anchor]);
    r.anchor = *anchor;
    r.model = row[c_model];
    if (row[c_family] == "ML") r.family = ModelFamily::ML;
    else if (row[c_family] == "Pop") r.family = ModelFamily::Pop;
    else fail("family", row[c_family]);
    std::size_t step = 0;
    auto [sp2, ec2] = std::from_chars(row[c_step].data(), row[c_step].data() + row[c_step].size(), step);
    if (ec2 != std::errc() || sp2 != row[c_step].data() + row[c_step].size() || step == 0) fail("step", row[c_step]);
    double value = 0.0;
    auto [vp, ec3] = std::from_chars(row[c_value].data(), row[c_value].data() + row[c_value].size(), value);
    if (ec3 != std::errc() || vp != row[c_value].data() + row[c_value].size()) fail("value", row[c_value]);

    const bool continues = !runs.empty() && runs.back().split == r.split && runs.back().scenario == r.scenario &&
                           runs.back().anchor == r.anchor && runs.back().model == r.model;
    if (continues) {
      if (step != runs.back().values.size() + 1) fail("step", row[c_step]);
      runs.back().values.push_back(value);
    } else {
      if (step != 1) fail("step", row[c_step]);
      r.values.push_back(value);
      runs.push_back(std::move(r));
    }
  }
  return runs;
}

std::vector<Date> anchors_for(const RegionPanel& panel, Split split, std::size_t horizon, std::size_t min_index) {
  std::vector<Date> out;
  for (std::size_t n = min_index; n + horizon < panel.size(); ++n) {
    bool inside = true;
    for (std::size_t k = 1; k <= horizon && inside; ++k) inside = panel.splits[n + k] == split;
    if (inside) out.push_back(panel.calendar.at(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

Evaluation evaluate_forecasts(const std::vector<MemberRun>& runs, const RegionPanel& panel,
                              const ExperimentConfig& config) {
  Evaluation e;
  const std::size_t h = config.horizon;

  std::set<int> scenarios;
  bool has_pop = false, has_ml = false;
  for (const auto& r : runs) {
    if (r.values.size() != h)
      throw Error(Errc::LengthMismatch, kModule,
                  fmt::format("{} at {} has {} steps, horizon is {}", r.model, format_date(r.anchor), r.values.size(),
                              h));
    if (r.family == ModelFamily::Pop) has_pop = true;
    else {
      has_ml = true;
      if (!r.scenario) throw Error(Errc::InvalidArgument, kModule, fmt::format("ML run {} lacks a scenario", r.model));
      scenarios.insert(*r.scenario);
    }
  }
  if (!has_ml) scenarios.insert(0);

  // (split, scenario key) -> anchor -> set
  std::map<std::pair<Split, int>, std::map<Date, ForecastSet>> sets;
  for (int s : scenarios)
    for (const auto& r : runs) {
      if (r.family == ModelFamily::ML && r.scenario != s) continue;
      auto& by_anchor = sets[{r.split, s}];
      auto it = by_anchor.try_emplace(r.anchor, r.anchor).first;
      it->second.add({r.model, r.family, r.values});
    }

  std::map<Date, std::vector<double>> actuals;
  for (const auto& r : runs)
    if (!actuals.count(r.anchor)) actuals.emplace(r.anchor, actual_after(panel, r.anchor, h));

  auto anchored = [&](Split split, int s, std::optional<std::pair<Date, bool>> period) {
    std::vector<AnchoredForecast> out;
    auto it = sets.find({split, s});
    if (it == sets.end()) return out;
    for (const auto& [anchor, set] : it->second) {
      if (period && ((anchor < period->first) != period->second)) continue;
      out.push_back({&set, actuals.at(anchor)});
    }
    return out;
  };

  const int first_key = *scenarios.begin();
  e.val_anchors = anchored(Split::Val, first_key, std::nullopt).size();
  e.test_anchors = anchored(Split::Test, first_key, std::nullopt).size();

  // Per-model scores.
  std::map<int, std::map<std::string, double>> val_rmse_by_scenario;
  for (int s : scenarios) {
    auto val = anchored(Split::Val, s, std::nullopt);
    auto test = anchored(Split::Test, s, std::nullopt);
    const auto* reference = !test.empty() ? test.front().set : !val.empty() ? val.front().set : nullptr;
    if (!reference) continue;
    for (const auto& m : reference->members()) {
      ModelScore score{m.id, m.family, m.family == ModelFamily::ML ? std::optional<int>(s) : std::nullopt};
      for (const auto& f : val) score.val_rmse += rmse(f.set->find(m.id)->values, f.actual);
      if (!val.empty()) score.val_rmse /= static_cast<double>(val.size());
      for (const auto& f : test) {
        score.test_mape += mape(f.set->find(m.id)->values, f.actual);
        score.test_rmse += rmse(f.set->find(m.id)->values, f.actual);
      }
      if (!test.empty()) {
        score.test_mape /= static_cast<double>(test.size());
        score.test_rmse /= static_cast<double>(test.size());
      }
      val_rmse_by_scenario[s][m.id] = score.val_rmse;
      const bool seen = m.family == ModelFamily::Pop &&
                        std::any_of(e.models.begin(), e.models.end(), [&](const ModelScore& x) { return x.model == m.id; });
      if (!seen) e.models.push_back(score);
    }
  }

  const bool want_wavg =
      std::find(config.aggregations.begin(), config.aggregations.end(), Aggregation::Wavg) != config.aggregations.end();
  if (want_wavg) {
    if (e.val_anchors == 0)
      throw Error(Errc::InvalidConfig, kModule, "wavg needs validation anchors but the validation split has none");
    for (const auto& [s, rmses] : val_rmse_by_scenario) e.weights.emplace(s, wavg_weights(rmses));
  }

  const std::vector<std::pair<std::string, std::optional<std::pair<Date, bool>>>> periods = {
      {"all", std::nullopt},
      {"no-omicron", std::pair{config.omicron_date, true}},
      {"omicron", std::pair{config.omicron_date, false}}};

  auto add_cells = [&](int s, Subset subset, std::optional<int> scenario_label) {
    for (auto agg : config.aggregations)
      for (const auto& [name, period] : periods) {
        auto fs = anchored(Split::Test, s, period);
        if (fs.empty()) continue;
        const EnsembleWeights* w = agg == Aggregation::Wavg ? &e.weights.at(s) : nullptr;
        auto cell = evaluate_cell(fs, agg, subset, w);
        cell.scenario = scenario_label;
        cell.period = name;
        e.cells.push_back(std::move(cell));
      }
  };
  if (has_pop) add_cells(first_key, Subset::Pop, std::nullopt);
  if (has_ml)
    for (int s : scenarios) {
      add_cells(s, Subset::ML, s);
      if (has_pop) add_cells(s, Subset::All, s);
    }

  for (Split split : {Split::Val, Split::Test}) {
    bool pop_done = false;
    for (int s : scenarios) {
      auto fs = anchored(split, s, std::nullopt);
      if (fs.empty()) continue;
      for (auto& [family, curve] : mpe_per_timestep(fs)) {
        if (family == ModelFamily::Pop) {
          if (pop_done) continue;
          pop_done = true;
        }
        e.mpe.push_back({split, family == ModelFamily::ML ? std::optional<int>(s) : std::nullopt, family,
                         std::move(curve.mean), std::move(curve.std)});
      }
    }
  }
  return e;
}

nlohmann::json metrics_json(const Evaluation& e, const ExperimentConfig& config) {
  nlohmann::json j;
  j["region"] = config.region;
  j["horizon"] = config.horizon;
  j["omicron_date"] = format_date(config.omicron_date);
  j["anchors"] = {{"val", e.val_anchors}, {"test", e.test_anchors}};
  j["cells"] = e.cells;
  auto& models = j["models"] = nlohmann::json::array();
  for (const auto& m : e.models)
    models.push_back({{"model", m.model},
                      {"family", to_string(m.family)},
                      {"scenario", scenario_json(m.scenario)},
                      {"val_rmse", m.val_rmse},
                      {"test_mape", m.test_mape},
                      {"test_rmse", m.test_rmse}});
  auto& weights = j["weights"] = nlohmann::json::object();
  for (const auto& [s, w] : e.weights) weights[std::to_string(s)] = w.weights();
  return j;
}

std::string mpe_csv(const Evaluation& e) {
  std::string out = "split,scenario,family,step,mpe_mean,mpe_std\n";
  for (const auto& row : e.mpe)
    for (std::size_t k = 0; k < row.mean.size(); ++k)
      out += fmt::format("{},{},{},{},{},{}\n", to_string(row.split), scenario_text(row.scenario),
                         to_string(row.family), k + 1, row.mean[k], row.std[k]);
  return out;
}

// ---------------------------------------------------------------------------
// Training

RegionPanel build_experiment_panel(const DatasetBundle& data, const ExperimentConfig& config) {
  PanelOptions po;
  po.vax_interp_cutoff = config.vax_interp_cutoff;
  return build_panel(data, config.region, config.calendar(), config.splits, po);
}

TrainedScenario train_scenario(const RegionPanel& panel, int scenario, const ExperimentConfig& config) {
  TrainedScenario ts;
  ts.scenario = scenario;
  ts.design = build_design_matrix(panel, scenario, config.features);
  ts.train_rows = ts.design.rows_in(Split::Train);
  if (ts.train_rows.empty()) throw Error(Errc::EmptyTrainingSet, kModule, "the train split has no design rows");
  ts.standardized = standardize(ts.design, ts.train_rows);
  const auto x = ts.standardized.matrix.features.select_rows(ts.train_rows);
  std::vector<double> y;
  for (auto r : ts.train_rows) y.push_back(ts.standardized.matrix.target[r]);

  for (auto kind : config.ml_models) {
    auto grid = config.grids.count(kind) ? config.grids.at(kind) : default_grid(kind);
    auto search = grid_search(kind, x, y, grid, config.seed);
    double best = *std::min_element(search.mean_fold_rmse.begin(), search.mean_fold_rmse.end());
    spdlog::info("scenario {} {}: {} (cv rmse {:.4f})", scenario, to_string(kind), describe(search.best), best);
    ts.models.push_back(fit_regressor(kind, x, y, search.best, config.seed));
    ts.cv_rmse.push_back(best);
  }
  return ts;
}

// ---------------------------------------------------------------------------
// Orchestration

PipelineResult run_pipeline(const ExperimentConfig& config, const DatasetBundle& data, const PipelineStages& stages) {
  config.validate();
  PipelineResult res;
  res.panel = build_experiment_panel(data, config);
  const auto& panel = res.panel;
  const bool want_ml = in_subset(ModelFamily::ML, config.models);
  const bool want_pop = in_subset(ModelFamily::Pop, config.models);
  const std::size_t min_index =
      std::max({config.window - 1, kCaseLags - 1, config.features.exog_lag > 0 ? config.features.exog_lag - 1 : 0});
  const std::size_t h = config.horizon;

  std::optional<TrainedScenario> explain_models;

  if (stages.forecast) {
    std::vector<std::pair<Split, Date>> anchors;
    for (Split split : {Split::Val, Split::Test})
      for (Date a : anchors_for(panel, split, h, min_index)) anchors.emplace_back(split, a);
    if (anchors.empty()) throw Error(Errc::InsufficientHistory, kModule, "no forecast anchors fit the calendar");

    if (want_pop) {
      PopFitOptions po;
      po.window_length = config.window;
      for (auto [split, anchor] : anchors) {
        const std::size_t n = panel.index_of(anchor);
        const auto window = cumulative_window(panel.cases, n, config.window);
        for (auto kind : config.pop_models) {
          MemberRun run{split, std::nullopt, anchor, std::string(to_string(kind)), ModelFamily::Pop, {}};
          try {
            auto fit = fit_population_model(kind, window, po);
            fit.window_start = anchor - days(config.window - 1);
            fit.window_end = anchor;
            if (fit.used_fallback) ++res.pop_fallbacks;
            run.values = forecast_population(fit, h);
            res.pop_fits.push_back({split, anchor, fit});
          } catch (const Error& err) {
            if (!is_numeric_failure(err.code())) throw;
            // Persistence keeps the member in every ensemble; the count is
            // reported in pop_fits.json.
            spdlog::warn("{} fit at {} failed ({}); using persistence", to_string(kind), format_date(anchor),
                         err.what());
            ++res.pop_fallbacks;
            run.values.assign(h, panel.cases[n]);
          }
          res.forecasts.push_back(std::move(run));
        }
      }
      spdlog::info("population fits: {} anchors x {} models, {} fallbacks", anchors.size(), config.pop_models.size(),
                   res.pop_fallbacks);
    }

    if (want_ml) {
      for (int s : config.scenarios) {
        auto ts = train_scenario(panel, s, config);
        for (std::size_t m = 0; m < ts.models.size(); ++m) {
          const auto& model = ts.models[m];
          nlohmann::json hp;
          to_json(hp, model.hyperparameters());
          res.models.push_back({{"scenario", s},
                                {"model", to_string(model.kind())},
                                {"hyperparameters", hp},
                                {"cv_rmse", ts.cv_rmse[m]},
                                {"seed", model.seed()},
                                {"features", ts.design.columns},
                                {"train_range", ts.standardized.params.fit_range}});
          for (auto [split, anchor] : anchors)
            res.forecasts.push_back({split, s, anchor, std::string(to_string(model.kind())), ModelFamily::ML,
                                     recurrent_forecast(model, panel, anchor, h, s, ts.standardized.params,
                                                        config.features)});
        }
        spdlog::info("scenario {}: {} models x {} anchors forecast", s, ts.models.size(), anchors.size());
        if (s == config.explain.scenario) explain_models = std::move(ts);
      }
    }
    res.evaluation = evaluate_forecasts(res.forecasts, panel, config);
  }

  if (stages.explain && config.explain.enabled && want_ml && !config.ml_models.empty()) {
    if (!explain_models) explain_models = train_scenario(panel, config.explain.scenario, config);
    const auto& ts = *explain_models;
    std::vector<ExplainedModel> models;
    for (const auto& m : ts.models)
      models.push_back({std::string(to_string(m.kind())),
                        [&m](std::span<const double> row) { return m.predict(row); }, m.feature_count()});
    const auto background = ts.standardized.matrix.features.select_rows(ts.train_rows);
    ShapleyOptions so;
    so.permutations = config.explain.permutations;
    so.seed = config.seed;
    Attribution attr;
    attr.scenario = ts.scenario;
    attr.report = importance_summary(models, ts.design.columns, ts.standardized.matrix.features, background, so);
    for (const auto& f : config.explain.dependence_features) {
      if (std::find(ts.design.columns.begin(), ts.design.columns.end(), f) == ts.design.columns.end()) {
        spdlog::warn("dependence export skipped: scenario {} has no feature '{}'", ts.scenario, f);
        continue;
      }
      attr.dependence[f] = dependence_export(attr.report, ts.design.features, f, ts.standardized.params.target.std);
    }
    res.attribution = std::move(attr);
    spdlog::info("attribution: {} rows x {} models", ts.design.rows(), models.size());
  }
  return res;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

void write_charts(const PipelineResult& res, const ExperimentConfig& config) {
  const auto& panel = res.panel;
  const auto& ev = *res.evaluation;
  const Date from = config.splits.val_start - days(30);
  const auto x_of = [&](Date d) { return static_cast<double>((d - from).count()); };

  ChartLabels base;
  base.x_axis = "date";
  for (Date d = from; d <= config.end; d += days(1)) {
    const auto ymd = std::chrono::year_month_day(d);
    if (unsigned(ymd.day()) == 1) {
      base.x_ticks.push_back(x_of(d));
      base.x_tick_labels.push_back(format_date(d).substr(0, 7));
    }
  }

  std::set<int> scenarios;
  for (const auto& r : res.forecasts)
    if (r.scenario) scenarios.insert(*r.scenario);
  if (scenarios.empty()) scenarios.insert(0);

  for (int s : scenarios) {
    ChartSeries actual{"observed", {}, {}, "#222222", false};
    for (Date d = from; d <= config.end; d += days(1)) {
      actual.x.push_back(x_of(d));
      actual.y.push_back(panel.cases[panel.index_of(d)]);
    }
    std::vector<ChartSeries> series{actual};
    // Ensemble mean over every member, one segment per fortnight of anchors.
    std::map<Date, ForecastSet> sets;
    for (const auto& r : res.forecasts) {
      if (r.split != Split::Test || (r.family == ModelFamily::ML && r.scenario != s)) continue;
      sets.try_emplace(r.anchor, r.anchor).first->second.add({r.model, r.family, r.values});
    }
    std::size_t i = 0;
    for (const auto& [anchor, set] : sets) {
      if (i++ % config.horizon) continue;
      ChartSeries seg{i == 1 ? "ensemble mean (All)" : "", {}, {}, "#d62728", true};
      auto agg = aggregate(set, Aggregation::Mean, Subset::All);
      for (std::size_t k = 0; k < agg.size(); ++k) {
        seg.x.push_back(x_of(anchor + days(static_cast<int>(k + 1))));
        seg.y.push_back(agg[k]);
      }
      series.push_back(std::move(seg));
    }
    auto labels = base;
    labels.title = s ? fmt::format("{} daily cases, scenario {}", config.region, s)
                     : fmt::format("{} daily cases", config.region);
    labels.y_axis = "cases";
    write_file_atomic(config.out_dir / (s ? fmt::format("forecast_s{}.svg", s) : std::string("forecast.svg")),
                      line_chart_svg(labels, series));
  }

  ChartLabels mpe_labels;
  mpe_labels.title = "Mean percentage error per forecast step (test split)";
  mpe_labels.x_axis = "step (days ahead)";
  mpe_labels.y_axis = "MPE";
  std::vector<ChartSeries> curves;
  const char* palette[] = {"#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#ff7f0e"};
  std::size_t c = 0;
  for (const auto& row : ev.mpe) {
    if (row.split != Split::Test) continue;
    ChartSeries cs{row.family == ModelFamily::Pop ? std::string("Pop")
                                                  : fmt::format("ML scenario {}", row.scenario.value_or(0)),
                   {}, {}, palette[c++ % std::size(palette)], row.family == ModelFamily::Pop};
    for (std::size_t k = 0; k < row.mean.size(); ++k) {
      cs.x.push_back(static_cast<double>(k + 1));
      cs.y.push_back(row.mean[k]);
    }
    curves.push_back(std::move(cs));
  }
  write_file_atomic(config.out_dir / "mpe_timestep.svg", line_chart_svg(mpe_labels, curves));
}

}  // namespace

void write_reports(const PipelineResult& res, const ExperimentConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec)
    throw Error(Errc::IoFailure, kModule, fmt::format("cannot create {}: {}", config.out_dir.string(), ec.message()));
  const auto& out = config.out_dir;

  if (res.evaluation) {
    write_file_atomic(out / "forecasts.csv", forecasts_csv(res.forecasts));
    write_file_atomic(out / "metrics.json", metrics_json(*res.evaluation, config).dump(2) + "\n");
    write_file_atomic(out / "mpe_timestep.csv", mpe_csv(*res.evaluation));
    write_file_atomic(out / "models.json", res.models.dump(2) + "\n");
    nlohmann::json fits = nlohmann::json::array();
    for (const auto& f : res.pop_fits) {
      nlohmann::json j;
      to_json(j, f.fit);
      j["split"] = to_string(f.split);
      j["anchor"] = format_date(f.anchor);
      fits.push_back(std::move(j));
    }
    write_file_atomic(out / "pop_fits.json",
                      nlohmann::json{{"fallbacks", res.pop_fallbacks}, {"fits", fits}}.dump(2) + "\n");
    if (config.charts) write_charts(res, config);
  }
  if (res.attribution) {
    auto normalized = res.attribution->report;
    normalize_importance(normalized);
    write_file_atomic(out / "importance.csv", importance_csv(normalized));
    for (const auto& [feature, points] : res.attribution->dependence)
      write_file_atomic(out / fmt::format("dependence_{}.csv", feature), dependence_csv(points));
  }
}

}  // namespace epiforge
