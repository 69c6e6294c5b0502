// epiforge: forecasting experiments over daily case, vaccination, mobility
// and weather feeds.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "epiforge/config.hpp"
#include "epiforge/csv.hpp"
#include "epiforge/error.hpp"
#include "epiforge/fixtures.hpp"
#include "epiforge/pipeline.hpp"

namespace {

using namespace epiforge;

struct Overrides {
  std::string config;
  std::optional<std::string> region;
  std::vector<int> scenarios;
  std::optional<std::string> models;
  std::vector<std::string> aggregations;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_experiment_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment INI file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--region", o.region, "community code or ES");
  cmd->add_option("--scenario", o.scenarios, "scenario(s) 1-4")->delimiter(',')->check(CLI::Range(1, 4));
  cmd->add_option("--models", o.models, "model families")->check(CLI::IsMember({"ml", "pop", "all"}));
  cmd->add_option("--aggregation", o.aggregations, "ensemble aggregation(s)")
      ->delimiter(',')
      ->check(CLI::IsMember({"mean", "median", "wavg"}));
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--out", o.out, "output directory");
}

ExperimentConfig resolve(const Overrides& o) {
  auto c = load_config(o.config);
  if (o.region) c.region = *o.region;
  if (!o.scenarios.empty()) {
    c.scenarios = o.scenarios;
    if (o.scenarios.size() == 1) c.explain.scenario = o.scenarios.front();
  }
  if (o.models) c.models = subset_from_string(*o.models);
  if (!o.aggregations.empty()) {
    c.aggregations.clear();
    for (const auto& a : o.aggregations) c.aggregations.push_back(aggregation_from_string(a));
  }
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out_dir = *o.out;
  c.validate();
  return c;
}

void configure_logging() {
  const char* level = std::getenv("EPIFORGE_LOG");
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

void print_summary(const Evaluation& e) {
  for (const auto& cell : e.cells) {
    if (cell.period != "all") continue;
    std::cout << fmt::format("{:>8} {:<6} {:<3} MAPE {:.4f} ({:.2f}%)  RMSE {:.1f}\n",
                             cell.scenario ? fmt::format("s{}", *cell.scenario) : std::string("-"),
                             to_string(cell.aggregation), to_string(cell.subset), cell.mape, 100.0 * cell.mape,
                             cell.rmse);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"epiforge: COVID-19 case forecasting with growth-curve and machine learning ensembles"};
  app.require_subcommand(1);

  Overrides run_o, eval_o, explain_o;
  auto* run = app.add_subcommand("run", "fit, forecast, evaluate and explain");
  add_experiment_flags(run, run_o);

  auto* evaluate = app.add_subcommand("evaluate", "recompute metrics from an existing forecasts.csv");
  add_experiment_flags(evaluate, eval_o);
  std::string forecasts_path;
  evaluate->add_option("--forecasts", forecasts_path, "forecasts.csv from a previous run")
      ->required()
      ->check(CLI::ExistingFile);

  auto* explain = app.add_subcommand("explain", "Shapley attribution for the ML models only");
  add_experiment_flags(explain, explain_o);

  auto* fixtures = app.add_subcommand("fixtures", "write synthetic input feeds and a config");
  std::string fixtures_out;
  std::uint64_t fixtures_seed = 42;
  std::string profile = "waves";
  fixtures->add_option("--out", fixtures_out, "output directory")->required();
  fixtures->add_option("--seed", fixtures_seed, "RNG seed");
  fixtures->add_option("--profile", profile, "case curve shape")->check(CLI::IsMember({"waves", "opposite-bias"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto c = resolve(run_o);
      auto data = load_bundle(c.data);
      auto res = run_pipeline(c, data);
      write_reports(res, c);
      if (res.evaluation) print_summary(*res.evaluation);
      spdlog::info("reports written to {}", c.out_dir.string());
    } else if (*evaluate) {
      auto c = resolve(eval_o);
      auto data = load_bundle(c.data);
      auto panel = build_experiment_panel(data, c);
      auto runs = parse_forecasts_csv(read_file(forecasts_path));
      auto e = evaluate_forecasts(runs, panel, c);
      std::filesystem::create_directories(c.out_dir);
      write_file_atomic(c.out_dir / "metrics.json", metrics_json(e, c).dump(2) + "\n");
      write_file_atomic(c.out_dir / "mpe_timestep.csv", mpe_csv(e));
      print_summary(e);
    } else if (*explain) {
      auto c = resolve(explain_o);
      c.explain.enabled = true;
      auto data = load_bundle(c.data);
      auto res = run_pipeline(c, data, PipelineStages{false, true});
      if (!res.attribution) throw Error(Errc::InvalidConfig, "cli", "attribution needs ML models (--models ml|all)");
      write_reports(res, c);
      spdlog::info("attribution written to {}", c.out_dir.string());
    } else if (*fixtures) {
      make_fixtures({fixtures_seed, fixture_profile_from_string(profile)}, fixtures_out);
      spdlog::info("fixtures written to {}", fixtures_out);
    }
  } catch (const Error& e) {
    const auto cls = classify(e.code());
    std::cerr << "epiforge: " << to_string(cls) << " error " << e.what() << "\n";
    return static_cast<int>(cls);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "epiforge: io error [cli] " << e.what() << "\n";
    return static_cast<int>(ErrorClass::Io);
  } catch (const std::exception& e) {
    std::cerr << "epiforge: internal error " << e.what() << "\n";
    return 1;
  }
  return 0;
}
