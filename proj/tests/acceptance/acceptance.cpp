// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. argv[1] is a scratch directory for the end-to-end runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "epiforge/config.hpp"
#include "epiforge/csv.hpp"
#include "epiforge/ensemble.hpp"
#include "epiforge/error.hpp"
#include "epiforge/explain.hpp"
#include "epiforge/features.hpp"
#include "epiforge/fixtures.hpp"
#include "epiforge/ingest.hpp"
#include "epiforge/mlmodels.hpp"
#include "epiforge/pipeline.hpp"
#include "epiforge/popmodels.hpp"
#include "epiforge/rng.hpp"
#include "toy_data.hpp"

using namespace epiforge;
using epiforge::testing::D;
using epiforge::testing::synthetic_panel;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Collects failed expectations for one criterion; the first few are kept
// for the report line.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (notes_.size() < 3) notes_.push_back(what);
  }
  bool ok() const { return failures_ == 0; }
  std::string notes() const {
    std::string s;
    for (const auto& n : notes_) s += (s.empty() ? "" : "; ") + n;
    if (failures_ > notes_.size()) s += fmt::format(" (+{} more)", failures_ - notes_.size());
    return s;
  }

 private:
  std::size_t failures_ = 0;
  std::vector<std::string> notes_;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Outcome finish(Check& c, std::string detail, double elapsed, double limit) {
  if (limit > 0) c.expect(elapsed < limit, fmt::format("took {:.2f} s, limit {:.0f} s", elapsed, limit));
  detail += fmt::format(", {:.2f} s", elapsed);
  if (!c.ok()) detail += " -- " + c.notes();
  return {c.ok(), detail};
}

// 1 ---------------------------------------------------------------------------

double ode_rhs(GrowthModelKind kind, const GrowthParams& q, double p) {
  switch (kind) {
    case GrowthModelKind::Gompertz:
      return q.a * p - q.b * p * std::log(p);
    case GrowthModelKind::Logistic:
      return q.a * p - q.b * p * p;
    case GrowthModelKind::Richards:
      return q.a / q.s * p * (1.0 - std::pow(p / (q.a / q.b), q.s));
    case GrowthModelKind::Bertalanffy:
      return q.a * std::pow(p, 0.75) - q.b * p;
  }
  return 0.0;
}

std::vector<GrowthParams> ode_grid(GrowthModelKind kind) {
  std::vector<GrowthParams> g;
  for (double x : {0.0, 0.5, 1.0})
    for (double y : {0.0, 0.5, 1.0})
      for (double z : {0.0, 0.5, 1.0}) {
        switch (kind) {
          case GrowthModelKind::Gompertz:
            g.push_back({0.2 + 0.8 * x, 0.05 + 0.15 * y, -(1.0 + 3.0 * z)});
            break;
          case GrowthModelKind::Logistic:
          case GrowthModelKind::Richards: {
            const double a = 0.1 + 0.3 * x, cap = std::pow(10.0, 3.0 + 2.0 * y), p0 = cap / (5.0 + 45.0 * z);
            const double s = kind == GrowthModelKind::Richards ? 0.5 + 1.5 * z : 1.0;
            // p(0) = p0 fixes c for both closed forms.
            const double c = std::pow(p0, -s) - std::pow(1.0 / cap, s);
            g.push_back({a, a / cap, c, s});
            break;
          }
          case GrowthModelKind::Bertalanffy: {
            const double a = 2.0 + 3.0 * x, b = 0.1 + 0.2 * y;
            g.push_back({a, b, -(0.3 + 0.6 * z) * a / b});
            break;
          }
        }
      }
  return g;
}

Outcome criterion_ode() {
  auto t0 = Clock::now();
  Check c;
  double worst = 0;
  std::size_t points = 0;
  for (auto kind : kGrowthModelKinds) {
    auto grid = ode_grid(kind);
    c.expect(grid.size() >= 20, "grid too small");
    for (const auto& q : grid)
      for (double t : {1.0, 7.0, 15.0, 25.0}) {
        const double h = 1e-3;
        const double fd =
            (evaluate_curve(kind, q, t + h) - evaluate_curve(kind, q, t - h)) / (2 * h);
        const double rhs = ode_rhs(kind, q, evaluate_curve(kind, q, t));
        const double rel = std::abs(fd - rhs) / std::abs(rhs);
        worst = std::max(worst, rel);
        ++points;
        c.expect(rel < 1e-4, fmt::format("{} t={} rel={:.2e}", to_string(kind), t, rel));
      }
  }
  return finish(c, fmt::format("{} points, max rel err {:.2e}", points, worst), seconds_since(t0), 1.0);
}

// 2 ---------------------------------------------------------------------------

std::vector<double> sample_curve(GrowthModelKind kind, const GrowthParams& q, std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t t = 0; t < n; ++t) w[t] = evaluate_curve(kind, q, static_cast<double>(t));
  return w;
}

double relative_rmse(GrowthModelKind kind, const GrowthParams& q, const std::vector<double>& w) {
  double se = 0, norm = 0;
  for (std::size_t t = 0; t < w.size(); ++t) {
    se += std::pow(evaluate_curve(kind, q, static_cast<double>(t)) - w[t], 2);
    norm += w[t] * w[t];
  }
  return std::sqrt(se / norm);
}

Outcome criterion_recovery() {
  auto t0 = Clock::now();
  Check c;
  double worst = 0;
  std::size_t windows = 0;
  for (auto kind : {GrowthModelKind::Gompertz, GrowthModelKind::Logistic, GrowthModelKind::Bertalanffy})
    for (double x : {0.0, 1.0})
      for (double y : {0.0, 1.0})
        for (double z : {0.0, 1.0}) {
          GrowthParams q;
          if (kind == GrowthModelKind::Gompertz) {
            q = {0.3 + 0.3 * x, 0.05 + 0.05 * y, -(2.0 + 2.0 * z)};
          } else if (kind == GrowthModelKind::Logistic) {
            const double a = 0.1 + 0.1 * x, cap = y ? 5e4 : 5e3, p0 = cap / (z ? 10.0 : 50.0);
            q = {a, a / cap, 1.0 / p0 - 1.0 / cap};
          } else {
            const double a = 2.0 + 3.0 * x, b = 0.1 + 0.1 * y;
            q = {a, b, -(z ? 0.8 : 0.5) * a / b};
          }
          auto w = sample_curve(kind, q, 30);
          auto fit = fit_population_model(kind, w);
          const double r = relative_rmse(kind, fit.params, w);
          worst = std::max(worst, r);
          ++windows;
          c.expect(r < 1e-3, fmt::format("{} window {} rel rmse {:.2e}", to_string(kind), windows, r));
        }

  // Worked example: a=2, b=0.5, c=-3 sampled at t = 0, 10, 20.
  const GrowthParams truth{2.0, 0.5, -3.0};
  auto w = sample_curve(GrowthModelKind::Gompertz, truth, 21);
  auto start = estimate_initial_at(GrowthModelKind::Gompertz, w, 0, 10);
  c.expect(std::abs(start.b - 0.5) < 1e-3, fmt::format("three-point b = {}", start.b));
  PopFitOptions opt;
  opt.window_length = 21;
  auto refit = fit_population_model(GrowthModelKind::Gompertz, w, opt);
  c.expect(std::abs(refit.params.b - 0.5) < 1e-3, fmt::format("refit b = {}", refit.params.b));
  return finish(c,
                fmt::format("{} windows, max rel rmse {:.2e}; worked example b = {:.6f} (start), {:.6f} (refit)",
                            windows, worst, start.b, refit.params.b),
                seconds_since(t0), 5.0);
}

// 3 ---------------------------------------------------------------------------

Outcome criterion_nesting() {
  auto t0 = Clock::now();
  Check c;
  CounterRng rng(303, 0);
  double worst = 0;
  for (int i = 0; i < 500; ++i) {
    const double a = 0.05 + 0.5 * rng.uniform(), cap = std::pow(10.0, 2.0 + 4.0 * rng.uniform());
    GrowthParams q{a, a / cap, (1.0 + 99.0 * rng.uniform()) / cap, 1.0};
    const double t = 60.0 * rng.uniform();
    const double lo = evaluate_curve(GrowthModelKind::Logistic, q, t);
    const double ri = evaluate_curve(GrowthModelKind::Richards, q, t);
    const double rel = std::abs(lo - ri) / std::abs(lo);
    worst = std::max(worst, rel);
    c.expect(rel <= 1e-12, fmt::format("s=1 mismatch {:.2e}", rel));
  }

  double worst_gap = -1e300;
  for (int k = 0; k < 6; ++k) {
    const double a = 0.1 + 0.05 * k, cap = 2e3 * (k + 1);
    GrowthParams q{a, a / cap, 1.0 / (cap / 40.0) - 1.0 / cap};
    auto w = sample_curve(GrowthModelKind::Logistic, q, 30);
    if (k % 2) {
      // Multiplicative noise, re-sorted so the window stays cumulative.
      for (auto& v : w) v *= 1.0 + 0.02 * (rng.uniform() - 0.5);
      std::sort(w.begin(), w.end());
    }
    auto lo = fit_population_model(GrowthModelKind::Logistic, w);
    auto ri = fit_population_model(GrowthModelKind::Richards, w);
    worst_gap = std::max(worst_gap, ri.sse - lo.sse);
    c.expect(ri.sse <= lo.sse + 1e-6,
             fmt::format("dataset {}: richards sse {} > logistic sse {}", k, ri.sse, lo.sse));
  }
  return finish(c, fmt::format("max s=1 rel diff {:.2e}, max sse(richards) - sse(logistic) {:.2e}", worst, worst_gap),
                seconds_since(t0), 0);
}

// 4 ---------------------------------------------------------------------------

Outcome criterion_layout() {
  auto t0 = Clock::now();
  Check c;
  std::vector<double> cases(90);
  for (std::size_t i = 0; i < cases.size(); ++i) cases[i] = 10.0 + static_cast<double>(i);
  auto panel = synthetic_panel(cases);
  const double exog_base[] = {1000, 2000, 3000, 4000, 5000};
  std::size_t steps = 0;
  for (int scenario = 1; scenario <= 4; ++scenario)
    for (std::size_t n : {30u, 52u, 75u}) {
      std::vector<std::vector<double>> seen;
      auto probe = [&](std::span<const double> row) {
        seen.emplace_back(row.begin(), row.end());
        return 1e6 + static_cast<double>(seen.size());
      };
      const std::size_t width = kCaseLags + exogenous_width(scenario);
      auto f = recurrent_forecast(probe, panel, panel.calendar.at(n), 14, scenario, ScalerParams::identity(width));
      c.expect(seen.size() == 14 && f.size() == 14, "probe not called once per step");
      if (seen.size() != 14 || f.size() != 14) continue;
      for (std::size_t k = 1; k <= 14; ++k) {
        const auto& row = seen[k - 1];
        ++steps;
        c.expect(row.size() == width, "row width");
        for (std::size_t j = 1; j <= kCaseLags; ++j) {
          const double expect = j < k ? f[k - 1 - j] : cases[n + k - j];
          c.expect(row[j - 1] == expect,
                   fmt::format("s{} n={} step {} lag_{}: got {} want {}", scenario, n, k, j, row[j - 1], expect));
        }
        for (std::size_t e = 0; e < exogenous_width(scenario); ++e) {
          const double expect = exog_base[e] + static_cast<double>(n + k - 14);
          c.expect(row[kCaseLags + e] == expect,
                   fmt::format("s{} n={} step {} exog {}: got {} want {}", scenario, n, k, e, row[kCaseLags + e],
                               expect));
        }
      }
    }
  return finish(c, fmt::format("{} probed steps over scenarios 1-4", steps), seconds_since(t0), 0);
}

// 5 ---------------------------------------------------------------------------

Outcome criterion_preprocessing(const DatasetBundle& waves) {
  auto t0 = Clock::now();
  Check c;

  // Mobility: three weeks with distinct Wednesday and Sunday observations.
  std::map<Date, double> obs;
  double v = 1.0;
  for (Date d = D("2021-03-03"); d <= D("2021-03-28"); d += std::chrono::days(1)) {
    const auto wd = iso_weekday(d);
    if (wd == 3 || wd == 7) obs[d] = 100.0 * v++;
  }
  const DateRange weeks(D("2021-03-08"), D("2021-03-28"));
  auto m = assign_mobility_days(obs, weeks);
  // Days back to the source observation, indexed by ISO weekday.
  const int back[8] = {0, 5, 6, 0, 1, 2, 6, 0};
  for (std::size_t i = 0; i < weeks.size(); ++i) {
    const Date d = weeks.at(i);
    const double expect = obs.at(d - std::chrono::days(back[iso_weekday(d)]));
    c.expect(m.flux[i] == expect, fmt::format("mobility {} got {} want {}", format_date(d), m.flux[i], expect));
  }

  // Vaccination: Sunday values equal weekly totals / 7, before and after the cutoff.
  CounterRng rng(505, 0);
  std::vector<WeeklyDoseRecord> weekly;
  std::map<std::pair<Date, int>, double> totals;
  for (unsigned w = 1; w <= 20; ++w)
    for (int dose = 1; dose <= 2; ++dose) {
      const auto doses = static_cast<std::int64_t>(1000 + rng.below(90000));
      weekly.push_back({IsoWeek{2021, w}, dose, doses});
      totals[{iso_week_monday(IsoWeek{2021, w}) + std::chrono::days(6), dose}] = static_cast<double>(doses);
    }
  const DateRange vcal(D("2021-01-04"), D("2021-05-23"));
  auto vax = daily_vaccination(weekly, vcal, D("2021-03-14"));
  std::size_t sundays = 0;
  for (const auto& [key, total] : totals) {
    const auto& [sunday, dose] = key;
    if (!vcal.contains(sunday)) continue;
    const auto i = vcal.index_of(sunday);
    const double got = dose == 1 ? vax.dose1_rate[i] : vax.dose2_rate[i];
    ++sundays;
    c.expect(std::abs(got - total / 7.0) <= 1e-9 * total,
             fmt::format("vaccination {} dose {} got {} want {}", format_date(sunday), dose, got, total / 7.0));
  }

  // Leak-freedom: every test row equals what a panel built only from data
  // published before its target day gives.
  const DateRange cal(D("2021-01-01"), D("2021-12-31"));
  const SplitDates splits{D("2021-09-02"), D("2021-10-02")};
  const PanelOptions popt{D("2021-08-29"), 7};
  auto full = build_panel(waves, "ES", cal, splits, popt);
  auto design = build_design_matrix(full, 4);
  std::size_t test_rows = 0;
  for (auto r : design.rows_in(Split::Test)) {
    const std::size_t t = design.day_index[r];
    const Date target = cal.at(t);
    DatasetBundle past;
    for (const auto& x : waves.cases)
      if (x.date < target) past.cases.push_back(x);
    for (const auto& x : waves.vaccination)
      if (iso_week_monday(x.iso_week) + std::chrono::days(6) < target) past.vaccination.push_back(x);
    for (const auto& x : waves.mobility)
      if (x.date < target) past.mobility.push_back(x);
    for (const auto& x : waves.weather)
      if (x.date < target) past.weather.push_back(x);
    const Date last = target - std::chrono::days(1);
    auto trunc = build_panel(past, "ES", DateRange(cal.first(), last),
                             SplitDates{splits.val_start, std::min(splits.test_start, last)}, popt);
    ++test_rows;
    for (std::size_t k = 1; k <= kCaseLags; ++k)
      c.expect(design.features(r, k - 1) == trunc.cases[t - k],
               fmt::format("row {} lag_{} differs from the truncated feed", format_date(target), k));
    const std::size_t e = t - 14;
    const double exog[] = {trunc.vax_dose1[e], trunc.vax_dose2[e], trunc.mobility[e], trunc.temperature[e],
                           trunc.precipitation[e]};
    for (std::size_t j = 0; j < 5; ++j)
      c.expect(design.features(r, kCaseLags + j) == exog[j],
               fmt::format("row {} {} differs from the truncated feed", format_date(target), design.columns[kCaseLags + j]));
  }
  c.expect(test_rows > 0, "no test rows");
  return finish(c,
                fmt::format("{} mobility days, {} vaccination Sundays, {} test rows leak-free", weeks.size(), sundays,
                            test_rows),
                seconds_since(t0), 1.0);
}

// 6 ---------------------------------------------------------------------------

void random_problem(std::uint64_t seed, std::size_t n, std::size_t d, RowMatrix& x, std::vector<double>& y) {
  CounterRng rng(seed, 0);
  x = RowMatrix();
  y.clear();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r(d);
    for (auto& v : r) v = 4 * rng.uniform() - 2;
    x.append_row(r);
    y.push_back(std::sin(r[0]) + r[1] * r[1] / 4 + 0.5 * r[2] + 0.05 * rng.normal());
  }
}

Outcome criterion_regressors() {
  auto t0 = Clock::now();
  Check c;
  RowMatrix x;
  std::vector<double> y;

  random_problem(601, 120, 4, x, y);
  auto knn = fit_regressor(RegressorKind::KNN, x, y, KnnParams{1}, 0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    c.expect(knn.predict(x.row(i)) == y[i], fmt::format("knn self-query row {}", i));

  random_problem(602, 40, 3, x, y);
  auto krr = fit_regressor(RegressorKind::KernelRidge, x, y, KernelRidgeParams{1e-10, 1.0}, 0);
  double krr_worst = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) krr_worst = std::max(krr_worst, std::abs(krr.predict(x.row(i)) - y[i]));
  c.expect(krr_worst < 1e-6, fmt::format("krr residual {:.2e}", krr_worst));

  random_problem(603, 150, 3, x, y);
  auto gb = GradientBoosting::fit(x, y, BoostingParams{0.1, 60, 3});
  auto stage_rmse = [&](std::size_t s) {
    double se = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) se += std::pow(gb.predict(x.row(i), s) - y[i], 2);
    return std::sqrt(se / static_cast<double>(x.rows()));
  };
  double prev = stage_rmse(0);
  const double first = prev;
  for (std::size_t s = 1; s <= gb.stages(); ++s) {
    const double cur = stage_rmse(s);
    c.expect(cur <= prev + 1e-12, fmt::format("gb stage {} rmse rose {} -> {}", s, prev, cur));
    prev = cur;
  }

  auto rf_model = fit_regressor(RegressorKind::RandomForest, x, y, ForestParams{6, 40, true}, 17);
  const auto& rf = std::get<RandomForest>(rf_model.model());
  CounterRng rng(604, 0);
  double rf_worst = 0;
  for (int q = 0; q < 50; ++q) {
    std::vector<double> row = {4 * rng.uniform() - 2, 4 * rng.uniform() - 2, 4 * rng.uniform() - 2};
    double sum = 0;
    for (const auto& t : rf.trees()) sum += t.predict(row);
    const double mean = sum / static_cast<double>(rf.trees().size());
    rf_worst = std::max(rf_worst, std::abs(rf_model.predict(row) - mean));
  }
  c.expect(rf_worst <= 1e-12, fmt::format("rf differs from tree mean by {:.2e}", rf_worst));
  return finish(c,
                fmt::format("knn exact; krr residual {:.2e}; gb rmse {:.3f} -> {:.3f} over {} stages; rf gap {:.1e}",
                            krr_worst, first, prev, gb.stages(), rf_worst),
                seconds_since(t0), 10.0);
}

// 7 ---------------------------------------------------------------------------

Outcome criterion_cancellation() {
  auto t0 = Clock::now();
  Check c;
  CounterRng rng(707, 0);
  std::vector<double> actual(14), up(14), down(14);
  for (std::size_t k = 0; k < 14; ++k) {
    actual[k] = 100.0 + 10000.0 * rng.uniform();
    up[k] = 1.1 * actual[k];
    down[k] = 0.9 * actual[k];
  }
  ForecastSet set(D("2021-10-01"));
  set.add({"over", ModelFamily::ML, up});
  set.add({"under", ModelFamily::Pop, down});
  const double m_up = mape(up, actual), m_down = mape(down, actual);
  const double m_mean = mape(aggregate(set, Aggregation::Mean, Subset::All), actual);
  c.expect(std::abs(m_up - 0.10) <= 1e-12, fmt::format("over-member mape {}", m_up));
  c.expect(std::abs(m_down - 0.10) <= 1e-12, fmt::format("under-member mape {}", m_down));
  c.expect(std::abs(m_mean) <= 1e-12, fmt::format("mean mape {:.2e}", m_mean));

  auto w = wavg_weights({{"over", 1.0}, {"under", 3.0}});
  const double w1 = *w.weight("over"), w3 = *w.weight("under");
  c.expect(w1 == 0.75 && w3 == 0.25, fmt::format("weights {:.17g}, {:.17g}", w1, w3));
  return finish(c, fmt::format("member mape {:.12f} / {:.12f}, mean mape {:.1e}; weights {} / {}", m_up, m_down,
                               m_mean, w1, w3),
                seconds_since(t0), 0);
}

// 8 ---------------------------------------------------------------------------

// Shapley values straight from the permutation definition: the average
// marginal contribution over all d! orderings.
std::vector<double> permutation_oracle(const PredictFn& f, const std::vector<double>& x, const std::vector<double>& base) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(x.size(), 0.0);
  double count = 0;
  do {
    auto z = base;
    double prev = f(z);
    for (auto j : order) {
      z[j] = x[j];
      const double cur = f(z);
      phi[j] += cur - prev;
      prev = cur;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& p : phi) p /= count;
  return phi;
}

Outcome criterion_shapley() {
  auto t0 = Clock::now();
  Check c;
  CounterRng rng(808, 0);

  // Test models: an interaction polynomial, a fitted boosted ensemble and a
  // fitted kernel model. Feature 4 of the first two is never read (dummy).
  RowMatrix x;
  std::vector<double> y;
  random_problem(809, 200, 4, x, y);
  auto gb = fit_regressor(RegressorKind::GradientBoosting, x, y, BoostingParams{0.1, 50, 3}, 0);
  auto krr = fit_regressor(RegressorKind::KernelRidge, x, y, KernelRidgeParams{0.1, 0.5}, 0);
  struct Model {
    std::string name;
    PredictFn f;
    std::size_t d;
    bool dummy_last;
  };
  std::vector<Model> models = {
      {"poly",
       [](std::span<const double> z) {
         return 2 * z[0] - z[1] + z[0] * z[2] + std::sin(z[3]) * z[1] + (z[0] > 0.3 ? 1.0 : 0.0);
       },
       5, true},
      {"boosting", [&](std::span<const double> z) { return gb.predict(z.first(4)); }, 5, true},
      {"kernel", [&](std::span<const double> z) { return krr.predict(z); }, 4, false},
  };

  double eff_worst = 0, sampled_worst = 0;
  std::size_t instances = 0;
  for (const auto& m : models)
    for (int inst = 0; inst < 4; ++inst) {
      std::vector<double> xi(m.d), base(m.d);
      for (std::size_t j = 0; j < m.d; ++j) {
        xi[j] = 4 * rng.uniform() - 2;
        base[j] = 2 * rng.uniform() - 1;
      }
      ++instances;
      auto exact = shapley_exact(m.f, xi, base);
      const double sum = std::accumulate(exact.phi.begin(), exact.phi.end(), 0.0);
      const double eff = std::abs(sum - (exact.prediction - exact.base_value));
      eff_worst = std::max(eff_worst, eff);
      c.expect(eff <= 1e-9, fmt::format("{} efficiency gap {:.2e}", m.name, eff));
      c.expect(exact.prediction == m.f(xi) && exact.base_value == m.f(base), m.name + " base/prediction");
      if (m.dummy_last)
        c.expect(std::abs(exact.phi[m.d - 1]) <= 1e-12, fmt::format("{} dummy phi {:.2e}", m.name, exact.phi[m.d - 1]));

      auto oracle = permutation_oracle(m.f, xi, base);
      double max_abs = 0;
      for (double p : oracle) max_abs = std::max(max_abs, std::abs(p));
      for (std::size_t j = 0; j < m.d; ++j)
        c.expect(std::abs(exact.phi[j] - oracle[j]) <= 1e-9 * std::max(1.0, max_abs),
                 fmt::format("{} exact vs oracle feature {}", m.name, j));
      auto sampled = shapley_sampled(m.f, xi, base, 2000, 42, static_cast<std::uint64_t>(instances));
      for (std::size_t j = 0; j < m.d; ++j) {
        const double rel = std::abs(sampled.phi[j] - oracle[j]) / max_abs;
        sampled_worst = std::max(sampled_worst, rel);
        c.expect(rel <= 0.05, fmt::format("{} sampled feature {} off by {:.3f} of max|phi|", m.name, j, rel));
      }
    }

  // Symmetry: features 0 and 1 are interchangeable when they share instance
  // and baseline values.
  auto sym = [](std::span<const double> z) { return std::exp(0.3 * (z[0] + z[1])) + z[0] * z[1] * z[2] + z[3]; };
  double sym_worst = 0;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> xi(4), base(4);
    for (std::size_t j = 0; j < 4; ++j) {
      xi[j] = 4 * rng.uniform() - 2;
      base[j] = 2 * rng.uniform() - 1;
    }
    xi[1] = xi[0];
    base[1] = base[0];
    auto r = shapley_exact(sym, xi, base);
    sym_worst = std::max(sym_worst, std::abs(r.phi[0] - r.phi[1]));
    c.expect(std::abs(r.phi[0] - r.phi[1]) <= 1e-12, fmt::format("symmetry gap {:.2e}", r.phi[0] - r.phi[1]));
  }
  return finish(c,
                fmt::format("{} instances; efficiency gap {:.1e}, symmetry gap {:.1e}, sampled error {:.3f} of max|phi|",
                            instances, eff_worst, sym_worst, sampled_worst),
                seconds_since(t0), 30.0);
}

// 9 ---------------------------------------------------------------------------

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files[e.path().filename().string()] = read_file(e.path());
  return files;
}

const MetricsCell* find_cell(const Evaluation& e, std::optional<int> scenario, Subset subset) {
  for (const auto& cell : e.cells)
    if (cell.scenario == scenario && cell.subset == subset && cell.aggregation == Aggregation::Mean &&
        cell.period == "all")
      return &cell;
  return nullptr;
}

Outcome criterion_end_to_end(const fs::path& work) {
  auto t0 = Clock::now();
  Check c;
  const fs::path fixture = work / "opposite_bias";
  make_fixtures({42, FixtureProfile::OppositeBias}, fixture);
  auto config = load_config(fixture / "experiment.ini");
  c.expect(config.scenarios.size() == 4 && config.pop_models.size() == 4 && config.ml_models.size() == 4 &&
               config.aggregations.size() == 3,
           "fixture config is not the full 4+4 model, 4 scenario, 3 aggregation setup");

  std::vector<double> times;
  std::vector<std::map<std::string, std::string>> outputs;
  std::optional<Evaluation> evaluation;
  for (const char* run : {"run_a", "run_b"}) {
    auto t = Clock::now();
    config.out_dir = work / run;
    fs::remove_all(config.out_dir);
    auto result = run_pipeline(config, load_bundle(config.data));
    write_reports(result, config);
    times.push_back(seconds_since(t));
    outputs.push_back(read_tree(config.out_dir));
    if (!evaluation) evaluation = result.evaluation;
  }
  for (double t : times) c.expect(t < 300.0, fmt::format("run took {:.1f} s", t));
  c.expect(outputs[0].size() >= 5, "too few report files");
  c.expect(outputs[0] == outputs[1], "reports differ between identical runs");

  std::string margins;
  c.expect(evaluation.has_value(), "no evaluation");
  if (evaluation) {
    const auto* pop = find_cell(*evaluation, std::nullopt, Subset::Pop);
    c.expect(pop != nullptr, "missing Pop mean cell");
    for (int s : config.scenarios) {
      const auto* ml = find_cell(*evaluation, s, Subset::ML);
      const auto* all = find_cell(*evaluation, s, Subset::All);
      if (!pop || !ml || !all) {
        c.expect(false, fmt::format("missing cells for scenario {}", s));
        continue;
      }
      const double better = std::min(ml->mape, pop->mape);
      margins += fmt::format("{}s{} All {:.3f} / ML {:.3f} / Pop {:.3f}", margins.empty() ? "" : "; ", s, all->mape,
                             ml->mape, pop->mape);
      c.expect(all->mape <= better, fmt::format("scenario {}: All {:.4f} > min(ML, Pop) {:.4f}", s, all->mape, better));
    }
  }
  return finish(c,
                fmt::format("runs {:.1f} s / {:.1f} s, {} identical files; {}", times[0], times[1], outputs[0].size(),
                            margins),
                seconds_since(t0), 0);
}

// 10 --------------------------------------------------------------------------

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

Outcome criterion_lag_ordering(const fs::path& work) {
  auto t0 = Clock::now();
  Check c;
  const fs::path fixture = work / "waves";
  make_fixtures({42, FixtureProfile::Waves}, fixture);
  auto config = load_config(fixture / "experiment.ini");
  auto result = run_pipeline(config, load_bundle(config.data), PipelineStages{false, true});
  c.expect(result.attribution.has_value(), "no attribution");
  if (!result.attribution) return finish(c, "", seconds_since(t0), 0);
  const auto& report = result.attribution->report;

  std::vector<double> lag_index, importance;
  for (std::size_t k = 1; k <= kCaseLags; ++k) {
    auto it = std::find(report.features.begin(), report.features.end(), fmt::format("lag_{}", k));
    c.expect(it != report.features.end(), fmt::format("lag_{} missing", k));
    if (it == report.features.end()) continue;
    lag_index.push_back(static_cast<double>(k));
    importance.push_back(report.mean_abs[static_cast<std::size_t>(it - report.features.begin())]);
  }
  if (importance.size() != kCaseLags) return finish(c, "", seconds_since(t0), 0);

  const auto top = std::max_element(importance.begin(), importance.end()) - importance.begin();
  c.expect(top == 0, fmt::format("largest lag importance is lag_{}", top + 1));

  const double rho = pearson(average_ranks(lag_index), average_ranks(importance));
  const double n = static_cast<double>(importance.size());
  double p = 0.0;
  if (std::abs(rho) < 1.0) {
    const double t = rho * std::sqrt((n - 2) / (1 - rho * rho));
    boost::math::students_t dist(n - 2);
    p = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  c.expect(rho < 0, fmt::format("rank correlation {:.3f} is not negative", rho));
  c.expect(p < 0.05, fmt::format("two-sided p = {:.3g}", p));
  return finish(c,
                fmt::format("scenario {}, lag_1 |shap| {:.4g} vs lag_14 {:.4g}; spearman rho {:.3f}, p {:.2g}",
                            result.attribution->scenario, importance.front(), importance.back(), rho, p),
                seconds_since(t0), 0);
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "epiforge_acceptance";
  fs::create_directories(work);

  const auto waves = generate_fixtures({42, FixtureProfile::Waves});
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"ode-closed-form consistency", criterion_ode},
      {"three-point recovery", criterion_recovery},
      {"richards/logistic nesting", criterion_nesting},
      {"recurrent forecast layout", criterion_layout},
      {"preprocessing rules", [&] { return criterion_preprocessing(waves); }},
      {"regressor oracles", criterion_regressors},
      {"ensemble cancellation", criterion_cancellation},
      {"shapley axioms", criterion_shapley},
      {"end-to-end opposite-bias run", [&] { return criterion_end_to_end(work); }},
      {"lag importance ordering", [&] { return criterion_lag_ordering(work); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %-30s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
