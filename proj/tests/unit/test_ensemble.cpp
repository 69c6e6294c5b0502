#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "epiforge/ensemble.hpp"
#include "epiforge/error.hpp"
#include "epiforge/rng.hpp"
#include "toy_data.hpp"

using namespace epiforge;
using epiforge::testing::D;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an epiforge::Error");
  return Errc::InvalidArgument;
}

ForecastSet set_of(std::vector<MemberForecast> members) {
  ForecastSet s(D("2021-10-01"));
  for (auto& m : members) s.add(std::move(m));
  return s;
}

ForecastSet random_set(CounterRng& rng, std::size_t members, std::size_t horizon) {
  ForecastSet s(D("2021-10-01"));
  for (std::size_t m = 0; m < members; ++m) {
    MemberForecast f{"m" + std::to_string(m), m % 2 ? ModelFamily::Pop : ModelFamily::ML, {}};
    for (std::size_t k = 0; k < horizon; ++k) f.values.push_back(1000 * rng.uniform());
    s.add(std::move(f));
  }
  return s;
}

}  // namespace

TEST_SUITE("ensemble") {
  TEST_CASE("MAPE and RMSE") {
    std::vector<double> pred = {110, 90}, actual = {100, 100};
    CHECK(mape(pred, actual) == doctest::Approx(0.10));
    CHECK(rmse(pred, actual) == doctest::Approx(10.0));
    CHECK(mape(actual, actual) == 0.0);
    CHECK(rmse(actual, actual) == 0.0);
    CHECK(rmse(std::vector<double>{103}, std::vector<double>{100}) == doctest::Approx(3.0));
    CHECK(code_of([] { mape(std::vector<double>{1, 2}, std::vector<double>{0, 2}); }) == Errc::ZeroActual);
    CHECK(code_of([] { rmse(std::vector<double>{1, 2}, std::vector<double>{1}); }) == Errc::LengthMismatch);
    CHECK(code_of([] { rmse(std::vector<double>{}, std::vector<double>{}); }) == Errc::LengthMismatch);
    auto rel = relative_errors(pred, actual);
    CHECK(rel[0] == doctest::Approx(0.1));
    CHECK(rel[1] == doctest::Approx(-0.1));
  }

  TEST_CASE("inverse-RMSE weights") {
    auto w = wavg_weights({{"a", 1.0}, {"b", 3.0}});
    CHECK(*w.weight("a") == doctest::Approx(0.75));
    CHECK(*w.weight("b") == doctest::Approx(0.25));
    CHECK_FALSE(w.weight("c"));
    auto u = wavg_weights({{"a", 2.0}, {"b", 2.0}, {"c", 2.0}});
    for (const auto& [_, v] : u.weights()) CHECK(v == doctest::Approx(1.0 / 3.0));
    CHECK(code_of([] { wavg_weights({{"a", 0.0}}); }) == Errc::ZeroRmse);
    CHECK(code_of([] { EnsembleWeights({{"a", -1.0}, {"b", 2.0}}); }) == Errc::InvalidArgument);

    auto s = set_of({{"a", ModelFamily::ML, {100}}, {"b", ModelFamily::ML, {200}}});
    CHECK(aggregate(s, Aggregation::Wavg, Subset::All, &w)[0] == doctest::Approx(125.0));
  }

  TEST_CASE("mean and median") {
    auto s = set_of({{"a", ModelFamily::ML, {10, 10}}, {"b", ModelFamily::Pop, {20, 20}}});
    CHECK(aggregate(s, Aggregation::Mean, Subset::All) == std::vector<double>{15, 15});
    CHECK(aggregate(s, Aggregation::Mean, Subset::ML) == std::vector<double>{10, 10});
    CHECK(aggregate(s, Aggregation::Median, Subset::All) == std::vector<double>{15, 15});
    auto t = set_of({{"a", ModelFamily::ML, {1}}, {"b", ModelFamily::ML, {100}}, {"c", ModelFamily::Pop, {2}}});
    CHECK(aggregate(t, Aggregation::Median, Subset::All)[0] == 2.0);
  }

  TEST_CASE("opposite biases cancel under the mean") {
    std::vector<double> actual(14, 100.0);
    auto s = set_of({{"up", ModelFamily::ML, std::vector<double>(14, 110.0)},
                     {"down", ModelFamily::Pop, std::vector<double>(14, 90.0)}});
    CHECK(mape(s.find("up")->values, actual) == doctest::Approx(0.10));
    CHECK(mape(s.find("down")->values, actual) == doctest::Approx(0.10));
    CHECK(mape(aggregate(s, Aggregation::Mean, Subset::All), actual) == 0.0);
  }

  TEST_CASE("forecast set bookkeeping") {
    ForecastSet s(D("2021-10-01"));
    s.add({"a", ModelFamily::ML, {1, 2, 3}});
    CHECK(s.horizon() == 3);
    CHECK(code_of([&] { s.add({"a", ModelFamily::Pop, {1, 2, 3}}); }) == Errc::InvalidArgument);
    CHECK(code_of([&] { s.add({"b", ModelFamily::Pop, {1, 2}}); }) == Errc::LengthMismatch);
    CHECK(code_of([&] { aggregate(s, Aggregation::Mean, Subset::Pop); }) == Errc::EmptySubset);
    CHECK(code_of([&] { aggregate(s, Aggregation::Wavg, Subset::All); }) == Errc::MissingWeight);
    EnsembleWeights other({{"z", 1.0}});
    CHECK(code_of([&] { aggregate(s, Aggregation::Wavg, Subset::All, &other); }) == Errc::MissingWeight);
    CHECK(subset_from_string("pop") == Subset::Pop);
    CHECK(aggregation_from_string("wavg") == Aggregation::Wavg);
    CHECK(code_of([] { aggregation_from_string("max"); }) == Errc::InvalidArgument);
  }

  TEST_CASE("aggregation properties") {
    CounterRng rng(12, 0);
    const Aggregation all[] = {Aggregation::Mean, Aggregation::Median, Aggregation::Wavg};
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + rng.below(7), h = 1 + rng.below(14);
      auto s = random_set(rng, n, h);
      std::map<std::string, double> raw;
      for (const auto& m : s.members()) raw[m.id] = 0.1 + rng.uniform();
      EnsembleWeights w(raw);

      // Reversed member order.
      ForecastSet rev(s.anchor());
      for (auto it = s.members().rbegin(); it != s.members().rend(); ++it) rev.add(*it);

      for (auto method : all) {
        auto agg = aggregate(s, method, Subset::All, &w);
        CHECK(aggregate(rev, method, Subset::All, &w) == agg);
        for (std::size_t k = 0; k < h; ++k) {
          double lo = 1e300, hi = -1e300;
          for (const auto& m : s.members()) {
            lo = std::min(lo, m.values[k]);
            hi = std::max(hi, m.values[k]);
          }
          CHECK(agg[k] >= lo);
          CHECK(agg[k] <= hi);
        }
      }

      // Uniform weights reproduce the mean.
      std::map<std::string, double> flat;
      for (const auto& m : s.members()) flat[m.id] = 1.0;
      EnsembleWeights uw(flat);
      auto mean = aggregate(s, Aggregation::Mean, Subset::All);
      auto wavg = aggregate(s, Aggregation::Wavg, Subset::All, &uw);
      for (std::size_t k = 0; k < h; ++k) CHECK(std::abs(mean[k] - wavg[k]) <= 1e-12 * std::max(1.0, mean[k]));

      // Identical members pass through unchanged.
      ForecastSet same(s.anchor());
      for (std::size_t m = 0; m < n; ++m)
        same.add({"c" + std::to_string(m), ModelFamily::ML, s.members().front().values});
      std::map<std::string, double> sw;
      for (const auto& m : same.members()) sw[m.id] = 0.5 + rng.uniform();
      EnsembleWeights samew(sw);
      for (auto method : all)
        CHECK(aggregate(same, method, Subset::All, &samew) == s.members().front().values);
    }
  }

  TEST_CASE("normalized weights sum to one") {
    CounterRng rng(13, 0);
    for (int trial = 0; trial < 100; ++trial) {
      std::map<std::string, double> r;
      for (std::size_t i = 0; i < 1 + rng.below(8); ++i) r["m" + std::to_string(i)] = 0.01 + 100 * rng.uniform();
      auto w = wavg_weights(r);
      double sum = 0;
      for (const auto& [id, v] : w.weights()) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("per-timestep MPE") {
    std::vector<double> actual = {100, 200, 400};
    auto biased = set_of({{"a", ModelFamily::ML, {110, 220, 440}}});
    std::vector<AnchoredForecast> one = {{&biased, actual}};
    auto r = mpe_per_timestep(one);
    REQUIRE(r.count(ModelFamily::ML));
    for (double v : r[ModelFamily::ML].mean) CHECK(v == doctest::Approx(0.10));
    CHECK_FALSE(r.count(ModelFamily::Pop));

    auto pair = set_of({{"up", ModelFamily::Pop, {105, 210, 420}}, {"down", ModelFamily::Pop, {95, 190, 380}}});
    std::vector<AnchoredForecast> two = {{&pair, actual}};
    auto p = mpe_per_timestep(two);
    for (double v : p[ModelFamily::Pop].mean) CHECK(std::abs(v) < 1e-12);
    for (double v : p[ModelFamily::Pop].std) CHECK(v == doctest::Approx(0.05));
    CHECK(p[ModelFamily::Pop].members == 2);

    auto single = set_of({{"x", ModelFamily::ML, {90, 260, 400}}});
    std::vector<AnchoredForecast> s1 = {{&single, actual}};
    CHECK(mpe_per_timestep(s1)[ModelFamily::ML].mean == relative_errors(single.find("x")->values, actual));
  }

  TEST_CASE("pooled MPE over anchors matches a direct average") {
    CounterRng rng(14, 0);
    std::vector<ForecastSet> sets;
    std::vector<std::vector<double>> actuals;
    for (int a = 0; a < 6; ++a) {
      sets.push_back(random_set(rng, 4, 5));
      std::vector<double> act;
      for (int k = 0; k < 5; ++k) act.push_back(1 + 1000 * rng.uniform());
      actuals.push_back(act);
    }
    std::vector<AnchoredForecast> af;
    for (std::size_t a = 0; a < sets.size(); ++a) af.push_back({&sets[a], actuals[a]});
    auto r = mpe_per_timestep(af);
    for (auto fam : {ModelFamily::ML, ModelFamily::Pop}) {
      for (std::size_t k = 0; k < 5; ++k) {
        double sum = 0;
        int count = 0;
        for (std::size_t a = 0; a < sets.size(); ++a)
          for (const auto& m : sets[a].members())
            if (m.family == fam) {
              sum += (m.values[k] - actuals[a][k]) / actuals[a][k];
              ++count;
            }
        CHECK(r[fam].mean[k] == doctest::Approx(sum / count));
      }
    }
  }

  TEST_CASE("metrics cells average per-anchor errors") {
    auto s1 = set_of({{"a", ModelFamily::ML, {110, 110}}, {"b", ModelFamily::Pop, {100, 100}}});
    auto s2 = set_of({{"a", ModelFamily::ML, {100, 100}}, {"b", ModelFamily::Pop, {80, 80}}});
    std::vector<double> act = {100, 100};
    std::vector<AnchoredForecast> af = {{&s1, act}, {&s2, act}};
    auto ml = evaluate_cell(af, Aggregation::Mean, Subset::ML);
    CHECK(ml.anchors == 2);
    CHECK(ml.mape == doctest::Approx(0.05));
    CHECK(ml.rmse == doctest::Approx(5.0));
    auto all = evaluate_cell(af, Aggregation::Mean, Subset::All);
    CHECK(all.mape == doctest::Approx((0.05 + 0.10) / 2));
    REQUIRE(all.per_timestep_mpe.size() == 2);
    CHECK(all.per_timestep_mpe[0] == doctest::Approx((0.05 - 0.10) / 2));

    nlohmann::json j = all;
    CHECK(j["aggregation"] == "mean");
    CHECK(j["subset"] == "All");
    CHECK(j["scenario"].is_null());
    CHECK(j["per_timestep_mpe"].size() == 2);
  }
}
