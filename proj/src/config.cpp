#include "epiforge/config.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "epiforge/csv.hpp"
#include "epiforge/error.hpp"

namespace epiforge {

namespace {

constexpr const char* kModule = "config";
namespace pt = boost::property_tree;

[[noreturn]] void bad(const std::string& key, const std::string& value, std::string_view what) {
  throw Error(Errc::InvalidConfig, kModule, fmt::format("{} = '{}': {}", key, value, what));
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "expected an integer");
  return x;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) bad(key, v, "expected a number");
    return x;
  } catch (const std::logic_error&) {
    bad(key, v, "expected a number");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, v, "expected true or false");
}

Date to_date(const std::string& key, const std::string& v) {
  auto d = try_parse_date(v);
  if (!d) bad(key, v, "expected YYYY-MM-DD");
  return *d;
}

template <class T, class F>
std::vector<T> to_list(const std::string& key, const std::string& v, F convert) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(convert(key, item));
  if (out.empty()) bad(key, v, "empty list");
  return out;
}

int to_depth(const std::string& key, const std::string& v) {
  if (v == "none" || v == "unlimited") return kUnlimitedDepth;
  auto d = to_int(key, v);
  if (d < 1) bad(key, v, "depth must be >= 1 or none");
  return static_cast<int>(d);
}

struct GridSpec {
  std::vector<int> rf_depth{4, 8, 16, kUnlimitedDepth};
  std::vector<int> rf_trees{50, 100, 200};
  std::vector<double> gb_rate{0.01, 0.05, 0.1, 0.3};
  std::vector<int> gb_trees{50, 100, 200};
  int gb_depth = 6;
  std::vector<int> knn_k{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  std::vector<double> krr_alpha{1e-3, 1e-2, 1e-1, 1.0, 10.0};
  std::vector<double> krr_gamma{1e-3, 1e-2, 1e-1, 1.0, 10.0};
  std::size_t folds = 5;

  std::map<RegressorKind, HyperGrid> build() const {
    std::map<RegressorKind, HyperGrid> g;
    for (auto k : kRegressorKinds) g[k].folds = folds;
    for (int d : rf_depth)
      for (int n : rf_trees) g[RegressorKind::RandomForest].candidates.push_back(ForestParams{d, n, true});
    for (double r : gb_rate)
      for (int n : gb_trees) g[RegressorKind::GradientBoosting].candidates.push_back(BoostingParams{r, n, gb_depth});
    for (int k : knn_k) g[RegressorKind::KNN].candidates.push_back(KnnParams{k});
    for (double a : krr_alpha)
      for (double gm : krr_gamma) g[RegressorKind::KernelRidge].candidates.push_back(KernelRidgeParams{a, gm});
    return g;
  }
};

RegressorKind regressor_from_string(const std::string& key, const std::string& v) {
  for (auto k : kRegressorKinds)
    if (to_string(k) == v) return k;
  bad(key, v, "unknown regressor");
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](std::string msg) { throw Error(Errc::InvalidConfig, kModule, std::move(msg)); };
  if (horizon < 1) fail("horizon must be >= 1");
  if (window < 3) fail("window must be >= 3");
  if (scenarios.empty()) fail("no scenarios selected");
  for (int s : scenarios)
    if (s < 1 || s > 4) fail(fmt::format("scenario {} is not one of 1..4", s));
  if (!(start < end)) fail("start must precede end");
  if (!(start < splits.val_start && splits.val_start < splits.test_start && splits.test_start <= end))
    fail("split dates must satisfy start < val_start < test_start <= end");
  if (horizon > features.exog_lag)
    fail(fmt::format("horizon {} exceeds the exogenous lag {}", horizon, features.exog_lag));
  if (aggregations.empty()) fail("no aggregations selected");
  for (const auto& [kind, grid] : grids)
    if (grid.candidates.empty()) fail(fmt::format("empty grid for {}", to_string(kind)));
  if (explain.enabled && (explain.scenario < 1 || explain.scenario > 4))
    fail(fmt::format("explain scenario {} is not one of 1..4", explain.scenario));
  if (explain.permutations < 1) fail("explain permutations must be >= 1");
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.grids = GridSpec{}.build();
  return c;
}

ExperimentConfig parse_config(std::string_view ini_text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(ini_text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(Errc::InvalidConfig, kModule, fmt::format("line {}: {}", e.line(), e.message()));
  }

  ExperimentConfig c = default_config();
  GridSpec grid;
  auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() ? p : base_dir / p;
  };

  for (const auto& [section, entries] : tree) {
    if (!entries.data().empty())
      throw Error(Errc::InvalidConfig, kModule, fmt::format("key '{}' outside of a section", section));
    for (const auto& [name, node] : entries) {
      const std::string key = section + "." + name;
      const std::string v = trim(node.data());
      if (key == "data.cases") c.data.cases = path(v);
      else if (key == "data.vaccination") c.data.vaccination = path(v);
      else if (key == "data.mobility") c.data.mobility = path(v);
      else if (key == "data.weather") c.data.weather = path(v);
      else if (key == "experiment.region") c.region = v;
      else if (key == "experiment.start") c.start = to_date(key, v);
      else if (key == "experiment.end") c.end = to_date(key, v);
      else if (key == "experiment.val_start") c.splits.val_start = to_date(key, v);
      else if (key == "experiment.test_start") c.splits.test_start = to_date(key, v);
      else if (key == "experiment.vax_interp_cutoff") c.vax_interp_cutoff = to_date(key, v);
      else if (key == "experiment.omicron_date") c.omicron_date = to_date(key, v);
      else if (key == "experiment.scenarios")
        c.scenarios = to_list<int>(key, v, [](auto& k, auto& s) { return static_cast<int>(to_int(k, s)); });
      else if (key == "experiment.models") {
        try {
          c.models = subset_from_string(v);
        } catch (const Error&) {
          bad(key, v, "expected ml, pop or all");
        }
      } else if (key == "experiment.aggregations") {
        c.aggregations = to_list<Aggregation>(key, v, [](auto& k, auto& s) {
          try {
            return aggregation_from_string(s);
          } catch (const Error&) {
            bad(k, s, "expected mean, median or wavg");
          }
        });
      } else if (key == "experiment.pop_models") {
        c.pop_models = to_list<GrowthModelKind>(key, v, [](auto& k, auto& s) {
          try {
            return growth_model_from_string(s);
          } catch (const Error&) {
            bad(k, s, "unknown population model");
          }
        });
      } else if (key == "experiment.ml_models") {
        c.ml_models = to_list<RegressorKind>(key, v, regressor_from_string);
      } else if (key == "experiment.window") c.window = static_cast<std::size_t>(to_int(key, v));
      else if (key == "experiment.horizon") c.horizon = static_cast<std::size_t>(to_int(key, v));
      else if (key == "experiment.exog_lag") c.features.exog_lag = static_cast<std::size_t>(to_int(key, v));
      else if (key == "experiment.weekday_feature") c.features.weekday_feature = to_bool(key, v);
      else if (key == "experiment.seed") c.seed = static_cast<std::uint64_t>(to_int(key, v));
      else if (key == "grids.folds") grid.folds = static_cast<std::size_t>(to_int(key, v));
      else if (key == "grids.rf_max_depth") grid.rf_depth = to_list<int>(key, v, to_depth);
      else if (key == "grids.rf_n_estimators")
        grid.rf_trees = to_list<int>(key, v, [](auto& k, auto& s) { return static_cast<int>(to_int(k, s)); });
      else if (key == "grids.gb_learning_rate") grid.gb_rate = to_list<double>(key, v, to_double);
      else if (key == "grids.gb_n_estimators")
        grid.gb_trees = to_list<int>(key, v, [](auto& k, auto& s) { return static_cast<int>(to_int(k, s)); });
      else if (key == "grids.gb_max_depth") grid.gb_depth = to_depth(key, v);
      else if (key == "grids.knn_k")
        grid.knn_k = to_list<int>(key, v, [](auto& k, auto& s) { return static_cast<int>(to_int(k, s)); });
      else if (key == "grids.krr_alpha") grid.krr_alpha = to_list<double>(key, v, to_double);
      else if (key == "grids.krr_gamma") grid.krr_gamma = to_list<double>(key, v, to_double);
      else if (key == "explain.enabled") c.explain.enabled = to_bool(key, v);
      else if (key == "explain.scenario") c.explain.scenario = static_cast<int>(to_int(key, v));
      else if (key == "explain.permutations") c.explain.permutations = static_cast<std::size_t>(to_int(key, v));
      else if (key == "explain.dependence") c.explain.dependence_features = split_list(v);
      else if (key == "output.dir") c.out_dir = path(v);
      else if (key == "output.charts") c.charts = to_bool(key, v);
      else throw Error(Errc::InvalidConfig, kModule, fmt::format("unknown key '{}'", key));
    }
  }
  c.grids = grid.build();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(Errc::InvalidConfig, kModule, fmt::format("cannot read {}: {}", path.string(), e.what()));
  }
  auto base = path.parent_path();
  return parse_config(text, base.empty() ? std::filesystem::path(".") : base);
}

}  // namespace epiforge
