#include "epiforge/fixtures.hpp"

#include <cmath>

#include <fmt/format.h>

#include "epiforge/csv.hpp"
#include "epiforge/error.hpp"
#include "epiforge/rng.hpp"

namespace epiforge {

namespace {

constexpr const char* kModule = "fixtures";
constexpr double kPi = 3.14159265358979323846;

const Date kFeedStart = parse_date("2020-12-01");
const Date kFeedEnd = parse_date("2021-12-31");
const Date kYearStart = parse_date("2021-01-01");

struct Wave {
  double peak;    // day offset from 2021-01-01
  double height;  // daily cases at the peak
  double width;   // days
};

// Logistic-derivative pulse: height * sech^2((d - peak) / width).
double pulse(const Wave& w, double d) {
  const double c = std::cosh((d - w.peak) / w.width);
  return w.height / (c * c);
}

struct Profile {
  std::vector<Wave> waves;
  double floor_high;
  double floor_low;
  double floor_drop_day;  // centre of the floor transition
  double floor_drop_width;
  double weekly_amplitude;
  double noise;
};

Profile profile_for(FixtureProfile p) {
  switch (p) {
    case FixtureProfile::Waves:
      return {{{20, 30000, 9}, {95, 9000, 12}, {200, 22000, 10}, {372, 60000, 9}}, 900, 900, 0, 1, 0.08, 0.05};
    case FixtureProfile::OppositeBias:
      return {{{25, 9000, 10}, {100, 5000, 12}, {195, 8000, 10}}, 4000, 1500, 252, 4, 0.04, 0.03};
  }
  return profile_for(FixtureProfile::Waves);
}

double national_intensity(const Profile& p, double d) {
  double v = p.floor_low + (p.floor_high - p.floor_low) / (1.0 + std::exp((d - p.floor_drop_day) / p.floor_drop_width));
  for (const auto& w : p.waves) v += pulse(w, d);
  return v;
}

struct RegionShape {
  std::string_view code;
  double share;
  double shift;  // days the local curve lags the national one
};

constexpr RegionShape kCaseRegions[] = {{"AN", 0.45, 0}, {"MD", 0.33, -2}, {"CB", 0.17, 3}, {"CE", 0.05, 5}};
constexpr std::string_view kCommunities[] = {"AN", "MD", "CB"};

double day_offset(Date d) { return static_cast<double>((d - kYearStart).count()); }

std::vector<CaseRecord> make_cases(const FixtureOptions& o) {
  const auto p = profile_for(o.profile);
  std::vector<CaseRecord> out;
  for (std::size_t r = 0; r < std::size(kCaseRegions); ++r) {
    const auto& reg = kCaseRegions[r];
    CounterRng rng(o.seed, 100 + r);
    for (Date d = kFeedStart; d <= kFeedEnd; d += std::chrono::days(1)) {
      const double t = day_offset(d) - reg.shift;
      const double weekly = 1.0 + p.weekly_amplitude * std::sin(2.0 * kPi * iso_weekday(d) / 7.0);
      const double v = reg.share * national_intensity(p, t) * weekly * std::exp(p.noise * rng.normal());
      out.push_back({d, std::string(reg.code), std::max<std::int64_t>(1, std::llround(v))});
    }
  }
  return out;
}

std::vector<WeeklyDoseRecord> make_vaccination(const FixtureOptions& o) {
  CounterRng rng(o.seed, 200);
  std::vector<WeeklyDoseRecord> out;
  IsoWeek first = iso_week_of(kYearStart), last = iso_week_of(kFeedEnd);
  int k = 0;
  for (Date d = iso_week_monday(first); iso_week_of(d) <= last; d += std::chrono::days(7), ++k) {
    const IsoWeek w = iso_week_of(d);
    for (int dose = 1; dose <= 2; ++dose) {
      const double centre = dose == 1 ? 22.0 : 26.0;
      const double scale = dose == 1 ? 2.4e6 : 2.3e6;
      const double bell = std::exp(-0.5 * std::pow((k - centre) / 8.0, 2.0));
      const double v = (5e4 + scale * bell) * std::exp(0.03 * rng.normal());
      out.push_back({w, dose, std::llround(v)});
    }
  }
  return out;
}

std::vector<FluxRecord> make_mobility(const FixtureOptions& o) {
  CounterRng rng(o.seed, 300);
  std::vector<FluxRecord> out;
  const Date first = parse_date("2020-12-20");  // a Sunday
  for (Date d = first; d <= kFeedEnd; d += std::chrono::days(1)) {
    const auto wd = iso_weekday(d);
    if (wd != 3 && wd != 7) continue;
    const double season = 1.0 + 0.15 * std::sin(2.0 * kPi * (day_offset(d) - 100.0) / 365.0);
    const double weekend = wd == 7 ? 0.8 : 1.0;
    for (std::size_t i = 0; i < std::size(kCommunities); ++i)
      for (std::size_t j = 0; j < std::size(kCommunities); ++j) {
        const double base = i == j ? 4.0e6 * kCaseRegions[i].share : 6.0e4;
        const double v = base * season * weekend * std::exp(0.02 * rng.normal());
        out.push_back({d, std::string(kCommunities[i]), std::string(kCommunities[j]), std::round(v * 10.0) / 10.0});
      }
  }
  return out;
}

std::vector<WeatherRecord> make_weather(const FixtureOptions& o) {
  std::vector<WeatherRecord> out;
  constexpr double kRegionTemp[] = {19.0, 15.0, 14.0, 21.0};
  for (std::size_t r = 0; r < std::size(kCaseRegions); ++r) {
    CounterRng rng(o.seed, 400 + r);
    for (Date d = kFeedStart; d <= kFeedEnd; d += std::chrono::days(1)) {
      const double t = day_offset(d);
      for (int s = 0; s < 2; ++s) {
        const double temp = kRegionTemp[r] - 0.8 * s - 8.0 * std::cos(2.0 * kPi * (t - 15.0) / 365.0) +
                            1.5 * rng.normal();
        const double rain = rng.uniform() < 0.25 ? -6.0 * std::log(1.0 - rng.uniform()) : 0.0;
        out.push_back({d, std::string(kCaseRegions[r].code), fmt::format("{}{:02}", kCaseRegions[r].code, s + 1),
                       std::round(temp * 10.0) / 10.0, std::round(rain * 10.0) / 10.0});
      }
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(FixtureProfile p) { return p == FixtureProfile::Waves ? "waves" : "opposite-bias"; }

FixtureProfile fixture_profile_from_string(std::string_view s) {
  if (s == "waves") return FixtureProfile::Waves;
  if (s == "opposite-bias") return FixtureProfile::OppositeBias;
  throw Error(Errc::InvalidArgument, kModule, fmt::format("unknown fixture profile '{}'", s));
}

DatasetBundle generate_fixtures(const FixtureOptions& options) {
  return {make_cases(options), make_vaccination(options), make_mobility(options), make_weather(options)};
}

void make_fixtures(const FixtureOptions& options, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoFailure, kModule, fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));
  const auto b = generate_fixtures(options);
  write_file_atomic(out_dir / "cases.csv", to_csv(b.cases));
  write_file_atomic(out_dir / "vaccination.csv", to_csv(b.vaccination));
  write_file_atomic(out_dir / "mobility.csv", to_csv(b.mobility));
  write_file_atomic(out_dir / "weather.csv", to_csv(b.weather));
  write_file_atomic(out_dir / "experiment.ini",
                    fmt::format("# Synthetic fixtures, profile {}, seed {}\n"
                                "[data]\n"
                                "cases = cases.csv\n"
                                "vaccination = vaccination.csv\n"
                                "mobility = mobility.csv\n"
                                "weather = weather.csv\n"
                                "\n"
                                "[experiment]\n"
                                "region = ES\n"
                                "seed = {}\n"
                                "\n"
                                "[output]\n"
                                "dir = out\n",
                                to_string(options.profile), options.seed, options.seed));
}

}  // namespace epiforge
