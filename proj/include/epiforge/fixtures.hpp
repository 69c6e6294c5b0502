#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "epiforge/ingest.hpp"

namespace epiforge {

/// Shape of the synthetic national case curve.
///   Waves         four logistic-derivative waves over 2021, the last one
///                 still climbing at year end.
///   OppositeBias  waves on a high floor through the train split, then a
///                 September decline to a low plateau for the test split.
///                 Tree and neighbour models cannot go below the training
///                 range while growth curves decay the plateau toward zero,
///                 so the two families miss on opposite sides.
enum class FixtureProfile { Waves, OppositeBias };

std::string_view to_string(FixtureProfile p);
FixtureProfile fixture_profile_from_string(std::string_view s);

struct FixtureOptions {
  std::uint64_t seed = 42;
  FixtureProfile profile = FixtureProfile::Waves;
};

/// Regions in the synthetic feeds: three communities plus one city.
inline constexpr std::string_view kFixtureRegions[] = {"AN", "MD", "CB", "CE"};

DatasetBundle generate_fixtures(const FixtureOptions& options);

/// Writes cases.csv, vaccination.csv, mobility.csv, weather.csv and an
/// experiment.ini pointing at them. Byte-identical for equal options.
void make_fixtures(const FixtureOptions& options, const std::filesystem::path& out_dir);

}  // namespace epiforge
