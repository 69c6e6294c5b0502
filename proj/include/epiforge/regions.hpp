#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace epiforge {

inline constexpr std::string_view kNationalCode = "ES";

enum class RegionKind { Community, City, Country };

struct Region {
  std::string code;
  std::string name;
  RegionKind kind;
};

/// Fixed list of region codes: the 17 autonomous communities, the two
/// autonomous cities and the national aggregate.
class RegionRegistry {
 public:
  /// The registry compiled in from data/regions.csv.
  static const RegionRegistry& builtin();
  static RegionRegistry parse(std::string_view csv_text);

  bool contains(std::string_view code) const;
  /// Throws Error(UnknownRegion).
  const Region& at(std::string_view code) const;
  std::span<const Region> all() const { return regions_; }

 private:
  std::vector<Region> regions_;
};

}  // namespace epiforge
