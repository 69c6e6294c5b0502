#include "epiforge/regions.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "epiforge/csv.hpp"
#include "epiforge/error.hpp"
#include "epiforge/regions_data.hpp"

namespace epiforge {

const RegionRegistry& RegionRegistry::builtin() {
  static const RegionRegistry registry = parse(detail::kRegionsCsv);
  return registry;
}

RegionRegistry RegionRegistry::parse(std::string_view csv_text) {
  auto table = parse_csv(csv_text);
  auto code = table.column("code"), name = table.column("name"), kind = table.column("kind");
  if (!code || !name || !kind)
    throw Error(Errc::MissingColumn, "regions", "registry needs code,name,kind columns");
  RegionRegistry reg;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size())
      throw Error(Errc::UnparsableValue, "regions", fmt::format("row {}: wrong field count", r + 1));
    RegionKind k;
    if (row[*kind] == "community")
      k = RegionKind::Community;
    else if (row[*kind] == "city")
      k = RegionKind::City;
    else if (row[*kind] == "country")
      k = RegionKind::Country;
    else
      throw Error(Errc::UnparsableValue, "regions",
                  fmt::format("row {}: unknown kind '{}'", r + 1, row[*kind]));
    if (reg.contains(row[*code]))
      throw Error(Errc::DuplicateKey, "regions", fmt::format("row {}: code '{}'", r + 1, row[*code]));
    reg.regions_.push_back({row[*code], row[*name], k});
  }
  return reg;
}

bool RegionRegistry::contains(std::string_view code) const {
  return std::any_of(regions_.begin(), regions_.end(), [&](const Region& r) { return r.code == code; });
}

const Region& RegionRegistry::at(std::string_view code) const {
  auto it = std::find_if(regions_.begin(), regions_.end(), [&](const Region& r) { return r.code == code; });
  if (it == regions_.end())
    throw Error(Errc::UnknownRegion, "regions", fmt::format("'{}' is not a registered region", code));
  return *it;
}

}  // namespace epiforge
