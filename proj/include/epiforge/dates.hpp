#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace epiforge {

using Date = std::chrono::sys_days;

std::optional<Date> try_parse_date(std::string_view text);
/// Throws Error(UnparsableValue) on malformed input.
Date parse_date(std::string_view text);
std::string format_date(Date d);

/// ISO-8601 weekday, Monday = 1 ... Sunday = 7.
unsigned iso_weekday(Date d);

struct IsoWeek {
  int year = 0;
  unsigned week = 0;

  auto operator<=>(const IsoWeek&) const = default;
};

/// Parses `YYYY-Www`.
std::optional<IsoWeek> try_parse_iso_week(std::string_view text);
std::string format_iso_week(IsoWeek w);
Date iso_week_monday(IsoWeek w);
Date iso_week_sunday(IsoWeek w);
IsoWeek iso_week_of(Date d);

/// Inclusive, contiguous run of calendar days.
class DateRange {
 public:
  DateRange() = default;
  DateRange(Date first, Date last);

  Date first() const { return first_; }
  Date last() const { return last_; }
  std::size_t size() const;
  bool contains(Date d) const { return d >= first_ && d <= last_; }
  Date at(std::size_t i) const { return first_ + std::chrono::days{static_cast<long>(i)}; }
  /// Index of `d`; requires contains(d).
  std::size_t index_of(Date d) const;
  std::vector<Date> days() const;

  bool operator==(const DateRange&) const = default;

 private:
  Date first_{};
  Date last_{};
};

}  // namespace epiforge
