#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "epiforge/csv.hpp"
#include "epiforge/dates.hpp"
#include "epiforge/error.hpp"

namespace epiforge {

ErrorClass classify(Errc code) {
  switch (code) {
    case Errc::InvalidConfig:
    case Errc::InvalidArgument:
    case Errc::EmptyGrid:
    case Errc::UnknownFeature:
    case Errc::TooManyFeatures:
      return ErrorClass::Config;
    case Errc::IoFailure:
      return ErrorClass::Io;
    case Errc::ParamDomain:
    case Errc::DegenerateWindow:
    case Errc::OptimizerDiverged:
    case Errc::SingularKernel:
    case Errc::ZeroRmse:
      return ErrorClass::Numeric;
    default:
      return ErrorClass::Data;
  }
}

std::string_view to_string(ErrorClass c) {
  switch (c) {
    case ErrorClass::Config: return "config";
    case ErrorClass::Data: return "data";
    case ErrorClass::Numeric: return "numeric";
    case ErrorClass::Io: return "io";
  }
  return "unknown";
}

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::UnparsableValue: return "UnparsableValue";
    case Errc::DuplicateKey: return "DuplicateKey";
    case Errc::MissingCoverage: return "MissingCoverage";
    case Errc::UnknownRegion: return "UnknownRegion";
    case Errc::InsufficientAnchors: return "InsufficientAnchors";
    case Errc::NegativeDoses: return "NegativeDoses";
    case Errc::NoFluxData: return "NoFluxData";
    case Errc::MissingObservation: return "MissingObservation";
    case Errc::EmptySeries: return "EmptySeries";
    case Errc::ConstantColumn: return "ConstantColumn";
    case Errc::InsufficientHistory: return "InsufficientHistory";
    case Errc::ParamDomain: return "ParamDomain";
    case Errc::DegenerateWindow: return "DegenerateWindow";
    case Errc::OptimizerDiverged: return "OptimizerDiverged";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::SingularKernel: return "SingularKernel";
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::EmptyGrid: return "EmptyGrid";
    case Errc::WidthMismatch: return "WidthMismatch";
    case Errc::ZeroActual: return "ZeroActual";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ZeroRmse: return "ZeroRmse";
    case Errc::EmptySubset: return "EmptySubset";
    case Errc::MissingWeight: return "MissingWeight";
    case Errc::TooManyFeatures: return "TooManyFeatures";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::UnknownFeature: return "UnknownFeature";
    case Errc::IoFailure: return "IoFailure";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(Errc code, std::string module, const std::string& message)
    : std::runtime_error(fmt::format("[{}] {}: {}", module, to_string(code), message)),
      code_(code),
      module_(std::move(module)) {}

// ---------------------------------------------------------------------------
// Dates

namespace {

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

bool all_digits(std::string_view s) {
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

}  // namespace

std::optional<Date> try_parse_date(std::string_view text) {
  using namespace std::chrono;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto ys = text.substr(0, 4), ms = text.substr(5, 2), ds = text.substr(8, 2);
  if (!all_digits(ys) || !all_digits(ms) || !all_digits(ds)) return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  if (!parse_int(ys, y) || !parse_int(ms, m) || !parse_int(ds, d)) return std::nullopt;
  year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

Date parse_date(std::string_view text) {
  if (auto d = try_parse_date(text)) return *d;
  throw Error(Errc::UnparsableValue, "dates", fmt::format("'{}' is not an ISO-8601 date", text));
}

std::string format_date(Date d) {
  std::chrono::year_month_day ymd{d};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

unsigned iso_weekday(Date d) { return std::chrono::weekday{d}.iso_encoding(); }

namespace {

Date week_one_monday(int year) {
  using namespace std::chrono;
  Date jan4 = sys_days{std::chrono::year{year} / January / 4};
  return jan4 - days{iso_weekday(jan4) - 1};
}

}  // namespace

Date iso_week_monday(IsoWeek w) {
  return week_one_monday(w.year) + std::chrono::days{7 * (static_cast<long>(w.week) - 1)};
}

Date iso_week_sunday(IsoWeek w) { return iso_week_monday(w) + std::chrono::days{6}; }

IsoWeek iso_week_of(Date d) {
  using namespace std::chrono;
  // The ISO year is the calendar year of the Thursday in the same week.
  Date thursday = d + days{4 - static_cast<long>(iso_weekday(d))};
  int year = static_cast<int>(year_month_day{thursday}.year());
  auto week = static_cast<unsigned>((thursday - week_one_monday(year)).count() / 7 + 1);
  return {year, week};
}

std::optional<IsoWeek> try_parse_iso_week(std::string_view text) {
  if (text.size() != 8 || text[4] != '-' || text[5] != 'W') return std::nullopt;
  auto ys = text.substr(0, 4), ws = text.substr(6, 2);
  if (!all_digits(ys) || !all_digits(ws)) return std::nullopt;
  IsoWeek w;
  if (!parse_int(ys, w.year) || !parse_int(ws, w.week)) return std::nullopt;
  if (w.week < 1 || w.week > 53) return std::nullopt;
  if (iso_week_of(iso_week_monday(w)) != w) return std::nullopt;  // W53 in a 52-week year
  return w;
}

std::string format_iso_week(IsoWeek w) { return fmt::format("{:04d}-W{:02d}", w.year, w.week); }

DateRange::DateRange(Date first, Date last) : first_(first), last_(last) {
  if (last < first)
    throw Error(Errc::InvalidArgument, "dates",
                fmt::format("empty range {}..{}", format_date(first), format_date(last)));
}

std::size_t DateRange::size() const { return static_cast<std::size_t>((last_ - first_).count() + 1); }

std::size_t DateRange::index_of(Date d) const {
  if (!contains(d))
    throw Error(Errc::InvalidArgument, "dates",
                fmt::format("{} outside {}..{}", format_date(d), format_date(first_), format_date(last_)));
  return static_cast<std::size_t>((d - first_).count());
}

std::vector<Date> DateRange::days() const {
  std::vector<Date> out;
  out.reserve(size());
  for (Date d = first_; d <= last_; d += std::chrono::days{1}) out.push_back(d);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    fields.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

}  // namespace

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  // Strip a UTF-8 byte order mark.
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  bool first = true;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    if (line.empty()) continue;
    if (first) {
      table.header = split_line(line);
      first = false;
    } else {
      table.rows.push_back(split_line(line));
    }
  }
  return table;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "io", fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "io", fmt::format("cannot write '{}'", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(Errc::IoFailure, "io", fmt::format("short write to '{}'", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw Error(Errc::IoFailure, "io",
                fmt::format("cannot rename '{}' to '{}': {}", tmp.string(), path.string(), ec.message()));
}

}  // namespace epiforge
