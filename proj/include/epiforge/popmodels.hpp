#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "epiforge/dates.hpp"
#include "epiforge/nelder_mead.hpp"

namespace epiforge {

enum class GrowthModelKind { Gompertz, Logistic, Richards, Bertalanffy };

inline constexpr std::array<GrowthModelKind, 4> kGrowthModelKinds = {
    GrowthModelKind::Gompertz, GrowthModelKind::Logistic, GrowthModelKind::Richards,
    GrowthModelKind::Bertalanffy};

std::string_view to_string(GrowthModelKind kind);
GrowthModelKind growth_model_from_string(std::string_view name);

/// Closed-form sigmoid parameters. `s` is only read by Richards.
struct GrowthParams {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double s = 1.0;

  /// Richards/Logistic asymptote a/b.
  double p_infinity() const { return a / b; }
};

/// Cumulative count at `t` days after the window start:
///   Gompertz     exp(a/b + c e^{-bt})
///   Logistic     1 / (c e^{-at} + b/a)
///   Richards     (c e^{-at} + (b/a)^s)^{-1/s}
///   Bertalanffy  (a/b + c e^{-bt/4})^4
/// Throws Error(ParamDomain) when the parameters leave the model's domain.
double evaluate_curve(GrowthModelKind kind, const GrowthParams& params, double t);

/// Three-point initial estimate at t_i = first, t_j = first + h, t_k = first + 2h.
/// Gompertz linearizes with log p, Logistic with 1/p, Bertalanffy with p^{1/4};
/// each then follows
///   alpha = (y_j - y_i) / (y_k - y_i),  rate = -(1/h) log((1 - alpha) / alpha),
/// and reads c and a off the two remaining equations. Throws
/// Error(DegenerateWindow) for flat or non-sigmoidal samples.
GrowthParams estimate_initial_at(GrowthModelKind kind, std::span<const double> window, std::size_t first,
                                 std::size_t h);
/// Uses the first, middle and last day: h = (n - 1) / 2.
GrowthParams estimate_initial(GrowthModelKind kind, std::span<const double> window);
/// Deterministic start a=1, b=0.1, c=-1, s=1 with the asymptote term adjusted
/// so that p(0) equals `first_value`.
GrowthParams fallback_initial(GrowthModelKind kind, double first_value);

struct PopFitOptions {
  std::size_t window_length = 30;
  NelderMeadOptions optimizer;
};

struct GrowthModelFit {
  GrowthModelKind kind = GrowthModelKind::Gompertz;
  GrowthParams params;
  std::size_t window_length = 0;
  double sse = 0.0;
  bool converged = false;
  bool used_fallback = false;
  std::size_t iterations = 0;
  std::optional<Date> window_start;
  std::optional<Date> window_end;
};

/// Least-squares fit of the closed form to a cumulative window (values
/// counted from the window start) by Nelder-Mead from the three-point
/// estimate. Richards starts from the fitted Logistic parameters with s = 1.
GrowthModelFit fit_population_model(GrowthModelKind kind, std::span<const double> window,
                                    const PopFitOptions& options = {});

/// Daily increments p(T+k) - p(T+k-1), k = 1..horizon, with T the last
/// window day. Clamped at zero unless `clamp` is false.
std::vector<double> forecast_population(const GrowthModelFit& fit, std::size_t horizon, bool clamp = true);

/// Cumulative sum of daily counts over `length` days ending at `end`
/// (inclusive), counted from the window start.
std::vector<double> cumulative_window(std::span<const double> daily, std::size_t end, std::size_t length);

void to_json(nlohmann::json& j, const GrowthModelFit& fit);

}  // namespace epiforge
