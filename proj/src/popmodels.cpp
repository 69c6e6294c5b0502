#include "epiforge/popmodels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "epiforge/error.hpp"

namespace epiforge {

namespace {

constexpr const char* kModule = "popmodels";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRichardsBaseFloor = 1e-12;

/// NaN signals a point outside the model's domain. With `guard`, the base of
/// the Richards power is floored instead of rejected.
double curve_value(GrowthModelKind kind, const GrowthParams& p, double t, bool guard) {
  switch (kind) {
    case GrowthModelKind::Gompertz:
      if (p.b == 0.0) return kNaN;
      return std::exp(p.a / p.b + p.c * std::exp(-p.b * t));
    case GrowthModelKind::Logistic: {
      if (p.a == 0.0) return kNaN;
      double denom = p.c * std::exp(-p.a * t) + p.b / p.a;
      if (!(denom > 0.0)) return kNaN;
      return 1.0 / denom;
    }
    case GrowthModelKind::Richards: {
      if (p.a == 0.0 || !(p.s > 0.0)) return kNaN;
      double ratio = p.b / p.a;
      double term = p.s == 1.0 ? ratio : std::pow(ratio, p.s);
      double base = p.c * std::exp(-p.a * t) + term;
      if (std::isnan(base)) return kNaN;
      if (guard) base = std::max(base, kRichardsBaseFloor);
      if (!(base > 0.0)) return kNaN;
      return p.s == 1.0 ? 1.0 / base : std::pow(base, -1.0 / p.s);
    }
    case GrowthModelKind::Bertalanffy: {
      if (p.b == 0.0) return kNaN;
      double u = p.a / p.b + p.c * std::exp(-p.b * t / 4.0);
      return u * u * u * u;
    }
  }
  return kNaN;
}

GrowthParams unpack(GrowthModelKind kind, std::span<const double> x) {
  GrowthParams p{x[0], x[1], x[2], 1.0};
  if (kind == GrowthModelKind::Richards) p.s = x[3];
  return p;
}

std::vector<double> pack(GrowthModelKind kind, const GrowthParams& p) {
  std::vector<double> x{p.a, p.b, p.c};
  if (kind == GrowthModelKind::Richards) x.push_back(p.s);
  return x;
}

double sse_of(GrowthModelKind kind, const GrowthParams& p, std::span<const double> window) {
  double sse = 0.0;
  for (std::size_t t = 0; t < window.size(); ++t) {
    double r = curve_value(kind, p, static_cast<double>(t), true) - window[t];
    sse += r * r;
  }
  return std::isfinite(sse) ? sse : std::numeric_limits<double>::infinity();
}

[[noreturn]] void degenerate(const std::string& why) { throw Error(Errc::DegenerateWindow, kModule, why); }

}  // namespace

std::string_view to_string(GrowthModelKind kind) {
  switch (kind) {
    case GrowthModelKind::Gompertz: return "gompertz";
    case GrowthModelKind::Logistic: return "logistic";
    case GrowthModelKind::Richards: return "richards";
    case GrowthModelKind::Bertalanffy: return "bertalanffy";
  }
  return "unknown";
}

GrowthModelKind growth_model_from_string(std::string_view name) {
  for (auto k : kGrowthModelKinds)
    if (to_string(k) == name) return k;
  throw Error(Errc::InvalidArgument, kModule, fmt::format("unknown population model '{}'", name));
}

double evaluate_curve(GrowthModelKind kind, const GrowthParams& params, double t) {
  double v = curve_value(kind, params, t, false);
  if (!std::isfinite(v))
    throw Error(Errc::ParamDomain, kModule,
                fmt::format("{} undefined at t={} for a={} b={} c={} s={}", to_string(kind), t, params.a,
                            params.b, params.c, params.s));
  return v;
}

GrowthParams estimate_initial_at(GrowthModelKind kind, std::span<const double> window, std::size_t first,
                                 std::size_t h) {
  if (kind == GrowthModelKind::Richards)
    throw Error(Errc::InvalidArgument, kModule, "Richards starts from the fitted Logistic parameters");
  if (h == 0 || first + 2 * h >= window.size())
    throw Error(Errc::InvalidArgument, kModule,
                fmt::format("three points {}, {}, {} exceed a {}-day window", first, first + h, first + 2 * h,
                            window.size()));
  const double pi = window[first], pj = window[first + h], pk = window[first + 2 * h];
  if (!(pi > 0.0 && pi < pj && pj < pk))
    degenerate(fmt::format("samples {}, {}, {} are not positive and strictly increasing", pi, pj, pk));

  // Linearizing transform: y(t) = level + c * exp(-rate * t).
  auto linearize = [kind](double p) {
    switch (kind) {
      case GrowthModelKind::Gompertz: return std::log(p);
      case GrowthModelKind::Logistic: return 1.0 / p;
      default: return std::sqrt(std::sqrt(p));
    }
  };
  const double yi = linearize(pi), yj = linearize(pj), yk = linearize(pk);
  const double alpha = (yj - yi) / (yk - yi);
  if (!(alpha > 0.0 && alpha < 1.0) || alpha == 0.5)
    degenerate(fmt::format("alpha = {} gives no finite decay rate", alpha));
  const double hd = static_cast<double>(h);
  const double rate = -std::log((1.0 - alpha) / alpha) / hd;
  const double ti = static_cast<double>(first), tj = ti + hd;

  GrowthParams p;
  const double ei = std::exp(-rate * ti), ej = std::exp(-rate * tj);
  p.c = (yj - yi) / (ej - ei);
  const double level = yi - p.c * ei;
  switch (kind) {
    case GrowthModelKind::Gompertz:
      // y = a/b + c e^{-bt}
      p.b = rate;
      p.a = p.b * level;
      break;
    case GrowthModelKind::Logistic:
      // 1/p = b/a + c e^{-at}
      p.a = rate;
      p.b = p.a * level;
      break;
    default:
      // p^{1/4} = a/b + c e^{-bt/4}
      p.b = 4.0 * rate;
      p.a = p.b * level;
      break;
  }
  if (!std::isfinite(p.a) || !std::isfinite(p.b) || !std::isfinite(p.c))
    degenerate("non-finite three-point estimate");
  return p;
}

GrowthParams estimate_initial(GrowthModelKind kind, std::span<const double> window) {
  if (window.size() < 3)
    throw Error(Errc::InvalidArgument, kModule, fmt::format("window of {} days; need >= 3", window.size()));
  return estimate_initial_at(kind, window, 0, (window.size() - 1) / 2);
}

GrowthParams fallback_initial(GrowthModelKind kind, double first_value) {
  const double d0 = first_value > 0.0 ? first_value : 1.0;
  GrowthParams p{1.0, 0.1, -1.0, 1.0};
  switch (kind) {
    case GrowthModelKind::Gompertz: p.a = p.b * (std::log(d0) - p.c); break;
    case GrowthModelKind::Logistic:
    case GrowthModelKind::Richards: p.b = p.a * (1.0 / d0 - p.c); break;
    case GrowthModelKind::Bertalanffy: p.a = p.b * (std::sqrt(std::sqrt(d0)) - p.c); break;
  }
  return p;
}

GrowthModelFit fit_population_model(GrowthModelKind kind, std::span<const double> window,
                                    const PopFitOptions& options) {
  if (window.size() != options.window_length || window.size() < 3)
    throw Error(Errc::InvalidArgument, kModule,
                fmt::format("window has {} days; configured length is {}", window.size(), options.window_length));
  for (std::size_t t = 1; t < window.size(); ++t)
    if (window[t] < window[t - 1] || !std::isfinite(window[t]))
      throw Error(Errc::InvalidArgument, kModule, fmt::format("cumulative window decreases at day {}", t));

  GrowthModelFit fit;
  fit.kind = kind;
  fit.window_length = window.size();

  GrowthParams start;
  if (kind == GrowthModelKind::Richards) {
    start = fit_population_model(GrowthModelKind::Logistic, window, options).params;
    start.s = 1.0;
  } else {
    try {
      start = estimate_initial(kind, window);
    } catch (const Error& e) {
      if (e.code() != Errc::DegenerateWindow) throw;
      start = fallback_initial(kind, window[0]);
      fit.used_fallback = true;
    }
    if (!std::isfinite(sse_of(kind, start, window)) && !fit.used_fallback) {
      start = fallback_initial(kind, window[0]);
      fit.used_fallback = true;
    }
  }
  if (!std::isfinite(sse_of(kind, start, window)))
    throw Error(Errc::OptimizerDiverged, kModule,
                fmt::format("{}: objective is non-finite at the starting point", to_string(kind)));

  auto objective = [&](std::span<const double> x) { return sse_of(kind, unpack(kind, x), window); };
  auto res = nelder_mead(objective, pack(kind, start), options.optimizer);
  if (!std::isfinite(res.value))
    throw Error(Errc::OptimizerDiverged, kModule, fmt::format("{}: non-finite optimum", to_string(kind)));

  fit.params = unpack(kind, res.x);
  fit.sse = res.value;
  fit.converged = res.converged;
  fit.iterations = res.iterations;
  return fit;
}

std::vector<double> forecast_population(const GrowthModelFit& fit, std::size_t horizon, bool clamp) {
  if (horizon == 0) throw Error(Errc::InvalidArgument, kModule, "horizon must be >= 1");
  const double last = static_cast<double>(fit.window_length) - 1.0;
  auto value = [&](double t) {
    double v = curve_value(fit.kind, fit.params, t, true);
    if (!std::isfinite(v))
      throw Error(Errc::ParamDomain, kModule, fmt::format("{} forecast undefined at t={}", to_string(fit.kind), t));
    return v;
  };
  std::vector<double> out(horizon);
  double prev = value(last);
  for (std::size_t k = 1; k <= horizon; ++k) {
    double cur = value(last + static_cast<double>(k));
    out[k - 1] = clamp ? std::max(0.0, cur - prev) : cur - prev;
    prev = cur;
  }
  return out;
}

std::vector<double> cumulative_window(std::span<const double> daily, std::size_t end, std::size_t length) {
  if (length == 0 || end >= daily.size() || end + 1 < length)
    throw Error(Errc::InsufficientHistory, kModule,
                fmt::format("{}-day window ending at index {} does not fit {} days", length, end, daily.size()));
  std::vector<double> out(length);
  double acc = 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    acc += daily[end + 1 - length + i];
    out[i] = acc;
  }
  return out;
}

void to_json(nlohmann::json& j, const GrowthModelFit& fit) {
  j = nlohmann::json{{"kind", to_string(fit.kind)}, {"a", fit.params.a}, {"b", fit.params.b}, {"c", fit.params.c}};
  if (fit.kind == GrowthModelKind::Richards) j["s"] = fit.params.s;
  j["sse"] = fit.sse;
  j["window_start"] = fit.window_start ? nlohmann::json(format_date(*fit.window_start)) : nlohmann::json();
  j["window_end"] = fit.window_end ? nlohmann::json(format_date(*fit.window_end)) : nlohmann::json();
  j["converged"] = fit.converged;
}

}  // namespace epiforge
