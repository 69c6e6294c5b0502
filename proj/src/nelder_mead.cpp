#include "epiforge/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "epiforge/error.hpp"

namespace epiforge {

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                             std::vector<double> x0, const NelderMeadOptions& opt) {
  const std::size_t n = x0.size();
  if (n == 0) throw Error(Errc::InvalidArgument, "optimizer", "empty parameter vector");
  const std::size_t max_iter = opt.max_iterations ? opt.max_iterations : 200 * n;
  const std::size_t max_eval = opt.max_evaluations ? opt.max_evaluations : 200 * n;

  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    double f = objective(x);
    return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
  };

  std::vector<std::vector<double>> sim(n + 1, x0);
  for (std::size_t k = 0; k < n; ++k) sim[k + 1][k] = x0[k] != 0.0 ? 1.05 * x0[k] : 0.00025;
  std::vector<double> fsim(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fsim[i] = eval(sim[i]);

  std::vector<std::size_t> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fsim[a] < fsim[b]; });
    std::vector<std::vector<double>> s2(n + 1);
    std::vector<double> f2(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      s2[i] = std::move(sim[order[i]]);
      f2[i] = fsim[order[i]];
    }
    sim = std::move(s2);
    fsim = std::move(f2);
  };
  sort_simplex();

  auto affine = [&](const std::vector<double>& base, const std::vector<double>& worst, double t) {
    // base + t * (base - worst)
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = base[j] + t * (base[j] - worst[j]);
    return out;
  };

  while (res.evaluations < max_eval && res.iterations < max_iter) {
    double xspread = 0.0, fspread = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) xspread = std::max(xspread, std::abs(sim[i][j] - sim[0][j]));
      fspread = std::max(fspread, std::abs(fsim[0] - fsim[i]));
    }
    if (xspread <= opt.xatol && fspread <= opt.fatol) {
      res.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) centroid[j] += sim[i][j] / static_cast<double>(n);

    auto xr = affine(centroid, sim[n], opt.reflection);
    double fr = eval(xr);
    bool do_shrink = false;

    if (fr < fsim[0]) {
      auto xe = affine(centroid, sim[n], opt.reflection * opt.expansion);
      double fe = eval(xe);
      if (fe < fr) {
        sim[n] = std::move(xe);
        fsim[n] = fe;
      } else {
        sim[n] = std::move(xr);
        fsim[n] = fr;
      }
    } else if (fr < fsim[n - 1]) {
      sim[n] = std::move(xr);
      fsim[n] = fr;
    } else if (fr < fsim[n]) {
      // Outside contraction.
      auto xc = affine(centroid, sim[n], opt.contraction * opt.reflection);
      double fc = eval(xc);
      if (fc <= fr) {
        sim[n] = std::move(xc);
        fsim[n] = fc;
      } else {
        do_shrink = true;
      }
    } else {
      // Inside contraction.
      auto xcc = affine(centroid, sim[n], -opt.contraction);
      double fcc = eval(xcc);
      if (fcc < fsim[n]) {
        sim[n] = std::move(xcc);
        fsim[n] = fcc;
      } else {
        do_shrink = true;
      }
    }
    if (do_shrink) {
      for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 0; j < n; ++j) sim[i][j] = sim[0][j] + opt.shrink * (sim[i][j] - sim[0][j]);
        fsim[i] = eval(sim[i]);
      }
    }
    ++res.iterations;
    sort_simplex();
    if (opt.record_history) res.best_history.push_back(fsim[0]);
  }

  res.x = sim[0];
  res.value = fsim[0];
  return res;
}

}  // namespace epiforge
