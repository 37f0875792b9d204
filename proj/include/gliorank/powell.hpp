#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "gliorank/error.hpp"

namespace gliorank {

struct PowellOptions {
  std::size_t max_iters = 200;  // direction-set cycles
  double xtol = 1e-3;
  double ftol = 1e-6;
  double initial_step = 1.0;
};

struct PowellResult {
  std::vector<double> x;
  double f = 0.0;
  /// Objective after each completed cycle, starting with f(x0).
  std::vector<double> trace;
  std::size_t iterations = 0;
  std::size_t line_searches = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

namespace detail {

template <class Phi>
struct Bracket {
  double a, b, c, fa, fb, fc;
};

/// Downhill bracketing from (0, step): returns a < b < c (or reversed) with f(b) <= f(a), f(c).
template <class Phi>
Bracket<Phi> bracket_minimum(Phi& phi, double f0, double step) {
  constexpr double gold = 1.618033988749895;
  constexpr double grow_limit = 100.0;
  constexpr double tiny = 1e-20;
  double a = 0.0, b = step;
  double fa = f0, fb = phi(b);
  if (fb > fa) {
    std::swap(a, b);
    std::swap(fa, fb);
  }
  double c = b + gold * (b - a);
  double fc = phi(c);
  for (int guard = 0; fb > fc && guard < 100; ++guard) {
    const double r = (b - a) * (fb - fc);
    const double q = (b - c) * (fb - fa);
    const double denom = 2.0 * std::copysign(std::max(std::abs(q - r), tiny), q - r);
    double u = b - ((b - c) * q - (b - a) * r) / denom;
    const double ulim = b + grow_limit * (c - b);
    double fu;
    if ((b - u) * (u - c) > 0.0) {
      fu = phi(u);
      if (fu < fc) {
        return {b, u, c, fb, fu, fc};
      } else if (fu > fb) {
        return {a, b, u, fa, fb, fu};
      }
      u = c + gold * (c - b);
      fu = phi(u);
    } else if ((c - u) * (u - ulim) > 0.0) {
      fu = phi(u);
      if (fu < fc) {
        b = c;
        c = u;
        u = c + gold * (c - b);
        fb = fc;
        fc = fu;
        fu = phi(u);
      }
    } else if ((u - ulim) * (ulim - c) >= 0.0) {
      u = ulim;
      fu = phi(u);
    } else {
      u = c + gold * (c - b);
      fu = phi(u);
    }
    a = b;
    b = c;
    c = u;
    fa = fb;
    fb = fc;
    fc = fu;
  }
  return {a, b, c, fa, fb, fc};
}

/// Brent's parabolic/golden-section minimization inside a bracket to absolute tolerance `tol`;
/// returns (x, f(x)).
template <class Phi>
std::pair<double, double> brent_minimize(Phi& phi, const Bracket<Phi>& br, double tol, int max_iter = 100) {
  constexpr double cgold = 0.3819660112501051;
  constexpr double zeps = 1e-12;
  double a = std::min(br.a, br.c), b = std::max(br.a, br.c);
  double x = br.b, w = br.b, v = br.b;
  double fx = br.fb, fw = br.fb, fv = br.fb;
  double d = 0.0, e = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const double xm = 0.5 * (a + b);
    const double tol1 = tol + zeps * std::abs(x);
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) >= std::abs(0.5 * q * etemp) || p <= q * (a - x) || p >= q * (b - x)) {
        e = (x >= xm) ? a - x : b - x;
        d = cgold * e;
      } else {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = std::copysign(tol1, xm - x);
      }
    } else {
      e = (x >= xm) ? a - x : b - x;
      d = cgold * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + std::copysign(tol1, d);
    const double fu = phi(u);
    if (fu <= fx) {
      if (u >= x)
        a = x;
      else
        b = x;
      v = w;
      w = x;
      x = u;
      fv = fw;
      fw = fx;
      fx = fu;
    } else {
      if (u < x)
        a = u;
      else
        b = u;
      if (fu <= fw || w == x) {
        v = w;
        w = u;
        fv = fw;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  return {x, fx};
}

inline double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace detail

/// Powell's direction-set method: cycles of line minimizations along a direction set, replacing
/// the direction of largest decrease with the net displacement of the cycle when that helps.
template <class F>
PowellResult powell_minimize(F&& f, std::vector<double> x0, const PowellOptions& options = {}) {
  const std::size_t d = x0.size();
  require(d >= 1, errc::invalid_argument, "powell needs at least one dimension");
  PowellResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    if (std::isnan(v)) throw nan_objective_error(x);
    return v;
  };

  std::vector<std::vector<double>> dirs(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < d; ++i) dirs[i][i] = 1.0;

  std::vector<double> x = std::move(x0);
  double fx = eval(x);
  res.trace.push_back(fx);

  // Minimizes along `u` from x in place; returns the decrease achieved.
  auto line_minimize = [&](std::vector<double>& u) {
    ++res.line_searches;
    const double un = detail::norm(u);
    if (un == 0.0) return 0.0;
    std::vector<double> trial(d);
    auto phi = [&](double alpha) {
      for (std::size_t k = 0; k < d; ++k) trial[k] = x[k] + alpha * u[k];
      return eval(trial);
    };
    const double step = options.initial_step / un;
    const auto br = detail::bracket_minimum(phi, fx, step);
    const double line_tol = std::max(1e-10, 0.5 * options.xtol / un);
    double alpha, falpha;
    if (br.fb <= fx) {
      std::tie(alpha, falpha) = detail::brent_minimize(phi, br, line_tol);
    } else {
      alpha = 0.0;
      falpha = fx;
    }
    if (!(falpha < fx)) return 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      u[k] *= alpha;
      x[k] += u[k];
    }
    const double decrease = fx - falpha;
    fx = falpha;
    return decrease;
  };

  constexpr double tiny = 1e-25;
  for (res.iterations = 0; res.iterations < options.max_iters;) {
    ++res.iterations;
    const std::vector<double> start = x;
    const double f_start = fx;
    std::size_t biggest = 0;
    double biggest_drop = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double drop = line_minimize(dirs[i]);
      if (drop > biggest_drop) {
        biggest_drop = drop;
        biggest = i;
      }
    }
    std::vector<double> moved(d), extrapolated(d);
    for (std::size_t k = 0; k < d; ++k) {
      moved[k] = x[k] - start[k];
      extrapolated[k] = 2.0 * x[k] - start[k];
    }
    const bool f_small = 2.0 * (f_start - fx) <= options.ftol * (std::abs(f_start) + std::abs(fx)) + tiny;
    const bool x_small = detail::norm(moved) <= options.xtol;
    if (f_small || x_small) {
      res.trace.push_back(fx);
      res.converged = true;
      break;
    }
    const double f_ext = eval(extrapolated);
    if (f_ext < f_start) {
      const double a = f_start - fx - biggest_drop;
      const double b = f_start - f_ext;
      const double t = 2.0 * (f_start - 2.0 * fx + f_ext) * a * a - biggest_drop * b * b;
      if (t < 0.0) {
        line_minimize(moved);
        dirs[biggest] = dirs[d - 1];
        dirs[d - 1] = moved;
      }
    }
    res.trace.push_back(fx);
  }
  res.x = std::move(x);
  res.f = fx;
  return res;
}

}  // namespace gliorank
