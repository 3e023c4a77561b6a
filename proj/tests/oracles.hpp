#pragma once

// Reference implementations used only by the test suite. These are written
// independently of the library — straight textbook formulas evaluated in
// extended precision, plus an O(n^2) rank assignment — so agreement between
// the two is meaningful evidence rather than the same code tested twice.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

inline long double mean_ld(const std::vector<double>& v) {
  long double s = 0.0L;
  for (const double x : v) s += static_cast<long double>(x);
  return s / static_cast<long double>(v.size());
}

/// Pearson's r straight from the definition, accumulated in long double.
inline long double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const long double mx = mean_ld(x);
  const long double my = mean_ld(y);
  long double sxy = 0.0L, sxx = 0.0L, syy = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double dx = static_cast<long double>(x[i]) - mx;
    const long double dy = static_cast<long double>(y[i]) - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx) / std::sqrt(syy);
}

/// Average ranks by enumeration: rank(v_i) = #(v_j < v_i) plus the midpoint
/// of v_i's tie group. Quadratic, but independent of any sorting logic.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) ++less;
      if (v[j] == v[i]) ++equal;
    }
    out[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
  }
  return out;
}

inline long double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pearson(rx, ry);
}

struct OlsFit {
  long double slope = 0.0L;
  long double intercept = 0.0L;
  long double r_squared = 0.0L;
};

/// Least squares y = b0 + b1 x from the normal equations, solved by Cramer's
/// rule on raw power sums; r^2 from its residual definition 1 - SSres/SStot.
inline OlsFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  const long double n = static_cast<long double>(x.size());
  long double sx = 0.0L, sy = 0.0L, sxx = 0.0L, sxy = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double xi = x[i], yi = y[i];
    sx += xi;
    sy += yi;
    sxx += xi * xi;
    sxy += xi * yi;
  }
  OlsFit fit;
  const long double det = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / det;
  fit.intercept = (sy - fit.slope * sx) / n;

  const long double my = sy / n;
  long double ss_res = 0.0L, ss_tot = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double yi = y[i];
    const long double fitted = fit.intercept + fit.slope * static_cast<long double>(x[i]);
    ss_res += (yi - fitted) * (yi - fitted);
    ss_tot += (yi - my) * (yi - my);
  }
  fit.r_squared = ss_tot > 0.0L ? 1.0L - ss_res / ss_tot : 0.0L;
  return fit;
}

}  // namespace oracle
