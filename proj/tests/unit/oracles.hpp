#pragma once

// Brute-force reference implementations, written independently of the
// library: O(n^2) rank counting and textbook two-pass formulas in long double.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

inline std::vector<long double> ranks(const std::vector<double>& x) {
  std::vector<long double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) ++less;
      if (v == x[i]) ++equal;
    }
    // Ties occupy positions less+1 .. less+equal; their average is the rank.
    r[i] = static_cast<long double>(less) + (static_cast<long double>(equal) + 1.0L) / 2.0L;
  }
  return r;
}

inline long double pearson(const std::vector<long double>& x, const std::vector<long double>& y) {
  const auto n = static_cast<long double>(x.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline long double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(std::vector<long double>(x.begin(), x.end()), std::vector<long double>(y.begin(), y.end()));
}

inline long double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

/// 1 - 6 sum d^2 / (n (n^2 - 1)), valid without ties.
inline long double spearman_no_ties(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x), ry = ranks(y);
  long double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const auto n = static_cast<long double>(x.size());
  return 1.0L - 6.0L * d2 / (n * (n * n - 1.0L));
}

struct Line {
  long double slope, intercept, r_squared;
};

/// Closed-form OLS via the normal equations.
inline Line ols(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const long double intercept = (sy - slope * sx) / n;
  long double ss_res = 0, ss_tot = 0;
  const long double my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double e = y[i] - (intercept + slope * x[i]);
    ss_res += e * e;
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  return {slope, intercept, ss_tot == 0 ? 0.0L : 1.0L - ss_res / ss_tot};
}

/// argmax_j <q, row_j>; ties to the smallest key.
template <class Key>
std::size_t argmax(const std::vector<double>& q, const std::vector<std::vector<double>>& rows,
                   const std::vector<Key>& keys) {
  std::size_t best = 0;
  long double best_v = -1e300L;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    long double v = 0;
    for (std::size_t d = 0; d < q.size(); ++d) v += static_cast<long double>(q[d]) * rows[j][d];
    if (v > best_v || (v == best_v && keys[j] < keys[best])) {
      best = j;
      best_v = v;
    }
  }
  return best;
}

}  // namespace oracle
