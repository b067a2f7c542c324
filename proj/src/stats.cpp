#include "longcode/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "longcode/embedder.hpp"
#include "longcode/error.hpp"

namespace longcode::stats {

namespace {

void require_finite(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + ": non-finite entry");
  }
}

void require_pair(std::span<const double> x, std::span<const double> y, std::size_t min_n,
                  const char* what) {
  if (x.size() != y.size()) {
    throw ValidationError(std::string(what) + ": length mismatch (" + std::to_string(x.size()) +
                          " vs " + std::to_string(y.size()) + ")");
  }
  if (x.size() < min_n) {
    throw ValidationError(std::string(what) + ": needs n >= " + std::to_string(min_n) + ", got " +
                          std::to_string(x.size()));
  }
  require_finite(x, what);
  require_finite(y, what);
}

bool is_constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double clamp_unit(double r) { return std::clamp(r, -1.0, 1.0); }

// Pearson without precondition checks.
double pearson_unchecked(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return clamp_unit(sxy / std::sqrt(sxx * syy));
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ValidationError("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()) + ")");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
  return clamp_unit(dot);
}

double cosine(const Embedding& u, const Embedding& v) { return cosine(u.values(), v.values()); }

std::vector<double> ranks(std::span<const double> x) {
  if (x.empty()) throw ValidationError("ranks: empty input");
  require_finite(x, "ranks");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    // positions i..j-1 hold one tie group; 1-based ranks i+1..j
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) r[order[t]] = avg;
    i = j;
  }
  return r;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y, 3, "spearman");
  if (is_constant(x) || is_constant(y)) {
    throw UndefinedError("spearman: constant input, correlation undefined");
  }
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pearson_unchecked(rx, ry);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y, 3, "pearson");
  if (is_constant(x) || is_constant(y)) {
    throw UndefinedError("pearson: constant input, correlation undefined");
  }
  return pearson_unchecked(x, y);
}

OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y, 2, "ols_fit");
  if (is_constant(x)) throw UndefinedError("ols_fit: constant x, slope undefined");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  OlsFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy == 0.0) {
    fit.r_squared = 0.0;
    return fit;
  }
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += e * e;
  }
  fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  return fit;
}

double mutual_information(std::span<const double> x, std::span<const double> y, int bins) {
  if (x.size() != y.size()) throw ValidationError("mutual_information: length mismatch");
  if (bins < 2) throw ValidationError("mutual_information: bins must be >= 2");
  if (x.empty()) throw ValidationError("mutual_information: empty input");
  require_finite(x, "mutual_information");
  require_finite(y, "mutual_information");

  const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
  const double xmin = *xmin_it, xspan = *xmax_it - *xmin_it;
  const double ymin = *ymin_it, yspan = *ymax_it - *ymin_it;
  if (xspan == 0.0 || yspan == 0.0) return 0.0;

  const auto b = static_cast<std::size_t>(bins);
  auto bin_of = [b](double v, double lo, double span) {
    auto i = static_cast<std::size_t>(std::floor((v - lo) / span * static_cast<double>(b)));
    return std::min(i, b - 1);
  };
  std::vector<double> joint(b * b, 0.0), px(b, 0.0), py(b, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t bx = bin_of(x[i], xmin, xspan);
    const std::size_t by = bin_of(y[i], ymin, yspan);
    joint[bx * b + by] += 1.0;
    px[bx] += 1.0;
    py[by] += 1.0;
  }
  const double n = static_cast<double>(x.size());
  double mi = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      const double c = joint[i * b + j];
      if (c == 0.0) continue;
      mi += (c / n) * std::log2(c * n / (px[i] * py[j]));
    }
  }
  return std::max(mi, 0.0);
}

}  // namespace longcode::stats
