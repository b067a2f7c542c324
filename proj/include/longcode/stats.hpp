#pragma once

// Numerical kernel: cosine, tie-aware ranks, Spearman/Pearson, OLS with R^2,
// and a plug-in histogram mutual-information estimator.

#include <cstddef>
#include <span>
#include <vector>

namespace longcode {

class Embedding;

namespace stats {

/// Dot product of two unit vectors, clamped to [-1, 1].
double cosine(std::span<const double> u, std::span<const double> v);
double cosine(const Embedding& u, const Embedding& v);

/// 1-based ranks; tied values share the average of the ranks they span.
std::vector<double> ranks(std::span<const double> x);

/// Pearson correlation of the ranks. Requires n >= 3 and at least two
/// distinct values per side; otherwise throws (UndefinedError for constant
/// input, ValidationError for shape problems).
double spearman(std::span<const double> x, std::span<const double> y);

/// Sample Pearson correlation, same preconditions as spearman.
double pearson(std::span<const double> x, std::span<const double> y);

struct OlsFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;  // 0 by convention when y has no variance
};

OlsFit ols_fit(std::span<const double> x, std::span<const double> y);

/// Plug-in MI in bits over an equal-width bins x bins histogram spanning the
/// observed ranges. A side with zero range carries no information: MI = 0.
double mutual_information(std::span<const double> x, std::span<const double> y, int bins);

}  // namespace stats
}  // namespace longcode
