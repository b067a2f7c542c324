#include "longcode/parallel.hpp"

#include <algorithm>
#include <limits>

#include "longcode/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace longcode {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_max_threads(int n) {
#ifdef _OPENMP
  static const int runtime_default = omp_get_max_threads();
  omp_set_num_threads(n > 0 ? n : runtime_default);
#else
  (void)n;
#endif
}

namespace kernels {

namespace {

double row_dot(std::span<const double> query, const double* row) {
  double s = 0.0;
  for (std::size_t d = 0; d < query.size(); ++d) s += query[d] * row[d];
  return std::clamp(s, -1.0, 1.0);
}

// Total order used by both paths: higher cosine wins, then smaller tie rank.
bool better(double cos, std::size_t rank, double best_cos, std::size_t best_rank) {
  return cos > best_cos || (cos == best_cos && rank < best_rank);
}

void check_shape(std::span<const double> query, std::span<const double> rows, std::size_t dim) {
  if (dim == 0 || query.size() != dim || rows.size() % dim != 0) {
    throw ValidationError("kernel: dimension mismatch between query and rows");
  }
}

}  // namespace

ArgmaxHit argmax_cosine(std::span<const double> query, std::span<const double> rows, std::size_t dim,
                        std::span<const std::size_t> tie_rank, Exec exec) {
  check_shape(query, rows, dim);
  const std::size_t n = rows.size() / dim;
  if (n == 0) throw ValidationError("kernel: argmax over an empty bank");
  if (tie_rank.size() != n) throw ValidationError("kernel: tie rank size mismatch");

  ArgmaxHit best{0, -std::numeric_limits<double>::infinity()};
  std::size_t best_rank = std::numeric_limits<std::size_t>::max();

  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) {
      const double c = row_dot(query, rows.data() + i * dim);
      if (better(c, tie_rank[i], best.cosine, best_rank)) {
        best = {i, c};
        best_rank = tie_rank[i];
      }
    }
    return best;
  }

  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel
  {
    ArgmaxHit local{0, -std::numeric_limits<double>::infinity()};
    std::size_t local_rank = std::numeric_limits<std::size_t>::max();
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < count; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const double c = row_dot(query, rows.data() + u * dim);
      if (better(c, tie_rank[u], local.cosine, local_rank)) {
        local = {u, c};
        local_rank = tie_rank[u];
      }
    }
#pragma omp critical(longcode_argmax)
    {
      if (better(local.cosine, local_rank, best.cosine, best_rank)) {
        best = local;
        best_rank = local_rank;
      }
    }
  }
  return best;
}

std::vector<double> cosine_row(std::span<const double> query, std::span<const double> rows,
                               std::size_t dim, Exec exec) {
  check_shape(query, rows, dim);
  const std::size_t n = rows.size() / dim;
  std::vector<double> out(n);
  for_each_index(n, exec, [&](std::size_t i) { out[i] = row_dot(query, rows.data() + i * dim); });
  return out;
}

}  // namespace kernels
}  // namespace longcode
