#pragma once

// Data-parallel kernels. Every kernel has a serial path that serves as the
// reference implementation; the OpenMP path must reproduce it bit for bit.

#include <cstddef>
#include <cstdint>
#include <exception>
#include <span>
#include <vector>

namespace longcode {

enum class Exec { serial, parallel };

/// Number of OpenMP threads available to Exec::parallel (1 without OpenMP).
int max_threads();
/// Caps OpenMP threads; non-positive values restore the runtime default.
void set_max_threads(int n);

/// Runs body(i) for i in [0, n). Exceptions are collected per index and the
/// lowest-index one is rethrown after the loop, so both paths fail alike.
template <class Body>
void for_each_index(std::size_t n, Exec exec, Body&& body) {
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace kernels {

struct ArgmaxHit {
  std::size_t index = 0;
  double cosine = 0.0;
};

/// Best row of a row-major `rows x dim` matrix by dot product with `query`.
/// Ties on the cosine go to the row with the smaller `tie_rank`.
ArgmaxHit argmax_cosine(std::span<const double> query, std::span<const double> rows,
                        std::size_t dim, std::span<const std::size_t> tie_rank, Exec exec);

/// Dot products of `query` with every row, clamped to [-1, 1].
std::vector<double> cosine_row(std::span<const double> query, std::span<const double> rows,
                               std::size_t dim, Exec exec);

}  // namespace kernels
}  // namespace longcode
