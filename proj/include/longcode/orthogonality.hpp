#pragma once

// Empirical check that symmetric-aggregation short metrics carry no
// information about structure-only long metrics.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "longcode/parallel.hpp"

namespace longcode {

class Embedding;

enum class Aggregator { mean, median, min, max };

inline constexpr Aggregator kAllAggregators[] = {Aggregator::mean, Aggregator::median,
                                                 Aggregator::min, Aggregator::max};

std::string_view to_string(Aggregator phi);
Aggregator aggregator_from_string(std::string_view s);

/// phi over per-shot qualities. The values are sorted before reduction, so
/// the result is bitwise identical for every permutation of `q`.
double aggregate_short(std::span<const double> q, Aggregator phi);

/// Symmetric K x K relation matrix, row-major.
class RelationMatrix {
 public:
  RelationMatrix() = default;
  RelationMatrix(std::size_t k, std::vector<double> values);

  /// R_ij = cos(e_i, e_j).
  static RelationMatrix from_embeddings(std::span<const Embedding> shots);

  std::size_t size() const { return k_; }
  double at(std::size_t i, std::size_t j) const { return values_[i * k_ + j]; }
  void set_symmetric(std::size_t i, std::size_t j, double v);
  std::span<const double> values() const { return values_; }

  /// Symmetry within 1e-9; optionally unit diagonal.
  void validate(bool unit_diagonal = true) const;

  /// Relations of each shot with its successor.
  std::vector<double> superdiagonal() const;

  /// R with rows and columns reordered by `order` (new position i holds old
  /// shot order[i]).
  RelationMatrix permuted(std::span<const std::size_t> order) const;

  bool operator==(const RelationMatrix&) const = default;

 private:
  std::size_t k_ = 0;
  std::vector<double> values_;
};

enum class StructuralStatistic {
  adjacency_decay,   // spearman(superdiagonal, (K-1, ..., 1))
  pooled_alignment,  // spearman(R w, w) with positional weights w (DSA-style)
};

/// Long-context metric that reads only R. adjacency_decay needs K >= 4.
double structural_metric(const RelationMatrix& r,
                         StructuralStatistic stat = StructuralStatistic::adjacency_decay);

enum class Regime { independent, coupled };

std::string_view to_string(Regime r);
Regime regime_from_string(std::string_view s);

struct EnsembleSample {
  std::vector<double> qualities;
  RelationMatrix relations;
};

struct SyntheticEnsemble {
  std::size_t k = 0;
  Regime regime = Regime::independent;
  std::uint64_t seed = 0;
  std::vector<EnsembleSample> samples;
};

inline constexpr std::size_t kEnsembleEmbeddingDim = 16;
inline constexpr double kCoupledNoise = 0.01;

/// independent: q iid U[0,1], R from unit embeddings drawn independently of q.
/// coupled: as independent, but the superdiagonal is (2 mean(q) - 1) times a
/// decreasing ramp plus small noise. Sample i uses derive_seed(seed, {i}).
SyntheticEnsemble sample_ensemble(std::size_t k, std::size_t n, Regime regime, std::uint64_t seed,
                                  Exec exec = Exec::serial);

struct OrthogonalityEstimate {
  double mi_bits = 0.0;
  bool permutation_invariance_holds = true;
  std::vector<double> short_scores;
  std::vector<double> long_scores;
};

inline constexpr std::size_t kInvariancePermutations = 10;

OrthogonalityEstimate estimate_orthogonality(
    const SyntheticEnsemble& ensemble, Aggregator phi, int bins,
    StructuralStatistic stat = StructuralStatistic::adjacency_decay, Exec exec = Exec::serial);

nlohmann::json orthogonality_report(const SyntheticEnsemble& ensemble, Aggregator phi, int bins,
                                    const OrthogonalityEstimate& estimate);

}  // namespace longcode
