#include "longcode/orthogonality.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "longcode/embedder.hpp"
#include "longcode/error.hpp"
#include "longcode/random.hpp"
#include "longcode/stats.hpp"

namespace longcode {

std::string_view to_string(Aggregator phi) {
  switch (phi) {
    case Aggregator::mean: return "mean";
    case Aggregator::median: return "median";
    case Aggregator::min: return "min";
    case Aggregator::max: return "max";
  }
  return "mean";
}

Aggregator aggregator_from_string(std::string_view s) {
  for (Aggregator phi : kAllAggregators) {
    if (to_string(phi) == s) return phi;
  }
  throw UsageError("unknown aggregator '" + std::string(s) + "'");
}

double aggregate_short(std::span<const double> q, Aggregator phi) {
  if (q.empty()) throw ValidationError("aggregate_short: empty quality vector");
  std::vector<double> v(q.begin(), q.end());
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError("aggregate_short: non-finite quality");
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  switch (phi) {
    case Aggregator::mean: return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    case Aggregator::median: return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    case Aggregator::min: return v.front();
    case Aggregator::max: return v.back();
  }
  throw ValidationError("aggregate_short: unknown aggregator");
}

RelationMatrix::RelationMatrix(std::size_t k, std::vector<double> values) : k_(k), values_(std::move(values)) {
  if (values_.size() != k_ * k_) throw ValidationError("relation matrix: expected K*K values");
}

RelationMatrix RelationMatrix::from_embeddings(std::span<const Embedding> shots) {
  const std::size_t k = shots.size();
  std::vector<double> v(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    v[i * k + i] = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      const double c = stats::cosine(shots[i], shots[j]);
      v[i * k + j] = c;
      v[j * k + i] = c;
    }
  }
  return RelationMatrix(k, std::move(v));
}

void RelationMatrix::set_symmetric(std::size_t i, std::size_t j, double v) {
  if (i >= k_ || j >= k_) throw ValidationError("relation matrix: index out of range");
  values_[i * k_ + j] = v;
  values_[j * k_ + i] = v;
}

void RelationMatrix::validate(bool unit_diagonal) const {
  if (values_.size() != k_ * k_) throw ValidationError("relation matrix: expected K*K values");
  for (std::size_t i = 0; i < k_; ++i) {
    if (unit_diagonal && std::abs(at(i, i) - 1.0) > 1e-9) {
      throw ValidationError("relation matrix: diagonal entry " + std::to_string(i) + " is not 1");
    }
    for (std::size_t j = i + 1; j < k_; ++j) {
      if (!std::isfinite(at(i, j)) || std::abs(at(i, j) - at(j, i)) > 1e-9) {
        throw ValidationError("relation matrix: not symmetric at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      }
    }
  }
}

std::vector<double> RelationMatrix::superdiagonal() const {
  std::vector<double> d;
  for (std::size_t i = 0; i + 1 < k_; ++i) d.push_back(at(i, i + 1));
  return d;
}

RelationMatrix RelationMatrix::permuted(std::span<const std::size_t> order) const {
  if (order.size() != k_) throw ValidationError("relation matrix: permutation has the wrong length");
  std::vector<bool> seen(k_, false);
  for (std::size_t o : order) {
    if (o >= k_ || seen[o]) throw ValidationError("relation matrix: order is not a permutation");
    seen[o] = true;
  }
  std::vector<double> v(k_ * k_);
  for (std::size_t i = 0; i < k_; ++i) {
    for (std::size_t j = 0; j < k_; ++j) v[i * k_ + j] = at(order[i], order[j]);
  }
  return RelationMatrix(k_, std::move(v));
}

double structural_metric(const RelationMatrix& r, StructuralStatistic stat) {
  r.validate(false);
  const std::size_t k = r.size();
  if (stat == StructuralStatistic::adjacency_decay) {
    if (k < 4) throw ValidationError("structural_metric: K must be at least 4");
    const auto d = r.superdiagonal();
    std::vector<double> ramp(d.size());
    for (std::size_t j = 0; j < ramp.size(); ++j) ramp[j] = static_cast<double>(k - 1 - j);
    return stats::spearman(d, ramp);
  }
  if (k < 3) throw ValidationError("structural_metric: K must be at least 3");
  const auto w = positional_weights(k);
  std::vector<double> rw(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) rw[i] += r.at(i, j) * w[j];
  }
  return stats::spearman(rw, w);
}

std::string_view to_string(Regime r) { return r == Regime::independent ? "independent" : "coupled"; }

Regime regime_from_string(std::string_view s) {
  if (s == "independent") return Regime::independent;
  if (s == "coupled") return Regime::coupled;
  throw UsageError("unknown regime '" + std::string(s) + "'");
}

namespace {

EnsembleSample draw_sample(std::size_t k, Regime regime, std::uint64_t seed) {
  Rng rng(seed);
  EnsembleSample s;
  s.qualities.resize(k);
  for (double& q : s.qualities) q = rng.uniform();

  std::vector<Embedding> shots;
  shots.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> v(kEnsembleEmbeddingDim);
    for (double& x : v) x = rng.normal();
    shots.push_back(Embedding::normalized(std::move(v), "ensemble"));
  }
  s.relations = RelationMatrix::from_embeddings(shots);

  if (regime == Regime::coupled) {
    const double level = 2.0 * aggregate_short(s.qualities, Aggregator::mean) - 1.0;
    for (std::size_t j = 0; j + 1 < k; ++j) {
      const double ramp = static_cast<double>(k - 1 - j) / static_cast<double>(k - 1);
      const double v = level * ramp + kCoupledNoise * rng.normal();
      s.relations.set_symmetric(j, j + 1, std::clamp(v, -1.0, 1.0));
    }
  }
  return s;
}

}  // namespace

SyntheticEnsemble sample_ensemble(std::size_t k, std::size_t n, Regime regime, std::uint64_t seed, Exec exec) {
  if (k < 4) throw ValidationError("sample_ensemble: K must be at least 4");
  if (n < 100) throw ValidationError("sample_ensemble: N must be at least 100");
  SyntheticEnsemble e{k, regime, seed, std::vector<EnsembleSample>(n)};
  for_each_index(n, exec, [&](std::size_t i) { e.samples[i] = draw_sample(k, regime, derive_seed(seed, {i})); });
  return e;
}

OrthogonalityEstimate estimate_orthogonality(const SyntheticEnsemble& ensemble, Aggregator phi, int bins,
                                             StructuralStatistic stat, Exec exec) {
  const std::size_t n = ensemble.samples.size();
  if (n == 0) throw ValidationError("estimate_orthogonality: empty ensemble");
  OrthogonalityEstimate out;
  out.short_scores.resize(n);
  out.long_scores.resize(n);
  std::vector<char> invariant(n, 1);

  for_each_index(n, exec, [&](std::size_t i) {
    const auto& s = ensemble.samples[i];
    const double base = aggregate_short(s.qualities, phi);
    out.short_scores[i] = base;
    out.long_scores[i] = structural_metric(s.relations, stat);
    Rng rng(derive_seed(ensemble.seed, {0x9E37, i}));
    std::vector<double> q = s.qualities;
    for (std::size_t p = 0; p < kInvariancePermutations; ++p) {
      rng.shuffle(q);
      const double permuted = aggregate_short(q, phi);
      // Bitwise comparison; == would accept -0.0 vs 0.0.
      if (std::memcmp(&permuted, &base, sizeof(double)) != 0) invariant[i] = 0;
    }
  });

  out.permutation_invariance_holds = std::all_of(invariant.begin(), invariant.end(), [](char c) { return c != 0; });
  out.mi_bits = stats::mutual_information(out.short_scores, out.long_scores, bins);
  return out;
}

nlohmann::json orthogonality_report(const SyntheticEnsemble& ensemble, Aggregator phi, int bins,
                                    const OrthogonalityEstimate& estimate) {
  return {{"regime", to_string(ensemble.regime)},
          {"K", ensemble.k},
          {"N", ensemble.samples.size()},
          {"bins", bins},
          {"phi", to_string(phi)},
          {"seed", ensemble.seed},
          {"mi_bits", estimate.mi_bits},
          {"permutation_invariance_holds", estimate.permutation_invariance_holds}};
}

}  // namespace longcode
