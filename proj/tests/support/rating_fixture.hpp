#pragma once

#include <map>
#include <sstream>
#include <string>

#include "longcode/harness.hpp"
#include "longcode/random.hpp"

namespace testutil {

/// Random 1-5 ratings for `models` x `per_model` videos, every annotator
/// rating every dimension.
struct SyntheticRatings {
  std::string csv;
  std::map<std::string, std::string> model_of;
};

inline SyntheticRatings synthetic_ratings(std::size_t models, std::size_t per_model, std::size_t annotators,
                                          std::uint64_t seed) {
  longcode::Rng rng(seed);
  SyntheticRatings out;
  std::ostringstream os;
  os << "video_id,annotator_id,dimension,score\n";
  for (std::size_t m = 0; m < models; ++m) {
    for (std::size_t v = 0; v < per_model; ++v) {
      const std::string video = "m" + std::to_string(m) + "-v" + std::to_string(v);
      out.model_of[video] = "model-" + std::to_string(m);
      for (std::size_t a = 0; a < annotators; ++a) {
        for (auto d : longcode::kAllDimensions) {
          os << video << ",ann" << a << ',' << longcode::to_string(d) << ',' << 1 + rng.below(5) << '\n';
        }
      }
    }
  }
  out.csv = os.str();
  return out;
}

}  // namespace testutil
