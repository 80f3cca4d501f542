#pragma once

#include <string>
#include <vector>

#include "sstate/structural/fit.hpp"

namespace sstate::structural {

enum class Criterion { aic, bic };

struct RankedFit {
  std::size_t candidate = 0;  // index into the input list
  double score = 0.0;         // value of the ranking criterion
  DecompositionResult result;
};

struct Selection {
  std::vector<RankedFit> ranking;  // best first
  std::vector<std::string> warnings;
};

/// Fits every candidate and ranks by the criterion (ascending); ties go to the
/// spec with fewer parameters. Failed fits are dropped with a warning.
Selection select_model(const std::vector<ComponentSpec>& specs, const TimeSeries& y, Criterion criterion = Criterion::aic,
                       const FitConfig& config = {}, unsigned workers = 1);

}  // namespace sstate::structural
