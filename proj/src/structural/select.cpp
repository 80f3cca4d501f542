#include "sstate/structural/select.hpp"

#include <algorithm>
#include <optional>

#include "sstate/core/parallel.hpp"

namespace sstate::structural {

Selection select_model(const std::vector<ComponentSpec>& specs, const TimeSeries& y, Criterion criterion,
                       const FitConfig& config, unsigned workers) {
  if (specs.empty()) throw InvalidArgument("select_model needs at least one candidate");
  std::vector<std::optional<DecompositionResult>> fits(specs.size());
  std::vector<std::string> errors(specs.size());
  parallel_for(specs.size(), workers, [&](std::size_t i) {
    try {
      fits[i] = fit_mle(specs[i], y, config);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  Selection out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!fits[i]) {
      const std::string name = specs[i].name.empty() ? "#" + std::to_string(i) : specs[i].name;
      out.warnings.push_back("candidate " + name + " failed: " + errors[i]);
      continue;
    }
    const double score = criterion == Criterion::aic ? fits[i]->aic : fits[i]->bic;
    out.ranking.push_back({i, score, std::move(*fits[i])});
  }
  if (out.ranking.empty()) throw FitError("every candidate model failed to fit");
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [](const RankedFit& a, const RankedFit& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.result.n_params < b.result.n_params;
  });
  return out;
}

}  // namespace sstate::structural
