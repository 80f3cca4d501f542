#include "sstate/factors/panel.hpp"

#include <cmath>

#include "sstate/core/errors.hpp"

namespace sstate::factors {

Eigen::VectorXd Panel::unscale(Eigen::Index i, const Eigen::VectorXd& z) const {
  return (z.array() * scales[i] + means[i]).matrix();
}

Eigen::VectorXd Panel::scale(Eigen::Index i, const Eigen::VectorXd& x) const {
  return ((x.array() - means[i]) / scales[i]).matrix();
}

void Panel::validate() const {
  if (series() < 1) throw InvalidArgument("panel has no series");
  if (means.size() != series() || scales.size() != series() || static_cast<Eigen::Index>(boxes.size()) != series())
    throw DimensionError("panel metadata does not match the number of series");
  if (!data.allFinite()) throw DataError("panel contains non-finite values");
}

Panel make_panel(const std::vector<TimeSeries>& series, std::vector<BoxLabel> boxes) {
  if (series.empty()) throw InvalidArgument("panel needs at least one series");
  const Eigen::Index q = static_cast<Eigen::Index>(series.size());
  const Eigen::Index T = series.front().size();
  if (!boxes.empty() && static_cast<Eigen::Index>(boxes.size()) != q)
    throw DimensionError("box labels do not match the number of series");
  Panel p;
  p.start = series.front().start;
  p.step_months = series.front().step_months;
  p.data.resize(q, T);
  p.means.resize(q);
  p.scales.resize(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const auto& s = series[static_cast<std::size_t>(i)];
    if (s.size() != T || s.start != p.start || s.step_months != p.step_months)
      throw DataError("series " + std::to_string(i) + " (" + s.label + ") is not aligned with the panel time base");
    if (s.has_missing()) throw DataError("series " + std::to_string(i) + " (" + s.label + ") has missing values");
    const double mean = s.values.mean();
    double sd = std::sqrt((s.values.array() - mean).square().mean());
    if (!(sd > 0)) {
      p.warnings.push_back("series " + std::to_string(i) + " (" + s.label + ") is constant; left unscaled");
      sd = 1.0;
    }
    p.means[i] = mean;
    p.scales[i] = sd;
    p.data.row(i) = ((s.values.array() - mean) / sd).matrix().transpose();
  }
  if (boxes.empty()) {
    for (const auto& s : series) boxes.push_back(BoxLabel{s.label});
  }
  p.boxes = std::move(boxes);
  p.validate();
  return p;
}

namespace {

Panel component_panel(const std::vector<structural::DecompositionResult>& decomps, std::vector<BoxLabel> boxes,
                      structural::ComponentPath structural::DecompositionResult::*member, const char* what) {
  std::vector<TimeSeries> paths;
  paths.reserve(decomps.size());
  for (std::size_t i = 0; i < decomps.size(); ++i) {
    const auto& c = decomps[i].*member;
    if (!c.present) throw InvalidArgument("decomposition " + std::to_string(i) + " has no " + what + " component");
    TimeSeries s = c.path;
    s.label = decomps[i].observed.label;
    paths.push_back(std::move(s));
  }
  return make_panel(paths, std::move(boxes));
}

}  // namespace

Panel prepare_trend_panel(const std::vector<structural::DecompositionResult>& decomps, std::vector<BoxLabel> boxes) {
  return component_panel(decomps, std::move(boxes), &structural::DecompositionResult::trend, "trend");
}

Panel prepare_cycle_panel(const std::vector<structural::DecompositionResult>& decomps, std::vector<BoxLabel> boxes) {
  return component_panel(decomps, std::move(boxes), &structural::DecompositionResult::cycle, "cycle");
}

}  // namespace sstate::factors
