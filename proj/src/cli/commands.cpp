#include "sstate/cli/commands.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

#include "sstate/cli/io.hpp"
#include "sstate/core/parallel.hpp"
#include "sstate/core/simulate.hpp"
#include "sstate/factors/identify.hpp"
#include "sstate/factors/reconstruct.hpp"
#include "sstate/ingest/fetch.hpp"
#include "sstate/ingest/grid.hpp"
#include "sstate/regime/msar.hpp"
#include "sstate/spectral/spectral.hpp"
#include "sstate/structural/select.hpp"

namespace sstate::cli {

namespace fs = std::filesystem;
using structural::ComponentSpec;
using structural::DecompositionResult;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Series from a vector whose NaN entries are missing.
TimeSeries with_gaps(const Eigen::VectorXd& v, YearMonth start, int step, std::string label) {
  TimeSeries s(v, start, step, std::move(label));
  s.missing = v.array().isNaN();
  s.values = s.missing.select(0.0, v);
  return s;
}

Eigen::VectorXd as_nan(const TimeSeries& s) { return s.missing.select(kNaN, s.values); }

std::vector<TimeSeries> pick_series(const std::vector<TimeSeries>& all, const std::vector<std::string>& names,
                                    const Section& section, const std::string& key) {
  if (names.empty()) return all;
  std::vector<TimeSeries> out;
  for (const auto& n : names) {
    const auto it = std::find_if(all.begin(), all.end(), [&](const TimeSeries& s) { return s.label == n; });
    if (it == all.end()) throw ConfigError("[" + section.name() + "] " + key + ": no series labelled '" + n + "'");
    out.push_back(*it);
  }
  return out;
}

YearMonth parse_stamp(const Section& s, const std::string& key, const std::string& text) {
  try {
    return YearMonth::parse(text);
  } catch (const ParseError&) {
    throw ConfigError("[" + s.name() + "] " + key + ": expected YYYY-MM, got '" + text + "'");
  }
}

template <typename E, typename F>
E parse_enum(const Section& s, const std::string& key, const std::string& fallback, F&& from_string) {
  try {
    return from_string(s.get(key, fallback));
  } catch (const InvalidArgument& e) {
    throw ConfigError("[" + s.name() + "] " + key + ": " + e.what());
  }
}

Json stat_json(const structural::TestStatistic& t) {
  return {{"statistic", json_number(t.statistic)}, {"p_value", json_number(t.p_value)}, {"dof", t.dof}};
}

Json parameter_json(const structural::Parameter& p) {
  return {{"value", json_number(p.value)}, {"estimated", p.estimate}};
}

Json spec_json(const ComponentSpec& s, int step_months) {
  Json j = Json::object();
  if (s.trend)
    j["trend"] = {{"order", s.trend->order}, {"variance", parameter_json(s.trend->variance)}};
  if (s.has_seasonal())
    j["seasonal"] = {{"variant", structural::to_string(s.seasonal.variant)},
                     {"period", s.seasonal.period},
                     {"variance", parameter_json(s.seasonal.variance)}};
  if (s.cycle.present)
    j["cycle"] = {{"damping", parameter_json(s.cycle.damping)},
                  {"frequency", parameter_json(s.cycle.frequency)},
                  {"period_months", json_number(spectral::cycle_period(s.cycle.frequency.value, step_months))},
                  {"variance", parameter_json(s.cycle.variance)}};
  if (s.ar.order > 0)
    j["ar"] = {{"order", s.ar.order},
               {"coefficients", json_vector(s.ar.coefficients.head(s.ar.order))},
               {"coefficients_estimated", s.ar.estimate_coefficients},
               {"variance", parameter_json(s.ar.variance)}};
  j["obs_variance"] = parameter_json(s.obs_variance);
  return j;
}

Json decomposition_json(const std::string& label, const DecompositionResult& r) {
  Json warnings = Json::array();
  for (const auto& w : r.warnings) warnings.push_back(w);
  return {{"label", label},
          {"spec", spec_json(r.fitted_spec, r.observed.step_months)},
          {"log_likelihood", json_number(r.log_likelihood)},
          {"aic", json_number(r.aic)},
          {"bic", json_number(r.bic)},
          {"n_params", r.n_params},
          {"n_effective", r.n_effective},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"diagnostics",
           {{"ljung_box", stat_json(r.diagnostics.ljung_box)},
            {"normality", stat_json(r.diagnostics.normality)},
            {"n_residuals", r.diagnostics.n_residuals}}},
          {"warnings", warnings}};
}

std::string decomposition_csv(const DecompositionResult& r) {
  const auto& y = r.observed;
  std::vector<TimeSeries> cols{with_gaps(as_nan(y), y.start, y.step_months, "observed")};
  const std::pair<const structural::ComponentPath*, const char*> parts[] = {
      {&r.trend, "trend"}, {&r.seasonal, "seasonal"}, {&r.cycle, "cycle"}, {&r.irregular, "irregular"}};
  for (const auto& [c, name] : parts) {
    if (!c->present) continue;
    cols.push_back(with_gaps(c->path.values, y.start, y.step_months, name));
    cols.push_back(with_gaps(c->variance.cwiseMax(0.0).cwiseSqrt(), y.start, y.step_months, std::string(name) + "_sd"));
  }
  cols.push_back(with_gaps(r.observation_error, y.start, y.step_months, "error"));
  return series_csv(cols);
}

}  // namespace

// ---------------------------------------------------------------- ingest

void cmd_ingest(const RunConfig& config) {
  const Section s = config.section("ingest");
  s.expect_keys({{"input", "second", "boundary", "south", "north", "west", "east", "box_size", "weighting",
                  "anomalies", "max_missing"}});
  const fs::path first = config.resolve(s.require("input"));
  ingest::GriddedField field = ingest::read_grid_csv(first.string());
  Json overlap = nullptr;
  if (s.has("second")) {
    const YearMonth boundary = parse_stamp(s, "boundary", s.require("boundary"));
    const auto stitched = ingest::stitch_datasets(field, ingest::read_grid_csv(config.resolve(s.get("second")).string()),
                                                  boundary);
    field = stitched.field;
    if (stitched.overlap) {
      const auto& o = *stitched.overlap;
      const Eigen::ArrayXd seen = o.offsets.reshaped().array();
      const double mean = seen.isNaN().all() ? kNaN : seen.isNaN().select(0.0, seen).sum() / double((!seen.isNaN()).count());
      overlap = {{"months", o.months}, {"mean_offset", json_number(mean)}, {"offsets", json_matrix(o.offsets)}};
    }
  }

  ingest::BoxRegion region;
  region.south = s.get_double("south", region.south);
  region.north = s.get_double("north", region.north);
  region.west = s.get_double("west", region.west);
  region.east = s.get_double("east", region.east);
  region.box_size = s.get_double("box_size", region.box_size);
  try {
    region.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("[ingest] ") + e.what());
  }
  const std::string weighting = s.get("weighting", "unweighted");
  if (weighting != "unweighted" && weighting != "cos_latitude")
    throw ConfigError("[ingest] weighting: expected unweighted or cos_latitude, got '" + weighting + "'");
  const bool anomalies = s.get_bool("anomalies", true);

  if (anomalies) field = ingest::remove_monthly_global_mean(field);
  const auto boxed = ingest::box_average(
      field, region, weighting == "cos_latitude" ? ingest::BoxWeighting::cos_latitude : ingest::BoxWeighting::unweighted);
  const auto panel = ingest::to_panel(boxed, region, s.get_double("max_missing", 0.2));

  OutputDir out(config, "ingest");
  out.write("panel.csv", series_csv(panel.series));
  std::string boxes = "box,lat,lon\n";
  for (const auto& b : panel.boxes) boxes += fmt::format("{},{},{}\n", b.id, b.lat, b.lon);
  out.write("boxes.csv", boxes);
  std::ostringstream grid;
  ingest::write_grid_csv(boxed, grid);
  out.write("field.csv", grid.str());
  Json warnings = Json::array();
  for (const auto& w : panel.warnings) warnings.push_back(w);
  out.write_json("ingest.json", {{"start", field.start.iso()},
                                 {"end", field.end().plus_months(-1).iso()},
                                 {"months", field.n_times},
                                 {"anomalies", anomalies},
                                 {"weighting", weighting},
                                 {"boxes", panel.boxes.size()},
                                 {"overlap", overlap},
                                 {"warnings", warnings}});
  out.write_manifest();
  std::cout << fmt::format("ingest: {} boxes, {} months -> {}\n", panel.boxes.size(), field.n_times,
                           out.path().string());
}

// ---------------------------------------------------------------- decompose

void cmd_decompose(const RunConfig& config) {
  const Section s = config.section("decompose");
  s.expect_keys({{"input", "series", "select", "candidates", "em_iterations", "max_iterations"}, component_keys()});
  const fs::path input = config.resolve(s.require("input"));

  structural::FitConfig fit;
  fit.em_iterations = static_cast<int>(s.get_int("em_iterations", fit.em_iterations));
  fit.max_iterations = static_cast<int>(s.get_int("max_iterations", fit.max_iterations));

  const std::string select = s.get("select", "none");
  if (select != "none" && select != "aic" && select != "bic")
    throw ConfigError("[decompose] select: expected none, aic or bic, got '" + select + "'");
  std::vector<ComponentSpec> candidates;
  if (select == "none" || !s.has("candidates")) {
    candidates.push_back(component_spec_from_section(s));
  } else {
    for (const auto& name : s.get_list("candidates")) {
      if (!config.has_section("model." + name))
        throw ConfigError("[decompose] candidates: no section [model." + name + "]");
      const Section m = config.section("model." + name);
      m.expect_keys({component_keys()});
      candidates.push_back(component_spec_from_section(m));
      if (!m.has("name")) candidates.back().name = name;
    }
  }
  const auto criterion = select == "bic" ? structural::Criterion::bic : structural::Criterion::aic;
  const auto series = pick_series(read_series_csv(input), s.get_list("series"), s, "series");

  struct Slot {
    std::optional<DecompositionResult> result;
    std::vector<structural::RankedFit> ranking;
    std::vector<std::string> warnings;
    std::string error;
  };
  std::vector<Slot> slots(series.size());
  parallel_for(series.size(), config.workers, [&](std::size_t i) {
    try {
      if (select == "none") {
        slots[i].result = structural::fit_mle(candidates.front(), series[i], fit);
      } else {
        auto sel = structural::select_model(candidates, series[i], criterion, fit, 1);
        slots[i].warnings = sel.warnings;
        if (sel.ranking.empty()) throw FitError("every candidate model failed");
        slots[i].result = sel.ranking.front().result;
        slots[i].ranking = std::move(sel.ranking);
      }
    } catch (const std::exception& e) {
      slots[i].error = e.what();
    }
  });

  OutputDir out(config, "decompose");
  std::vector<TimeSeries> trends, cycles;
  bool all_cycles = true;
  Json summary = Json::array();
  std::vector<std::string> failed;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::string& label = series[i].label;
    const Slot& slot = slots[i];
    if (!slot.result) {
      failed.push_back(label);
      summary.push_back({{"label", label}, {"status", "failed"}, {"error", slot.error}});
      all_cycles = false;
      continue;
    }
    const DecompositionResult& r = *slot.result;
    Json j = decomposition_json(label, r);
    j["spec_ini"] = component_spec_to_ini(r.fitted_spec, "model." + label);
    if (!slot.ranking.empty()) {
      Json ranking = Json::array();
      for (const auto& rf : slot.ranking)
        ranking.push_back({{"model", candidates[rf.candidate].name},
                           {"score", json_number(rf.score)},
                           {"aic", json_number(rf.result.aic)},
                           {"bic", json_number(rf.result.bic)},
                           {"n_params", rf.result.n_params}});
      j["selection"] = {{"criterion", select}, {"ranking", ranking}};
      for (const auto& w : slot.warnings) j["warnings"].push_back(w);
    }
    const std::string stem = file_stem(label);
    out.write_json(stem + ".json", j);
    out.write(stem + ".csv", decomposition_csv(r));

    if (r.trend.present) trends.push_back(with_gaps(r.trend.path.values, r.observed.start, r.observed.step_months, label));
    if (r.cycle.present)
      cycles.push_back(with_gaps(r.cycle.path.values, r.observed.start, r.observed.step_months, label));
    else
      all_cycles = false;
    Json entry = {{"label", label},
                  {"status", "ok"},
                  {"log_likelihood", json_number(r.log_likelihood)},
                  {"aic", json_number(r.aic)},
                  {"bic", json_number(r.bic)},
                  {"converged", r.converged}};
    if (!slot.ranking.empty()) entry["selected"] = candidates[slot.ranking.front().candidate].name;
    summary.push_back(entry);
  }
  if (!trends.empty()) out.write("trends.csv", series_csv(trends));
  if (all_cycles && !cycles.empty()) out.write("cycles.csv", series_csv(cycles));
  out.write_json("summary.json", {{"series", summary}, {"failed", failed.size()}});
  out.write_manifest({{"status", failed.empty() ? "ok" : "partial"}});

  if (!failed.empty()) {
    std::string names;
    for (const auto& f : failed) names += (names.empty() ? "" : ", ") + f;
    throw FitError(fmt::format("{} of {} fits failed ({}); partial results in {}", failed.size(), series.size(), names,
                               out.path().string()));
  }
  std::cout << fmt::format("decompose: {} series -> {}\n", series.size(), out.path().string());
}

// ---------------------------------------------------------------- common

void cmd_common(const RunConfig& config) {
  const Section s = config.section("common");
  s.expect_keys({{"source", "input", "kind", "order", "criterion", "threshold", "cap", "depth", "weighting",
                  "reconstruct", "reconstruct_k", "window"}});
  const std::string kind = s.get("kind", "trends");
  if (kind != "trends" && kind != "cycles")
    throw ConfigError("[common] kind: expected trends or cycles, got '" + kind + "'");

  fs::path input;
  if (s.has("input")) {
    input = config.resolve(s.get("input"));
  } else {
    const fs::path dir = config.resolve(s.get("source", "@decompose"));
    if (!fs::is_directory(dir)) throw ConfigError("[common] source: no directory " + dir.string());
    input = dir / (kind + ".csv");
    if (!fs::exists(input)) {
      if (kind == "cycles")
        throw DataError("panel lacks cycle components: " + input.string() +
                        " is missing (decompose without cycle = true, or a fit failed)");
      throw DataError("no trend paths in " + dir.string());
    }
  }
  const auto series = read_series_csv(input);
  const factors::Panel panel = factors::make_panel(series, box_labels(series));

  const auto weighting =
      parse_enum<factors::HankelWeighting>(s, "weighting", "scaled", factors::hankel_weighting_from_string);
  Eigen::Index depth = 0;
  if (s.get("depth", "auto") != "auto") depth = s.get_int("depth", 0);
  if (depth < 0) throw ConfigError("[common] depth: must be positive");

  factors::OrderRule rule;
  rule.threshold = s.get_double("threshold", rule.threshold);
  rule.cap = s.get_int("cap", rule.cap);
  const std::string order_text = s.get("order", "auto");
  if (order_text == "auto") {
    rule.criterion = parse_enum<factors::OrderCriterion>(s, "criterion", "cumulative", factors::order_criterion_from_string);
  } else {
    rule.criterion = factors::OrderCriterion::fixed;
    rule.fixed_order = s.get_int("order", 1);
    if (rule.fixed_order < 1) throw ConfigError("[common] order: must be >= 1 or auto");
  }
  const auto probe = factors::identify_common_factors(panel, 1, depth, depth, weighting);
  const Eigen::Index order = factors::select_order(probe.singular_values, rule);
  const auto model = factors::identify_common_factors(panel, order, depth, depth, weighting);

  OutputDir out(config, "common");
  std::vector<TimeSeries> paths;
  for (Eigen::Index k = 0; k < model.order; ++k)
    paths.emplace_back(model.factor_paths.row(k).transpose(), model.start, model.step_months, fmt::format("f{}", k + 1));
  out.write("factors.csv", series_csv(paths));

  std::string header = "box,lat,lon";
  for (Eigen::Index k = 0; k < model.order; ++k) header += fmt::format(",f{}", k + 1);
  std::string loadings = header + "\n";
  for (const auto& row : factors::factor_loadings(model)) {
    loadings += fmt::format("{},{},{}", row.box.id, format_number(row.box.lat), format_number(row.box.lon));
    for (double v : row.loadings) loadings += "," + format_number(v);
    loadings += "\n";
  }
  out.write("loadings.csv", loadings);

  std::string corr = "box,lat,lon,r\n";
  for (const auto& row : factors::correlation_map(panel, model.factor_paths.row(0).transpose()))
    corr += fmt::format("{},{},{},{}\n", row.box.id, format_number(row.box.lat), format_number(row.box.lon),
                        row.r ? format_number(*row.r) : std::string());
  out.write("correlation.csv", corr);

  const Eigen::VectorXd sv = model.singular_values;
  // Shares of squared singular values, the quantity the cumulative rule uses.
  const double total = sv.squaredNorm();
  std::string svs = "index,value,share,cumulative\n";
  double cum = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    cum += sv[k] * sv[k];
    svs += fmt::format("{},{},{},{}\n", k + 1, sv[k], sv[k] * sv[k] / total, cum / total);
  }
  out.write("singular_values.csv", svs);

  Json warnings = Json::array();
  for (const auto& w : model.warnings) warnings.push_back(w);
  Json reports = Json::array();
  const auto targets = s.get_list("reconstruct");
  if (!targets.empty()) {
    Eigen::Index k = s.get_int("reconstruct_k", model.order);
    if (k < 1) throw ConfigError("[common] reconstruct_k: must be >= 1");
    if (k > model.order) {
      warnings.push_back(fmt::format("reconstruct_k {} exceeds the model order; using {}", k, model.order));
      k = model.order;
    }
    std::optional<factors::Window> window;
    if (s.has("window")) {
      const auto parts = s.get_list("window");
      if (parts.size() != 2) throw ConfigError("[common] window: expected 'YYYY-MM, YYYY-MM'");
      Eigen::Index ends[2];
      for (int e = 0; e < 2; ++e) {
        const long offset = parse_stamp(s, "window", parts[e]).ordinal() - panel.start.ordinal();
        if (offset % panel.step_months != 0) throw ConfigError("[common] window: stamp off the sampling grid");
        ends[e] = offset / panel.step_months;
      }
      window = factors::Window{ends[0], ends[1]};
    }
    for (const auto& label : targets) {
      const auto it = std::find_if(panel.boxes.begin(), panel.boxes.end(), [&](const auto& b) { return b.id == label; });
      if (it == panel.boxes.end()) throw ConfigError("[common] reconstruct: no series labelled '" + label + "'");
      const Eigen::Index idx = it - panel.boxes.begin();
      const auto rep = factors::reconstruct(model, panel, idx, k, window);
      std::vector<TimeSeries> cols{series[static_cast<std::size_t>(idx)]};
      cols.front().label = "observed";
      for (std::size_t j = 0; j < rep.paths.size(); ++j) {
        cols.push_back(rep.paths[j]);
        cols.back().label = fmt::format("k{}", j + 1);
      }
      out.write("reconstruct_" + file_stem(label) + ".csv", series_csv(cols));
      Json r = {{"label", label},
                {"correlation", rep.correlation},
                {"r_squared", rep.r_squared},
                {"window", nullptr},
                {"window_r_squared", rep.window_r_squared}};
      if (rep.window)
        r["window"] = {panel.start.plus_months(rep.window->first * panel.step_months).iso(),
                       panel.start.plus_months(rep.window->second * panel.step_months).iso()};
      reports.push_back(r);
    }
    out.write_json("reconstruction.json", reports);
  }

  out.write_json("model.json", {{"kind", kind},
                                {"series", panel.series()},
                                {"length", panel.length()},
                                {"start", panel.start.iso()},
                                {"order", model.order},
                                {"criterion", factors::to_string(rule.criterion)},
                                {"weighting", factors::to_string(model.weighting)},
                                {"past_lags", model.past_lags},
                                {"future_lags", model.future_lags},
                                {"singular_values", json_vector(sv)},
                                {"transition", json_matrix(model.transition)},
                                {"warnings", warnings}});
  out.write_manifest();
  std::cout << fmt::format("common: {} series, order {} -> {}\n", panel.series(), model.order, out.path().string());
}

// ---------------------------------------------------------------- msar

void cmd_msar(const RunConfig& config) {
  const Section s = config.section("msar");
  s.expect_keys({{"input", "series", "truth", "starts", "max_iterations", "standard_errors"}});
  const auto all = read_series_csv(config.resolve(s.require("input")));
  const std::string truth_label = s.get("truth");
  std::string label = s.get("series");
  if (label.empty()) {
    for (const auto& c : all)
      if (c.label != truth_label) {
        label = c.label;
        break;
      }
    if (label.empty()) throw ConfigError("[msar] input has no series column");
  }
  const TimeSeries y = pick_series(all, {label}, s, "series").front();
  std::optional<TimeSeries> truth;
  if (!truth_label.empty()) truth = pick_series(all, {truth_label}, s, "truth").front();

  regime::MsarConfig mc;
  mc.starts = static_cast<int>(s.get_int("starts", mc.starts));
  mc.max_iterations = static_cast<int>(s.get_int("max_iterations", mc.max_iterations));
  mc.standard_errors = s.get_bool("standard_errors", true);
  mc.workers = config.workers;
  const auto r = regime::fit_msar(y, mc);

  const char* names[] = {"high", "low"};
  Json regimes = Json::object();
  for (int k = 0; k < 2; ++k) {
    const auto& g = r.spec.regimes[static_cast<std::size_t>(k)];
    const auto& se = r.standard_errors;
    regimes[names[k]] = {{"mean", json_number(g.mean)},
                         {"ar", json_vector(g.ar)},
                         {"variance", json_number(g.variance)},
                         {"se",
                          {{"mean", json_number(se.mean[static_cast<std::size_t>(k)])},
                           {"ar", json_vector(se.ar[static_cast<std::size_t>(k)])},
                           {"variance", json_number(se.variance[static_cast<std::size_t>(k)])}}}};
  }
  Json warnings = Json::array();
  for (const auto& w : r.warnings) warnings.push_back(w);
  Json j = {{"series", label},
            {"regimes", regimes},
            {"transition", json_matrix(r.spec.transition)},
            {"transition_se",
             {{"high_high", json_number(r.standard_errors.p_high_high)},
              {"low_low", json_number(r.standard_errors.p_low_low)}}},
            {"log_likelihood", json_number(r.log_likelihood)},
            {"aic", json_number(r.aic)},
            {"n_params", r.n_params},
            {"converged", r.converged},
            {"warnings", warnings}};

  std::vector<TimeSeries> cols{y};
  cols.front().label = "y";
  cols.push_back(TimeSeries(r.filtered_probs.col(0), y.start, y.step_months, "filtered_high"));
  cols.push_back(TimeSeries(r.smoothed_probs.col(0), y.start, y.step_months, "smoothed_high"));
  cols.push_back(r.smoothed_state_path);
  cols.back().label = "state_path";
  if (truth) {
    Eigen::Index hits = 0, n = 0;
    for (Eigen::Index t = 0; t < y.size(); ++t) {
      if (truth->missing[t]) continue;
      const int predicted = r.smoothed_probs(t, 0) >= 0.5 ? 0 : 1;
      hits += predicted == static_cast<int>(std::lround(truth->values[t]));
      ++n;
    }
    j["classification_accuracy"] = n > 0 ? json_number(double(hits) / double(n)) : Json(nullptr);
    cols.push_back(*truth);
    cols.back().label = "truth";
  }

  OutputDir out(config, "msar");
  out.write_json("msar.json", j);
  out.write("regimes.csv", series_csv(cols));
  out.write_manifest();
  std::cout << fmt::format("msar: {} observations -> {}\n", y.size(), out.path().string());
}

// ---------------------------------------------------------------- spectrum

void cmd_spectrum(const RunConfig& config) {
  const Section s = config.section("spectrum");
  s.expect_keys({{"input", "series", "detrend", "taper", "peaks"}});
  const auto all = read_series_csv(config.resolve(s.require("input")));
  const auto series = pick_series(all, s.get_list("series"), s, "series");
  spectral::PeriodogramOptions opt;
  opt.detrend = s.get_bool("detrend", false);
  opt.taper = s.get_double("taper", 0.0);
  const long n_peaks = s.get_int("peaks", 5);
  if (n_peaks < 1) throw ConfigError("[spectrum] peaks: must be >= 1");

  std::string table = "series,frequency,period,power\n";
  Json peaks = Json::object();
  for (const auto& y : series) {
    const auto sp = spectral::periodogram(y, opt);
    for (Eigen::Index k = 0; k < sp.frequencies.size(); ++k)
      table += fmt::format("{},{},{},{}\n", y.label, sp.frequencies[k], sp.period(k), sp.power[k]);
    Json list = Json::array();
    for (const auto& p : spectral::find_peaks(sp, static_cast<std::size_t>(n_peaks)))
      list.push_back({{"frequency", p.frequency}, {"period", p.period}, {"power", p.power}});
    peaks[y.label] = {{"variance", sp.processed_variance}, {"peaks", list}};
  }

  OutputDir out(config, "spectrum");
  out.write("spectrum.csv", table);
  out.write_json("peaks.json", peaks);
  out.write_manifest();
  std::cout << fmt::format("spectrum: {} series -> {}\n", series.size(), out.path().string());
}

// ---------------------------------------------------------------- fetch

void cmd_fetch(const RunConfig& config) {
  const Section s = config.section("fetch");
  s.expect_keys({{"url", "label", "refresh", "timeout"}});
  const std::string url = s.require("url");
  ingest::FetchOptions opt;
  opt.cache_dir = config.cache_dir.string();
  opt.offline = config.offline;
  opt.refresh = s.get_bool("refresh", false);
  opt.timeout_seconds = static_cast<int>(s.get_int("timeout", opt.timeout_seconds));
  auto r = ingest::fetch_index(url, opt);
  r.series.label = s.get("label", "index");

  OutputDir out(config, "fetch");
  out.write("index.csv", series_csv({r.series}));
  out.write_json("fetch.json", {{"url", url},
                                {"label", r.series.label},
                                {"cache_key", ingest::cache_key(url)},
                                {"start", r.series.start.iso()},
                                {"length", r.series.size()},
                                {"step_months", r.series.step_months},
                                {"missing", r.series.missing.count()}});
  out.write_manifest({{"from_cache", r.from_cache}});
  std::cout << fmt::format("fetch: {} values{} -> {}\n", r.series.size(), r.from_cache ? " (cached)" : "",
                           out.path().string());
}

// ---------------------------------------------------------------- synth

namespace {

Eigen::VectorXd unit_sd(Eigen::VectorXd v) {
  v.array() -= v.mean();
  return v / std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

Eigen::VectorXd integrated_walk(GaussianStream& g, Eigen::Index T) {
  Eigen::VectorXd v(T);
  double level = 0, slope = 0;
  for (Eigen::Index t = 0; t < T; ++t) v[t] = level += slope += g();
  return unit_sd(v);
}

Eigen::VectorXd stochastic_cycle(GaussianStream& g, Eigen::Index T, double period, double damping) {
  const double lambda = 2 * std::numbers::pi / period, c = std::cos(lambda), s = std::sin(lambda);
  Eigen::VectorXd v(T);
  double a = g(), b = g();
  for (Eigen::Index t = 0; t < T; ++t) {
    const double na = damping * (c * a + s * b) + g(), nb = damping * (-s * a + c * b) + g();
    a = na, b = nb;
    v[t] = a;
  }
  return unit_sd(v);
}

void synth_grid(const Section& s, const RunConfig& config, OutputDir& out) {
  s.expect_keys({{"kind", "start", "months", "south", "north", "west", "east", "resolution", "cycle_period", "noise",
                  "land", "split", "overlap", "offset"}});
  const YearMonth start = parse_stamp(s, "start", s.get("start", "1990-01"));
  const Eigen::Index T = s.get_int("months", 240);
  const double south = s.get_double("south", 20), north = s.get_double("north", 35);
  const double west = s.get_double("west", 120), east = s.get_double("east", 145);
  const double res = s.get_double("resolution", 2.5);
  const double noise = s.get_double("noise", 0.3);
  const Eigen::Index n_lat = std::lround((north - south) / res), n_lon = std::lround((east - west) / res);
  if (T < 2 || n_lat < 1 || n_lon < 1) throw ConfigError("[synth] grid needs months >= 2 and a non-empty region");

  std::set<std::pair<long, long>> land;
  for (const auto& cell : s.get_list("land")) {
    double lat = 0, lon = 0;
    if (std::sscanf(cell.c_str(), "%lf:%lf", &lat, &lon) != 2)
      throw ConfigError("[synth] land: expected lat:lon corners, got '" + cell + "'");
    land.insert({std::lround((lat - south) / res), std::lround((lon - west) / res)});
  }

  GaussianStream g(config.seed);
  const Eigen::VectorXd f1 = integrated_walk(g, T), f2 = integrated_walk(g, T);
  const Eigen::VectorXd cyc = stochastic_cycle(g, T, s.get_double("cycle_period", 44), 0.98);
  Eigen::VectorXd global(T);
  for (Eigen::Index t = 0; t < T; ++t) global[t] = 0.5 * std::sin(2 * std::numbers::pi * double(t) / 120.0);

  ingest::GriddedField field(start, T, Eigen::VectorXd::LinSpaced(n_lat + 1, south, north),
                             Eigen::VectorXd::LinSpaced(n_lon + 1, west, east));
  for (Eigen::Index i = 0; i < n_lat; ++i) {
    const double u = (double(i) + 0.5) / double(n_lat);
    for (Eigen::Index j = 0; j < n_lon; ++j) {
      const double v = (double(j) + 0.5) / double(n_lon);
      const double a1 = 1 + 0.5 * u, a2 = std::sin(std::numbers::pi * v), c = std::cos(std::numbers::pi * u);
      const bool dry = land.count({long(i), long(j)}) > 0;
      for (Eigen::Index t = 0; t < T; ++t)
        field.at(t, i, j) = dry ? kNaN : global[t] + a1 * f1[t] + a2 * f2[t] + c * cyc[t] + noise * g();
    }
  }

  const auto slice = [&](Eigen::Index from, Eigen::Index to, double shift) {
    ingest::GriddedField f(start.plus_months(from), to - from, field.lat_edges, field.lon_edges);
    const std::size_t cells = static_cast<std::size_t>(n_lat * n_lon);
    std::copy(field.values.begin() + static_cast<std::ptrdiff_t>(std::size_t(from) * cells),
              field.values.begin() + static_cast<std::ptrdiff_t>(std::size_t(to) * cells), f.values.begin());
    for (double& x : f.values) x += shift;
    std::ostringstream os;
    ingest::write_grid_csv(f, os);
    return os.str();
  };
  if (!s.has("split")) {
    out.write("grid.csv", slice(0, T, 0.0));
    return;
  }
  const Eigen::Index split = parse_stamp(s, "split", s.get("split")).ordinal() - start.ordinal();
  const Eigen::Index overlap = s.get_int("overlap", 0);
  if (split < 1 || split >= T || overlap < 0 || split + overlap > T)
    throw ConfigError("[synth] split/overlap must fall inside the record");
  out.write("grid_a.csv", slice(0, split + overlap, 0.0));
  out.write("grid_b.csv", slice(split, T, s.get_double("offset", 0.0)));
}

void synth_msar(const Section& s, const RunConfig& config, OutputDir& out) {
  s.expect_keys({{"kind", "start", "length", "mean_high", "mean_low", "ar", "variance", "stay"}});
  regime::MsarSpec spec;
  const auto ar = s.get_list("ar");
  Eigen::Vector2d phi(0.2, 0.05);
  if (!ar.empty()) {
    if (ar.size() != 2) throw ConfigError("[synth] ar: expected two coefficients");
    phi << std::stod(ar[0]), std::stod(ar[1]);
  }
  spec.regimes[0] = {s.get_double("mean_high", 1.0), phi, s.get_double("variance", 0.25)};
  spec.regimes[1] = {s.get_double("mean_low", -1.0), phi, s.get_double("variance", 0.25)};
  const double stay = s.get_double("stay", 0.95);
  spec.transition << stay, 1 - stay, 1 - stay, stay;
  const auto sim = regime::simulate_msar(spec, s.get_int("length", 1000), config.seed);
  TimeSeries y = sim.y;
  y.start = parse_stamp(s, "start", s.get("start", "1900-01"));
  y.label = "y";
  Eigen::VectorXd truth(y.size());
  for (Eigen::Index t = 0; t < y.size(); ++t) truth[t] = sim.regimes[static_cast<std::size_t>(t)];
  out.write("msar.csv", series_csv({y, TimeSeries(truth, y.start, 1, "truth")}));
}

void synth_cosine(const Section& s, const RunConfig& config, OutputDir& out) {
  s.expect_keys({{"kind", "start", "length", "period", "amplitude", "noise", "gap"}});
  const Eigen::Index T = s.get_int("length", 240);
  const double period = s.get_double("period", 12), amp = s.get_double("amplitude", 1.0);
  const double noise = s.get_double("noise", 0.5);
  GaussianStream g(config.seed);
  Eigen::VectorXd v(T);
  for (Eigen::Index t = 0; t < T; ++t) v[t] = amp * std::cos(2 * std::numbers::pi * double(t) / period) + noise * g();
  if (s.get_bool("gap", false)) v[T / 2] = kNaN;
  out.write("cosine.csv", series_csv({with_gaps(v, parse_stamp(s, "start", s.get("start", "2000-01")), 1, "cosine")}));
}

void synth_panel(const Section& s, const RunConfig& config, OutputDir& out) {
  s.expect_keys({{"kind", "start", "length", "series", "factors", "snr"}});
  const Eigen::Index T = s.get_int("length", 240), q = s.get_int("series", 12), m = s.get_int("factors", 2);
  const double snr = s.get_double("snr", 10);
  if (m < 1 || q < m || T < 2) throw ConfigError("[synth] panel needs 1 <= factors <= series and length >= 2");
  GaussianStream g(config.seed);
  // Orthonormalized factors and orthogonal loadings of equal norm, so every
  // factor carries the same share of the signal.
  Eigen::MatrixXd f(T, m);
  for (Eigen::Index k = 0; k < m; ++k) f.col(k) = integrated_walk(g, T);
  const Eigen::MatrixXd F = Eigen::HouseholderQR<Eigen::MatrixXd>(f).householderQ() * Eigen::MatrixXd::Identity(T, m);
  const Eigen::MatrixXd raw = Eigen::MatrixXd::NullaryExpr(q, m, [&] { return g(); });
  const Eigen::MatrixXd L = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() * Eigen::MatrixXd::Identity(q, m);
  const Eigen::MatrixXd x = L * F.transpose() * std::sqrt(double(T * q));
  const YearMonth start = parse_stamp(s, "start", s.get("start", "1990-01"));
  std::vector<TimeSeries> series;
  for (Eigen::Index i = 0; i < q; ++i) {
    const Eigen::VectorXd row = x.row(i).transpose();
    const double sd = std::sqrt((row.array() - row.mean()).square().mean());
    Eigen::VectorXd y = row;
    for (Eigen::Index t = 0; t < T; ++t) y[t] += sd / snr * g();
    series.emplace_back(y, start, 1, fmt::format("s{:02}", i + 1));
  }
  out.write("panel.csv", series_csv(series));
}

}  // namespace

void cmd_synth(const RunConfig& config) {
  const Section s = config.section("synth");
  const std::string kind = s.require("kind");
  OutputDir out(config, "synth");
  if (kind == "grid")
    synth_grid(s, config, out);
  else if (kind == "msar")
    synth_msar(s, config, out);
  else if (kind == "cosine")
    synth_cosine(s, config, out);
  else if (kind == "panel")
    synth_panel(s, config, out);
  else
    throw ConfigError("[synth] kind: expected grid, msar, cosine or panel, got '" + kind + "'");
  out.write_manifest({{"kind", kind}});
  std::cout << fmt::format("synth: {} -> {}\n", kind, out.path().string());
}

// ---------------------------------------------------------------- entry point

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const ConfigError&) {
    return exit_config;
  } catch (const ParseError&) {
    return exit_config;
  } catch (const InvalidArgument&) {
    return exit_config;
  } catch (const std::exception&) {
    return exit_compute;
  }
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Structural decomposition, regime switching and common factors for gridded time series"};
  app.set_version_flag("--version", kVersion);
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string out;
  bool offline = false;
  auto* config_opt = app.add_option("--config", config_path, "INI config file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides [run] seed)");
  auto* offline_opt = app.add_flag("--offline", offline, "never touch the network");
  auto* workers_opt = app.add_option("--workers", workers, "worker threads, 0 = all cores");
  auto* out_opt = app.add_option("--out", out, "output directory (overrides [run] out)");
  (void)config_opt;

  using Command = void (*)(const RunConfig&);
  const std::pair<const char*, Command> commands[] = {
      {"ingest", cmd_ingest},     {"decompose", cmd_decompose}, {"common", cmd_common}, {"msar", cmd_msar},
      {"spectrum", cmd_spectrum}, {"fetch", cmd_fetch},         {"synth", cmd_synth}};
  const char* help[] = {"gridded field -> box-average anomaly panel",
                        "structural decomposition of each series",
                        "common trends or cycles by subspace identification",
                        "two-regime Markov-switching AR(2)",
                        "periodogram and spectral peaks",
                        "download or read a cached index series",
                        "write synthetic fixtures"};
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < std::size(commands); ++i) subs.push_back(app.add_subcommand(commands[i].first, help[i]));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    Overrides ov;
    if (seed_opt->count()) ov.seed = seed;
    if (offline_opt->count()) ov.offline = offline;
    if (workers_opt->count()) ov.workers = workers;
    if (out_opt->count()) ov.out = out;
    const RunConfig config = RunConfig::load(config_path, ov);
    for (std::size_t i = 0; i < subs.size(); ++i)
      if (subs[i]->parsed()) commands[i].second(config);
    return exit_ok;
  } catch (...) {
    const int code = exit_code_for_current_exception();
    try {
      throw;
    } catch (const std::exception& e) {
      std::cerr << (code == exit_config ? "config error: " : "error: ") << e.what() << "\n";
    }
    return code;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"sstate"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace sstate::cli
