#include "sstate/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "sstate/ingest/fetch.hpp"

namespace sstate::cli {

namespace fs = std::filesystem;
using structural::ComponentSpec;
using structural::Parameter;

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::optional<double> to_double(const std::string& s) {
  double v = 0;
  const auto t = trim(s);
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty()) return std::nullopt;
  return v;
}

}  // namespace

Section::Section(std::string name, std::map<std::string, std::string> values)
    : name_(std::move(name)), values_(std::move(values)) {}

void Section::fail(const std::string& key, const std::string& message) const {
  throw ConfigError("[" + name_ + "] " + key + ": " + message);
}

std::string Section::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Section::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) fail(key, "required");
  return it->second;
}

double Section::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const auto v = to_double(get(key));
  if (!v) fail(key, "expected a number, got '" + get(key) + "'");
  return *v;
}

long Section::get_int(const std::string& key, long fallback) const {
  if (!has(key)) return fallback;
  const auto s = get(key);
  long v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) fail(key, "expected an integer, got '" + s + "'");
  return v;
}

bool Section::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto s = get(key);
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  fail(key, "expected true or false, got '" + s + "'");
}

std::vector<std::string> Section::get_list(const std::string& key) const {
  std::vector<std::string> out;
  if (!has(key)) return out;
  std::stringstream ss(get(key));
  for (std::string item; std::getline(ss, item, ',');)
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

void Section::expect_keys(std::initializer_list<std::initializer_list<const char*>> groups) const {
  std::set<std::string> allowed;
  for (const auto& g : groups) allowed.insert(g.begin(), g.end());
  for (const auto& [key, value] : values_)
    if (!allowed.count(key)) fail(key, "unknown key");
}

RunConfig RunConfig::load(const fs::path& path, const Overrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), fs::absolute(path).parent_path(), overrides);
}

RunConfig RunConfig::parse(const std::string& text, const fs::path& base_dir, const Overrides& overrides) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  RunConfig c;
  c.base_dir = base_dir;
  for (const auto& [name, child] : tree) {
    if (child.empty()) throw ConfigError("key '" + name + "' outside a section");
    std::map<std::string, std::string> values;
    for (const auto& [key, leaf] : child) values[key] = trim(leaf.data());
    c.sections_[name] = Section(name, std::move(values));
  }

  const Section run = c.section("run");
  run.expect_keys({{"seed", "workers", "out", "offline", "cache_dir"}});
  const long seed = run.get_int("seed", 0);
  if (seed < 0) throw ConfigError("[run] seed: must be >= 0");
  const long workers = run.get_int("workers", 1);
  if (workers < 0) throw ConfigError("[run] workers: must be >= 0");
  c.seed = overrides.seed.value_or(static_cast<std::uint64_t>(seed));
  c.workers = overrides.workers.value_or(static_cast<unsigned>(workers));
  c.offline = overrides.offline.value_or(run.get_bool("offline", false));
  c.out = overrides.out ? fs::absolute(*overrides.out) : base_dir / run.get("out", "out");
  c.cache_dir = run.has("cache_dir") ? base_dir / run.get("cache_dir") : fs::path(ingest::default_cache_dir());
  c.hash = ingest::sha256_hex(fmt::format("{}\nseed={}\noffline={}\n", text, c.seed, c.offline));
  return c;
}

Section RunConfig::section(const std::string& name) const {
  const auto it = sections_.find(name);
  return it == sections_.end() ? Section(name, {}) : it->second;
}

std::vector<std::string> RunConfig::section_names() const {
  std::vector<std::string> names;
  for (const auto& [name, s] : sections_) names.push_back(name);
  return names;
}

fs::path RunConfig::resolve(const std::string& path) const {
  if (path.empty()) throw ConfigError("empty path");
  if (path.front() == '@') return out / path.substr(1);
  const fs::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

std::initializer_list<const char*> component_keys() {
  static const std::initializer_list<const char*> keys = {
      "name",     "trend",     "trend_variance", "seasonal",        "period",      "seasonal_variance",
      "cycle",    "damping",   "frequency",      "cycle_variance",  "ar",          "ar_coefficients",
      "ar_variance", "obs_variance"};
  return keys;
}

namespace {

// "free", "free <start>" or a fixed number.
Parameter parse_parameter(const Section& s, const std::string& key, Parameter fallback) {
  if (!s.has(key)) return fallback;
  const std::string text = s.get(key);
  if (text == "free") return Parameter::free(fallback.estimate ? fallback.value : 0.0);
  if (text.rfind("free ", 0) == 0) {
    if (const auto v = to_double(text.substr(5))) return Parameter::free(*v);
  } else if (const auto v = to_double(text)) {
    return Parameter::fixed(*v);
  }
  throw ConfigError("[" + s.name() + "] " + key + ": expected 'free', 'free <start>' or a number, got '" + text + "'");
}

std::string format_parameter(const Parameter& p) {
  if (!p.estimate) return fmt::format("{}", p.value);
  return p.value == 0.0 ? "free" : fmt::format("free {}", p.value);
}

}  // namespace

ComponentSpec component_spec_from_section(const Section& s) {
  ComponentSpec spec;
  spec.name = s.get("name");

  const std::string trend = s.get("trend", "2");
  if (trend == "none" || trend == "0") {
    spec.trend.reset();
  } else {
    spec.trend->order = static_cast<int>(s.get_int("trend", 2));
    spec.trend->variance = parse_parameter(s, "trend_variance", spec.trend->variance);
  }

  try {
    spec.seasonal.variant = structural::seasonal_variant_from_string(s.get("seasonal", "none"));
  } catch (const InvalidArgument& e) {
    throw ConfigError("[" + s.name() + "] seasonal: " + e.what());
  }
  spec.seasonal.period = static_cast<int>(s.get_int("period", 12));
  spec.seasonal.variance = parse_parameter(s, "seasonal_variance", spec.seasonal.variance);

  spec.cycle.present = s.get_bool("cycle", false);
  spec.cycle.damping = parse_parameter(s, "damping", spec.cycle.damping);
  spec.cycle.frequency = parse_parameter(s, "frequency", spec.cycle.frequency);
  spec.cycle.variance = parse_parameter(s, "cycle_variance", spec.cycle.variance);

  spec.ar.order = static_cast<int>(s.get_int("ar", 0));
  if (s.has("ar_coefficients")) {
    std::string text = s.get("ar_coefficients");
    spec.ar.estimate_coefficients = text.rfind("free", 0) == 0;
    if (spec.ar.estimate_coefficients) text = text.substr(4);
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');)
      if (auto t = trim(item); !t.empty()) parts.push_back(t);
    if (parts.size() > 2) throw ConfigError("[" + s.name() + "] ar_coefficients: at most two values");
    spec.ar.coefficients.setZero();
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto v = to_double(parts[k]);
      if (!v) throw ConfigError("[" + s.name() + "] ar_coefficients: bad number '" + parts[k] + "'");
      spec.ar.coefficients[static_cast<Eigen::Index>(k)] = *v;
    }
  }
  spec.ar.variance = parse_parameter(s, "ar_variance", spec.ar.variance);
  spec.obs_variance = parse_parameter(s, "obs_variance", spec.obs_variance);

  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("[" + s.name() + "] " + e.what());
  }
  return spec;
}

std::string component_spec_to_ini(const ComponentSpec& spec, const std::string& section) {
  std::string out = fmt::format("[{}]\n", section);
  if (!spec.name.empty()) out += fmt::format("name = {}\n", spec.name);
  if (spec.trend) {
    out += fmt::format("trend = {}\ntrend_variance = {}\n", spec.trend->order, format_parameter(spec.trend->variance));
  } else {
    out += "trend = none\n";
  }
  out += fmt::format("seasonal = {}\n", structural::to_string(spec.seasonal.variant));
  if (spec.has_seasonal())
    out += fmt::format("period = {}\nseasonal_variance = {}\n", spec.seasonal.period,
                       format_parameter(spec.seasonal.variance));
  out += fmt::format("cycle = {}\n", spec.cycle.present ? "true" : "false");
  if (spec.cycle.present)
    out += fmt::format("damping = {}\nfrequency = {}\ncycle_variance = {}\n", format_parameter(spec.cycle.damping),
                       format_parameter(spec.cycle.frequency), format_parameter(spec.cycle.variance));
  out += fmt::format("ar = {}\n", spec.ar.order);
  if (spec.ar.order > 0) {
    std::string coef = spec.ar.estimate_coefficients ? "free " : "";
    for (int k = 0; k < spec.ar.order; ++k) coef += fmt::format("{}{}", k ? ", " : "", spec.ar.coefficients[k]);
    out += fmt::format("ar_coefficients = {}\nar_variance = {}\n", coef, format_parameter(spec.ar.variance));
  }
  out += fmt::format("obs_variance = {}\n", format_parameter(spec.obs_variance));
  return out;
}

}  // namespace sstate::cli
