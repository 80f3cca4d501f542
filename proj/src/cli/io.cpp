#include "sstate/cli/io.hpp"

#include <Eigen/Core>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "sstate/ingest/fetch.hpp"

namespace sstate::cli {

namespace fs = std::filesystem;

std::string format_number(double v) { return std::isnan(v) ? std::string() : fmt::format("{}", v); }

Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json json_vector(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

Json json_matrix(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(json_vector(m.row(i).transpose()));
  return a;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::vector<TimeSeries> read_series_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read input " + path.string());
  std::string line;
  long lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    header = split_csv(line);
    break;
  }
  if (header.empty()) throw ParseError(path.string() + " is empty");
  if (header.front() != "time" || header.size() < 2)
    throw ParseError(path.string() + ": header must be time,<label>,...", lineno);

  const std::size_t q = header.size() - 1;
  std::vector<YearMonth> times;
  std::vector<std::vector<double>> columns(q);
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw ParseError(fmt::format("expected {} cells, found {}", header.size(), cells.size()), lineno);
    try {
      times.push_back(YearMonth::parse(cells[0]));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
    for (std::size_t k = 0; k < q; ++k) {
      const std::string& c = cells[k + 1];
      double v = std::numeric_limits<double>::quiet_NaN();
      if (!c.empty()) {
        const auto [end, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
        if (ec != std::errc() || end != c.data() + c.size())
          throw ParseError("bad number '" + c + "' in column " + header[k + 1], lineno);
      }
      columns[k].push_back(v);
    }
  }
  if (times.empty()) throw ParseError(path.string() + " has no data rows");

  int step = 1;
  if (times.size() > 1) {
    step = static_cast<int>(times[1].ordinal() - times[0].ordinal());
    if (step < 1) throw ParseError("time stamps must increase", 0);
    for (std::size_t t = 1; t < times.size(); ++t)
      if (times[t].ordinal() - times[t - 1].ordinal() != step)
        throw ParseError("irregular time step at " + times[t].iso());
  }

  std::vector<TimeSeries> out;
  for (std::size_t k = 0; k < q; ++k) {
    const Eigen::Map<const Eigen::VectorXd> col(columns[k].data(), static_cast<Eigen::Index>(times.size()));
    TimeSeries s(col, times.front(), step, header[k + 1]);
    s.missing = col.array().isNaN();
    s.values = s.missing.select(0.0, col);
    out.push_back(std::move(s));
  }
  return out;
}

std::string series_csv(const std::vector<TimeSeries>& series) {
  if (series.empty()) return "time\n";
  std::string out = "time";
  for (const auto& s : series) out += "," + s.label;
  out += "\n";
  const auto& first = series.front();
  for (Eigen::Index t = 0; t < first.size(); ++t) {
    out += first.time_at(t).iso();
    for (const auto& s : series) {
      out += ",";
      if (!s.missing[t]) out += format_number(s.values[t]);
    }
    out += "\n";
  }
  return out;
}

std::optional<factors::BoxLabel> parse_box_label(const std::string& label) {
  static const std::regex re(R"(^(\d+(?:\.\d+)?)([NS])(\d+(?:\.\d+)?)([EW])$)");
  std::smatch m;
  if (!std::regex_match(label, m, re)) return std::nullopt;
  const double lat = std::stod(m[1]) * (m[2] == "S" ? -1 : 1);
  double lon = std::stod(m[3]);
  if (m[4] == "W") lon = 360 - lon;
  return factors::BoxLabel{label, lat, lon};
}

std::vector<factors::BoxLabel> box_labels(const std::vector<TimeSeries>& series) {
  std::vector<factors::BoxLabel> boxes;
  for (const auto& s : series) boxes.push_back(parse_box_label(s.label).value_or(factors::BoxLabel{s.label}));
  return boxes;
}

std::string file_stem(const std::string& label) {
  std::string s = label;
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  if (s.empty() || s.front() == '.') s.insert(0, "_");
  return s;
}

OutputDir::OutputDir(const RunConfig& config, std::string command)
    : config_(config), command_(std::move(command)), dir_(config.out / command_) {
  std::error_code ec;
  fs::remove_all(dir_, ec);
  fs::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

void OutputDir::write(const std::string& name, const std::string& content) {
  std::ofstream out(dir_ / name, std::ios::binary);
  out << content;
  if (!out) throw Error("cannot write " + (dir_ / name).string());
  if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
}

void OutputDir::write_json(const std::string& name, const Json& value) { write(name, value.dump(2) + "\n"); }

void OutputDir::write_manifest(const Json& extra) {
  std::vector<std::string> names = files_;
  std::sort(names.begin(), names.end());
  Json files = Json::array();
  for (const auto& name : names) {
    std::ifstream in(dir_ / name, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    files.push_back({{"name", name}, {"bytes", bytes.size()}, {"sha256", ingest::sha256_hex(bytes)}});
  }
  Json m = {{"command", command_},
            {"config_hash", config_.hash},
            {"version", "0.1.0"},
            {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
            {"seed", config_.seed},
            {"offline", config_.offline}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  m["files"] = std::move(files);
  std::ofstream out(dir_ / "manifest.json", std::ios::binary);
  out << m.dump(2) << "\n";
}

}  // namespace sstate::cli
