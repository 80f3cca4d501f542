#pragma once

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sstate/cli/config.hpp"
#include "sstate/core/time_series.hpp"
#include "sstate/factors/panel.hpp"

namespace sstate::cli {

using Json = nlohmann::ordered_json;

/// Shortest decimal text that reads back to the same double; empty for NaN.
std::string format_number(double v);
/// JSON number, or null when not finite.
Json json_number(double v);
Json json_vector(const Eigen::VectorXd& v);
Json json_matrix(const Eigen::MatrixXd& m);

/// Wide table `time,<label>,...` with YYYY-MM stamps and empty cells for
/// missing values. All columns share the time axis.
std::vector<TimeSeries> read_series_csv(const std::filesystem::path& path);
std::string series_csv(const std::vector<TimeSeries>& series);

/// Inverse of ingest::box_label; nullopt when the label has another form.
std::optional<factors::BoxLabel> parse_box_label(const std::string& label);
std::vector<factors::BoxLabel> box_labels(const std::vector<TimeSeries>& series);

/// Label made safe for use as a file name.
std::string file_stem(const std::string& label);

/// Collects the files of one command under `<out>/<command>/` and writes
/// manifest.json listing them with their sizes and digests.
class OutputDir {
 public:
  OutputDir(const RunConfig& config, std::string command);

  const std::filesystem::path& path() const { return dir_; }
  void write(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const Json& value);
  void write_manifest(const Json& extra = Json::object());

 private:
  const RunConfig& config_;
  std::string command_;
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

}  // namespace sstate::cli
