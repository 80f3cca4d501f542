#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sstate/core/time_series.hpp"
#include "sstate/factors/panel.hpp"

namespace sstate::ingest {

/// Monthly field on a regular lat/lon grid. Missing cells are NaN.
struct GriddedField {
  YearMonth start;
  Eigen::Index n_times = 0;
  Eigen::VectorXd lat_edges, lon_edges;  // ascending, size n + 1
  std::vector<double> values;            // index (t * n_lat + i) * n_lon + j

  GriddedField() = default;
  GriddedField(YearMonth start, Eigen::Index n_times, Eigen::VectorXd lat_edges, Eigen::VectorXd lon_edges);

  Eigen::Index n_lat() const { return lat_edges.size() - 1; }
  Eigen::Index n_lon() const { return lon_edges.size() - 1; }
  double& at(Eigen::Index t, Eigen::Index i, Eigen::Index j) { return values[index(t, i, j)]; }
  double at(Eigen::Index t, Eigen::Index i, Eigen::Index j) const { return values[index(t, i, j)]; }
  bool missing(Eigen::Index t, Eigen::Index i, Eigen::Index j) const;
  double lat_center(Eigen::Index i) const { return 0.5 * (lat_edges[i] + lat_edges[i + 1]); }
  double lon_center(Eigen::Index j) const { return 0.5 * (lon_edges[j] + lon_edges[j + 1]); }
  YearMonth time_at(Eigen::Index t) const { return start.plus_months(t); }
  YearMonth end() const { return start.plus_months(n_times); }
  bool same_grid(const GriddedField& other) const;
  void validate() const;

 private:
  std::size_t index(Eigen::Index t, Eigen::Index i, Eigen::Index j) const {
    return static_cast<std::size_t>((t * n_lat() + i) * n_lon() + j);
  }
};

/// Region in degrees; longitudes in [0, 360] with west < east. Boxes are
/// labelled by their south-west corner.
struct BoxRegion {
  double south = 20, north = 65, west = 110, east = 260;
  double box_size = 5;
  void validate() const;
};

/// "30N120E"-style label of a south-west corner.
std::string box_label(double lat, double lon);

enum class BoxWeighting { unweighted, cos_latitude };

GriddedField box_average(const GriddedField& field, const BoxRegion& region,
                         BoxWeighting weighting = BoxWeighting::unweighted);

struct OverlapReport {
  Eigen::Index months = 0;
  /// Mean of (b - a) per cell over the overlap; NaN where never jointly observed.
  Eigen::MatrixXd offsets;
};

struct StitchResult {
  GriddedField field;
  std::optional<OverlapReport> overlap;
};

/// Times before `boundary` come from `a`, the rest from `b`.
StitchResult stitch_datasets(const GriddedField& a, const GriddedField& b, YearMonth boundary);

/// Subtracts, at each time step, the mean over all non-missing cells.
GriddedField remove_monthly_global_mean(const GriddedField& field);

struct PanelSeries {
  std::vector<TimeSeries> series;
  std::vector<factors::BoxLabel> boxes;
  std::vector<std::string> warnings;
};

/// One series per cell whose south-west corner lies in the region; cells with
/// more than `max_missing` missing values are dropped with a warning.
PanelSeries to_panel(const GriddedField& field, const BoxRegion& region, double max_missing = 0.2);

/// CSV with header time,lat,lon,value (cell centers, empty value = missing).
GriddedField read_grid_csv(std::istream& in);
GriddedField read_grid_csv(const std::string& path);
void write_grid_csv(const GriddedField& field, std::ostream& out);

}  // namespace sstate::ingest
