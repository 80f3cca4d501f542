#include "sstate/ingest/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "sstate/core/errors.hpp"

namespace sstate::ingest {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kEdgeTolerance = 1e-6;

bool near(double a, double b) { return std::abs(a - b) < kEdgeTolerance; }

Eigen::Index edge_index(const Eigen::VectorXd& edges, double value, const char* what) {
  for (Eigen::Index k = 0; k < edges.size(); ++k)
    if (near(edges[k], value)) return k;
  throw InvalidArgument(std::string("region ") + what + " edge " + std::to_string(value) +
                        " does not coincide with a grid cell edge inside the field");
}

double regular_step(const Eigen::VectorXd& edges, const char* what) {
  const double step = edges[1] - edges[0];
  for (Eigen::Index k = 1; k + 1 < edges.size(); ++k)
    if (!near(edges[k + 1] - edges[k], step)) throw InvalidArgument(std::string(what) + " spacing is not regular");
  return step;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& s, long line, const char* what) {
  double v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\r')) --e;
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) throw ParseError(std::string("invalid ") + what + " '" + s + "'", line);
  return v;
}

Eigen::VectorXd edges_from_centers(const std::set<double>& centers, double fallback_step, const char* what) {
  const std::vector<double> c(centers.begin(), centers.end());
  double step = fallback_step;
  if (c.size() > 1) {
    step = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < c.size(); ++k) step = std::min(step, c[k] - c[k - 1]);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(std::llround((c.back() - c.front()) / step)) + 1;
  for (double v : c) {
    const double k = (v - c.front()) / step;
    if (!near(k, std::round(k))) throw ParseError(std::string(what) + " centers do not lie on a regular grid");
  }
  Eigen::VectorXd edges(n + 1);
  for (Eigen::Index k = 0; k <= n; ++k) edges[k] = c.front() + (static_cast<double>(k) - 0.5) * step;
  return edges;
}

}  // namespace

GriddedField::GriddedField(YearMonth start_, Eigen::Index n_times_, Eigen::VectorXd lat_edges_, Eigen::VectorXd lon_edges_)
    : start(start_), n_times(n_times_), lat_edges(std::move(lat_edges_)), lon_edges(std::move(lon_edges_)) {
  if (n_times < 0 || lat_edges.size() < 2 || lon_edges.size() < 2)
    throw InvalidArgument("gridded field needs at least one cell");
  values.assign(static_cast<std::size_t>(n_times * n_lat() * n_lon()), kNaN);
}

bool GriddedField::missing(Eigen::Index t, Eigen::Index i, Eigen::Index j) const { return std::isnan(at(t, i, j)); }

bool GriddedField::same_grid(const GriddedField& o) const {
  return lat_edges.size() == o.lat_edges.size() && lon_edges.size() == o.lon_edges.size() &&
         (lat_edges - o.lat_edges).cwiseAbs().maxCoeff() < kEdgeTolerance &&
         (lon_edges - o.lon_edges).cwiseAbs().maxCoeff() < kEdgeTolerance;
}

void GriddedField::validate() const {
  if (lat_edges.size() < 2 || lon_edges.size() < 2) throw DimensionError("gridded field needs at least one cell");
  for (const auto* e : {&lat_edges, &lon_edges})
    for (Eigen::Index k = 1; k < e->size(); ++k)
      if (!((*e)[k] > (*e)[k - 1])) throw DataError("grid edges must be strictly increasing");
  if (values.size() != static_cast<std::size_t>(n_times * n_lat() * n_lon()))
    throw DimensionError("value cube does not match the grid dimensions");
}

void BoxRegion::validate() const {
  if (!(south < north) || !(west < east)) throw InvalidArgument("region bounds must satisfy south < north and west < east");
  if (south < -90 || north > 90 || west < 0 || east > 360) throw InvalidArgument("region bounds out of range");
  if (!(box_size > 0)) throw InvalidArgument("box size must be positive");
  for (double extent : {north - south, east - west}) {
    const double k = extent / box_size;
    if (!near(k, std::round(k))) throw InvalidArgument("box size must divide the region extent");
  }
}

std::string box_label(double lat, double lon) {
  const std::string ns = lat < 0 ? "S" : "N";
  std::string ew = "E";
  if (lon > 180) {
    lon = 360 - lon;
    ew = "W";
  }
  return format_number(std::abs(lat)) + ns + format_number(lon) + ew;
}

GriddedField box_average(const GriddedField& field, const BoxRegion& region, BoxWeighting weighting) {
  field.validate();
  region.validate();
  const double dlat = regular_step(field.lat_edges, "latitude"), dlon = regular_step(field.lon_edges, "longitude");
  const double rlat = region.box_size / dlat, rlon = region.box_size / dlon;
  if (!near(rlat, std::round(rlat)) || !near(rlon, std::round(rlon)) || std::round(rlat) < 1 || std::round(rlon) < 1)
    throw InvalidArgument("field resolution does not divide the box size");
  const Eigen::Index na = static_cast<Eigen::Index>(std::llround(rlat)), no = static_cast<Eigen::Index>(std::llround(rlon));
  const Eigen::Index i0 = edge_index(field.lat_edges, region.south, "south");
  const Eigen::Index j0 = edge_index(field.lon_edges, region.west, "west");
  edge_index(field.lat_edges, region.north, "north");
  edge_index(field.lon_edges, region.east, "east");
  const Eigen::Index nb_lat = static_cast<Eigen::Index>(std::llround((region.north - region.south) / region.box_size));
  const Eigen::Index nb_lon = static_cast<Eigen::Index>(std::llround((region.east - region.west) / region.box_size));

  GriddedField out(field.start, field.n_times,
                   Eigen::VectorXd::LinSpaced(nb_lat + 1, region.south, region.north),
                   Eigen::VectorXd::LinSpaced(nb_lon + 1, region.west, region.east));
  for (Eigen::Index t = 0; t < field.n_times; ++t) {
    for (Eigen::Index bi = 0; bi < nb_lat; ++bi) {
      for (Eigen::Index bj = 0; bj < nb_lon; ++bj) {
        double sum = 0, wsum = 0;
        for (Eigen::Index i = i0 + bi * na; i < i0 + (bi + 1) * na; ++i) {
          const double w = weighting == BoxWeighting::cos_latitude ? std::cos(field.lat_center(i) * std::numbers::pi / 180) : 1.0;
          for (Eigen::Index j = j0 + bj * no; j < j0 + (bj + 1) * no; ++j) {
            const double v = field.at(t, i, j);
            if (std::isnan(v)) continue;
            sum += w * v;
            wsum += w;
          }
        }
        out.at(t, bi, bj) = wsum > 0 ? sum / wsum : kNaN;
      }
    }
  }
  return out;
}

StitchResult stitch_datasets(const GriddedField& a, const GriddedField& b, YearMonth boundary) {
  a.validate();
  b.validate();
  if (!a.same_grid(b)) throw DataError("cannot stitch fields on different grids");
  if (!(a.start < boundary)) throw DataError("first field must start before the boundary " + boundary.iso());
  if (a.end() < boundary)
    throw DataError("gap at the boundary: first field ends " + a.end().plus_months(-1).iso() + ", boundary is " +
                    boundary.iso());
  if (boundary < b.start)
    throw DataError("gap at the boundary: second field starts " + b.start.iso() + ", boundary is " + boundary.iso());
  if (!(boundary < b.end())) throw DataError("second field ends before the boundary " + boundary.iso());

  const long total = b.end().ordinal() - a.start.ordinal();
  StitchResult r{GriddedField(a.start, total, a.lat_edges, a.lon_edges), std::nullopt};
  const std::size_t cells = static_cast<std::size_t>(a.n_lat() * a.n_lon());
  const long split = boundary.ordinal() - a.start.ordinal();
  std::copy_n(a.values.begin(), static_cast<std::size_t>(split) * cells, r.field.values.begin());
  const long b_from = boundary.ordinal() - b.start.ordinal();
  std::copy(b.values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(b_from) * cells), b.values.end(),
            r.field.values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(split) * cells));

  const YearMonth lo = std::max(a.start, b.start), hi = std::min(a.end(), b.end());
  if (lo < hi) {
    OverlapReport rep;
    rep.months = hi.ordinal() - lo.ordinal();
    rep.offsets.resize(a.n_lat(), a.n_lon());
    for (Eigen::Index i = 0; i < a.n_lat(); ++i) {
      for (Eigen::Index j = 0; j < a.n_lon(); ++j) {
        double sum = 0;
        long n = 0;
        for (long m = lo.ordinal(); m < hi.ordinal(); ++m) {
          const double va = a.at(m - a.start.ordinal(), i, j), vb = b.at(m - b.start.ordinal(), i, j);
          if (std::isnan(va) || std::isnan(vb)) continue;
          sum += vb - va;
          ++n;
        }
        rep.offsets(i, j) = n > 0 ? sum / static_cast<double>(n) : kNaN;
      }
    }
    r.overlap = std::move(rep);
  }
  return r;
}

GriddedField remove_monthly_global_mean(const GriddedField& field) {
  field.validate();
  GriddedField out = field;
  const std::size_t cells = static_cast<std::size_t>(field.n_lat() * field.n_lon());
  for (Eigen::Index t = 0; t < field.n_times; ++t) {
    const auto first = out.values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(t) * cells);
    double sum = 0;
    std::size_t n = 0;
    for (auto it = first; it != first + static_cast<std::ptrdiff_t>(cells); ++it)
      if (!std::isnan(*it)) sum += *it, ++n;
    if (n == 0) throw DataError("no observed cells at " + field.time_at(t).iso());
    const double mean = sum / static_cast<double>(n);
    for (auto it = first; it != first + static_cast<std::ptrdiff_t>(cells); ++it) *it -= mean;
  }
  return out;
}

PanelSeries to_panel(const GriddedField& field, const BoxRegion& region, double max_missing) {
  field.validate();
  region.validate();
  PanelSeries out;
  for (Eigen::Index i = 0; i < field.n_lat(); ++i) {
    const double lat = field.lat_edges[i];
    if (lat < region.south - kEdgeTolerance || lat > region.north - kEdgeTolerance) continue;
    for (Eigen::Index j = 0; j < field.n_lon(); ++j) {
      const double lon = field.lon_edges[j];
      if (lon < region.west - kEdgeTolerance || lon > region.east - kEdgeTolerance) continue;
      const std::string label = box_label(lat, lon);
      TimeSeries s(Eigen::VectorXd::Zero(field.n_times), field.start, 1, label);
      Eigen::Index gaps = 0;
      for (Eigen::Index t = 0; t < field.n_times; ++t) {
        const double v = field.at(t, i, j);
        s.missing[t] = std::isnan(v);
        s.values[t] = s.missing[t] ? 0.0 : v;
        gaps += s.missing[t];
      }
      const double frac = field.n_times > 0 ? static_cast<double>(gaps) / static_cast<double>(field.n_times) : 1.0;
      if (frac > max_missing) {
        std::ostringstream msg;
        msg.precision(3);
        msg << "box " << label << ": " << 100 * frac << "% missing, excluded";
        out.warnings.push_back(msg.str());
        continue;
      }
      out.series.push_back(std::move(s));
      out.boxes.push_back(factors::BoxLabel{label, lat, lon});
    }
  }
  if (out.series.empty()) throw DataError("no boxes selected from the field");
  return out;
}

GriddedField read_grid_csv(std::istream& in) {
  std::string line;
  long n = 0;
  if (!std::getline(in, line)) throw ParseError("empty grid file");
  ++n;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "time,lat,lon,value") throw ParseError("expected header 'time,lat,lon,value'", n);

  struct Row {
    long time;
    double lat, lon, value;
  };
  std::vector<Row> rows;
  std::set<double> lats, lons;
  long tmin = std::numeric_limits<long>::max(), tmax = std::numeric_limits<long>::min();
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 4) throw ParseError("expected 4 comma-separated fields", n);
    YearMonth ym;
    try {
      ym = YearMonth::parse(f[0]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), n);
    }
    Row r{ym.ordinal(), parse_number(f[1], n, "latitude"), parse_number(f[2], n, "longitude"),
          f[3].empty() ? kNaN : parse_number(f[3], n, "value")};
    lats.insert(r.lat);
    lons.insert(r.lon);
    tmin = std::min(tmin, r.time);
    tmax = std::max(tmax, r.time);
    rows.push_back(r);
  }
  if (rows.empty()) throw ParseError("grid file has no data rows");
  const double fallback_lat = lons.size() > 1 ? *std::next(lons.begin()) - *lons.begin() : 1.0;
  const double fallback_lon = lats.size() > 1 ? *std::next(lats.begin()) - *lats.begin() : 1.0;
  GriddedField field(YearMonth::from_ordinal(tmin), tmax - tmin + 1, edges_from_centers(lats, fallback_lat, "latitude"),
                     edges_from_centers(lons, fallback_lon, "longitude"));
  const double dlat = field.lat_edges[1] - field.lat_edges[0], dlon = field.lon_edges[1] - field.lon_edges[0];
  std::vector<bool> seen(field.values.size(), false);
  for (const auto& r : rows) {
    const Eigen::Index i = static_cast<Eigen::Index>(std::llround((r.lat - field.lat_center(0)) / dlat));
    const Eigen::Index j = static_cast<Eigen::Index>(std::llround((r.lon - field.lon_center(0)) / dlon));
    const Eigen::Index t = r.time - tmin;
    const std::size_t k = static_cast<std::size_t>((t * field.n_lat() + i) * field.n_lon() + j);
    if (seen[k])
      throw ParseError("duplicate entry for " + YearMonth::from_ordinal(r.time).iso() + " at " + format_number(r.lat) +
                       "," + format_number(r.lon));
    seen[k] = true;
    field.values[k] = r.value;
  }
  return field;
}

GriddedField read_grid_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open grid file " + path);
  return read_grid_csv(in);
}

void write_grid_csv(const GriddedField& field, std::ostream& out) {
  field.validate();
  out << "time,lat,lon,value\n";
  for (Eigen::Index t = 0; t < field.n_times; ++t) {
    const std::string time = field.time_at(t).iso();
    for (Eigen::Index i = 0; i < field.n_lat(); ++i)
      for (Eigen::Index j = 0; j < field.n_lon(); ++j) {
        out << time << ',' << format_number(field.lat_center(i)) << ',' << format_number(field.lon_center(j)) << ',';
        if (!field.missing(t, i, j)) out << format_number(field.at(t, i, j));
        out << '\n';
      }
  }
}

}  // namespace sstate::ingest
