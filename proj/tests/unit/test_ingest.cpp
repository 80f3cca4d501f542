#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "sstate/core/errors.hpp"
#include "sstate/ingest/fetch.hpp"
#include "sstate/ingest/grid.hpp"

// After Eigen: glibc's resolver header defines a `_res` macro that Eigen uses as an identifier.
#include <httplib.h>

using namespace sstate;
using namespace sstate::ingest;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// 1-degree field over [lat0, lat0+nlat) x [lon0, lon0+nlon) filled by fn(t, i, j).
template <typename Fn>
GriddedField one_degree(YearMonth start, Eigen::Index T, double lat0, Eigen::Index nlat, double lon0, Eigen::Index nlon,
                        Fn fn) {
  GriddedField f(start, T, Eigen::VectorXd::LinSpaced(nlat + 1, lat0, lat0 + static_cast<double>(nlat)),
                 Eigen::VectorXd::LinSpaced(nlon + 1, lon0, lon0 + static_cast<double>(nlon)));
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index i = 0; i < nlat; ++i)
      for (Eigen::Index j = 0; j < nlon; ++j) f.at(t, i, j) = fn(t, i, j);
  return f;
}

GriddedField slice(const GriddedField& f, Eigen::Index from, Eigen::Index to) {
  GriddedField out(f.time_at(from), to - from, f.lat_edges, f.lon_edges);
  const std::size_t cells = static_cast<std::size_t>(f.n_lat() * f.n_lon());
  std::copy(f.values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(from) * cells),
            f.values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(to) * cells), out.values.begin());
  return out;
}

bool same_values(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!(a[k] == b[k] || (std::isnan(a[k]) && std::isnan(b[k])))) return false;
  return true;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sstate-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("box averaging") {
  const BoxRegion region{20, 25, 120, 125, 5};
  auto flat = one_degree({2000, 1}, 2, 20, 5, 120, 5, [](auto, auto, auto) { return 2.0; });
  auto coarse = box_average(flat, region);
  REQUIRE(coarse.n_lat() == 1);
  REQUIRE(coarse.n_lon() == 1);
  CHECK(coarse.at(0, 0, 0) == 2.0);
  CHECK(box_average(flat, region, BoxWeighting::cos_latitude).at(1, 0, 0) == doctest::Approx(2.0).epsilon(1e-15));

  auto holed = one_degree({2000, 1}, 1, 20, 5, 120, 5, [](auto, auto, auto) { return 1.0; });
  holed.at(0, 2, 3) = kNaN;
  CHECK(box_average(holed, region).at(0, 0, 0) == 1.0);

  auto empty = one_degree({2000, 1}, 1, 20, 5, 120, 5, [](auto, auto, auto) { return kNaN; });
  CHECK(box_average(empty, region).missing(0, 0, 0));

  auto wide = one_degree({2000, 1}, 1, 20, 10, 120, 10, [](auto, auto i, auto j) { return static_cast<double>(i + j); });
  const auto four = box_average(wide, BoxRegion{20, 30, 120, 130, 5});
  CHECK(four.at(0, 1, 1) == doctest::Approx(14.0));
  CHECK(four.lat_edges[1] == 25.0);

  CHECK_THROWS_AS(box_average(flat, BoxRegion{20, 25, 120, 125, 2.5}), InvalidArgument);
  CHECK_THROWS_AS(box_average(flat, BoxRegion{20.5, 25.5, 120, 125, 5}), InvalidArgument);
  CHECK_THROWS_AS(box_average(flat, BoxRegion{20, 25, 120, 126, 5}), InvalidArgument);
}

TEST_CASE("box labels use the south-west corner") {
  CHECK(box_label(30, 120) == "30N120E");
  CHECK(box_label(55, 225) == "55N135W");
  CHECK(box_label(-5, 0) == "5S0E");
}

TEST_CASE("stitching") {
  const auto whole = one_degree({1990, 1}, 48, 0, 2, 100, 3, [](auto t, auto i, auto j) {
    return static_cast<double>(t) + 0.1 * static_cast<double>(i) - 0.01 * static_cast<double>(j);
  });
  const YearMonth boundary{1993, 1};
  const auto a = slice(whole, 0, 36), b = slice(whole, 36, 48);
  const auto joined = stitch_datasets(a, b, boundary);
  CHECK(same_values(joined.field.values, whole.values));
  CHECK_FALSE(joined.overlap.has_value());
  CHECK(same_values(slice(joined.field, 0, 36).values, a.values));
  CHECK(same_values(slice(joined.field, 36, 48).values, b.values));

  CHECK_THROWS_AS(stitch_datasets(slice(whole, 0, 35), b, boundary), DataError);
  CHECK_THROWS_AS(stitch_datasets(a, slice(whole, 37, 48), YearMonth{1993, 2}), DataError);

  auto warmer = slice(whole, 24, 48);
  for (double& v : warmer.values) v += 0.5;
  const auto over = stitch_datasets(a, warmer, boundary);
  REQUIRE(over.overlap.has_value());
  CHECK(over.overlap->months == 12);
  CHECK((over.overlap->offsets.array() - 0.5).abs().maxCoeff() < 1e-12);
  CHECK(over.field.at(36, 0, 0) == warmer.at(12, 0, 0));
  CHECK(over.field.at(35, 0, 0) == a.at(35, 0, 0));

  const auto other = one_degree({1993, 1}, 12, 0, 2, 101, 3, [](auto, auto, auto) { return 0.0; });
  CHECK_THROWS_AS(stitch_datasets(a, other, boundary), DataError);
}

TEST_CASE("monthly global mean removal") {
  auto same = one_degree({2000, 1}, 3, 0, 2, 0, 2, [](auto t, auto, auto) { return static_cast<double>(t); });
  for (double v : remove_monthly_global_mean(same).values) CHECK(v == 0.0);

  GriddedField two({2000, 1}, 1, Eigen::Vector2d(0, 1), Eigen::Vector3d(0, 1, 2));
  two.at(0, 0, 0) = 1;
  two.at(0, 0, 1) = 3;
  const auto a = remove_monthly_global_mean(two);
  CHECK(a.at(0, 0, 0) == -1.0);
  CHECK(a.at(0, 0, 1) == 1.0);

  GriddedField single({2000, 1}, 2, Eigen::Vector2d(0, 1), Eigen::Vector2d(0, 1));
  single.values = {4.0, -2.0};
  for (double v : remove_monthly_global_mean(single).values) CHECK(v == 0.0);

  auto mixed = one_degree({2000, 1}, 4, 0, 3, 0, 3, [](auto t, auto i, auto j) {
    return std::sin(static_cast<double>(t * 9 + i * 3 + j));
  });
  mixed.at(2, 1, 1) = kNaN;
  const auto anomalies = remove_monthly_global_mean(mixed);
  for (Eigen::Index t = 0; t < 4; ++t) {
    double sum = 0;
    int n = 0;
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index j = 0; j < 3; ++j)
        if (!anomalies.missing(t, i, j)) sum += anomalies.at(t, i, j), ++n;
    CHECK(std::abs(sum / n) < 1e-12);
  }
  CHECK(anomalies.missing(2, 1, 1));

  mixed.values.assign(mixed.values.size(), 0.0);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) mixed.at(1, i, j) = kNaN;
  CHECK_THROWS_AS(remove_monthly_global_mean(mixed), DataError);
}

TEST_CASE("panels from fields") {
  auto field = one_degree({2000, 1}, 10, 20, 10, 120, 10, [](auto t, auto i, auto j) {
    return static_cast<double>(100 * t + 10 * i + j);
  });
  const auto coarse = box_average(field, BoxRegion{20, 30, 120, 130, 5});
  const auto panel = to_panel(coarse, BoxRegion{20, 30, 120, 130, 5});
  REQUIRE(panel.series.size() == 4);
  CHECK(panel.boxes[3].id == "25N125E");
  CHECK(panel.boxes[3].lat == 25.0);
  for (std::size_t k = 0; k < 4; ++k)
    for (Eigen::Index t = 0; t < 10; ++t)
      CHECK(panel.series[k].values[t] == coarse.at(t, static_cast<Eigen::Index>(k / 2), static_cast<Eigen::Index>(k % 2)));

  GriddedField holes = coarse;
  for (Eigen::Index t = 0; t < 3; ++t) holes.at(t, 0, 1) = kNaN;
  const auto kept = to_panel(holes, BoxRegion{20, 30, 120, 130, 5});
  CHECK(kept.series.size() == 3);
  REQUIRE(kept.warnings.size() == 1);
  CHECK(kept.warnings[0].find("20N125E") != std::string::npos);
  CHECK_THROWS_AS(to_panel(coarse, BoxRegion{40, 45, 120, 125, 5}), DataError);
}

TEST_CASE("grid CSV round trip") {
  auto field = one_degree({1999, 11}, 3, -1, 2, 359, 1, [](auto t, auto i, auto) { return 0.1 * static_cast<double>(t + i); });
  field.at(1, 1, 0) = kNaN;
  std::stringstream ss;
  write_grid_csv(field, ss);
  const std::string text = ss.str();
  CHECK(text.rfind("time,lat,lon,value\n1999-11,-0.5,359.5,0\n", 0) == 0);
  const auto back = read_grid_csv(ss);
  CHECK(back.start == field.start);
  CHECK(back.same_grid(field));
  CHECK(same_values(back.values, field.values));

  std::stringstream bad("time,lat,lon,value\n2000-01,0.5,0.5,1\n2000-01,1.5,0.5,x\n");
  try {
    read_grid_csv(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::stringstream header("t,lat,lon,value\n");
  CHECK_THROWS_AS(read_grid_csv(header), ParseError);
}

TEST_CASE("index parsing") {
  const auto s = parse_index("# PDO\n1900 1 0.5\n1900 2, -0.25\n\n1900 4 NaN\n");
  CHECK(s.size() == 4);
  CHECK(s.start == YearMonth{1900, 1});
  CHECK(s.values[1] == -0.25);
  CHECK(s.missing[2]);
  CHECK(s.missing[3]);
  const auto quarterly = parse_index("1900 1 1\n1900 4 2\n1900 7 3\n");
  CHECK(quarterly.step_months == 3);
  CHECK(quarterly.size() == 3);

  std::string lines;
  for (int k = 0; k < 16; ++k) lines += std::to_string(1950 + k) + " 1 0.1\n";
  lines += "1966 1 oops\n";
  try {
    parse_index(lines);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 17);
    CHECK(std::string(e.what()).find("line 17") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_index("1900 1 1\n1900 1 2\n"), ParseError);
  CHECK_THROWS_AS(parse_index("# nothing\n"), ParseError);
}

TEST_CASE("cached fetching") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Get("/pdo.txt", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content("2000 1 0.25\n2000 2 -0.5\n2000 3 1.5\n", "text/plain");
  });
  server.Get("/missing.txt", [&](const httplib::Request&, httplib::Response& res) { res.status = 404; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const fs::path cache = fresh_dir("fetch");
  const std::string url = "http://127.0.0.1:" + std::to_string(port) + "/pdo.txt";
  FetchOptions opts{cache.string()};
  const auto first = fetch_index(url, opts);
  CHECK_FALSE(first.from_cache);
  CHECK(hits == 1);
  CHECK(first.series.size() == 3);
  CHECK(fs::path(first.cache_path).filename() == cache_key(url));

  const auto second = fetch_index(url, opts);
  CHECK(second.from_cache);
  CHECK(hits == 1);
  CHECK(second.series.values == first.series.values);

  opts.offline = true;
  const auto third = fetch_index(url, opts);
  CHECK(third.from_cache);
  CHECK(hits == 1);
  CHECK_THROWS_AS(fetch_index(url + "?other", opts), NetworkError);

  opts.offline = false;
  CHECK_THROWS_AS(fetch_index("http://127.0.0.1:" + std::to_string(port) + "/missing.txt", opts), NetworkError);
  opts.refresh = true;
  fetch_index(url, opts);
  CHECK(hits == 2);

  server.stop();
  worker.join();
  fs::remove_all(cache);
  CHECK(cache_key("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad.txt");
}
