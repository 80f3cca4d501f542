#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <string>

#include "sstate/cli/commands.hpp"
#include "sstate/cli/config.hpp"
#include "sstate/cli/io.hpp"
#include "sstate/ingest/fetch.hpp"
#include "support/golden.hpp"

using namespace sstate;
using namespace sstate::cli;
using sstate::testing::read_bytes;
using sstate::testing::ScratchDir;
using sstate::testing::write_bytes;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = SSTATE_FIXTURE_DIR;
const fs::path kGolden = SSTATE_GOLDEN_DIR;

int run_cmd(const std::string& cmd, const fs::path& config, const fs::path& out) {
  return run({cmd, "--config", config.string(), "--out", out.string()});
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_bytes(p)); }

}  // namespace

TEST_CASE("config sections, paths and overrides") {
  const std::string text =
      "[run]\nseed = 5\nout = results\n\n[spectrum]\ninput = @common/factors.csv\npeaks = 4\n";
  const auto c = RunConfig::parse(text, "/data/cfg");
  CHECK(c.seed == 5);
  CHECK(c.workers == 1);
  CHECK_FALSE(c.offline);
  CHECK(c.out == fs::path("/data/cfg/results"));
  CHECK(c.resolve("@common/factors.csv") == fs::path("/data/cfg/results/common/factors.csv"));
  CHECK(c.resolve("grid.csv") == fs::path("/data/cfg/grid.csv"));
  CHECK(c.resolve("/abs/grid.csv") == fs::path("/abs/grid.csv"));
  CHECK(c.section("spectrum").get_int("peaks", 0) == 4);
  CHECK(c.section("absent").empty());

  Overrides ov;
  ov.seed = 9;
  ov.offline = true;
  const auto o = RunConfig::parse(text, "/data/cfg", ov);
  CHECK(o.seed == 9);
  CHECK(o.offline);
  CHECK(o.hash != c.hash);
  CHECK(RunConfig::parse(text, "/elsewhere").hash == c.hash);

  CHECK_THROWS_AS(RunConfig::parse("[run]\nsead = 1\n", "/"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[run]\nseed = x\n", "/"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[run\nseed = 1\n", "/"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("seed = 1\n", "/"), ConfigError);
  CHECK_THROWS_WITH_AS(c.section("spectrum").expect_keys({{"input"}}), "[spectrum] peaks: unknown key", ConfigError);
}

TEST_CASE("component specs round-trip through the config format") {
  const auto c = RunConfig::parse(
      "[model.full]\ntrend = 1\ntrend_variance = 0.01\nseasonal = running-sum\nperiod = 4\n"
      "seasonal_variance = free\ncycle = true\ndamping = free 0.95\nfrequency = 0.15707963267948966\n"
      "cycle_variance = free 0.5\nar = 2\nar_coefficients = free 0.5, -0.25\nobs_variance = 0.25\n",
      "/");
  const auto spec = component_spec_from_section(c.section("model.full"));
  REQUIRE(spec.trend);
  CHECK(spec.trend->order == 1);
  CHECK_FALSE(spec.trend->variance.estimate);
  CHECK(spec.seasonal.variant == structural::SeasonalVariant::running_sum);
  CHECK(spec.seasonal.period == 4);
  CHECK(spec.seasonal.variance.estimate);
  CHECK(spec.cycle.present);
  CHECK(spec.cycle.damping.estimate);
  CHECK(spec.cycle.damping.value == 0.95);
  CHECK_FALSE(spec.cycle.frequency.estimate);
  CHECK(spec.ar.estimate_coefficients);
  CHECK(spec.ar.coefficients[1] == -0.25);
  CHECK(spec.obs_variance.value == 0.25);

  const std::string ini = component_spec_to_ini(spec, "model.again");
  const auto back = component_spec_from_section(RunConfig::parse(ini, "/").section("model.again"));
  CHECK(component_spec_to_ini(back, "model.again") == ini);
  CHECK(back.cycle.frequency.value == spec.cycle.frequency.value);
  CHECK(back.free_parameter_count() == spec.free_parameter_count());

  const auto none = component_spec_from_section(
      RunConfig::parse("[m]\ntrend = none\ncycle = true\n", "/").section("m"));
  CHECK_FALSE(none.trend);

  CHECK_THROWS_AS(component_spec_from_section(RunConfig::parse("[m]\ntrend = 3\n", "/").section("m")), ConfigError);
  CHECK_THROWS_AS(component_spec_from_section(RunConfig::parse("[m]\ndamping = lots\n", "/").section("m")),
                  ConfigError);
  CHECK_THROWS_AS(component_spec_from_section(RunConfig::parse("[m]\nseasonal = weekly\n", "/").section("m")),
                  ConfigError);
}

TEST_CASE("series CSV round trip and box labels") {
  ScratchDir dir("csv");
  Eigen::VectorXd v(4);
  v << 0.1, std::nan(""), -3e-17, 1.0 / 3.0;
  TimeSeries a(v, {1999, 11}, 1, "30N120E");
  a.missing = v.array().isNaN();
  a.values = a.missing.select(0.0, v);
  const TimeSeries b(Eigen::Vector4d(1, 2, 3, 4), {1999, 11}, 1, "x");
  write_bytes(dir / "s.csv", series_csv({a, b}));
  CHECK(read_bytes(dir / "s.csv") == "time,30N120E,x\n1999-11,0.1,1\n1999-12,,2\n2000-01,-3e-17,3\n2000-02,0.3333333333333333,4\n");
  const auto back = read_series_csv(dir / "s.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].missing[1]);
  CHECK(back[0].values[3] == 1.0 / 3.0);
  CHECK(back[1].start == YearMonth{1999, 11});

  write_bytes(dir / "bad.csv", "time,a\n2000-01,1\n2000-02,zz\n");
  CHECK_THROWS_WITH_AS(read_series_csv(dir / "bad.csv"), "line 3: bad number 'zz' in column a", ParseError);
  write_bytes(dir / "gap.csv", "time,a\n2000-01,1\n2000-02,1\n2000-04,1\n");
  CHECK_THROWS_AS(read_series_csv(dir / "gap.csv"), ParseError);

  const auto w = parse_box_label("55N135W");
  REQUIRE(w);
  CHECK(w->lat == 55);
  CHECK(w->lon == 225);
  CHECK(parse_box_label("5S0E")->lat == -5);
  CHECK_FALSE(parse_box_label("s01"));
  CHECK(file_stem("a/b c") == "a_b_c");
}

TEST_CASE("decompose: empty input and configuration errors exit 2") {
  ScratchDir dir("empty");
  write_bytes(dir / "empty.csv", "");
  write_bytes(dir / "header.csv", "time,a\n");
  write_bytes(dir / "c1.ini", "[decompose]\ninput = empty.csv\n");
  write_bytes(dir / "c2.ini", "[decompose]\ninput = header.csv\n");
  write_bytes(dir / "c3.ini", "[decompose]\ninput = nowhere.csv\n");
  write_bytes(dir / "c4.ini", "[decompose]\ninput = header.csv\nselect = bic\ncandidates = missing\n");
  write_bytes(dir / "c5.ini", "[decompose]\ninput = header.csv\ntypo = 1\n");
  for (const char* c : {"c1.ini", "c2.ini", "c3.ini", "c4.ini", "c5.ini"}) {
    CAPTURE(c);
    CHECK(run_cmd("decompose", dir / c, dir / "out") == exit_config);
  }
  CHECK(run({"decompose"}) == exit_config);
  CHECK(run({"nonsense", "--config", (dir / "c1.ini").string()}) == exit_config);
  CHECK(run({"decompose", "--config", (dir / "absent.ini").string()}) == exit_config);
  CHECK(run({"decompose", "--config", (dir / "c1.ini").string(), "--workers", "many"}) == exit_config);
}

TEST_CASE("decompose writes per-series results and model selection; cycles absent exits 3") {
  ScratchDir dir("decomp");
  const auto panel = read_series_csv(kFixtures / "panel.csv");
  write_bytes(dir / "two.csv", series_csv({panel[0], panel[1]}));
  write_bytes(dir / "c.ini",
              "[run]\nworkers = 2\n\n[decompose]\ninput = two.csv\nselect = bic\ncandidates = rw, irw\n\n"
              "[model.rw]\ntrend = 1\n\n[model.irw]\ntrend = 2\n\n[common]\nkind = cycles\n");
  REQUIRE(run_cmd("decompose", dir / "c.ini", dir / "out") == exit_ok);
  const auto j = read_json(dir / "out/decompose/s01.json");
  CHECK(j["selection"]["ranking"].size() == 2);
  CHECK(j["selection"]["criterion"] == "bic");
  CHECK(j["bic"] == j["selection"]["ranking"][0]["score"]);
  CHECK(fs::exists(dir / "out/decompose/trends.csv"));
  CHECK_FALSE(fs::exists(dir / "out/decompose/cycles.csv"));
  const auto m = read_json(dir / "out/decompose/manifest.json");
  CHECK(m["status"] == "ok");
  CHECK(m["files"].size() == 6);

  const auto csv = read_series_csv(dir / "out/decompose/s02.csv");
  REQUIRE(csv.size() >= 4);
  CHECK(csv[0].label == "observed");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(csv[0].size());
  for (const auto& col : csv)
    if (col.label == "trend" || col.label == "error") sum += col.values;
  CHECK((sum - csv[0].values).cwiseAbs().maxCoeff() < 1e-8);

  CHECK(run_cmd("common", dir / "c.ini", dir / "out") == exit_compute);
}

TEST_CASE("decompose keeps partial results when a fit fails") {
  ScratchDir dir("partial");
  const auto panel = read_series_csv(kFixtures / "panel.csv");
  Eigen::VectorXd holes = Eigen::VectorXd::Constant(panel[0].size(), std::nan(""));
  holes[0] = 1;
  holes[1] = 2;
  TimeSeries sparse(holes, panel[0].start, 1, "sparse");
  sparse.missing = holes.array().isNaN();
  sparse.values = sparse.missing.select(0.0, holes);
  write_bytes(dir / "mixed.csv", series_csv({panel[0], sparse}));
  write_bytes(dir / "c.ini", "[decompose]\ninput = mixed.csv\ntrend = 1\n");
  CHECK(run_cmd("decompose", dir / "c.ini", dir / "out") == exit_compute);
  CHECK(fs::exists(dir / "out/decompose/s01.json"));
  const auto m = read_json(dir / "out/decompose/manifest.json");
  CHECK(m["status"] == "partial");
  const auto summary = read_json(dir / "out/decompose/summary.json");
  CHECK(summary["failed"] == 1);
  CHECK(summary["series"][1]["status"] == "failed");
}

TEST_CASE("spectrum: cosine fixture peaks at 12 months, missing data exits 3") {
  ScratchDir dir("spectrum");
  write_bytes(dir / "c.ini", "[spectrum]\ninput = " + (kFixtures / "cosine.csv").string() + "\npeaks = 2\n");
  REQUIRE(run_cmd("spectrum", dir / "c.ini", dir / "out") == exit_ok);
  const auto peaks = read_json(dir / "out/spectrum/peaks.json");
  CHECK(peaks["cosine"]["peaks"][0]["period"].get<double>() == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(peaks["cosine"]["peaks"].size() == 2);

  write_bytes(dir / "g.ini", "[run]\nseed = 3\nout = out\n\n[synth]\nkind = cosine\ngap = true\n\n"
                             "[spectrum]\ninput = @synth/cosine.csv\n");
  REQUIRE(run({"synth", "--config", (dir / "g.ini").string()}) == exit_ok);
  CHECK(run({"spectrum", "--config", (dir / "g.ini").string()}) == exit_compute);
}

TEST_CASE("msar fixture records classification accuracy of at least 90%") {
  ScratchDir dir("msar");
  write_bytes(dir / "c.ini", "[msar]\ninput = " + (kFixtures / "msar.csv").string() + "\ntruth = truth\n");
  REQUIRE(run_cmd("msar", dir / "c.ini", dir / "out") == exit_ok);
  const auto j = read_json(dir / "out/msar/msar.json");
  CHECK(j["series"] == "y");
  CHECK(j["classification_accuracy"].get<double>() >= 0.9);
  CHECK(j["regimes"]["high"]["mean"].get<double>() > j["regimes"]["low"]["mean"].get<double>());
  const auto regimes = read_series_csv(dir / "out/msar/regimes.csv");
  CHECK(regimes.size() == 5);
  CHECK(regimes[2].label == "smoothed_high");
}

TEST_CASE("common: planted two-factor panel gives order 2 and matches the golden files") {
  ScratchDir dir("panel");
  REQUIRE(run({"common", "--config", (kFixtures / "panel_common.ini").string(), "--out", dir.path().string()}) ==
          exit_ok);
  const auto model = read_json(dir / "common/model.json");
  CHECK(model["order"] == 2);
  const auto rec = read_json(dir / "common/reconstruction.json");
  CHECK(rec[0]["r_squared"][1].get<double>() > 0.95);
  const auto diffs = sstate::testing::tree_differences(kGolden / "panel", dir.path());
  for (const auto& d : diffs) MESSAGE(d);
  CHECK(diffs.empty());
}

TEST_CASE("common: rank-1 panel correlation map has |r| > 0.99 everywhere") {
  ScratchDir dir("rank1");
  write_bytes(dir / "c.ini", "[run]\nseed = 4\nout = out\n\n[synth]\nkind = panel\nfactors = 1\nseries = 10\n"
                             "snr = 20\n\n[common]\ninput = @synth/panel.csv\norder = auto\n");
  REQUIRE(run({"synth", "--config", (dir / "c.ini").string()}) == exit_ok);
  REQUIRE(run({"common", "--config", (dir / "c.ini").string()}) == exit_ok);
  const auto rows = read_bytes(dir / "out/common/correlation.csv");
  std::istringstream in(rows);
  std::string line;
  std::getline(in, line);
  int n = 0;
  while (std::getline(in, line)) {
    const double r = std::stod(line.substr(line.rfind(',') + 1));
    CHECK(std::abs(r) > 0.99);
    ++n;
  }
  CHECK(n == 10);
  CHECK(read_json(dir / "out/common/model.json")["order"] == 1);
}

TEST_CASE("fetch serves the cache offline and fails without it") {
  ScratchDir dir("fetch");
  const std::string url = "http://example.invalid/index.txt";
  write_bytes(dir / "cache" / ingest::cache_key(url), "2000 1 0.5\n2000 2 0.25\n2000 3 NaN\n");
  write_bytes(dir / "c.ini", "[run]\ncache_dir = cache\n\n[fetch]\nurl = " + url + "\nlabel = nino\n");
  REQUIRE(run({"fetch", "--config", (dir / "c.ini").string(), "--offline"}) == exit_ok);
  CHECK(read_bytes(dir / "out/fetch/index.csv") == "time,nino\n2000-01,0.5\n2000-02,0.25\n2000-03,\n");
  CHECK(read_json(dir / "out/fetch/manifest.json")["from_cache"] == true);
  fs::remove_all(dir / "cache");
  CHECK(run({"fetch", "--config", (dir / "c.ini").string(), "--offline"}) == exit_compute);
}

TEST_CASE("fixture pipeline reproduces the golden files bit for bit") {
  ScratchDir a("pipe-a"), b("pipe-b");
  REQUIRE(sstate::testing::run_pipeline(kFixtures / "pipeline.ini", a.path(), 1) == 0);
  REQUIRE(sstate::testing::run_pipeline(kFixtures / "pipeline.ini", b.path(), 2) == 0);
  const auto rerun = sstate::testing::tree_differences(a.path(), b.path());
  for (const auto& d : rerun) MESSAGE("rerun: ", d);
  CHECK(rerun.empty());
  const auto golden = sstate::testing::tree_differences(kGolden / "pipeline", a.path());
  for (const auto& d : golden) MESSAGE("golden: ", d);
  CHECK(golden.empty());

  const auto manifest = read_json(a / "common/manifest.json");
  CHECK(manifest["config_hash"].get<std::string>().size() == 64);
  CHECK(manifest["files"].size() == 7);
}
