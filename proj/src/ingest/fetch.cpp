#include "sstate/ingest/fetch.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <regex>
#include <sstream>
#include <vector>

#include "sstate/core/errors.hpp"

namespace sstate::ingest {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string cache_key(const std::string& url) { return sha256_hex(url) + ".txt"; }

std::string default_cache_dir() {
  if (const char* env = std::getenv("SSTATE_CACHE_DIR"); env && *env) return env;
  return ".sstate-cache";
}

TimeSeries parse_index(const std::string& text, const std::string& label) {
  struct Row {
    long ordinal;
    double value;
    bool missing;
  };
  std::vector<Row> rows;
  std::istringstream in(text);
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& c : line)
      if (c == ',' || c == '\t' || c == '\r') c = ' ';
    std::istringstream fields(line);
    std::vector<std::string> tok{std::istream_iterator<std::string>(fields), std::istream_iterator<std::string>()};
    if (tok.empty()) continue;
    if (tok.size() != 3) throw ParseError("expected 'YYYY MM value', got " + std::to_string(tok.size()) + " fields", n);
    int year = 0, month = 0;
    auto whole = [&](const std::string& s, int& out) {
      const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
      return r.ec == std::errc() && r.ptr == s.data() + s.size();
    };
    if (!whole(tok[0], year) || !whole(tok[1], month) || month < 1 || month > 12)
      throw ParseError("invalid year/month '" + tok[0] + " " + tok[1] + "'", n);
    Row r{YearMonth{year, month}.ordinal(), 0.0, false};
    if (tok[2] == "NaN" || tok[2] == "nan" || tok[2] == "NA") {
      r.missing = true;
    } else {
      const auto res = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), r.value);
      if (res.ec != std::errc() || res.ptr != tok[2].data() + tok[2].size() || !std::isfinite(r.value))
        throw ParseError("invalid value '" + tok[2] + "'", n);
    }
    if (!rows.empty() && r.ordinal <= rows.back().ordinal) throw ParseError("dates must be strictly increasing", n);
    rows.push_back(r);
  }
  if (rows.empty()) throw ParseError("index file has no data rows");
  const long step = rows.size() > 1 ? rows[1].ordinal - rows[0].ordinal : 1;
  const long span = rows.back().ordinal - rows.front().ordinal;
  if (span % step != 0) throw ParseError("dates are not on a regular " + std::to_string(step) + "-month grid");
  TimeSeries s(Eigen::VectorXd::Zero(span / step + 1), YearMonth::from_ordinal(rows.front().ordinal), static_cast<int>(step),
               label);
  s.missing.setConstant(true);
  for (const auto& r : rows) {
    const long off = r.ordinal - rows.front().ordinal;
    if (off % step != 0)
      throw ParseError(YearMonth::from_ordinal(r.ordinal).iso() + " is off the " + std::to_string(step) + "-month grid");
    s.values[off / step] = r.value;
    s.missing[off / step] = r.missing;
  }
  return s;
}

namespace {

std::string download(const std::string& url, int timeout) {
  static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, pattern)) throw InvalidArgument("unsupported URL '" + url + "'");
  httplib::Client client(m[1].str());
  client.set_follow_location(true);
  client.set_connection_timeout(timeout, 0);
  client.set_read_timeout(timeout, 0);
  const std::string path = m[2].matched ? m[2].str() : "/";
  auto res = client.Get(path);
  if (!res) throw NetworkError("download of " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw NetworkError("download of " + url + " failed with HTTP status " + std::to_string(res->status));
  return res->body;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_atomically(const fs::path& target, const std::string& bytes) {
  fs::create_directories(target.parent_path());
  std::random_device rd;
  const fs::path tmp = target.string() + ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write cache file " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace

FetchResult fetch_index(const std::string& url, const FetchOptions& options) {
  const fs::path dir = options.cache_dir.empty() ? fs::path(default_cache_dir()) : fs::path(options.cache_dir);
  const fs::path cached = dir / cache_key(url);
  FetchResult r;
  r.cache_path = cached.string();
  std::string bytes;
  if (fs::exists(cached) && (!options.refresh || options.offline)) {
    bytes = read_file(cached);
    r.from_cache = true;
  } else if (options.offline) {
    throw NetworkError("offline mode and no cached copy of " + url + " in " + dir.string());
  } else {
    bytes = download(url, options.timeout_seconds);
    write_atomically(cached, bytes);
  }
  r.series = parse_index(bytes, url);
  return r;
}

}  // namespace sstate::ingest
