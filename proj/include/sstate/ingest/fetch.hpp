#pragma once

#include <string>
#include <string_view>

#include "sstate/core/time_series.hpp"

namespace sstate::ingest {

struct FetchOptions {
  std::string cache_dir;
  /// Serve only from the cache; never touch the network.
  bool offline = false;
  /// Ignore an existing cache entry and download again.
  bool refresh = false;
  int timeout_seconds = 30;
};

struct FetchResult {
  TimeSeries series;
  std::string cache_path;
  bool from_cache = false;
};

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

/// Cache file name for a URL: hex SHA-256 of the URL plus ".txt".
std::string cache_key(const std::string& url);

/// Cache directory from $SSTATE_CACHE_DIR, else ".sstate-cache".
std::string default_cache_dir();

/// Parses `YYYY MM value` rows (whitespace or comma separated, `#` comments).
/// The sampling step comes from the first two rows; skipped steps and values
/// of NaN/NA become missing.
TimeSeries parse_index(const std::string& text, const std::string& label = {});

FetchResult fetch_index(const std::string& url, const FetchOptions& options);

}  // namespace sstate::ingest
