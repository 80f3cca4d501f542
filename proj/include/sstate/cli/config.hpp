#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sstate/core/errors.hpp"
#include "sstate/structural/component_spec.hpp"

namespace sstate::cli {

/// Bad or missing configuration; maps to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

/// Command-line flags that take precedence over the [run] section.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<bool> offline;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
};

/// Key/value pairs of one INI section. Lookups of absent keys fall back to the
/// supplied default; `expect_keys` rejects anything not in the schema.
class Section {
 public:
  Section() = default;
  Section(std::string name, std::map<std::string, std::string> values);

  const std::string& name() const { return name_; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  bool empty() const { return values_.empty(); }

  std::string get(const std::string& key, const std::string& fallback = {}) const;
  std::string require(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list with surrounding blanks trimmed; empty when absent.
  std::vector<std::string> get_list(const std::string& key) const;

  void expect_keys(std::initializer_list<std::initializer_list<const char*>> groups) const;

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

  std::string name_;
  std::map<std::string, std::string> values_;
};

class RunConfig {
 public:
  /// Reads an INI file; relative paths resolve against its directory.
  static RunConfig load(const std::filesystem::path& path, const Overrides& overrides = {});
  static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir,
                         const Overrides& overrides = {});

  bool has_section(const std::string& name) const { return sections_.count(name) > 0; }
  /// Empty section when absent.
  Section section(const std::string& name) const;
  std::vector<std::string> section_names() const;

  /// Paths starting with '@' are relative to the output directory, others to
  /// the config file's directory.
  std::filesystem::path resolve(const std::string& path) const;

  std::uint64_t seed = 0;
  unsigned workers = 1;
  bool offline = false;
  std::filesystem::path out;
  std::filesystem::path cache_dir;
  std::filesystem::path base_dir;
  /// SHA-256 of the config text plus the seed and offline overrides.
  std::string hash;

 private:
  std::map<std::string, Section> sections_;
};

/// Component keys shared by [decompose] and [model.NAME] sections.
std::initializer_list<const char*> component_keys();

structural::ComponentSpec component_spec_from_section(const Section& section);
/// INI text for a spec under `[section]`; parses back to the same spec.
std::string component_spec_to_ini(const structural::ComponentSpec& spec, const std::string& section);

}  // namespace sstate::cli
