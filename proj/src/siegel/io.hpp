#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "siegel/density.hpp"
#include "siegel/errors.hpp"

namespace siegel::io {

// round-trip exact decimal form of a double
std::string fmt_g17(double v);

// header line plus rows, comma separated, newline terminated; empty strings
// are empty cells
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const;
};

// temp-then-rename in the destination directory, so readers never observe a
// partial file
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// strict line-based `key = value` text; '#' starts a comment, blank lines
// are skipped, duplicate keys are rejected
struct Config {
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(const std::string& key) const;
  const std::string* find(const std::string& key) const;
  std::string get_str(const std::string& key, std::optional<std::string> dflt = {}) const;
  long get_long(const std::string& key, std::optional<long> dflt = {}) const;
  double get_double(const std::string& key, std::optional<double> dflt = {}) const;
  std::uint64_t get_u64(const std::string& key, std::optional<std::uint64_t> dflt = {}) const;
  bool get_bool(const std::string& key, std::optional<bool> dflt = {}) const;
  // strict parsing: any key outside `known` is an input error
  void require_known(const std::vector<std::string>& known) const;
};

Config parse_config(const std::string& text);
Config load_config(const std::string& path);

// binary P6 raster, inside = white; window and decision metadata go to a
// `.txt` sidecar next to the image
std::string mask_to_ppm(const density::GridMask& mask);
std::string mask_sidecar(const density::GridMask& mask);
void write_mask_ppm(const std::string& path, const density::GridMask& mask);
// reads the raster, and the sidecar when present (the window defaults to the
// unit square otherwise); any pixel with a nonzero channel counts as inside
density::GridMask read_mask_ppm(const std::string& path);

// the experiment table in its stable column order; absent columns are empty
// cells
Csv experiment_csv(const density::ExperimentResult& res);

}  // namespace siegel::io
