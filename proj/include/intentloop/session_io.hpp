#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "intentloop/dsp.hpp"

namespace intentloop {

/// Ordered key/value pairs written at the top of every output file.
using Provenance = std::vector<std::pair<std::string, std::string>>;

inline constexpr std::string_view kSessionMagic = "ILRC1";

/// Binary session layout (little-endian):
///   "ILRC1" | f64 rate | u32 n_channels | u64 n_samples |
///   n_channels x (u16 len | label bytes) | u32 len | provenance text |
///   n_channels x n_samples f32, channel-major.
void write_recording(const std::filesystem::path& path, const Recording& recording,
                     const Provenance& provenance = {});

/// Signal data only; markers come from the sidecar.
Recording read_recording(const std::filesystem::path& path, Provenance* provenance = nullptr);

/// Sidecar with '#' provenance lines followed by `timestamp_s<TAB>kind<TAB>payload`.
void write_markers(const std::filesystem::path& path, const std::vector<Marker>& markers,
                   const Provenance& provenance = {});
std::vector<Marker> read_markers(const std::filesystem::path& path);
std::vector<Marker> parse_markers(std::istream& in);
std::string format_marker(const Marker& marker);
Marker parse_marker_line(std::string_view line);

/// `<prefix>.ilrc` and `<prefix>.markers.tsv`.
struct SessionPaths {
  std::filesystem::path signal;
  std::filesystem::path markers;
  std::filesystem::path truth;
  std::filesystem::path config;

  static SessionPaths from_prefix(const std::filesystem::path& prefix);
  /// Accepts either the prefix or the `.ilrc` file itself.
  static SessionPaths resolve(const std::filesystem::path& path_or_prefix);
};

void save_session(const std::filesystem::path& prefix, const Recording& recording,
                  const Provenance& provenance = {});
Recording load_session(const std::filesystem::path& path_or_prefix,
                       Provenance* provenance = nullptr);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

void write_provenance(std::ostream& out, const Provenance& provenance);
/// FNV-1a over the resolved configuration text, as 16 hex digits.
std::string config_hash(std::string_view text);

}  // namespace intentloop
