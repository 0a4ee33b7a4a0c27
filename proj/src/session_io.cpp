#include "intentloop/session_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "intentloop/error.hpp"

namespace intentloop {

namespace {

static_assert(std::endian::native == std::endian::little,
              "session I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  char bytes[sizeof(T)];
  if (!in.read(bytes, sizeof(T))) fail(ErrorKind::format, "truncated session file");
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::string provenance_text(const Provenance& provenance) {
  std::string text;
  for (const auto& [k, v] : provenance) text += k + "=" + v + "\n";
  return text;
}

Provenance parse_provenance_text(std::string_view text) {
  Provenance out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    if (const auto eq = line.find('='); eq != std::string_view::npos) {
      out.emplace_back(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    }
    pos = end + 1;
  }
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    fail(ErrorKind::format, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

void write_provenance(std::ostream& out, const Provenance& provenance) {
  for (const auto& [k, v] : provenance) out << "# " << k << "=" << v << "\n";
}

std::string config_hash(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_recording(const std::filesystem::path& path, const Recording& recording,
                     const Provenance& provenance) {
  recording.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(kSessionMagic.data(), static_cast<std::streamsize>(kSessionMagic.size()));
  put<double>(out, recording.rate);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(recording.channels.size()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(recording.samples()));
  for (const auto& label : recording.channels) {
    if (label.size() > UINT16_MAX) fail(ErrorKind::parameter, "channel label too long");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(label.size()));
    out.write(label.data(), static_cast<std::streamsize>(label.size()));
  }
  const std::string meta = provenance_text(provenance);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));

  std::vector<float> block(recording.samples());
  for (Eigen::Index c = 0; c < recording.data.rows(); ++c) {
    for (std::size_t i = 0; i < block.size(); ++i) {
      block[i] = static_cast<float>(recording.data(c, static_cast<Eigen::Index>(i)));
    }
    out.write(reinterpret_cast<const char*>(block.data()),
              static_cast<std::streamsize>(block.size() * sizeof(float)));
  }
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

Recording read_recording(const std::filesystem::path& path, Provenance* provenance) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  char magic[5];
  if (!in.read(magic, 5) || std::string_view(magic, 5) != kSessionMagic) {
    fail(ErrorKind::format, path.string() + " is not an ILRC1 session file");
  }
  Recording rec;
  rec.rate = get<double>(in);
  const auto n_ch = get<std::uint32_t>(in);
  const auto n_samp = get<std::uint64_t>(in);
  if (!(rec.rate > 0.0)) fail(ErrorKind::format, "invalid sampling rate in header");
  rec.channels.reserve(n_ch);
  for (std::uint32_t c = 0; c < n_ch; ++c) {
    const auto len = get<std::uint16_t>(in);
    std::string label(len, '\0');
    if (!in.read(label.data(), len)) fail(ErrorKind::format, "truncated channel label");
    rec.channels.push_back(std::move(label));
  }
  const auto meta_len = get<std::uint32_t>(in);
  std::string meta(meta_len, '\0');
  if (!in.read(meta.data(), meta_len)) fail(ErrorKind::format, "truncated provenance block");
  if (provenance) *provenance = parse_provenance_text(meta);

  rec.data.resize(n_ch, static_cast<Eigen::Index>(n_samp));
  std::vector<float> block(n_samp);
  for (std::uint32_t c = 0; c < n_ch; ++c) {
    if (!in.read(reinterpret_cast<char*>(block.data()),
                 static_cast<std::streamsize>(block.size() * sizeof(float)))) {
      fail(ErrorKind::format, "truncated sample block in " + path.string());
    }
    for (std::size_t i = 0; i < block.size(); ++i) {
      rec.data(c, static_cast<Eigen::Index>(i)) = block[i];
    }
  }
  return rec;
}

std::string format_marker(const Marker& marker) {
  return format_double(marker.time_s) + "\t" + std::string(to_string(marker.kind)) + "\t" +
         marker.payload;
}

Marker parse_marker_line(std::string_view line) {
  const auto t1 = line.find('\t');
  if (t1 == std::string_view::npos) fail(ErrorKind::format, "marker line without tab");
  const auto t2 = line.find('\t', t1 + 1);
  Marker m;
  m.time_s = parse_double(line.substr(0, t1));
  if (t2 == std::string_view::npos) {
    m.kind = marker_kind_from_string(line.substr(t1 + 1));
  } else {
    m.kind = marker_kind_from_string(line.substr(t1 + 1, t2 - t1 - 1));
    m.payload = std::string(line.substr(t2 + 1));
  }
  return m;
}

void write_markers(const std::filesystem::path& path, const std::vector<Marker>& markers,
                   const Provenance& provenance) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  write_provenance(out, provenance);
  for (const auto& m : markers) out << format_marker(m) << "\n";
}

std::vector<Marker> parse_markers(std::istream& in) {
  std::vector<Marker> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(parse_marker_line(line));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Marker& a, const Marker& b) { return a.time_s < b.time_s; });
  return out;
}

std::vector<Marker> read_markers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  return parse_markers(in);
}

SessionPaths SessionPaths::from_prefix(const std::filesystem::path& prefix) {
  const std::string p = prefix.string();
  return {p + ".ilrc", p + ".markers.tsv", p + ".truth.tsv", p + ".config.txt"};
}

SessionPaths SessionPaths::resolve(const std::filesystem::path& path_or_prefix) {
  if (path_or_prefix.extension() == ".ilrc") {
    auto prefix = path_or_prefix;
    prefix.replace_extension();
    return from_prefix(prefix);
  }
  return from_prefix(path_or_prefix);
}

void save_session(const std::filesystem::path& prefix, const Recording& recording,
                  const Provenance& provenance) {
  const auto paths = SessionPaths::from_prefix(prefix);
  write_recording(paths.signal, recording, provenance);
  write_markers(paths.markers, recording.markers, provenance);
}

Recording load_session(const std::filesystem::path& path_or_prefix, Provenance* provenance) {
  const auto paths = SessionPaths::resolve(path_or_prefix);
  Recording rec = read_recording(paths.signal, provenance);
  if (std::filesystem::exists(paths.markers)) rec.markers = read_markers(paths.markers);
  return rec;
}

}  // namespace intentloop
