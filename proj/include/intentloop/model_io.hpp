#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intentloop/model.hpp"
#include "intentloop/session_io.hpp"

namespace intentloop {

inline constexpr std::string_view kModelMagic = "ILMODEL";
inline constexpr int kModelVersion = 1;

/// Line-oriented model file: `ILMODEL 1`, '#' provenance, `key value` scalars
/// in shortest round-trip decimal, and `matrix name rows cols <base64>` blocks
/// of little-endian f64. Load followed by save reproduces the bytes.
void save_model(const std::filesystem::path& path, const IntentModel& model,
                const Provenance& provenance = {});
IntentModel load_model(const std::filesystem::path& path, Provenance* provenance = nullptr);

void write_model(std::ostream& out, const IntentModel& model, const Provenance& provenance = {});
IntentModel read_model(std::istream& in, Provenance* provenance = nullptr);

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(std::string_view text);

}  // namespace intentloop
