#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "intentloop/dsp.hpp"
#include "intentloop/random.hpp"
#include "intentloop/synth.hpp"

namespace testing {

inline std::vector<double> random_vector(intentloop::Rng& rng, std::size_t n, double sd = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, sd);
  return v;
}

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("intentloop_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

/// Small montage that still carries the forced and most-weighted channels.
inline std::vector<std::string> small_montage() {
  return {"Fp1", "Fz", "FC3", "FC1", "FCz", "C3", "C1", "Cz", "C2", "C4", "CP3", "CP1", "Pz", "O1", "O2", "T7"};
}

inline intentloop::SynthConfig small_config(std::uint64_t seed, std::size_t trials = 40) {
  intentloop::SynthConfig c;
  c.channels = small_montage();
  c.n_trials = trials;
  c.seed = seed;
  return c;
}

}  // namespace testing
