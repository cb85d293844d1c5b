#pragma once

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "latentmark/codec.hpp"
#include "latentmark/corpus.hpp"
#include "latentmark/key.hpp"

namespace testing {

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sigma);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

inline latentmark::Waveform noise_wave(std::size_t n, int rate, std::uint64_t seed, double sigma = 0.1) {
  return latentmark::Waveform(gaussian(n, seed, sigma), rate);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Small codec that builds in well under a second.
inline const latentmark::SurrogateCodec& small_codec() {
  static const latentmark::SurrogateCodec c =
      latentmark::make_codec(latentmark::CodecSpec{"", 16000, 16, 16, 8, 2, 3});
  return c;
}

/// Codec with the default geometry.
inline const latentmark::SurrogateCodec& default_codec() {
  static const latentmark::SurrogateCodec c =
      latentmark::make_codec(latentmark::CodecSpec{"fam", 24000, 64, 64, 64, 4, 1});
  return c;
}

inline latentmark::SecretKey calibrated_key(const latentmark::SurrogateCodec& codec,
                                            latentmark::AxisMethod method = latentmark::AxisMethod::Cluster,
                                            std::size_t null_clips = 64) {
  latentmark::SecretKey key;
  key.axis = latentmark::derive_axis(codec, method, 7, 0);
  key.stats = latentmark::calibrate(
      codec, key.axis, latentmark::default_null_corpus(codec.spec().rate, null_clips, 3.0, 0x5EED), 1.5);
  return key;
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "latentmark-XXXXXX").string();
    path = mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace testing
