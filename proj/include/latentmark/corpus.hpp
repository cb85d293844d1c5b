#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latentmark/audio.hpp"

namespace latentmark {

/// Spectral-envelope families of the synthetic corpus.
enum class Domain { Ambient, Speech, Music };

std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

/// One seeded synthetic clip.
///  Ambient: low-passed noise bed with slow swells and sparse clicks.
///  Speech:  glottal-pulse harmonics under a ~4 Hz syllabic envelope plus breath noise.
///  Music:   sequences of harmonic notes with decaying envelopes.
/// RMS is drawn from [0.05, 0.2]; peaks stay below 0.95.
Waveform synth_clip(Domain domain, int rate, double seconds, std::uint64_t seed);

/// `count` clips cycling through the three domains (or fixed to one domain).
std::vector<Waveform> synthetic_corpus(std::size_t count, int rate, double seconds,
                                       std::uint64_t seed);
std::vector<Waveform> synthetic_corpus(std::size_t count, int rate, double seconds,
                                       std::uint64_t seed, Domain domain);

}  // namespace latentmark
