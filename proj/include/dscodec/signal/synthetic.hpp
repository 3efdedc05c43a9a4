#pragma once

#include <cstdint>
#include <vector>

#include "dscodec/signal/wav.hpp"

namespace dscodec::signal {

// Speech-like test material: alternating voiced segments (harmonic source
// with drifting pitch through three formant resonators), fricative-like noise
// bursts and short pauses. Peak-normalized to 0.5.
Waveform synth_speech_like(double seconds, std::uint64_t seed, int sample_rate = kCodecSampleRate);

// `count` utterances of `seconds` each, seeds derived from `seed`.
std::vector<Waveform> synth_corpus(int count, double seconds, std::uint64_t seed);

}  // namespace dscodec::signal
