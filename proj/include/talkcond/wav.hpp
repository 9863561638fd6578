#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace talkcond {

struct PcmAudio {
  int sample_rate_hz = 0;
  std::vector<std::int16_t> samples;
};

// Mono 16-bit little-endian PCM RIFF/WAVE only; anything else is a
// CorpusError.
PcmAudio read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const PcmAudio& audio);

std::vector<double> to_double(const std::vector<std::int16_t>& pcm);

}  // namespace talkcond
