#include "talkcond/wav.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "talkcond/error.hpp"

namespace talkcond {
namespace {

std::uint32_t rd32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
std::uint16_t rd16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
void put32(std::ostream& o, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  o.write(reinterpret_cast<const char*>(b), 4);
}
void put16(std::ostream& o, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  o.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

PcmAudio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  const auto bad = [&](const std::string& why) {
    return CorpusError(path.string() + ": " + why);
  };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw bad("not a RIFF/WAVE file");
  }
  PcmAudio audio;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    const std::uint32_t size = rd32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > buf.size()) throw bad("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw bad("short fmt chunk");
      const unsigned char* f = buf.data() + body;
      if (rd16(f) != 1) throw bad("only PCM format is supported");
      if (rd16(f + 2) != 1) throw bad("only mono audio is supported");
      audio.sample_rate_hz = static_cast<int>(rd32(f + 4));
      if (rd16(f + 14) != 16) throw bad("only 16-bit samples are supported");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw bad("data chunk before fmt chunk");
      audio.samples.resize(size / 2);
      const unsigned char* d = buf.data() + body;
      for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        audio.samples[i] = static_cast<std::int16_t>(rd16(d + 2 * i));
      }
      return audio;
    }
    pos = body + size + (size & 1);
  }
  throw bad("no data chunk");
}

void write_wav(const std::filesystem::path& path, const PcmAudio& audio) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  out.write("RIFF", 4);
  put32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(audio.sample_rate_hz));
  put32(out, static_cast<std::uint32_t>(audio.sample_rate_hz) * 2);
  put16(out, 2);
  put16(out, 16);
  out.write("data", 4);
  put32(out, data_bytes);
  for (std::int16_t s : audio.samples) put16(out, static_cast<std::uint16_t>(s));
  if (!out) throw CorpusError("write failed for " + path.string());
}

std::vector<double> to_double(const std::vector<std::int16_t>& pcm) {
  std::vector<double> out(pcm.size());
  for (std::size_t i = 0; i < pcm.size(); ++i) out[i] = pcm[i] / 32768.0;
  return out;
}

}  // namespace talkcond
