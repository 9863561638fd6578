#include <bit>
#include <cstring>
#include <fstream>

#include "talkcond/error.hpp"
#include "talkcond/features.hpp"

namespace talkcond {
namespace {

static_assert(std::endian::native == std::endian::little,
              "feature cache I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& o, T v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw FeatureError("truncated feature cache " + path.string());
  }
  return v;
}

}  // namespace

void write_feature_cache(const std::filesystem::path& path, const FeatureSequence& seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FeatureError("cannot write feature cache " + path.string());
  out.write("TCFC", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, seq.kind == FeatureKind::kAcoustic ? 0 : 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(seq.dim()));
  put<std::uint64_t>(out, seq.size());
  put<double>(out, seq.frame_period_s);
  for (double v : seq.frames.flat()) put<float>(out, static_cast<float>(v));
  if (!out) throw FeatureError("write failed for " + path.string());
}

FeatureSequence read_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FeatureError("cannot open feature cache " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "TCFC", 4) != 0) {
    throw FeatureError(path.string() + " is not a feature cache file");
  }
  if (get<std::uint32_t>(in, path) != 1) throw FeatureError("unsupported cache version");
  FeatureSequence seq;
  const auto kind = get<std::uint32_t>(in, path);
  if (kind > 1) throw FeatureError("bad feature kind in cache");
  seq.kind = kind == 0 ? FeatureKind::kAcoustic : FeatureKind::kProsodic;
  const auto dim = get<std::uint32_t>(in, path);
  const auto frames = get<std::uint64_t>(in, path);
  seq.frame_period_s = get<double>(in, path);
  seq.frames = Matrix(frames, dim);
  for (double& v : seq.frames.flat()) v = get<float>(in, path);
  seq.validate();
  return seq;
}

std::string feature_cache_key(const std::filesystem::path& audio, std::string_view config_text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  mix(audio.generic_string());
  mix("\n");
  mix(config_text);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = kHex[h & 0xf];
  return out;
}

}  // namespace talkcond
