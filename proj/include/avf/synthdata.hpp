#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "avf/csv.hpp"
#include "avf/matrix.hpp"
#include "avf/parallel.hpp"

namespace avf {

enum class Modality { Audio, Visual, Both };

inline std::string to_string(Modality m) {
  switch (m) {
    case Modality::Audio: return "audio";
    case Modality::Visual: return "visual";
    case Modality::Both: return "both";
  }
  return "?";
}

inline Modality parse_modality(std::string_view s) {
  if (s == "audio") return Modality::Audio;
  if (s == "visual") return Modality::Visual;
  if (s == "both") return Modality::Both;
  throw ConfigError("unknown modality '" + std::string(s) + "' (expected audio, visual or both)");
}

/// Synthetic paired-stream generator settings.
struct GenConfig {
  std::size_t num_videos = 62;
  std::size_t frames = 150;
  std::size_t audio_dim = 16;
  std::size_t visual_dim = 16;
  std::size_t latent_dim = 8;
  /// Time constant (frames) of the AR(1) low-pass applied to latent noise.
  double smoothness = 8.0;
  double noise_std = 0.1;
  /// Fraction of latent dims observed by both modalities; the rest is split
  /// between audio-only and visual-only dims.
  double complementarity = 0.5;
  /// Probability that a span of the corrupted modality is replaced by noise.
  double corruption_prob = 0.0;
  /// Mean span length (frames) of both corrupted and clean spans.
  double burst_length = 16.0;
  Modality corrupt = Modality::Audio;
  std::uint64_t seed = 42;

  friend bool operator==(const GenConfig&, const GenConfig&) = default;

  void validate() const {
    if (num_videos < 1 || frames < 1 || audio_dim < 1 || visual_dim < 1 || latent_dim < 1) {
      throw ConfigError("gen: counts must be >= 1");
    }
    if (!(smoothness > 0.0)) throw ConfigError("gen: smoothness must be > 0");
    if (!(noise_std >= 0.0)) throw ConfigError("gen: noise_std must be >= 0");
    if (!(complementarity >= 0.0 && complementarity <= 1.0)) throw ConfigError("gen: complementarity must lie in [0, 1]");
    if (!(corruption_prob >= 0.0 && corruption_prob <= 1.0)) throw ConfigError("gen: corruption_prob must lie in [0, 1]");
    if (!(burst_length >= 1.0)) throw ConfigError("gen: burst_length must be >= 1");
  }
};

/// Paired modality features with per-frame labels. Features are stored
/// dim x frames; masks hold 0/1 per frame.
struct LabeledClip {
  std::string id;
  std::uint64_t seed = 0;
  /// Index of the first source frame (windows) and of the source video.
  std::size_t start = 0;
  std::size_t video = 0;
  Matrix<double> audio;
  Matrix<double> visual;
  std::vector<double> valence;
  std::vector<double> arousal;
  std::vector<std::uint8_t> valid;
  std::vector<std::uint8_t> audio_corrupt;
  std::vector<std::uint8_t> visual_corrupt;

  std::size_t length() const noexcept { return valence.size(); }
  std::size_t valid_frames() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
  }
  friend bool operator==(const LabeledClip&, const LabeledClip&) = default;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of clip `index` under master seed `seed`.
inline std::uint64_t clip_seed(std::uint64_t seed, std::size_t index) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1));
}

inline std::string clip_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clip_%04zu", index);
  return buf;
}

namespace detail {

// Fixed model of the world shared by every clip: mixing matrices and readouts.
struct SynthWorld {
  std::vector<std::size_t> audio_latents;
  std::vector<std::size_t> visual_latents;
  Matrix<double> audio_mix;   // d_a x |audio_latents|
  Matrix<double> visual_mix;  // d_v x |visual_latents|
  std::vector<double> valence_readout;
  std::vector<double> arousal_readout;
};

inline SynthWorld make_world(const GenConfig& cfg) {
  SynthWorld w;
  const std::size_t k = cfg.latent_dim;
  const auto shared = static_cast<std::size_t>(std::lround(cfg.complementarity * static_cast<double>(k)));
  const std::size_t exclusive = k - shared;
  const std::size_t audio_only = (exclusive + 1) / 2;
  for (std::size_t i = 0; i < shared; ++i) {
    w.audio_latents.push_back(i);
    w.visual_latents.push_back(i);
  }
  for (std::size_t i = 0; i < exclusive; ++i) {
    (i < audio_only ? w.audio_latents : w.visual_latents).push_back(shared + i);
  }

  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0xa11ce5eedULL));
  std::normal_distribution<double> n01(0.0, 1.0);
  auto mix = [&](std::size_t rows, std::size_t cols) {
    Matrix<double> m(rows, cols);
    const double s = cols ? 1.0 / std::sqrt(static_cast<double>(cols)) : 0.0;
    for (auto& v : m.values()) v = n01(rng) * s;
    return m;
  };
  w.audio_mix = mix(cfg.audio_dim, w.audio_latents.size());
  w.visual_mix = mix(cfg.visual_dim, w.visual_latents.size());
  auto readout = [&] {
    std::vector<double> r(k);
    double l1 = 0.0;
    for (auto& v : r) {
      v = n01(rng);
      l1 += std::abs(v);
    }
    for (auto& v : r) v /= l1;  // Σ|r| = 1 keeps labels inside (−1, 1)
    return r;
  };
  w.valence_readout = readout();
  w.arousal_readout = readout();
  return w;
}

inline double to_float_precision(double v) { return static_cast<double>(static_cast<float>(v)); }

// Alternating clean / corrupted spans with geometric lengths.
inline std::vector<std::uint8_t> corruption_spans(std::size_t frames, double prob, double mean_len,
                                                  std::mt19937_64& rng) {
  std::vector<std::uint8_t> mask(frames, 0);
  if (prob <= 0.0) return mask;
  std::bernoulli_distribution corrupt(prob);
  std::geometric_distribution<std::size_t> span(1.0 / mean_len);
  std::size_t f = 0;
  while (f < frames) {
    const bool bad = corrupt(rng);
    const std::size_t len = 1 + span(rng);
    for (std::size_t i = f; i < std::min(frames, f + len); ++i) mask[i] = bad ? 1 : 0;
    f += len;
  }
  return mask;
}

// Replace masked frames with white noise matching each feature's clip mean and variance.
inline void corrupt_features(Matrix<double>& x, const std::vector<std::uint8_t>& mask, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double n = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) mean += x(r, c);
    mean /= n;
    for (std::size_t c = 0; c < x.cols(); ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(var / n);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      if (mask[c]) x(r, c) = to_float_precision(mean + sd * n01(rng));
    }
  }
}

inline LabeledClip generate_clip(const GenConfig& cfg, const SynthWorld& w, std::size_t index) {
  LabeledClip clip;
  clip.id = clip_name(index);
  clip.video = index;
  clip.seed = clip_seed(cfg.seed, index);
  std::mt19937_64 rng(clip.seed);
  std::normal_distribution<double> n01(0.0, 1.0);

  const std::size_t k = cfg.latent_dim, L = cfg.frames;
  const double alpha = std::exp(-1.0 / cfg.smoothness);
  const double drive = std::sqrt(1.0 - alpha * alpha);
  Matrix<double> z(k, L);
  for (std::size_t i = 0; i < k; ++i) {
    double s = n01(rng);
    for (std::size_t t = 0; t < L; ++t) {
      if (t) s = alpha * s + drive * n01(rng);
      z(i, t) = std::tanh(1.5 * s);
    }
  }

  clip.valence.assign(L, 0.0);
  clip.arousal.assign(L, 0.0);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t i = 0; i < k; ++i) {
      clip.valence[t] += w.valence_readout[i] * z(i, t);
      clip.arousal[t] += w.arousal_readout[i] * z(i, t);
    }
    clip.valence[t] = std::clamp(clip.valence[t], -1.0, 1.0);
    clip.arousal[t] = std::clamp(clip.arousal[t], -1.0, 1.0);
  }

  auto observe = [&](const Matrix<double>& mix, const std::vector<std::size_t>& latents) {
    Matrix<double> x(mix.rows(), L);
    for (std::size_t r = 0; r < mix.rows(); ++r)
      for (std::size_t t = 0; t < L; ++t) {
        double v = 0.0;
        for (std::size_t j = 0; j < latents.size(); ++j) v += mix(r, j) * z(latents[j], t);
        x(r, t) = to_float_precision(v + cfg.noise_std * n01(rng));
      }
    return x;
  };
  clip.audio = observe(w.audio_mix, w.audio_latents);
  clip.visual = observe(w.visual_mix, w.visual_latents);

  const bool hit_audio = cfg.corrupt != Modality::Visual;
  const bool hit_visual = cfg.corrupt != Modality::Audio;
  clip.audio_corrupt = hit_audio ? corruption_spans(L, cfg.corruption_prob, cfg.burst_length, rng)
                                 : std::vector<std::uint8_t>(L, 0);
  clip.visual_corrupt = hit_visual ? corruption_spans(L, cfg.corruption_prob, cfg.burst_length, rng)
                                   : std::vector<std::uint8_t>(L, 0);
  corrupt_features(clip.audio, clip.audio_corrupt, rng);
  corrupt_features(clip.visual, clip.visual_corrupt, rng);
  clip.valid.assign(L, 1);
  return clip;
}

} // namespace detail

/// Generate `num_videos` clips. Latents are tanh of AR(1)-smoothed noise;
/// labels are fixed L1-normalized linear readouts of the latents; each modality
/// observes its latent subset through a fixed random mixing plus noise.
/// Each clip draws from its own substream, so the result is a pure function of
/// the config and clips may be produced in any order (or on `threads` workers).
inline std::vector<LabeledClip> generate(const GenConfig& cfg, int threads = 1) {
  cfg.validate();
  const auto world = detail::make_world(cfg);
  std::vector<LabeledClip> clips(cfg.num_videos);
  parallel_for(cfg.num_videos, threads, [&](std::size_t i) { clips[i] = detail::generate_clip(cfg, world, i); });
  return clips;
}

/// Overlapping windows starting at 0, stride, 2·stride, ... (every start before
/// the last frame). Windows running past the end are zero-padded and their
/// padded frames marked invalid. A clip shorter than `length` gives one window.
inline std::vector<LabeledClip> window(const LabeledClip& clip, std::size_t length, std::size_t stride) {
  if (length < 1 || stride < 1) throw ConfigError("window: length and stride must be >= 1");
  const std::size_t frames = clip.length();
  std::vector<std::size_t> starts;
  if (length > frames) {
    starts.push_back(0);
  } else {
    for (std::size_t s = 0; s < frames; s += stride) starts.push_back(s);
  }
  std::vector<LabeledClip> out;
  for (std::size_t s : starts) {
    LabeledClip w;
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "_w%04zu", s);
    w.id = clip.id + suffix;
    w.seed = clip.seed;
    w.video = clip.video;
    w.start = clip.start + s;
    w.audio = Matrix<double>(clip.audio.rows(), length);
    w.visual = Matrix<double>(clip.visual.rows(), length);
    w.valence.assign(length, 0.0);
    w.arousal.assign(length, 0.0);
    w.valid.assign(length, 0);
    w.audio_corrupt.assign(length, 0);
    w.visual_corrupt.assign(length, 0);
    for (std::size_t i = 0; i < length && s + i < frames; ++i) {
      const std::size_t f = s + i;
      for (std::size_t r = 0; r < clip.audio.rows(); ++r) w.audio(r, i) = clip.audio(r, f);
      for (std::size_t r = 0; r < clip.visual.rows(); ++r) w.visual(r, i) = clip.visual(r, f);
      w.valence[i] = clip.valence[f];
      w.arousal[i] = clip.arousal[f];
      w.valid[i] = clip.valid[f];
      w.audio_corrupt[i] = clip.audio_corrupt[f];
      w.visual_corrupt[i] = clip.visual_corrupt[f];
    }
    out.push_back(std::move(w));
  }
  return out;
}

inline std::vector<LabeledClip> window_all(const std::vector<LabeledClip>& clips, std::size_t length,
                                           std::size_t stride) {
  std::vector<LabeledClip> out;
  for (const auto& c : clips) {
    auto w = window(c, length, stride);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// AVFS feature files: "AVFS", u32 version = 1, u32 frames, u32 dim, then
// frames x dim little-endian float32 values, frame-major.

inline constexpr std::array<char, 4> kAvfsMagic{'A', 'V', 'F', 'S'};
inline constexpr std::uint32_t kAvfsVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

} // namespace detail

/// Encode a dim x frames feature matrix.
inline std::string encode_avfs(const Matrix<double>& features) {
  std::string out(kAvfsMagic.begin(), kAvfsMagic.end());
  detail::put_u32(out, kAvfsVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(features.cols()));
  detail::put_u32(out, static_cast<std::uint32_t>(features.rows()));
  for (std::size_t f = 0; f < features.cols(); ++f)
    for (std::size_t r = 0; r < features.rows(); ++r) {
      const float v = static_cast<float>(features(r, f));
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      detail::put_u32(out, bits);
    }
  return out;
}

inline Matrix<double> decode_avfs(const std::string& bytes) {
  if (bytes.size() < 4) throw FormatError("AVFS: truncated header, missing magic", bytes.size());
  if (!std::equal(kAvfsMagic.begin(), kAvfsMagic.end(), bytes.begin())) throw FormatError("AVFS: bad magic", 0);
  if (bytes.size() < 16) throw FormatError("AVFS: truncated header", bytes.size());
  const std::uint32_t version = detail::get_u32(bytes, 4);
  if (version != kAvfsVersion) {
    throw FormatError("AVFS: unsupported version " + std::to_string(version), 4);
  }
  const std::size_t frames = detail::get_u32(bytes, 8);
  const std::size_t dim = detail::get_u32(bytes, 12);
  const std::size_t need = 16 + 4 * frames * dim;
  if (bytes.size() < need) {
    throw FormatError("AVFS: truncated payload, expected " + std::to_string(need) + " bytes", bytes.size());
  }
  if (bytes.size() > need) throw FormatError("AVFS: trailing bytes after payload", need);
  Matrix<double> m(dim, frames);
  std::size_t off = 16;
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t r = 0; r < dim; ++r, off += 4) {
      const std::uint32_t bits = detail::get_u32(bytes, off);
      float v;
      std::memcpy(&v, &bits, 4);
      m(r, f) = static_cast<double>(v);
    }
  return m;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_real(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// Writes <id>_audio.avfs, <id>_visual.avfs, <id>_labels.csv
/// ("frame,valence,arousal") and <id>_mask.csv
/// ("frame,valid,audio_corrupt,visual_corrupt").
inline void write_features(const std::filesystem::path& dir, const LabeledClip& clip) {
  detail::write_file(dir / (clip.id + "_audio.avfs"), encode_avfs(clip.audio));
  detail::write_file(dir / (clip.id + "_visual.avfs"), encode_avfs(clip.visual));
  std::string labels = "frame,valence,arousal\n";
  std::string masks = "frame,valid,audio_corrupt,visual_corrupt\n";
  for (std::size_t f = 0; f < clip.length(); ++f) {
    labels += std::to_string(f) + "," + format_real(clip.valence[f]) + "," + format_real(clip.arousal[f]) + "\n";
    masks += std::to_string(f) + "," + std::to_string(int(clip.valid[f])) + "," +
             std::to_string(int(clip.audio_corrupt[f])) + "," + std::to_string(int(clip.visual_corrupt[f])) + "\n";
  }
  detail::write_file(dir / (clip.id + "_labels.csv"), labels);
  detail::write_file(dir / (clip.id + "_mask.csv"), masks);
}

namespace detail {

inline std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path,
                                                           std::string_view header) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line) || line != header) {
    throw FormatError("'" + path.filename().string() + "': expected header '" + std::string(header) + "'", 0);
  }
  offset += line.size() + 1;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (rows.empty() ? false : cells.size() != rows.front().size()) {
      throw FormatError("'" + path.filename().string() + "': ragged row", offset);
    }
    rows.push_back(std::move(cells));
    offset += line.size() + 1;
  }
  return rows;
}

} // namespace detail

inline LabeledClip read_features(const std::filesystem::path& dir, const std::string& id) {
  LabeledClip clip;
  clip.id = id;
  clip.audio = decode_avfs(detail::read_file(dir / (id + "_audio.avfs")));
  clip.visual = decode_avfs(detail::read_file(dir / (id + "_visual.avfs")));
  if (clip.audio.cols() != clip.visual.cols()) {
    throw FormatError("clip '" + id + "': audio and visual frame counts differ", 8);
  }
  const auto labels = detail::read_csv_rows(dir / (id + "_labels.csv"), "frame,valence,arousal");
  const auto masks = detail::read_csv_rows(dir / (id + "_mask.csv"), "frame,valid,audio_corrupt,visual_corrupt");
  const std::size_t L = clip.audio.cols();
  if (labels.size() != L || masks.size() != L) {
    throw FormatError("clip '" + id + "': label/mask rows do not match " + std::to_string(L) + " frames", 0);
  }
  for (std::size_t f = 0; f < L; ++f) {
    clip.valence.push_back(std::stod(labels[f].at(1)));
    clip.arousal.push_back(std::stod(labels[f].at(2)));
    clip.valid.push_back(static_cast<std::uint8_t>(std::stoi(masks[f].at(1))));
    clip.audio_corrupt.push_back(static_cast<std::uint8_t>(std::stoi(masks[f].at(2))));
    clip.visual_corrupt.push_back(static_cast<std::uint8_t>(std::stoi(masks[f].at(3))));
  }
  return clip;
}

struct ManifestRow {
  std::string clip;
  std::uint64_t seed = 0;
  std::size_t frames = 0;
  std::size_t audio_corrupt_frames = 0;
  std::size_t visual_corrupt_frames = 0;
};

inline constexpr std::string_view kManifestHeader = "clip,seed,frames,audio_corrupt_frames,visual_corrupt_frames";

/// Write every clip plus manifest.csv into `dir` (created if missing).
inline void write_dataset(const std::filesystem::path& dir, const std::vector<LabeledClip>& clips) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  std::string manifest = std::string(kManifestHeader) + "\n";
  for (const auto& c : clips) {
    write_features(dir, c);
    const auto count = [](const std::vector<std::uint8_t>& m) {
      return std::to_string(std::count(m.begin(), m.end(), std::uint8_t{1}));
    };
    manifest += csv_row({c.id, std::to_string(c.seed), std::to_string(c.length()), count(c.audio_corrupt),
                         count(c.visual_corrupt)});
  }
  detail::write_file(dir / "manifest.csv", manifest);
}

inline std::vector<ManifestRow> read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.csv";
  if (!std::filesystem::exists(path)) {
    throw ConfigError("dataset directory '" + dir.string() + "' has no manifest.csv");
  }
  std::string text = detail::read_file(path);
  std::erase(text, '\r');
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) throw FormatError("manifest.csv: bad header", 0);
  std::vector<ManifestRow> rows;
  std::size_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      std::stringstream ls(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      if (cells.size() != 5) throw FormatError("manifest.csv: expected 5 fields", offset);
      rows.push_back({cells[0], std::stoull(cells[1]), std::stoul(cells[2]), std::stoul(cells[3]), std::stoul(cells[4])});
    }
    offset += line.size() + 1;
  }
  return rows;
}

/// Load every clip listed in the manifest, in manifest order.
inline std::vector<LabeledClip> read_dataset(const std::filesystem::path& dir) {
  const auto rows = read_manifest(dir);
  if (rows.empty()) throw ConfigError("dataset '" + dir.string() + "' lists no clips");
  std::vector<LabeledClip> clips;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    LabeledClip c = read_features(dir, rows[i].clip);
    c.seed = rows[i].seed;
    c.video = i;
    clips.push_back(std::move(c));
  }
  return clips;
}

} // namespace avf
