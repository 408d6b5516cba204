#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tensor.hpp"

namespace advblur {

inline const std::vector<std::string> kQualities{"q_raw", "q_mid", "q_low"};
inline const std::vector<std::string> kSplits{"train", "val", "test"};

struct SampleRecord {
  std::string path;  // relative to the manifest directory
  std::string label; // "real" | "fake"
  std::string family;
  std::string quality;
  std::string split;

  int label_index() const { return label == "fake" ? 1 : 0; }
  /// Identifier shared by a fake and the real it was derived from.
  std::string pair_key() const;
  void validate() const;
  bool operator==(const SampleRecord&) const = default;
};

struct Manifest {
  std::filesystem::path root;  // directory the record paths are relative to
  std::vector<SampleRecord> records;

  std::filesystem::path resolve(const SampleRecord& r) const { return root / r.path; }
};

nlohmann::ordered_json record_to_json(const SampleRecord& r);
SampleRecord record_from_json(const nlohmann::json& j);

void write_manifest(const std::filesystem::path& file, const std::vector<SampleRecord>& records);
/// Parses a manifest without touching image files.
Manifest read_manifest(const std::filesystem::path& file);

struct ManifestFilter {
  std::optional<std::string> family;   // fakes of this family plus their paired reals
  std::optional<std::string> quality;
  std::optional<std::string> split;
  std::optional<std::string> label;
};

/// Records matching `filter`, in manifest order; every referenced file must exist.
Manifest load_manifest(const std::filesystem::path& file, const ManifestFilter& filter = {});

// ---- Synthetic benchmark ----------------------------------------------------

struct SynthSpec {
  int height = 64;
  int width = 64;
  int channels = 3;
  std::vector<std::string> families{"checker", "seam", "residual"};
  int train_per_family = 256;  // real/fake pairs per (family, split), rendered at every quality
  int val_per_family = 64;
  int test_per_family = 128;

  // Real content: smooth random field plus sensor noise.
  int blobs = 6;
  double blob_sigma_min = 6.0;
  double blob_sigma_max = 16.0;
  double blob_amplitude = 0.12;
  double blob_chroma = 0.2;  // per-channel deviation relative to the shared luminance amplitude
  double sensor_noise = 1.5 / 255.0;

  // Blend region shared by every fake family.
  double blend_radius_min = 10.0;
  double blend_radius_max = 18.0;
  double blend_feather = 2.0;
  double blend_shift = 0.06;

  // Family artifacts.
  double checker_amplitude = 0.03;
  int checker_block = 1;  // side of one checker cell in pixels
  double seam_shift = 0.08;
  double residual_std = 0.05;

  // Quality tiers (q_raw is uncompressed).
  int quality_mid = 75;
  int quality_low = 35;

  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
  void validate() const;
};

struct SynthBase {
  Image real;
  Image fake;
};

/// Deterministic real/fake pair for base `base_id` (qualities not applied).
SynthBase synth_render_base(const SynthSpec& spec, const std::string& family, std::uint64_t base_id);

/// First base id of each split; ranges never overlap.
std::uint64_t split_base_offset(const std::string& split);

/// Image at a quality tier.
Image apply_quality(const Image& image, const std::string& quality, const SynthSpec& spec);

/// Writes images and `manifest.jsonl` under `out_dir`; returns the manifest path.
std::filesystem::path synth_generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

// ---- Image files ------------------------------------------------------------

/// Binary PGM (1 channel) or PPM (3 channels), 8 bits per sample.
void write_pnm(const std::filesystem::path& file, const Image& image);
Image read_pnm(const std::filesystem::path& file);

struct LabeledSet {
  std::vector<Image> images;
  std::vector<int> labels;
  std::size_t size() const { return images.size(); }
};

LabeledSet load_images(const Manifest& manifest);

}  // namespace advblur
