#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "errors.hpp"
#include "jpeg.hpp"

namespace advblur {

namespace fs = std::filesystem;

// ---- Records ----------------------------------------------------------------

std::string SampleRecord::pair_key() const {
  const fs::path p(path);
  const std::string stem = p.stem().string();
  const auto underscore = stem.find('_');
  return p.parent_path().string() + "/" + stem.substr(0, underscore);
}

void SampleRecord::validate() const {
  require(!path.empty(), ErrorKind::validation, "record has an empty path");
  require(label == "real" || label == "fake", ErrorKind::validation, "record '" + path + "' has label '" + label + "'");
  require(std::find(kQualities.begin(), kQualities.end(), quality) != kQualities.end(), ErrorKind::validation,
          "record '" + path + "' has unknown quality '" + quality + "'");
  require(std::find(kSplits.begin(), kSplits.end(), split) != kSplits.end(), ErrorKind::validation,
          "record '" + path + "' has unknown split '" + split + "'");
  if (label == "real")
    require(family == "none", ErrorKind::validation, "real record '" + path + "' must have family 'none'");
  else
    require(!family.empty() && family != "none", ErrorKind::validation,
            "fake record '" + path + "' needs an artifact family");
}

nlohmann::ordered_json record_to_json(const SampleRecord& r) {
  nlohmann::ordered_json j;
  j["path"] = r.path;
  j["label"] = r.label;
  j["family"] = r.family;
  j["quality"] = r.quality;
  j["split"] = r.split;
  return j;
}

SampleRecord record_from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorKind::validation, "manifest record is not an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::set<std::string> known{"path", "label", "family", "quality", "split"};
    require(known.count(it.key()) == 1, ErrorKind::validation, "unknown manifest field '" + it.key() + "'");
  }
  SampleRecord r{j.at("path").get<std::string>(), j.at("label").get<std::string>(),
                 j.at("family").get<std::string>(), j.at("quality").get<std::string>(),
                 j.at("split").get<std::string>()};
  r.validate();
  return r;
}

void write_manifest(const fs::path& file, const std::vector<SampleRecord>& records) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  require(bool(out), ErrorKind::io, "cannot write manifest '" + file.string() + "'");
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
  require(bool(out), ErrorKind::io, "failed writing manifest '" + file.string() + "'");
}

Manifest read_manifest(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  require(bool(in), ErrorKind::io, "cannot open manifest '" + file.string() + "'");
  Manifest m;
  m.root = file.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      m.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::validation, file.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return m;
}

Manifest load_manifest(const fs::path& file, const ManifestFilter& filter) {
  const Manifest all = read_manifest(file);
  auto base_match = [&](const SampleRecord& r) {
    return (!filter.quality || r.quality == *filter.quality) && (!filter.split || r.split == *filter.split) &&
           (!filter.label || r.label == *filter.label);
  };
  std::set<std::string> paired;
  if (filter.family && *filter.family != "none")
    for (const auto& r : all.records)
      if (r.label == "fake" && r.family == *filter.family && base_match(r)) paired.insert(r.pair_key());

  Manifest out;
  out.root = all.root;
  for (const auto& r : all.records) {
    if (!base_match(r)) continue;
    if (filter.family) {
      const bool keep = *filter.family == "none" ? r.family == "none"
                        : r.label == "fake"       ? r.family == *filter.family
                                                  : paired.count(r.pair_key()) == 1;
      if (!keep) continue;
    }
    require(fs::exists(out.resolve(r)), ErrorKind::io,
            "manifest record '" + r.path + "' (" + r.label + ", " + r.family + ", " + r.quality + ", " + r.split +
                ") points to a missing file");
    out.records.push_back(r);
  }
  return out;
}

// ---- Synthetic benchmark ----------------------------------------------------

nlohmann::json SynthSpec::to_json() const {
  return {{"height", height},
          {"width", width},
          {"channels", channels},
          {"families", families},
          {"train_per_family", train_per_family},
          {"val_per_family", val_per_family},
          {"test_per_family", test_per_family},
          {"blobs", blobs},
          {"blob_sigma_min", blob_sigma_min},
          {"blob_sigma_max", blob_sigma_max},
          {"blob_amplitude", blob_amplitude},
          {"blob_chroma", blob_chroma},
          {"sensor_noise", sensor_noise},
          {"blend_radius_min", blend_radius_min},
          {"blend_radius_max", blend_radius_max},
          {"blend_feather", blend_feather},
          {"blend_shift", blend_shift},
          {"checker_amplitude", checker_amplitude},
          {"checker_block", checker_block},
          {"seam_shift", seam_shift},
          {"residual_std", residual_std},
          {"quality_mid", quality_mid},
          {"quality_low", quality_low},
          {"seed", seed}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = *it;
    if (k == "height") s.height = v.get<int>();
    else if (k == "width") s.width = v.get<int>();
    else if (k == "channels") s.channels = v.get<int>();
    else if (k == "families") s.families = v.get<std::vector<std::string>>();
    else if (k == "train_per_family") s.train_per_family = v.get<int>();
    else if (k == "val_per_family") s.val_per_family = v.get<int>();
    else if (k == "test_per_family") s.test_per_family = v.get<int>();
    else if (k == "blobs") s.blobs = v.get<int>();
    else if (k == "blob_sigma_min") s.blob_sigma_min = v.get<double>();
    else if (k == "blob_sigma_max") s.blob_sigma_max = v.get<double>();
    else if (k == "blob_amplitude") s.blob_amplitude = v.get<double>();
    else if (k == "blob_chroma") s.blob_chroma = v.get<double>();
    else if (k == "sensor_noise") s.sensor_noise = v.get<double>();
    else if (k == "blend_radius_min") s.blend_radius_min = v.get<double>();
    else if (k == "blend_radius_max") s.blend_radius_max = v.get<double>();
    else if (k == "blend_feather") s.blend_feather = v.get<double>();
    else if (k == "blend_shift") s.blend_shift = v.get<double>();
    else if (k == "checker_amplitude") s.checker_amplitude = v.get<double>();
    else if (k == "checker_block") s.checker_block = v.get<int>();
    else if (k == "seam_shift") s.seam_shift = v.get<double>();
    else if (k == "residual_std") s.residual_std = v.get<double>();
    else if (k == "quality_mid") s.quality_mid = v.get<int>();
    else if (k == "quality_low") s.quality_low = v.get<int>();
    else if (k == "seed") s.seed = v.get<std::uint64_t>();
    else fail(ErrorKind::config, "unknown synth key '" + k + "'");
  }
  s.validate();
  return s;
}

void SynthSpec::validate() const {
  require(height >= 8 && width >= 8, ErrorKind::config, "synthetic images must be at least 8x8");
  require(channels == 1 || channels == 3, ErrorKind::config, "channels must be 1 or 3");
  require(train_per_family >= 0 && val_per_family >= 0 && test_per_family >= 0, ErrorKind::config,
          "per-family counts must be >= 0");
  static const std::set<std::string> known{"checker", "seam", "residual"};
  for (const auto& f : families)
    require(known.count(f) == 1, ErrorKind::config, "unknown artifact family '" + f + "'");
  require(blob_sigma_min > 0 && blob_sigma_max >= blob_sigma_min, ErrorKind::config, "invalid blob sigma range");
  require(blend_radius_min > 0 && blend_radius_max >= blend_radius_min, ErrorKind::config, "invalid blend radius range");
  require(blend_feather > 0, ErrorKind::config, "blend feather must be positive");
  require(checker_block >= 1, ErrorKind::config, "checker_block must be >= 1");
  require(quality_mid >= 1 && quality_mid <= 100 && quality_low >= 1 && quality_low <= 100, ErrorKind::config,
          "quality tiers must lie in [1,100]");
}

std::uint64_t split_base_offset(const std::string& split) {
  if (split == "train") return 0;
  if (split == "val") return 10'000'000;
  if (split == "test") return 20'000'000;
  fail(ErrorKind::validation, "unknown split '" + split + "'");
}

namespace {

std::mt19937_64 base_rng(std::uint64_t seed, std::uint64_t base_id, std::uint32_t stream) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(base_id),
                    std::uint32_t(base_id >> 32), stream};
  return std::mt19937_64(seq);
}

Image render_real(const SynthSpec& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Image x(s.channels, s.height, s.width);
  const double lum = 0.35 + 0.3 * unit(rng);
  const double gi = 0.15 * (unit(rng) - 0.5), gj = 0.15 * (unit(rng) - 0.5);
  for (int ch = 0; ch < s.channels; ++ch) {
    const double base = lum + 0.3 * s.blob_chroma * (unit(rng) - 0.5);
    for (int i = 0; i < s.height; ++i)
      for (int j = 0; j < s.width; ++j)
        x.at(ch, i, j) = base + gi * (double(i) / s.height - 0.5) + gj * (double(j) / s.width - 0.5);
  }
  for (int b = 0; b < s.blobs; ++b) {
    const double ci = unit(rng) * s.height, cj = unit(rng) * s.width;
    const double sg = s.blob_sigma_min + (s.blob_sigma_max - s.blob_sigma_min) * unit(rng);
    std::vector<double> amp(std::size_t(s.channels));
    const double lum = normal(rng);
    for (double& a : amp) a = s.blob_amplitude * (lum + s.blob_chroma * normal(rng));
    for (int i = 0; i < s.height; ++i)
      for (int j = 0; j < s.width; ++j) {
        const double d2 = (i - ci) * (i - ci) + (j - cj) * (j - cj);
        const double g = std::exp(-d2 / (2.0 * sg * sg));
        for (int ch = 0; ch < s.channels; ++ch) x.at(ch, i, j) += amp[ch] * g;
      }
  }
  for (double& v : x.data) v = std::clamp(v + s.sensor_noise * normal(rng), 0.0, 1.0);
  return x;
}

struct Region {
  std::vector<double> soft;  // feathered mask
  std::vector<double> hard;  // binary mask
};

Region blend_region(const SynthSpec& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double ci = s.height * (0.3 + 0.4 * unit(rng));
  const double cj = s.width * (0.3 + 0.4 * unit(rng));
  const double ra = s.blend_radius_min + (s.blend_radius_max - s.blend_radius_min) * unit(rng);
  const double rb = s.blend_radius_min + (s.blend_radius_max - s.blend_radius_min) * unit(rng);
  const double theta = std::numbers::pi * unit(rng);
  const double ct = std::cos(theta), st = std::sin(theta);
  Region r;
  r.soft.resize(std::size_t(s.height) * s.width);
  r.hard.resize(r.soft.size());
  for (int i = 0; i < s.height; ++i)
    for (int j = 0; j < s.width; ++j) {
      const double y = (i - ci) * ct + (j - cj) * st;
      const double x = -(i - ci) * st + (j - cj) * ct;
      const double d = std::sqrt((y * y) / (ra * ra) + (x * x) / (rb * rb));
      const double signed_dist = (1.0 - d) * std::min(ra, rb);
      const std::size_t p = std::size_t(i) * s.width + j;
      r.soft[p] = 1.0 / (1.0 + std::exp(-signed_dist / s.blend_feather));
      r.hard[p] = d <= 1.0 ? 1.0 : 0.0;
    }
  return r;
}

Image render_fake(const SynthSpec& s, const Image& real, const std::string& family, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Region region = blend_region(s, rng);
  const bool seam = family == "seam";
  const std::vector<double>& mask = seam ? region.hard : region.soft;
  const double shift = seam ? s.seam_shift : s.blend_shift;
  std::vector<double> delta(std::size_t(s.channels));
  // Colour mismatch of the pasted region: warmer (R up, B down) in RGB, brighter in grayscale.
  for (std::size_t ch = 0; ch < delta.size(); ++ch) {
    const double dir = delta.size() == 3 ? (ch == 0 ? 1.0 : ch == 1 ? 0.0 : -1.0) : 1.0;
    delta[ch] = dir * shift * (0.5 + 0.5 * unit(rng));
  }

  Image fake = real;
  for (int ch = 0; ch < s.channels; ++ch)
    for (int i = 0; i < s.height; ++i)
      for (int j = 0; j < s.width; ++j) {
        const std::size_t p = std::size_t(i) * s.width + j;
        double v = real.at(ch, i, j) + mask[p] * delta[std::size_t(ch)];
        if (family == "checker") v += mask[p] * s.checker_amplitude * ((i / s.checker_block + j / s.checker_block) % 2 == 0 ? 1.0 : -1.0);
        else if (family == "residual") v += mask[p] * s.residual_std * normal(rng);
        fake.at(ch, i, j) = std::clamp(v, 0.0, 1.0);
      }
  return fake;
}

// Round to the 8-bit grid so rendered images equal their files.
Image quantize8(Image x) {
  for (double& v : x.data) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return x;
}

}  // namespace

SynthBase synth_render_base(const SynthSpec& spec, const std::string& family, std::uint64_t base_id) {
  auto rng = base_rng(spec.seed, base_id, 0);
  SynthBase b;
  b.real = render_real(spec, rng);
  auto frng = base_rng(spec.seed, base_id, 1);
  b.fake = render_fake(spec, b.real, family, frng);
  b.real = quantize8(std::move(b.real));
  b.fake = quantize8(std::move(b.fake));
  return b;
}

Image apply_quality(const Image& image, const std::string& quality, const SynthSpec& spec) {
  if (quality == "q_raw") return image;
  if (quality == "q_mid") return jpeg_simulate(image, spec.quality_mid);
  if (quality == "q_low") return jpeg_simulate(image, spec.quality_low);
  fail(ErrorKind::validation, "unknown quality '" + quality + "'");
}

fs::path synth_generate(const SynthSpec& spec, const fs::path& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec && fs::is_directory(out_dir), ErrorKind::io, "cannot create output directory '" + out_dir.string() + "'");

  std::vector<SampleRecord> records;
  for (const std::string& split : kSplits) {
    const int count = split == "train" ? spec.train_per_family : split == "val" ? spec.val_per_family
                                                                                  : spec.test_per_family;
    if (count == 0) continue;
    for (std::size_t f = 0; f < spec.families.size(); ++f) {
      const std::string& family = spec.families[f];
      for (int n = 0; n < count; ++n) {
        const std::uint64_t base_id = split_base_offset(split) + f * 1'000'000ULL + std::uint64_t(n);
        const SynthBase base = synth_render_base(spec, family, base_id);
        char stem[32];
        std::snprintf(stem, sizeof stem, "b%08llu", static_cast<unsigned long long>(base_id));
        for (const std::string& quality : kQualities) {
          const fs::path dir = fs::path(split) / quality;
          fs::create_directories(out_dir / dir, ec);
          require(!ec, ErrorKind::io, "cannot create '" + (out_dir / dir).string() + "'");
          const std::string ext = spec.channels == 3 ? ".ppm" : ".pgm";
          const fs::path real_path = dir / (std::string(stem) + "_real" + ext);
          const fs::path fake_path = dir / (std::string(stem) + "_" + family + ext);
          write_pnm(out_dir / real_path, apply_quality(base.real, quality, spec));
          write_pnm(out_dir / fake_path, apply_quality(base.fake, quality, spec));
          records.push_back({real_path.generic_string(), "real", "none", quality, split});
          records.push_back({fake_path.generic_string(), "fake", family, quality, split});
        }
      }
    }
  }
  const fs::path manifest = out_dir / "manifest.jsonl";
  write_manifest(manifest, records);
  std::ofstream(out_dir / "synth_spec.json", std::ios::binary | std::ios::trunc) << spec.to_json().dump(2) << '\n';
  return manifest;
}

// ---- Image files ------------------------------------------------------------

void write_pnm(const fs::path& file, const Image& image) {
  require(image.c == 1 || image.c == 3, ErrorKind::validation, "PNM images need 1 or 3 channels");
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  require(bool(out), ErrorKind::io, "cannot write image '" + file.string() + "'");
  out << (image.c == 3 ? "P6" : "P5") << '\n' << image.w << ' ' << image.h << "\n255\n";
  std::vector<unsigned char> bytes(image.size());
  std::size_t k = 0;
  for (int i = 0; i < image.h; ++i)
    for (int j = 0; j < image.w; ++j)
      for (int ch = 0; ch < image.c; ++ch)
        bytes[k++] = static_cast<unsigned char>(std::lround(std::clamp(image.at(ch, i, j), 0.0, 1.0) * 255.0));
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  require(bool(out), ErrorKind::io, "failed writing image '" + file.string() + "'");
}

Image read_pnm(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  require(bool(in), ErrorKind::io, "cannot open image '" + file.string() + "'");
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  require(bool(in) && (magic == "P6" || magic == "P5") && w > 0 && h > 0 && maxval == 255, ErrorKind::io,
          "unsupported PNM header in '" + file.string() + "'");
  in.get();
  const int c = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> bytes(std::size_t(w) * h * c);
  in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  require(in.gcount() == std::streamsize(bytes.size()), ErrorKind::io, "truncated image '" + file.string() + "'");
  Image img(c, h, w);
  std::size_t k = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int ch = 0; ch < c; ++ch) img.at(ch, i, j) = bytes[k++] / 255.0;
  return img;
}

LabeledSet load_images(const Manifest& manifest) {
  LabeledSet set;
  set.images.reserve(manifest.records.size());
  for (const auto& r : manifest.records) {
    set.images.push_back(read_pnm(manifest.resolve(r)));
    set.labels.push_back(r.label_index());
  }
  return set;
}

}  // namespace advblur
