#include <fstream>
#include <set>
#include <sstream>

#include "data.hpp"
#include "helpers.hpp"
#include "jpeg.hpp"

using namespace advblur;
using testutil::error_kind;
namespace fs = std::filesystem;

namespace {

SynthSpec tiny_spec() {
  SynthSpec s;
  s.height = s.width = 32;
  s.train_per_family = 3;
  s.val_per_family = 1;
  s.test_per_family = 2;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("zero counts give an empty manifest and no images") {
    SynthSpec s = tiny_spec();
    s.train_per_family = s.val_per_family = s.test_per_family = 0;
    const fs::path dir = testutil::temp_dir("synth-empty");
    const fs::path m = synth_generate(s, dir);
    CHECK(read_manifest(m).records.empty());
    int images = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir)) images += e.path().extension() == ".ppm";
    CHECK(images == 0);
  }

  TEST_CASE("generation is byte-for-byte deterministic") {
    const fs::path a = testutil::temp_dir("synth-a"), b = testutil::temp_dir("synth-b");
    synth_generate(tiny_spec(), a);
    synth_generate(tiny_spec(), b);
    int files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file()) continue;
      ++files;
      CHECK(slurp(e.path()) == slurp(b / fs::relative(e.path(), a)));
    }
    // 3 families x (3+1+2) bases x 3 qualities x 2 labels, plus manifest and spec.
    CHECK(files == 3 * 6 * 3 * 2 + 2);
  }

  TEST_CASE("manifest round trip, filters and balance") {
    const fs::path dir = testutil::temp_dir("synth-manifest");
    const fs::path m = synth_generate(tiny_spec(), dir);
    const Manifest all = load_manifest(m);
    CHECK(all.records.size() == 3 * 6 * 3 * 2);
    const fs::path copy = dir / "copy.jsonl";
    write_manifest(copy, all.records);
    CHECK(read_manifest(copy).records == all.records);

    ManifestFilter f;
    f.split = "test";
    f.family = "seam";
    const Manifest seam = load_manifest(m, f);
    CHECK(seam.records.size() == 2 * 3 * 2);
    std::set<std::string> fake_keys, real_keys;
    for (const auto& r : seam.records) {
      CHECK(r.split == "test");
      CHECK((r.family == "seam" || r.family == "none"));
      (r.label == "fake" ? fake_keys : real_keys).insert(r.pair_key() + r.quality);
    }
    CHECK(fake_keys == real_keys);

    for (const auto& q : kQualities) {
      f.quality = q;
      const LabeledSet cell = load_images(load_manifest(m, f));
      int fakes = 0;
      for (int y : cell.labels) fakes += y;
      CHECK(fakes * 2 == int(cell.size()));
    }
  }

  TEST_CASE("missing image files are named") {
    const fs::path dir = testutil::temp_dir("synth-missing");
    const fs::path m = synth_generate(tiny_spec(), dir);
    const SampleRecord victim = read_manifest(m).records.at(5);
    fs::remove(dir / victim.path);
    try {
      load_manifest(m);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find(victim.path) != std::string::npos);
    }
  }

  TEST_CASE("record invariants") {
    SampleRecord r{"a.ppm", "real", "checker", "q_mid", "train"};
    CHECK(error_kind([&] { r.validate(); }) == ErrorKind::validation);
    r = {"a.ppm", "fake", "none", "q_mid", "train"};
    CHECK(error_kind([&] { r.validate(); }) == ErrorKind::validation);
    r = {"a.ppm", "fake", "seam", "q_bad", "train"};
    CHECK(error_kind([&] { r.validate(); }) == ErrorKind::validation);
  }

  TEST_CASE("test bases never appear in train") {
    const fs::path dir = testutil::temp_dir("synth-leak");
    const Manifest all = load_manifest(synth_generate(tiny_spec(), dir));
    auto base_id = [](const SampleRecord& r) {
      const std::string stem = fs::path(r.path).stem().string();
      return stem.substr(0, stem.find('_'));
    };
    std::set<std::string> train_bases;
    for (const auto& r : all.records)
      if (r.split == "train") train_bases.insert(base_id(r));
    for (const auto& r : all.records)
      if (r.split != "train") CHECK(train_bases.count(base_id(r)) == 0);
    CHECK(split_base_offset("train") != split_base_offset("test"));
  }

  TEST_CASE("pnm round trip is exact on the 8-bit grid") {
    Image x(3, 5, 7);
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = double(i * 37 % 256) / 255.0;
    const fs::path f = testutil::temp_dir("pnm") / "x.ppm";
    write_pnm(f, x);
    CHECK(read_pnm(f).data == x.data);
  }

  TEST_CASE("compression tiers lower high-frequency energy monotonically") {
    // Energy is measured on the 8x8 block DCT grid the compressor quantizes.
    const SynthSpec spec;
    for (const std::string fam : {"checker", "seam", "residual"})
      for (std::uint64_t id = 0; id < 8; ++id) {
        const SynthBase b = synth_render_base(spec, fam, id);
        for (const Image* x : {&b.real, &b.fake}) {
          const double raw = oracle::block_dct_hf_energy(testutil::planes(apply_quality(*x, "q_raw", spec)));
          const double mid = oracle::block_dct_hf_energy(testutil::planes(apply_quality(*x, "q_mid", spec)));
          const double low = oracle::block_dct_hf_energy(testutil::planes(apply_quality(*x, "q_low", spec)));
          CHECK(raw >= mid);
          CHECK(mid >= low);
        }
      }
  }

  TEST_CASE("default spec: high-frequency energy separates training-family fakes") {
    const SynthSpec spec;
    std::vector<double> energy;
    std::vector<int> labels;
    for (std::uint64_t n = 0; n < 100; ++n) {
      const SynthBase b = synth_render_base(spec, "checker", split_base_offset("train") + n);
      energy.push_back(oracle::hf_energy(testutil::planes(apply_quality(b.real, "q_mid", spec))));
      labels.push_back(0);
      energy.push_back(oracle::hf_energy(testutil::planes(apply_quality(b.fake, "q_mid", spec))));
      labels.push_back(1);
    }
    // A one-feature linear classifier ranks samples by the feature itself.
    CHECK(oracle::brute_auc(energy, labels) > 0.9);
  }

  TEST_CASE("jpeg tables and round trip") {
    const auto q50 = jpeg_quant_table(50);
    CHECK(q50[0] == 16);
    CHECK(q50[63] == 99);
    for (int v : jpeg_quant_table(100)) CHECK(v == 1);
    const Image x = testutil::random_image(3, 16, 16, 3);
    const Image y = jpeg_simulate(x, 75);
    CHECK(y.same_shape(x));
    for (double v : y.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(std::abs(v * 255.0 - std::round(v * 255.0)) < 1e-9);
    }
    CHECK(jpeg_simulate(x, 75).data == y.data);
  }
}
