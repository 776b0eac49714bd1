#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "auda/dataset.hpp"
#include "auda/image.hpp"
#include "doctest.h"

using namespace auda;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("auda_dataset_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

DataGenConfig small_config(Domain d, const fs::path& root) {
  DataGenConfig cfg;
  cfg.domain = d;
  cfg.subjects = 3;
  cfg.frames_per_subject = 4;
  cfg.au_marginals = {0.5, 0.5, 0.5, 0.5, 0.5};
  cfg.height = 32;
  cfg.width = 32;
  cfg.out_root = root.string();
  return cfg;
}

}  // namespace

TEST_CASE("generation writes the configured number of records and subjects") {
  fs::path root = fresh_dir("count");
  DataGenConfig cfg = small_config(Domain::source, root);
  cfg.subjects = 10;
  cfg.frames_per_subject = 20;
  DatasetManifest m = generate_domain_dataset(cfg, 42);
  CHECK(m.records.size() == 200);
  std::set<int> ids;
  for (const SampleRecord& r : m.records) ids.insert(r.identity_id);
  CHECK(ids.size() == 10);
  for (const SampleRecord& r : m.records)
    CHECK(fs::exists(fs::path(m.dir) / r.file));
  fs::remove_all(root);
}

TEST_CASE("AU positive rates match the configured marginals") {
  fs::path root = fresh_dir("marginals");
  DataGenConfig cfg = small_config(Domain::source, root);
  cfg.subjects = 20;
  cfg.frames_per_subject = 100;
  cfg.au_marginals = {0.5, 0.5, 0.5};
  DatasetManifest m = generate_domain_dataset(cfg, 7);
  REQUIRE(m.records.size() == 2000);
  std::vector<double> rate(3, 0.0);
  for (const SampleRecord& r : m.records)
    for (std::size_t k = 0; k < 3; ++k) rate[k] += r.au.bits[k];
  for (std::size_t k = 0; k < 3; ++k) {
    rate[k] /= 2000.0;
    CHECK(rate[k] >= 0.45);
    CHECK(rate[k] <= 0.55);
  }
  fs::remove_all(root);
}

TEST_CASE("regeneration with the same seed is byte-identical") {
  fs::path ra = fresh_dir("det_a");
  fs::path rb = fresh_dir("det_b");
  DatasetManifest a = generate_domain_dataset(small_config(Domain::target, ra), 99);
  DatasetManifest b = generate_domain_dataset(small_config(Domain::target, rb), 99);
  CHECK(file_bytes(fs::path(a.dir) / "manifest.json") ==
        file_bytes(fs::path(b.dir) / "manifest.json"));
  for (std::size_t i = 0; i < a.records.size(); ++i)
    CHECK(file_bytes(a.image_path(i)) == file_bytes(b.image_path(i)));

  fs::path rc = fresh_dir("det_c");
  DatasetManifest c = generate_domain_dataset(small_config(Domain::target, rc), 100);
  CHECK(file_bytes(fs::path(a.dir) / "manifest.json") !=
        file_bytes(fs::path(c.dir) / "manifest.json"));
  fs::remove_all(ra);
  fs::remove_all(rb);
  fs::remove_all(rc);
}

TEST_CASE("identities are disjoint across domains") {
  fs::path root = fresh_dir("disjoint");
  DatasetManifest s = generate_domain_dataset(small_config(Domain::source, root), 5);
  DatasetManifest t = generate_domain_dataset(small_config(Domain::target, root), 5);
  std::set<int> sids, tids;
  for (const SampleRecord& r : s.records) sids.insert(r.identity_id);
  for (const SampleRecord& r : t.records) tids.insert(r.identity_id);
  for (int id : tids) CHECK(sids.count(id) == 0);
  fs::remove_all(root);
}

TEST_CASE("manifest round-trips through disk and re-renders exactly") {
  fs::path root = fresh_dir("roundtrip");
  DatasetManifest m = generate_domain_dataset(small_config(Domain::source, root), 11);
  DatasetManifest loaded = load_manifest((fs::path(m.dir) / "manifest.json").string());

  REQUIRE(loaded.records.size() == m.records.size());
  CHECK(loaded.domain_id == m.domain_id);
  CHECK(loaded.master_seed == m.master_seed);
  CHECK(loaded.num_au == m.num_au);
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const SampleRecord& a = m.records[i];
    const SampleRecord& b = loaded.records[i];
    CHECK(a.file == b.file);
    CHECK(a.au.bits == b.au.bits);
    CHECK(a.identity_id == b.identity_id);
    CHECK(a.frame_seed == b.frame_seed);
    CHECK(a.identity.face_rx == b.identity.face_rx);
    CHECK(a.identity.skin_b == b.identity.skin_b);
    CHECK(a.style.background_hue == b.style.background_hue);
    CHECK(a.style.texture_kind == b.style.texture_kind);
  }

  // The stored parameters are a complete recipe: re-rendering any record
  // reproduces the PNG on disk byte for byte.
  for (std::size_t i : {std::size_t{0}, std::size_t{5}, std::size_t{11}}) {
    const SampleRecord& r = loaded.records[i];
    Tensor<float> img =
        render_face(r.au, r.identity, r.style, r.frame_seed, 32, 32);
    CHECK(encode_png(quantize(img)) ==
          [&] {
            auto v = file_bytes(loaded.image_path(i));
            return std::vector<std::uint8_t>(v.begin(), v.end());
          }());
  }

  Tensor<float> px = load_record_image(loaded, 0);
  REQUIRE(px.shape() == Shape{3, 32, 32});
  for (std::size_t i = 0; i < px.numel(); ++i) {
    CHECK(px.data()[i] >= 0.0f);
    CHECK(px.data()[i] <= 1.0f);
  }
  fs::remove_all(root);
}

TEST_CASE("train view withholds target labels and keeps source labels") {
  fs::path root = fresh_dir("view");
  DatasetManifest s = generate_domain_dataset(small_config(Domain::source, root), 3);
  DatasetManifest t = generate_domain_dataset(small_config(Domain::target, root), 3);

  TrainView vs = make_train_view(s);
  TrainView vt = make_train_view(t);
  REQUIRE(vs.records.size() == s.records.size());
  for (std::size_t i = 0; i < vs.records.size(); ++i) {
    REQUIRE(vs.records[i].au.has_value());
    CHECK(vs.records[i].au->bits == s.records[i].au.bits);
    CHECK(vs.records[i].identity_id == s.records[i].identity_id);
  }
  for (const TrainRecord& r : vt.records) CHECK(!r.au.has_value());
  for (std::size_t i = 0; i < vt.records.size(); ++i)
    CHECK(vt.records[i].identity_id == t.records[i].identity_id);

  Tensor<float> img = vt.load_image(0);
  CHECK(img.shape() == Shape{3, 32, 32});

  // Corrupting the stored target labels must not change what training sees.
  DatasetManifest poisoned = t;
  for (SampleRecord& r : poisoned.records)
    for (std::uint8_t& b : r.au.bits) b ^= 1;
  TrainView vp = make_train_view(poisoned);
  REQUIRE(vp.records.size() == vt.records.size());
  for (std::size_t i = 0; i < vp.records.size(); ++i) {
    CHECK(vp.records[i].file == vt.records[i].file);
    CHECK(!vp.records[i].au.has_value());
  }
  fs::remove_all(root);
}

TEST_CASE("generation rejects bad configs and unwritable paths") {
  fs::path root = fresh_dir("badcfg");
  DataGenConfig cfg = small_config(Domain::source, root);
  cfg.subjects = 0;
  CHECK_THROWS_AS(generate_domain_dataset(cfg, 1), std::invalid_argument);

  cfg = small_config(Domain::source, root);
  cfg.frames_per_subject = 0;
  CHECK_THROWS_AS(generate_domain_dataset(cfg, 1), std::invalid_argument);

  cfg = small_config(Domain::source, root);
  cfg.out_root.clear();
  CHECK_THROWS_AS(generate_domain_dataset(cfg, 1), std::invalid_argument);

  cfg = small_config(Domain::source, root);
  cfg.au_marginals = {0.5, 0.5};
  CHECK_THROWS_AS(generate_domain_dataset(cfg, 1), std::invalid_argument);

  std::ofstream(root / "blocker").put('x');
  cfg = small_config(Domain::source, (root / "blocker" / "nested"));
  CHECK_THROWS(generate_domain_dataset(cfg, 1));
  fs::remove_all(root);
}

TEST_CASE("manifest loader rejects unknown schema versions") {
  fs::path root = fresh_dir("schema");
  DatasetManifest m = generate_domain_dataset(small_config(Domain::source, root), 8);
  fs::path mp = fs::path(m.dir) / "manifest.json";
  std::string text(file_bytes(mp).data(), file_bytes(mp).size());
  auto pos = text.find("\"schema_version\": 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 19, "\"schema_version\": 9");
  std::ofstream(mp, std::ios::binary) << text;
  CHECK_THROWS_AS(load_manifest(mp.string()), std::runtime_error);
  fs::remove_all(root);
}
