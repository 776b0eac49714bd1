#include "auda/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "auda/image.hpp"
#include "auda/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace auda {

namespace {

Domain domain_from_name(const std::string& name) {
  if (name == "source") return Domain::source;
  if (name == "target") return Domain::target;
  throw std::invalid_argument("unknown domain name: " + name);
}

ordered_json identity_to_json(const IdentitySpec& id) {
  return ordered_json{{"identity_id", id.identity_id},
                      {"face_rx", id.face_rx},
                      {"face_ry", id.face_ry},
                      {"eye_spacing", id.eye_spacing},
                      {"eye_height", id.eye_height},
                      {"eye_rx", id.eye_rx},
                      {"eye_aperture", id.eye_aperture},
                      {"brow_height", id.brow_height},
                      {"mouth_width", id.mouth_width},
                      {"mouth_height", id.mouth_height},
                      {"skin_r", id.skin_r},
                      {"skin_g", id.skin_g},
                      {"skin_b", id.skin_b}};
}

IdentitySpec identity_from_json(const ordered_json& j) {
  IdentitySpec id;
  id.identity_id = j.at("identity_id").get<int>();
  id.face_rx = j.at("face_rx").get<double>();
  id.face_ry = j.at("face_ry").get<double>();
  id.eye_spacing = j.at("eye_spacing").get<double>();
  id.eye_height = j.at("eye_height").get<double>();
  id.eye_rx = j.at("eye_rx").get<double>();
  id.eye_aperture = j.at("eye_aperture").get<double>();
  id.brow_height = j.at("brow_height").get<double>();
  id.mouth_width = j.at("mouth_width").get<double>();
  id.mouth_height = j.at("mouth_height").get<double>();
  id.skin_r = j.at("skin_r").get<double>();
  id.skin_g = j.at("skin_g").get<double>();
  id.skin_b = j.at("skin_b").get<double>();
  return id;
}

ordered_json style_to_json(const DomainStyleSpec& st) {
  return ordered_json{{"domain", domain_name(st.domain_id)},
                      {"background_hue", st.background_hue},
                      {"brightness", st.brightness},
                      {"contrast", st.contrast},
                      {"tint", st.tint},
                      {"texture_kind", texture_kind_name(st.texture_kind)},
                      {"texture_strength", st.texture_strength}};
}

DomainStyleSpec style_from_json(const ordered_json& j) {
  DomainStyleSpec st;
  st.domain_id = domain_from_name(j.at("domain").get<std::string>());
  st.background_hue = j.at("background_hue").get<double>();
  st.brightness = j.at("brightness").get<double>();
  st.contrast = j.at("contrast").get<double>();
  st.tint = j.at("tint").get<double>();
  st.texture_kind =
      texture_kind_from_name(j.at("texture_kind").get<std::string>());
  st.texture_strength = j.at("texture_strength").get<double>();
  return st;
}

}  // namespace

void DatasetManifest::validate() const {
  if (num_au < kMinAU || num_au > kMaxAU)
    throw std::invalid_argument("DatasetManifest: num_au out of range [3,10]");
  for (const SampleRecord& r : records) {
    if (r.au.size() != num_au)
      throw std::invalid_argument(
          "DatasetManifest: record AU size does not match num_au");
    r.au.validate();
    r.identity.validate();
    r.style.validate();
    if (r.style.domain_id != domain_id)
      throw std::invalid_argument(
          "DatasetManifest: record style domain does not match manifest "
          "domain");
    if (r.file.empty())
      throw std::invalid_argument("DatasetManifest: empty file path");
  }
}

std::string DatasetManifest::image_path(std::size_t index) const {
  return (fs::path(dir) / records.at(index).file).string();
}

void DataGenConfig::validate() const {
  if (subjects == 0 || frames_per_subject == 0)
    throw std::invalid_argument(
        "DataGenConfig: subject and frame counts must be positive");
  if (au_marginals.size() < kMinAU || au_marginals.size() > kMaxAU)
    throw std::invalid_argument(
        "DataGenConfig: AU marginal count out of range [3,10]");
  for (double p : au_marginals)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("DataGenConfig: AU marginal outside [0,1]");
  if (height < 16 || height > 512 || width < 16 || width > 512)
    throw std::invalid_argument("DataGenConfig: image size out of range");
  if (out_root.empty())
    throw std::invalid_argument("DataGenConfig: out_root not set");
}

DatasetManifest generate_domain_dataset(const DataGenConfig& cfg,
                                        std::uint64_t master_seed) {
  cfg.validate();
  const fs::path dir = fs::path(cfg.out_root) / domain_name(cfg.domain);
  fs::create_directories(dir / "images");

  const int id_base = cfg.domain == Domain::target ? kTargetIdentityOffset : 0;
  std::vector<IdentitySpec> identities(cfg.subjects);
  for (std::size_t s = 0; s < cfg.subjects; ++s) {
    const int id = id_base + static_cast<int>(s);
    identities[s] =
        sample_identity(id, derive_seed(master_seed, "identity", id));
  }

  // Every record's randomness comes only from (master_seed, domain, index),
  // so regeneration and any parallel split produce identical bytes.
  const std::uint64_t stream =
      derive_seed(master_seed, domain_name(cfg.domain));
  DatasetManifest m;
  m.domain_id = cfg.domain;
  m.master_seed = master_seed;
  m.num_au = cfg.au_marginals.size();
  m.height = cfg.height;
  m.width = cfg.width;
  m.dir = dir.string();
  m.records.resize(cfg.subjects * cfg.frames_per_subject);

  for (std::size_t s = 0; s < cfg.subjects; ++s)
    for (std::size_t f = 0; f < cfg.frames_per_subject; ++f) {
      const std::size_t r = s * cfg.frames_per_subject + f;
      SampleRecord& rec = m.records[r];
      char name[32];
      std::snprintf(name, sizeof(name), "images/%06zu.png", r);
      rec.file = name;
      rec.identity_id = identities[s].identity_id;
      rec.identity = identities[s];
      rec.au = sample_au(cfg.au_marginals, derive_seed(stream, "au", r));
      rec.style = sample_style(cfg.domain, derive_seed(stream, "style", r));
      rec.frame_seed = derive_seed(stream, "frame", r);

      Tensor<float> img = render_face(rec.au, rec.identity, rec.style,
                                      rec.frame_seed, cfg.height, cfg.width);
      save_png((dir / rec.file).string(), quantize(img));
    }

  m.validate();
  save_manifest(m, (dir / "manifest.json").string());
  return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  ordered_json j;
  j["schema_version"] = kManifestSchemaVersion;
  j["generator_version"] = kGeneratorVersion;
  j["domain"] = domain_name(m.domain_id);
  j["master_seed"] = m.master_seed;
  j["num_au"] = m.num_au;
  j["height"] = m.height;
  j["width"] = m.width;
  ordered_json recs = ordered_json::array();
  for (const SampleRecord& r : m.records) {
    ordered_json jr;
    jr["file"] = r.file;
    jr["au"] = r.au.bits;
    jr["identity_id"] = r.identity_id;
    jr["frame_seed"] = r.frame_seed;
    jr["identity"] = identity_to_json(r.identity);
    jr["style"] = style_to_json(r.style);
    recs.push_back(std::move(jr));
  }
  j["records"] = std::move(recs);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("manifest write failed: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  ordered_json j = ordered_json::parse(in);

  const int schema = j.at("schema_version").get<int>();
  if (schema != kManifestSchemaVersion)
    throw std::runtime_error("unsupported manifest schema version " +
                             std::to_string(schema));

  DatasetManifest m;
  m.domain_id = domain_from_name(j.at("domain").get<std::string>());
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.num_au = j.at("num_au").get<std::size_t>();
  m.height = j.at("height").get<std::size_t>();
  m.width = j.at("width").get<std::size_t>();
  m.dir = fs::path(path).parent_path().string();
  for (const ordered_json& jr : j.at("records")) {
    SampleRecord r;
    r.file = jr.at("file").get<std::string>();
    r.au.bits = jr.at("au").get<std::vector<std::uint8_t>>();
    r.identity_id = jr.at("identity_id").get<int>();
    r.frame_seed = jr.at("frame_seed").get<std::uint64_t>();
    r.identity = identity_from_json(jr.at("identity"));
    r.style = style_from_json(jr.at("style"));
    m.records.push_back(std::move(r));
  }
  m.validate();
  return m;
}

Tensor<float> load_record_image(const DatasetManifest& m, std::size_t index) {
  ImageU8 img = load_png(m.image_path(index));
  if (img.width != m.width || img.height != m.height)
    throw std::runtime_error("image size does not match manifest: " +
                             m.image_path(index));
  return dequantize(img);
}

Tensor<float> TrainView::load_image(std::size_t index) const {
  ImageU8 img = load_png((fs::path(dir) / records.at(index).file).string());
  if (img.width != width || img.height != height)
    throw std::runtime_error("image size does not match train view: " +
                             records.at(index).file);
  return dequantize(img);
}

TrainView make_train_view(const DatasetManifest& m) {
  m.validate();
  TrainView v;
  v.domain = m.domain_id;
  v.num_au = m.num_au;
  v.height = m.height;
  v.width = m.width;
  v.dir = m.dir;
  v.records.reserve(m.records.size());
  for (const SampleRecord& r : m.records) {
    TrainRecord t;
    t.file = r.file;
    t.identity_id = r.identity_id;
    if (m.domain_id == Domain::source) t.au = r.au;
    v.records.push_back(std::move(t));
  }
  return v;
}

}  // namespace auda
