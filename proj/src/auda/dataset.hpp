#pragma once
// Dataset generation and the two ways of reading it back.
//
// A DatasetManifest is the evaluation-side view: it lists every record with
// its AU bits and the full render parameters, so evaluators can re-render
// ground-truth swapped images.  Training code never touches it; it gets a
// TrainView instead, which strips AU labels from the unlabeled domain at
// load time.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "auda/toyface.hpp"

namespace auda {

inline constexpr int kManifestSchemaVersion = 1;

// Identity ids for the two domains come from disjoint blocks.
inline constexpr int kTargetIdentityOffset = 10000;

struct SampleRecord {
  std::string file;  // relative to the manifest's directory
  AULabelVector au;
  int identity_id = 0;
  std::uint64_t frame_seed = 0;
  IdentitySpec identity;
  DomainStyleSpec style;
};

struct DatasetManifest {
  Domain domain_id = Domain::source;
  std::uint64_t master_seed = 0;
  std::size_t num_au = 5;
  std::size_t height = 64, width = 64;
  std::vector<SampleRecord> records;
  std::string dir;  // directory holding manifest.json; set on load/generate

  void validate() const;
  std::string image_path(std::size_t index) const;
};

struct DataGenConfig {
  Domain domain = Domain::source;
  std::size_t subjects = 20;
  std::size_t frames_per_subject = 12;
  std::vector<double> au_marginals = {0.5, 0.5, 0.5, 0.5, 0.5};
  std::size_t height = 64, width = 64;
  std::string out_root;  // dataset root; files go to <out_root>/<domain>/

  void validate() const;
};

// Renders and writes every frame plus manifest.json; a pure function of
// (config, master_seed) down to the output bytes.
DatasetManifest generate_domain_dataset(const DataGenConfig& cfg,
                                        std::uint64_t master_seed);

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Loads one record's PNG back as a [3,H,W] float tensor in [0,1].
Tensor<float> load_record_image(const DatasetManifest& m, std::size_t index);

// What the optimizer is allowed to see.  Target-domain AU labels never
// survive the conversion, so a training run cannot depend on them.
struct TrainRecord {
  std::string file;
  std::uint64_t identity_id = 0;
  std::optional<AULabelVector> au;
};

struct TrainView {
  Domain domain = Domain::source;
  std::size_t num_au = 5;
  std::size_t height = 64, width = 64;
  std::vector<TrainRecord> records;
  std::string dir;

  Tensor<float> load_image(std::size_t index) const;
};

TrainView make_train_view(const DatasetManifest& m);

}  // namespace auda
