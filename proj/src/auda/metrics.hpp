#pragma once
// Evaluation over frozen checkpoints: per-AU F1, Fréchet distance between
// feature distributions, oracle-grounded swap fidelity, AU interpolation,
// and feature export.  Nothing here mutates model parameters.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "auda/dataset.hpp"
#include "auda/model.hpp"

namespace auda {

struct F1Report {
  double threshold = 0.5;
  std::vector<double> precision, recall, f1;  // one entry per AU
  double ave = 0;                             // unweighted mean of f1
};

// Binarizes probabilities at the threshold and scores every AU column
// against the binary labels.  F1 = 2RP/(R+P); any empty denominator
// (no predicted positives, no true positives, R+P = 0) scores 0.
F1Report f1_scores(const Tensor<float>& probabilities,
                   const Tensor<float>& labels, double threshold = 0.5);

struct FrechetStats {
  std::vector<double> mu;   // [dim]
  std::vector<double> cov;  // [dim*dim], row major
  std::size_t dim = 0;
  std::size_t count = 0;
};

// Sample mean and unbiased covariance of an [n, d] feature matrix; n >= 2.
FrechetStats compute_frechet_stats(const Tensor<float>& features);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}).  A 1e-6 ridge is
// added to both covariances first; the matrix square root is taken by
// eigendecomposition of the symmetrized product sqrt(Sa) Sb sqrt(Sa).
// A covariance that is still not PSD after the ridge is rejected with the
// offending eigenvalue in the message.
double frechet_distance(const FrechetStats& a, const FrechetStats& b);

struct SwapFidelityReport {
  double l1_oracle = 0;  // mean per-pixel L1 of I_{s->t} to the oracle swap
  double l1_source = 0;  // same, against the source input image
  double win_rate = 0;   // fraction of pairs with l1_oracle < l1_source
  std::size_t pairs = 0;
};

// For each (source row, target row) pair, synthesizes the source-styled
// swap carrying the target's AUs and measures it against the re-rendered
// oracle swap and against the source input.  The oracle render is pushed
// through the same 8-bit quantization as the stored dataset images, so a
// pair with identical AU vectors makes the two references byte-equal.
SwapFidelityReport swap_fidelity(
    const Model<float>& model, const DatasetManifest& source,
    const DatasetManifest& target,
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

struct FidReport {
  double fid_source = 0;  // real source images vs source-styled swaps
  double fid_target = 0;  // real target images vs target-styled swaps
  double mean = 0;
  std::size_t samples = 0;
};

// Draws `samples` cross-domain pairs with replacement, synthesizes both
// swap directions, and scores each direction's images against equally many
// draws of real images from the matching domain.  Features come from
// feature_model's AU encoder so every evaluated model is measured in one
// frozen space; pass a reference checkpoint's model there, not eval_model.
FidReport synthesis_fid(const Model<float>& eval_model,
                        const Model<float>& feature_model,
                        const DatasetManifest& source,
                        const DatasetManifest& target, std::size_t samples,
                        std::uint64_t seed);

// Decodes G([(1-t) au_a + t au_b, dm_target]) for t on the uniform grid
// over [0,1] including both endpoints; steps >= 2.  Images are [3,H,W].
// Each step decodes as its own batch of one so the endpoints are bit-equal
// to plain single-image decodes.
std::vector<Tensor<float>> interpolate_au(const Model<float>& model,
                                          const Tensor<float>& target_image,
                                          const Tensor<float>& source_a,
                                          const Tensor<float>& source_b,
                                          std::size_t steps);

enum class FeatureKind { au, dm };

FeatureKind feature_kind_from_name(const std::string& name);

// Writes one CSV row per manifest record: domain, identity, the AU bits,
// then the feature vector from the chosen encoder.  Byte-deterministic for
// a fixed model and manifest.
void export_features(const Model<float>& model, const DatasetManifest& m,
                     FeatureKind which, const std::string& out_path);

}  // namespace auda
