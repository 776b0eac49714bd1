#pragma once
// Three-stage synthesis forward pass, contrastive batch assembly, triplet
// sampling, and the alternating adversarial training loop.
//
// The synthesis and batch-assembly pieces are templated so gradient checks
// can run them in double precision; the Trainer itself is float.
//
// Data is preloaded up front and batches are a pure function of
// (seed, step), so a resumed run replays the exact remaining schedule.
// Bit-exact reproducibility holds on a fixed platform and BLAS build.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "auda/adam.hpp"
#include "auda/config.hpp"
#include "auda/dataset.hpp"
#include "auda/losses.hpp"
#include "auda/model.hpp"
#include "auda/rng.hpp"

namespace auda {

// Images and features produced for one batch of N source/target pairs.
// Naming: swap_s is the source-styled image carrying the target's AUs,
// cyc_s reconstructs the source input from re-encoded swap features, and
// self_s reconstructs swap_s from its own features.  _t mirrors these.
template <typename T>
struct SynthesisBundle {
  Var<T> src, tgt;
  Var<T> swap_s, swap_t;
  Var<T> cyc_s, cyc_t;
  Var<T> self_s, self_t;

  Var<T> au_s, au_t;            // AU features of the inputs
  Var<T> dm_s, dm_t;            // style features of the inputs
  Var<T> au_swap_s, au_swap_t;  // AU features of the swapped images
  Var<T> dm_swap_s, dm_swap_t;  // style features of the swapped images

  std::size_t pairs = 0;  // N
};

namespace detail {

// Stage 1: encode both inputs, swap AU content across domains.
template <typename T>
void synthesis_stage1(const Model<T>& model, const Var<T>& src,
                      const Var<T>& tgt, SynthesisBundle<T>& b) {
  const std::size_t n = src->value.shape().at(0);
  if (tgt->value.shape().at(0) != n)
    throw std::invalid_argument("forward_synthesis: batch size mismatch");
  b.src = src;
  b.tgt = tgt;
  b.pairs = n;

  auto au_both = model.encode_au(concat_rows(src, tgt));
  b.au_s = slice_rows(au_both, 0, n);
  b.au_t = slice_rows(au_both, n, 2 * n);
  b.dm_s = model.encode_domain(src, Domain::source);
  b.dm_t = model.encode_domain(tgt, Domain::target);

  auto swapped = model.decode(concat_rows(b.au_t, b.au_s),
                              concat_rows(b.dm_s, b.dm_t));
  b.swap_s = slice_rows(swapped, 0, n);
  b.swap_t = slice_rows(swapped, n, 2 * n);
}

}  // namespace detail

// Runs all three stages: swap synthesis, re-encoding of the swapped
// images, and the cycle plus self reconstructions.  Gradients flow back
// through every stage; nothing here is detached.
template <typename T>
SynthesisBundle<T> forward_synthesis(const Model<T>& model, const Var<T>& src,
                                     const Var<T>& tgt) {
  SynthesisBundle<T> b;
  detail::synthesis_stage1(model, src, tgt, b);
  const std::size_t n = b.pairs;

  auto au_swapped = model.encode_au(concat_rows(b.swap_s, b.swap_t));
  b.au_swap_s = slice_rows(au_swapped, 0, n);
  b.au_swap_t = slice_rows(au_swapped, n, 2 * n);
  b.dm_swap_s = model.encode_domain(b.swap_s, Domain::source);
  b.dm_swap_t = model.encode_domain(b.swap_t, Domain::target);

  // Rows: cyc_s, cyc_t, self_s, self_t.  cyc_s recovers the source input
  // (AUs came back via swap_t, style via swap_s); self images reconstruct
  // the swapped images from their own features.
  auto au_in = concat_rows(concat_rows(b.au_swap_t, b.au_swap_s),
                           concat_rows(b.au_swap_s, b.au_swap_t));
  auto dm_in = concat_rows(concat_rows(b.dm_swap_s, b.dm_swap_t),
                           concat_rows(b.dm_swap_s, b.dm_swap_t));
  auto recon = model.decode(au_in, dm_in);
  b.cyc_s = slice_rows(recon, 0, n);
  b.cyc_t = slice_rows(recon, n, 2 * n);
  b.self_s = slice_rows(recon, 2 * n, 3 * n);
  b.self_t = slice_rows(recon, 3 * n, 4 * n);
  return b;
}

template <typename T>
struct ContrastiveBatch {
  Var<T> embeddings;  // [8N, d_proj], unit rows
  std::vector<std::pair<std::size_t, std::size_t>> positive_pairs;
};

// Projects all 8N images of the bundle into the contrastive space.  Row
// blocks of N: src, tgt, swap_s, swap_t, cyc_s, cyc_t, self_s, self_t.
// Each image pairs with its own reconstruction: block b with block b+4.
template <typename T>
ContrastiveBatch<T> assemble_icl_batch(const Model<T>& model,
                                       const SynthesisBundle<T>& bundle) {
  const std::size_t n = bundle.pairs;
  for (const Var<T>* v :
       {&bundle.src, &bundle.tgt, &bundle.swap_s, &bundle.swap_t,
        &bundle.cyc_s, &bundle.cyc_t, &bundle.self_s, &bundle.self_t,
        &bundle.au_s, &bundle.dm_s})
    if (!*v) throw std::invalid_argument("assemble_icl_batch: incomplete bundle");

  // The four reconstructions still need features; encode them in batched
  // calls, styles through the private encoder of the domain they render.
  auto au_recon = model.encode_au(
      concat_rows(concat_rows(bundle.cyc_s, bundle.cyc_t),
                  concat_rows(bundle.self_s, bundle.self_t)));
  auto dm_recon_s = model.encode_domain(concat_rows(bundle.cyc_s, bundle.self_s),
                                        Domain::source);
  auto dm_recon_t = model.encode_domain(concat_rows(bundle.cyc_t, bundle.self_t),
                                        Domain::target);

  auto au_all = concat_rows(
      concat_rows(concat_rows(bundle.au_s, bundle.au_t),
                  concat_rows(bundle.au_swap_s, bundle.au_swap_t)),
      au_recon);
  auto dm_all = concat_rows(
      concat_rows(concat_rows(bundle.dm_s, bundle.dm_t),
                  concat_rows(bundle.dm_swap_s, bundle.dm_swap_t)),
      concat_rows(
          concat_rows(slice_rows(dm_recon_s, 0, n), slice_rows(dm_recon_t, 0, n)),
          concat_rows(slice_rows(dm_recon_s, n, 2 * n),
                      slice_rows(dm_recon_t, n, 2 * n))));

  ContrastiveBatch<T> out;
  out.embeddings = model.project(au_all, dm_all);
  out.positive_pairs.reserve(4 * n);
  for (std::size_t block = 0; block < 4; ++block)
    for (std::size_t i = 0; i < n; ++i)
      out.positive_pairs.emplace_back(block * n + i, (block + 4) * n + i);
  return out;
}

// Samples same-identity/different-identity triplets (anchor, positive,
// negative) over one batch of identity labels.  Every row with a
// same-identity partner anchors up to per_anchor triplets; candidates are
// enumerated in index order and thinned uniformly, so the result is a
// deterministic function of the RNG state.  An empty result throws: the
// batch sampler is supposed to guarantee pairable identities.
std::vector<std::array<std::size_t, 3>> sample_fcl_triplets(
    const std::vector<int>& identity_ids, std::size_t per_anchor, Rng& rng);

// Row indices into the source/target views for one step.  At least
// ceil(N/4) source identities appear at least twice so the triplet set is
// never empty.
struct BatchSpec {
  std::vector<std::size_t> source_rows, target_rows;
};

BatchSpec sample_batch_spec(const TrainView& source, const TrainView& target,
                            std::size_t n_pairs, Rng& rng);

struct FitResult {
  std::string final_checkpoint;
  std::string metrics_path;
  std::uint64_t steps = 0;
  std::uint64_t epochs = 0;
};

// Alternating adversarial training: one discriminator step on detached
// fakes, then one generator/encoder step on the full objective, per batch.
// The public per-role steps exist so tests can verify the roles never
// touch each other's parameters.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const TrainView& source,
          const TrainView& target);

  BatchSpec batch_for_step(std::uint64_t step) const;

  void step_discriminator(const BatchSpec& batch);
  LossReport step_generator(const BatchSpec& batch);

  // Discriminator then generator on one batch; advances the step counter.
  LossReport train_step(const BatchSpec& batch);

  // train_step on the schedule's batch for the current step.
  LossReport run_step();

  // Loss values on one batch with the current parameters; no update.
  // step_index seeds the triplet draw the way train_step at that step
  // would, so before/after comparisons see the same triplet set.
  LossReport evaluate_batch(const BatchSpec& batch,
                            std::uint64_t step_index) const;

  FitResult fit(const std::string& run_dir);
  void resume(const std::string& checkpoint_path);

  std::size_t steps_per_epoch() const { return steps_per_epoch_; }
  std::uint64_t completed_steps() const { return step_; }
  std::uint64_t completed_epochs() const { return epoch_; }
  Model<float>& model() { return model_; }
  const Model<float>& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  struct BatchTensors {
    Var<float> src, tgt;
    Tensor<float> labels;  // [N, K] source AU targets
    std::vector<int> identities;
  };
  BatchTensors gather(const BatchSpec& batch) const;
  void update_discriminator(const SynthesisBundle<float>& bundle);
  LossReport generator_losses(const SynthesisBundle<float>& bundle,
                              const BatchTensors& bt,
                              std::uint64_t step_index,
                              Var<float>* total) const;
  LossReport update_generator(const SynthesisBundle<float>& bundle,
                              const BatchTensors& bt);
  LossReport source_only_step(const BatchTensors& bt);
  void save_state(const std::string& path) const;

  TrainConfig cfg_;
  TrainView source_view_, target_view_;
  Model<float> model_;
  Adam<float> opt_gen_, opt_disc_;
  std::vector<Tensor<float>> source_images_, target_images_;
  std::vector<AULabelVector> source_labels_;
  std::vector<int> source_identities_;
  std::size_t steps_per_epoch_ = 0;
  std::uint64_t step_ = 0, epoch_ = 0;
};

}  // namespace auda
