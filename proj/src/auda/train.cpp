#include "auda/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "auda/checkpoint.hpp"
#include "json.hpp"

namespace auda {

namespace {

// First k slots end up uniformly drawn without replacement.
template <typename E>
void partial_shuffle(std::vector<E>& v, std::size_t k, Rng& rng) {
  for (std::size_t d = 0; d < k && d < v.size(); ++d) {
    const std::size_t pick =
        d + static_cast<std::size_t>(rng.uniform_index(v.size() - d));
    std::swap(v[d], v[pick]);
  }
}

double value_of(const Var<float>& v) {
  return static_cast<double>(v->value[0]);
}

void ensure_finite(const LossReport& r) {
  bool ok = true;
  for (double v : {r.l_ort, r.l_au_s, r.l_au_t, r.l_rep_s, r.l_rep_t,
                   r.l_rec_s, r.l_rec_t, r.l_adv_s, r.l_adv_t, r.l_icl,
                   r.l_fcl, r.l_deco, r.l_total})
    ok = ok && std::isfinite(v);
  if (ok) return;
  std::ostringstream os;
  os << "training diverged, non-finite loss; terms:"
     << " l_ort=" << r.l_ort << " l_au_s=" << r.l_au_s
     << " l_au_t=" << r.l_au_t << " l_rep_s=" << r.l_rep_s
     << " l_rep_t=" << r.l_rep_t << " l_rec_s=" << r.l_rec_s
     << " l_rec_t=" << r.l_rec_t << " l_adv_s=" << r.l_adv_s
     << " l_adv_t=" << r.l_adv_t << " l_icl=" << r.l_icl
     << " l_fcl=" << r.l_fcl << " l_deco=" << r.l_deco
     << " l_total=" << r.l_total;
  throw std::runtime_error(os.str());
}

}  // namespace

std::vector<std::array<std::size_t, 3>> sample_fcl_triplets(
    const std::vector<int>& identity_ids, std::size_t per_anchor, Rng& rng) {
  if (per_anchor == 0)
    throw std::invalid_argument("sample_fcl_triplets: per_anchor must be positive");
  const std::size_t n = identity_ids.size();
  std::vector<std::array<std::size_t, 3>> out;
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i) {
    pos.clear();
    neg.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      (identity_ids[j] == identity_ids[i] ? pos : neg).push_back(j);
    }
    if (pos.empty() || neg.empty()) continue;
    const std::size_t total = pos.size() * neg.size();
    if (per_anchor >= total) {
      for (std::size_t j : pos)
        for (std::size_t k : neg) out.push_back({i, j, k});
    } else {
      std::vector<std::size_t> flat(total);
      for (std::size_t f = 0; f < total; ++f) flat[f] = f;
      partial_shuffle(flat, per_anchor, rng);
      for (std::size_t d = 0; d < per_anchor; ++d)
        out.push_back({i, pos[flat[d] / neg.size()], neg[flat[d] % neg.size()]});
    }
  }
  if (out.empty())
    throw std::invalid_argument(
        "sample_fcl_triplets: no identity appears twice alongside a "
        "different identity");
  return out;
}

BatchSpec sample_batch_spec(const TrainView& source, const TrainView& target,
                            std::size_t n_pairs, Rng& rng) {
  if (n_pairs < 2)
    throw std::invalid_argument("sample_batch_spec: need at least 2 pairs");
  if (source.records.size() < n_pairs || target.records.size() < n_pairs)
    throw std::invalid_argument("sample_batch_spec: dataset smaller than batch");

  std::vector<std::uint64_t> id_order;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> rows_by_id;
  for (std::size_t i = 0; i < source.records.size(); ++i) {
    const std::uint64_t id = source.records[i].identity_id;
    auto [it, fresh] = rows_by_id.try_emplace(id);
    if (fresh) id_order.push_back(id);
    it->second.push_back(i);
  }
  std::vector<std::uint64_t> pairable;
  for (std::uint64_t id : id_order)
    if (rows_by_id[id].size() >= 2) pairable.push_back(id);

  const std::size_t need = (n_pairs + 3) / 4;
  if (pairable.size() < need)
    throw std::invalid_argument(
        "sample_batch_spec: not enough source identities with repeated "
        "frames for the identity-pair constraint");

  BatchSpec out;
  out.source_rows.reserve(n_pairs);
  std::vector<char> used(source.records.size(), 0);
  partial_shuffle(pairable, need, rng);
  for (std::size_t d = 0; d < need; ++d) {
    std::vector<std::size_t> rows = rows_by_id[pairable[d]];
    partial_shuffle(rows, 2, rng);
    for (std::size_t f = 0; f < 2; ++f) {
      out.source_rows.push_back(rows[f]);
      used[rows[f]] = 1;
    }
  }
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < source.records.size(); ++i)
    if (!used[i]) pool.push_back(i);
  const std::size_t fill = n_pairs - out.source_rows.size();
  partial_shuffle(pool, fill, rng);
  out.source_rows.insert(out.source_rows.end(), pool.begin(),
                         pool.begin() + static_cast<std::ptrdiff_t>(fill));

  std::vector<std::size_t> tpool(target.records.size());
  for (std::size_t i = 0; i < tpool.size(); ++i) tpool[i] = i;
  partial_shuffle(tpool, n_pairs, rng);
  out.target_rows.assign(tpool.begin(),
                         tpool.begin() + static_cast<std::ptrdiff_t>(n_pairs));
  return out;
}

Trainer::Trainer(const TrainConfig& cfg, const TrainView& source,
                 const TrainView& target)
    : cfg_(cfg), source_view_(source), target_view_(target) {
  cfg_.validate();
  if (source.domain != Domain::source || target.domain != Domain::target)
    throw std::invalid_argument("Trainer: views must be (source, target)");
  if (source.num_au != cfg_.num_au || target.num_au != cfg_.num_au)
    throw std::invalid_argument("Trainer: label width does not match config");
  const ModelConfig mc = cfg_.model();
  if (source.height != mc.image_size || source.width != mc.image_size ||
      target.height != mc.image_size || target.width != mc.image_size)
    throw std::invalid_argument("Trainer: image size does not match model");

  source_images_.reserve(source.records.size());
  for (std::size_t i = 0; i < source.records.size(); ++i) {
    const TrainRecord& r = source.records[i];
    if (!r.au)
      throw std::invalid_argument("Trainer: source records must carry labels");
    source_images_.push_back(source.load_image(i));
    source_labels_.push_back(*r.au);
    source_identities_.push_back(static_cast<int>(r.identity_id));
  }
  target_images_.reserve(target.records.size());
  for (std::size_t i = 0; i < target.records.size(); ++i)
    target_images_.push_back(target.load_image(i));

  steps_per_epoch_ =
      std::min(source_images_.size(), target_images_.size()) / cfg_.batch_pairs;
  if (steps_per_epoch_ == 0)
    throw std::invalid_argument("Trainer: dataset smaller than one batch");

  std::unordered_map<int, std::size_t> frames_per_id;
  for (int id : source_identities_) ++frames_per_id[id];
  std::size_t pairable = 0;
  for (const auto& [id, count] : frames_per_id)
    if (count >= 2) ++pairable;
  if (pairable < (cfg_.batch_pairs + 3) / 4)
    throw std::invalid_argument(
        "Trainer: dataset cannot satisfy the identity-pair constraint");

  model_ = Model<float>::init(mc, derive_seed(cfg_.seed, "model-init"));
  opt_gen_ = Adam<float>(model_.gen_params, cfg_.learning_rate, cfg_.beta1,
                         cfg_.beta2);
  opt_disc_ = Adam<float>(model_.disc_params, cfg_.learning_rate, cfg_.beta1,
                          cfg_.beta2);
}

BatchSpec Trainer::batch_for_step(std::uint64_t step) const {
  Rng rng(derive_seed(cfg_.seed, "batch", step));
  return sample_batch_spec(source_view_, target_view_, cfg_.batch_pairs, rng);
}

Trainer::BatchTensors Trainer::gather(const BatchSpec& batch) const {
  const std::size_t n = cfg_.batch_pairs;
  if (batch.source_rows.size() != n || batch.target_rows.size() != n)
    throw std::invalid_argument("Trainer: batch does not match configured size");
  const std::size_t side = cfg_.model().image_size;
  const std::size_t chunk = 3 * side * side;

  Tensor<float> src({n, 3, side, side}), tgt({n, 3, side, side});
  Tensor<float> labels({n, cfg_.num_au});
  BatchTensors bt;
  bt.identities.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t row = batch.source_rows[r];
    if (row >= source_images_.size())
      throw std::invalid_argument("Trainer: source row out of range");
    std::copy_n(source_images_[row].data(), chunk, src.data() + r * chunk);
    const auto& bits = source_labels_[row].bits;
    for (std::size_t c = 0; c < cfg_.num_au; ++c)
      labels[r * cfg_.num_au + c] = static_cast<float>(bits[c]);
    bt.identities.push_back(source_identities_[row]);
  }
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t row = batch.target_rows[r];
    if (row >= target_images_.size())
      throw std::invalid_argument("Trainer: target row out of range");
    std::copy_n(target_images_[row].data(), chunk, tgt.data() + r * chunk);
  }
  bt.src = make_var(std::move(src));
  bt.tgt = make_var(std::move(tgt));
  bt.labels = std::move(labels);
  return bt;
}

void Trainer::update_discriminator(const SynthesisBundle<float>& bundle) {
  const std::size_t n = bundle.pairs;
  auto scores_s = model_.discriminate(
      concat_rows(bundle.src, detach(bundle.swap_s)), Domain::source);
  auto scores_t = model_.discriminate(
      concat_rows(bundle.tgt, detach(bundle.swap_t)), Domain::target);
  auto value_s =
      loss_adversarial(slice_rows(scores_s, 0, n),
                       slice_rows(scores_s, n, 2 * n), AdvRole::discriminator);
  auto value_t =
      loss_adversarial(slice_rows(scores_t, 0, n),
                       slice_rows(scores_t, n, 2 * n), AdvRole::discriminator);
  // The discriminator value is maximized; descend its negation.
  auto objective = scalar_mul(add(value_s, value_t), -1.0f);
  model_.disc_params.zero_grad();
  backward(objective);
  opt_disc_.step(model_.disc_params);
}

LossReport Trainer::generator_losses(const SynthesisBundle<float>& bundle,
                                     const BatchTensors& bt,
                                     std::uint64_t step_index,
                                     Var<float>* total_out) const {
  const LossWeights w = cfg_.weights();
  auto l_au_s = loss_au_bce(model_.predict_au(bundle.au_s), bt.labels);
  auto l_au_t = loss_au_bce(model_.predict_au(bundle.au_swap_t), bt.labels);
  auto l_ort =
      loss_orthogonality(bundle.au_s, bundle.dm_s, bundle.au_t, bundle.dm_t);
  auto l_rep_s = loss_representation_alignment(bundle.au_t, bundle.au_swap_s,
                                               bundle.dm_s, bundle.dm_swap_s);
  auto l_rep_t = loss_representation_alignment(bundle.au_s, bundle.au_swap_t,
                                               bundle.dm_t, bundle.dm_swap_t);
  auto l_rec_s = loss_reconstruction(bundle.src, bundle.cyc_s);
  auto l_rec_t = loss_reconstruction(bundle.tgt, bundle.cyc_t);

  auto fake_s = model_.discriminate(bundle.swap_s, Domain::source);
  auto fake_t = model_.discriminate(bundle.swap_t, Domain::target);
  auto l_adv_s = loss_adversarial(fake_s, fake_s, AdvRole::generator);
  auto l_adv_t = loss_adversarial(fake_t, fake_t, AdvRole::generator);

  auto l_deco = loss_decoupling(l_au_s, l_au_t, l_rep_s, l_rep_t, l_rec_s,
                                l_rec_t, l_adv_s, l_adv_t, l_ort, w);

  Var<float> l_icl, l_fcl;
  if (cfg_.disable_icl) {
    l_icl = make_scalar(0.0f);
  } else {
    auto cb = assemble_icl_batch(model_, bundle);
    l_icl = loss_icl(cb.embeddings, cb.positive_pairs,
                     static_cast<float>(w.tau));
  }
  if (cfg_.disable_fcl) {
    l_fcl = make_scalar(0.0f);
  } else {
    Rng rng(derive_seed(cfg_.seed, "triplets", step_index));
    auto triplets =
        sample_fcl_triplets(bt.identities, cfg_.fcl_per_anchor, rng);
    l_fcl = loss_fcl(bundle.dm_s, bt.identities, triplets,
                     static_cast<float>(w.alpha));
  }
  auto total =
      loss_total(l_deco, l_icl, l_fcl, static_cast<float>(w.lambda));

  LossReport rep;
  rep.weights = w;
  rep.l_ort = value_of(l_ort);
  rep.l_au_s = value_of(l_au_s);
  rep.l_au_t = value_of(l_au_t);
  rep.l_rep_s = value_of(l_rep_s);
  rep.l_rep_t = value_of(l_rep_t);
  rep.l_rec_s = value_of(l_rec_s);
  rep.l_rec_t = value_of(l_rec_t);
  rep.l_adv_s = value_of(l_adv_s);
  rep.l_adv_t = value_of(l_adv_t);
  rep.l_icl = value_of(l_icl);
  rep.l_fcl = value_of(l_fcl);
  rep.l_deco = value_of(l_deco);
  rep.l_total = value_of(total);
  ensure_finite(rep);
  *total_out = total;
  return rep;
}

LossReport Trainer::update_generator(const SynthesisBundle<float>& bundle,
                                     const BatchTensors& bt) {
  Var<float> total;
  LossReport rep = generator_losses(bundle, bt, step_, &total);
  model_.gen_params.zero_grad();
  backward(total);
  opt_gen_.step(model_.gen_params);
  return rep;
}

LossReport Trainer::evaluate_batch(const BatchSpec& batch,
                                   std::uint64_t step_index) const {
  BatchTensors bt = gather(batch);
  if (cfg_.source_only) {
    auto au = model_.encode_au(bt.src);
    auto l_au_s = loss_au_bce(model_.predict_au(au), bt.labels);
    LossReport rep;
    rep.weights = cfg_.weights();
    rep.l_au_s = value_of(l_au_s);
    rep.l_deco = rep.l_au_s;
    rep.l_total = rep.l_deco;
    ensure_finite(rep);
    return rep;
  }
  auto bundle = forward_synthesis(model_, bt.src, bt.tgt);
  Var<float> total;
  return generator_losses(bundle, bt, step_index, &total);
}

LossReport Trainer::source_only_step(const BatchTensors& bt) {
  auto au = model_.encode_au(bt.src);
  auto l_au_s = loss_au_bce(model_.predict_au(au), bt.labels);
  model_.gen_params.zero_grad();
  backward(l_au_s);
  opt_gen_.step(model_.gen_params);

  LossReport rep;
  rep.weights = cfg_.weights();
  rep.l_au_s = value_of(l_au_s);
  rep.l_deco = rep.l_au_s;
  rep.l_total = rep.l_deco;
  ensure_finite(rep);
  return rep;
}

void Trainer::step_discriminator(const BatchSpec& batch) {
  if (cfg_.source_only)
    throw std::logic_error("Trainer: no discriminator in source-only mode");
  BatchTensors bt = gather(batch);
  SynthesisBundle<float> bundle;
  detail::synthesis_stage1(model_, bt.src, bt.tgt, bundle);
  update_discriminator(bundle);
}

LossReport Trainer::step_generator(const BatchSpec& batch) {
  BatchTensors bt = gather(batch);
  if (cfg_.source_only) return source_only_step(bt);
  auto bundle = forward_synthesis(model_, bt.src, bt.tgt);
  return update_generator(bundle, bt);
}

LossReport Trainer::train_step(const BatchSpec& batch) {
  BatchTensors bt = gather(batch);
  LossReport rep;
  if (cfg_.source_only) {
    rep = source_only_step(bt);
  } else {
    auto bundle = forward_synthesis(model_, bt.src, bt.tgt);
    update_discriminator(bundle);
    rep = update_generator(bundle, bt);
  }
  ++step_;
  return rep;
}

LossReport Trainer::run_step() { return train_step(batch_for_step(step_)); }

void Trainer::save_state(const std::string& path) const {
  TrainCheckpoint ck;
  ck.model = model_;
  ck.opt_gen = opt_gen_;
  ck.opt_disc = opt_disc_;
  ck.step = step_;
  ck.epoch = epoch_;
  save_checkpoint(path, ck);
}

void Trainer::resume(const std::string& checkpoint_path) {
  TrainCheckpoint ck = load_checkpoint(checkpoint_path);
  const ModelConfig want = cfg_.model();
  if (ck.model.cfg.num_au != want.num_au || ck.model.cfg.d_au != want.d_au ||
      ck.model.cfg.d_dm != want.d_dm || ck.model.cfg.d_proj != want.d_proj ||
      ck.model.cfg.image_size != want.image_size)
    throw std::runtime_error(
        "resume: checkpoint model does not match the configured model");
  model_ = std::move(ck.model);
  opt_gen_ = std::move(ck.opt_gen);
  opt_disc_ = std::move(ck.opt_disc);
  step_ = ck.step;
  epoch_ = ck.epoch;
}

FitResult Trainer::fit(const std::string& run_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(run_dir);
  const fs::path metrics_path = fs::path(run_dir) / "metrics.jsonl";
  std::ofstream metrics(metrics_path, std::ios::binary | std::ios::app);
  if (!metrics)
    throw std::runtime_error("cannot write metrics: " + metrics_path.string());

  for (std::uint64_t e = epoch_; e < cfg_.epochs; ++e) {
    for (std::size_t k = 0; k < steps_per_epoch_; ++k) {
      const std::uint64_t idx = step_;
      const LossReport rep = run_step();
      nlohmann::ordered_json row;
      row["step"] = idx;
      row["epoch"] = e;
      row["l_ort"] = rep.l_ort;
      row["l_au_s"] = rep.l_au_s;
      row["l_au_t"] = rep.l_au_t;
      row["l_rep_s"] = rep.l_rep_s;
      row["l_rep_t"] = rep.l_rep_t;
      row["l_rec_s"] = rep.l_rec_s;
      row["l_rec_t"] = rep.l_rec_t;
      row["l_adv_s"] = rep.l_adv_s;
      row["l_adv_t"] = rep.l_adv_t;
      row["l_icl"] = rep.l_icl;
      row["l_fcl"] = rep.l_fcl;
      row["l_deco"] = rep.l_deco;
      row["l_total"] = rep.l_total;
      metrics << row.dump() << "\n";
    }
    metrics.flush();
    epoch_ = e + 1;
    if (epoch_ % cfg_.checkpoint_every_epochs == 0 && epoch_ < cfg_.epochs) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint-epoch-%04llu.ckpt",
                    static_cast<unsigned long long>(epoch_));
      save_state((fs::path(run_dir) / name).string());
    }
  }

  FitResult res;
  res.final_checkpoint = (fs::path(run_dir) / "final.ckpt").string();
  save_state(res.final_checkpoint);
  res.metrics_path = metrics_path.string();
  res.steps = step_;
  res.epochs = epoch_;
  return res;
}

}  // namespace auda
