#pragma once
// The nine training objectives and their weighted combinations.  Each
// function builds a differentiable scalar from feature or image Vars; the
// numeric recipes live in ops_losses.hpp.  LossReport captures the values of
// one generator step for logging.
//
// Conventions fixed here:
//  * orthogonality uses the signed cosine, not its absolute value;
//  * the AU classification term is standard multi-label BCE (mean over the
//    batch of the per-label sum);
//  * the adversarial discriminator value is the quantity to MAXIMIZE
//    (training minimizes its negation), while the generator term is the
//    non-saturating -log D(fake), already in minimization form;
//  * patch score maps contribute log per patch, then average;
//  * probabilities are clamped to [1e-7, 1-1e-7] inside every log.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "auda/ops_losses.hpp"

namespace auda {

struct LossWeights {
  double gamma1 = 1.0;   // representation alignment
  double gamma2 = 5.0;   // reconstruction
  double gamma3 = 0.1;   // adversarial
  double gamma4 = 1.0;   // orthogonality
  double lambda = 0.1;   // contrastive block
  double tau = 0.07;     // InfoNCE temperature
  double alpha = 0.1;    // triplet margin

  void validate() const {
    for (double v : {gamma1, gamma2, gamma3, gamma4, lambda})
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("LossWeights: weights must be finite, >= 0");
    if (!(tau > 0.0))
      throw std::invalid_argument("LossWeights: tau must be > 0");
    if (!(alpha >= 0.0))
      throw std::invalid_argument("LossWeights: alpha must be >= 0");
  }
};

struct LossReport {
  double l_ort = 0, l_au_s = 0, l_au_t = 0;
  double l_rep_s = 0, l_rep_t = 0;
  double l_rec_s = 0, l_rec_t = 0;
  double l_adv_s = 0, l_adv_t = 0;
  double l_icl = 0, l_fcl = 0;
  double l_deco = 0, l_total = 0;
  LossWeights weights;

  void validate() const {
    for (double v : {l_ort, l_au_s, l_au_t, l_rep_s, l_rep_t, l_rec_s,
                     l_rec_t, l_adv_s, l_adv_t, l_icl, l_fcl, l_deco,
                     l_total})
      if (!std::isfinite(v))
        throw std::runtime_error("LossReport: non-finite loss term");
    auto nonneg = [](double v, const char* name) {
      if (v < 0.0)
        throw std::runtime_error(std::string("LossReport: ") + name +
                                 " must be >= 0");
    };
    nonneg(l_au_s, "l_au_s");
    nonneg(l_au_t, "l_au_t");
    nonneg(l_rep_s, "l_rep_s");
    nonneg(l_rep_t, "l_rep_t");
    nonneg(l_rec_s, "l_rec_s");
    nonneg(l_rec_t, "l_rec_t");
    nonneg(l_icl, "l_icl");
    nonneg(l_fcl, "l_fcl");
    if (l_ort < -2.0 || l_ort > 2.0)
      throw std::runtime_error("LossReport: l_ort outside [-2,2]");
    double recombined = l_deco + weights.lambda * (l_icl + l_fcl);
    if (std::abs(recombined - l_total) > 1e-6 * std::max(1.0, std::abs(l_total)))
      throw std::runtime_error("LossReport: l_total does not decompose");
  }
};

// Mean cosine between AU and style features, summed over the two domains.
// Minimizing pushes the branches toward orthogonality.
template <typename T>
Var<T> loss_orthogonality(const Var<T>& au_s, const Var<T>& dm_s,
                          const Var<T>& au_t, const Var<T>& dm_t) {
  return add(mean_all(row_cosine(au_s, dm_s)),
             mean_all(row_cosine(au_t, dm_t)));
}

// Multi-label BCE of predicted probabilities against 0/1 labels.
template <typename T>
Var<T> loss_au_bce(const Var<T>& probs, const Tensor<T>& labels) {
  return bce_sum_mean(probs, labels, T(1e-7));
}

// One domain's alignment term: the synthesized image's AU features must
// match the image that donated AU content, and its style features (through
// that domain's private encoder) must match the image that donated style.
template <typename T>
Var<T> loss_representation_alignment(const Var<T>& au_ref,
                                     const Var<T>& au_gen,
                                     const Var<T>& dm_ref,
                                     const Var<T>& dm_gen) {
  return add(mean_row_sqdist(au_ref, au_gen), mean_row_sqdist(dm_ref, dm_gen));
}

// Mean absolute pixel error between an input image batch and its cycle
// reconstruction.
template <typename T>
Var<T> loss_reconstruction(const Var<T>& images, const Var<T>& recon) {
  return l1_mean(images, recon);
}

enum class AdvRole { discriminator, generator };

namespace detail {
template <typename T>
void check_scores(const Var<T>& s, const char* who) {
  for (std::size_t i = 0; i < s->value.numel(); ++i)
    if (!(s->value[i] >= T(0) && s->value[i] <= T(1)))
      throw std::invalid_argument(std::string(who) +
                                  ": scores must lie in [0,1]");
}
}  // namespace detail

// Vanilla GAN log loss on patch score maps.  Discriminator role returns
// E[log D(real)] + E[log(1 - D(fake))] (maximize); generator role returns
// -E[log D(fake)] (minimize).
template <typename T>
Var<T> loss_adversarial(const Var<T>& real_scores, const Var<T>& fake_scores,
                        AdvRole role) {
  const T eps = T(1e-7);
  detail::check_scores(fake_scores, "loss_adversarial");
  if (role == AdvRole::generator)
    return scalar_mul(mean_all(log_clamped(fake_scores, eps)), T(-1));
  detail::check_scores(real_scores, "loss_adversarial");
  return add(mean_all(log_clamped(real_scores, eps)),
             mean_all(log_clamped(rsub_scalar(T(1), fake_scores), eps)));
}

// Weighted sum of the purification terms.
template <typename T>
Var<T> loss_decoupling(const Var<T>& l_au_s, const Var<T>& l_au_t,
                       const Var<T>& l_rep_s, const Var<T>& l_rep_t,
                       const Var<T>& l_rec_s, const Var<T>& l_rec_t,
                       const Var<T>& l_adv_s, const Var<T>& l_adv_t,
                       const Var<T>& l_ort, const LossWeights& w) {
  auto out = add(l_au_s, l_au_t);
  out = add(out, scalar_mul(add(l_rep_s, l_rep_t), T(w.gamma1)));
  out = add(out, scalar_mul(add(l_rec_s, l_rec_t), T(w.gamma2)));
  out = add(out, scalar_mul(add(l_adv_s, l_adv_t), T(w.gamma3)));
  out = add(out, scalar_mul(l_ort, T(w.gamma4)));
  return out;
}

// InfoNCE over the step's embeddings.  positive_pairs lists each unordered
// positive pair once; every embedding must appear in exactly one pair.
template <typename T>
Var<T> loss_icl(const Var<T>& embeddings,
                const std::vector<std::pair<std::size_t, std::size_t>>&
                    positive_pairs,
                T tau) {
  const std::size_t M = embeddings->value.shape().at(0);
  std::vector<std::size_t> partner(M, M);
  for (const auto& [a, b] : positive_pairs) {
    if (a >= M || b >= M || a == b)
      throw std::invalid_argument("loss_icl: bad positive pair");
    if (partner[a] != M || partner[b] != M)
      throw std::invalid_argument("loss_icl: embedding in two pairs");
    partner[a] = b;
    partner[b] = a;
  }
  for (std::size_t i = 0; i < M; ++i)
    if (partner[i] == M)
      throw std::invalid_argument("loss_icl: embedding without a positive");
  return icl_loss(embeddings, partner, tau);
}

// Margin triplet loss over same/different-identity triples of source-domain
// style features.  The triplet set is sampled by the caller; identities are
// revalidated here so a miswired sampler fails loudly.
template <typename T>
Var<T> loss_fcl(const Var<T>& domain_feats,
                const std::vector<int>& identity_ids,
                const std::vector<std::array<std::size_t, 3>>& triplets,
                T alpha) {
  const Shape& s = domain_feats->value.shape();
  if (s.size() != 2 || s[0] != identity_ids.size())
    throw std::invalid_argument("loss_fcl: identity list does not match batch");
  if (triplets.empty())
    throw std::invalid_argument(
        "loss_fcl: empty triplet set (sampler misconfiguration)");
  for (const auto& t : triplets) {
    if (t[0] >= s[0] || t[1] >= s[0] || t[2] >= s[0])
      throw std::invalid_argument("loss_fcl: triplet index out of range");
    if (identity_ids[t[0]] != identity_ids[t[1]] ||
        identity_ids[t[0]] == identity_ids[t[2]])
      throw std::invalid_argument(
          "loss_fcl: triplet violates identity constraints");
  }
  return fcl_loss(domain_feats, triplets, alpha);
}

// L_total = L_deco + lambda * (L_icl + L_fcl)
template <typename T>
Var<T> loss_total(const Var<T>& l_deco, const Var<T>& l_icl,
                  const Var<T>& l_fcl, T lambda) {
  return add(l_deco, scalar_mul(add(l_icl, l_fcl), lambda));
}

}  // namespace auda
