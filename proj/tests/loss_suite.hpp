#pragma once
// Randomized oracle-equivalence suite plus the frozen hand-derived loss
// values.  Shared by the unit tests and the acceptance gate, which report
// the same numbers through different harnesses.

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "auda/losses.hpp"
#include "auda/rng.hpp"
#include "oracle_losses.hpp"

namespace loss_suite {

struct OracleResult {
  std::string name;
  double max_abs_err = 0.0;
  std::size_t trials = 0;
};

struct HandCheck {
  std::string name;
  double got = 0.0, want = 0.0, tol = 0.0;
  bool pass() const { return std::abs(got - want) <= tol; }
};

namespace detail {

inline oracle::Mat random_mat(auda::Rng& rng, std::size_t rows,
                              std::size_t cols, double lo, double hi) {
  oracle::Mat m(rows, std::vector<double>(cols));
  for (auto& r : m)
    for (auto& v : r) v = rng.uniform(lo, hi);
  return m;
}

inline auda::Tensor<double> to_tensor(const oracle::Mat& m) {
  auda::Tensor<double> t({m.size(), m[0].size()});
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < m[r].size(); ++c) t.at2(r, c) = m[r][c];
  return t;
}

inline auda::Var<double> to_var(const oracle::Mat& m) {
  return auda::make_var(to_tensor(m));
}

inline void track(OracleResult& res, double lib, double ref) {
  res.max_abs_err = std::max(res.max_abs_err, std::abs(lib - ref));
  ++res.trials;
}

}  // namespace detail

// Each objective evaluated on `trials` random small inputs (batch <= 4,
// dims <= 8) against the scalar-loop reference.
inline std::vector<OracleResult> run_oracle_suite(std::size_t trials,
                                                  std::uint64_t seed) {
  using namespace detail;
  auda::Rng rng(auda::derive_seed(seed, "loss-oracle"));
  std::vector<OracleResult> out(9);
  out[0].name = "loss_orthogonality";
  out[1].name = "loss_au_bce";
  out[2].name = "loss_representation_alignment";
  out[3].name = "loss_reconstruction";
  out[4].name = "loss_adversarial";
  out[5].name = "loss_decoupling";
  out[6].name = "loss_icl";
  out[7].name = "loss_fcl";
  out[8].name = "loss_total";

  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t B = 1 + rng.uniform_index(4);
    const std::size_t D = 2 + rng.uniform_index(7);

    {  // orthogonality
      auto au_s = random_mat(rng, B, D, -1, 1);
      auto dm_s = random_mat(rng, B, D, -1, 1);
      auto au_t = random_mat(rng, B, D, -1, 1);
      auto dm_t = random_mat(rng, B, D, -1, 1);
      double lib = auda::loss_orthogonality(to_var(au_s), to_var(dm_s),
                                            to_var(au_t), to_var(dm_t))
                       ->value[0];
      track(out[0], lib, oracle::l_ort(au_s, dm_s, au_t, dm_t));
    }
    {  // AU BCE
      const std::size_t K = 1 + rng.uniform_index(8);
      auto probs = random_mat(rng, B, K, 0.02, 0.98);
      oracle::Mat labels(B, std::vector<double>(K));
      for (auto& r : labels)
        for (auto& v : r) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
      double lib =
          auda::loss_au_bce(to_var(probs), to_tensor(labels))->value[0];
      track(out[1], lib, oracle::l_au_bce(labels, probs));
    }
    {  // representation alignment (one domain term)
      auto a = random_mat(rng, B, D, -1, 1);
      auto b = random_mat(rng, B, D, -1, 1);
      auto c = random_mat(rng, B, D, -1, 1);
      auto d = random_mat(rng, B, D, -1, 1);
      double lib = auda::loss_representation_alignment(to_var(a), to_var(b),
                                                       to_var(c), to_var(d))
                       ->value[0];
      track(out[2], lib, oracle::l_rep_term(a, b, c, d));
    }
    {  // reconstruction
      const std::size_t hw = 2 + rng.uniform_index(5);
      auda::Tensor<double> img({B, 3, hw, hw});
      auda::Tensor<double> rec({B, 3, hw, hw});
      std::vector<double> vi(img.numel()), vr(img.numel());
      for (std::size_t i = 0; i < img.numel(); ++i) {
        img[i] = vi[i] = rng.uniform();
        rec[i] = vr[i] = rng.uniform();
      }
      double lib = auda::loss_reconstruction(auda::make_var(img),
                                             auda::make_var(rec))
                       ->value[0];
      track(out[3], lib, oracle::l_rec(vi, vr));
    }
    {  // adversarial, both roles
      const std::size_t g = 1 + rng.uniform_index(3);
      auda::Tensor<double> real({B, 1, g, g}), fake({B, 1, g, g});
      std::vector<double> vreal(real.numel()), vfake(real.numel());
      for (std::size_t i = 0; i < real.numel(); ++i) {
        real[i] = vreal[i] = rng.uniform(0.01, 0.99);
        fake[i] = vfake[i] = rng.uniform(0.01, 0.99);
      }
      double lib_d =
          auda::loss_adversarial(auda::make_var(real), auda::make_var(fake),
                                 auda::AdvRole::discriminator)
              ->value[0];
      track(out[4], lib_d, oracle::l_adv_disc(vreal, vfake));
      double lib_g =
          auda::loss_adversarial(auda::make_var(real), auda::make_var(fake),
                                 auda::AdvRole::generator)
              ->value[0];
      track(out[4], lib_g, oracle::l_adv_gen(vfake));
    }
    {  // decoupling
      oracle::DecoParts p;
      p.au_s = rng.uniform(0, 2);
      p.au_t = rng.uniform(0, 2);
      p.rep_s = rng.uniform(0, 2);
      p.rep_t = rng.uniform(0, 2);
      p.rec_s = rng.uniform(0, 1);
      p.rec_t = rng.uniform(0, 1);
      p.adv_s = rng.uniform(-2, 0);
      p.adv_t = rng.uniform(-2, 0);
      p.ort = rng.uniform(-2, 2);
      auda::LossWeights w;
      w.gamma1 = rng.uniform(0, 2);
      w.gamma2 = rng.uniform(0, 6);
      w.gamma3 = rng.uniform(0, 1);
      w.gamma4 = rng.uniform(0, 2);
      auto sc = [](double v) { return auda::make_scalar<double>(v); };
      double lib =
          auda::loss_decoupling(sc(p.au_s), sc(p.au_t), sc(p.rep_s),
                                sc(p.rep_t), sc(p.rec_s), sc(p.rec_t),
                                sc(p.adv_s), sc(p.adv_t), sc(p.ort), w)
              ->value[0];
      track(out[5], lib,
            oracle::l_deco(p, w.gamma1, w.gamma2, w.gamma3, w.gamma4));
    }
    {  // ICL
      const std::size_t M = 2 * (2 + rng.uniform_index(3));  // 4, 6, or 8
      auto raw = random_mat(rng, M, D, -1, 1);
      double tau = rng.uniform(0.05, 1.0);
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      std::vector<std::size_t> partner(M);
      for (std::size_t i = 0; i < M; i += 2) {
        pairs.push_back({i, i + 1});
        partner[i] = i + 1;
        partner[i + 1] = i;
      }
      auto emb = auda::row_l2_normalize(to_var(raw));
      double lib = auda::loss_icl(emb, pairs, tau)->value[0];
      track(out[6], lib, oracle::l_icl(raw, partner, tau));
    }
    {  // FCL
      const std::size_t half = 2 + rng.uniform_index(3);
      const std::size_t Bf = 2 * half;
      auto feats = random_mat(rng, Bf, D, 0.1, 1.0);
      std::vector<int> ids(Bf);
      for (std::size_t i = 0; i < Bf; ++i) ids[i] = static_cast<int>(i / 2);
      std::vector<std::array<std::size_t, 3>> triplets;
      for (std::size_t i = 0; i + 1 < Bf; i += 2) {
        std::size_t neg = (i + 2) % Bf;
        triplets.push_back({i, i + 1, neg});
      }
      double alpha = rng.uniform(0.05, 0.5);
      double lib =
          auda::loss_fcl(to_var(feats), ids, triplets, alpha)->value[0];
      track(out[7], lib, oracle::l_fcl(feats, triplets, alpha));
    }
    {  // total
      double deco = rng.uniform(0, 10), icl = rng.uniform(0, 3),
             fcl = rng.uniform(0, 1), lambda = rng.uniform(0, 1);
      double lib = auda::loss_total(auda::make_scalar(deco),
                                    auda::make_scalar(icl),
                                    auda::make_scalar(fcl), lambda)
                       ->value[0];
      track(out[8], lib, oracle::l_total(deco, icl, fcl, lambda));
    }
  }
  return out;
}

// Frozen hand-derived values from the loss definitions.
inline std::vector<HandCheck> run_hand_checks() {
  using detail::to_tensor;
  using detail::to_var;
  std::vector<HandCheck> checks;
  auto push = [&](const std::string& name, double got, double want,
                  double tol) {
    checks.push_back({name, got, want, tol});
  };

  {  // orthogonality: identical unit vectors in both domains
    oracle::Mat u = {{1.0, 0.0}};
    double got =
        auda::loss_orthogonality(to_var(u), to_var(u), to_var(u), to_var(u))
            ->value[0];
    push("ort identical = 2", got, 2.0, 1e-9);
    oracle::Mat v = {{0.0, 1.0}};
    got = auda::loss_orthogonality(to_var(u), to_var(v), to_var(u), to_var(v))
              ->value[0];
    push("ort orthogonal = 0", got, 0.0, 1e-9);
    oracle::Mat w = {{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}};
    got = auda::loss_orthogonality(to_var(u), to_var(w), to_var(u), to_var(v))
              ->value[0];
    push("ort 45-degree = sqrt2/2", got, 0.70710678118654752, 1e-9);
  }
  {  // BCE
    oracle::Mat z = {{1.0, 0.0}};
    oracle::Mat good = {{1.0 - 1e-7, 1e-7}};
    push("bce near-perfect ~ 0",
         auda::loss_au_bce(to_var(good), to_tensor(z))->value[0], 0.0, 1e-5);
    oracle::Mat half = {{0.5, 0.5}};
    push("bce half = 2 ln 2",
         auda::loss_au_bce(to_var(half), to_tensor(z))->value[0],
         1.3862943611198906, 1e-9);
    oracle::Mat z1 = {{1.0}};
    oracle::Mat h1 = {{0.5}};
    push("bce single = ln 2",
         auda::loss_au_bce(to_var(h1), to_tensor(z1))->value[0],
         0.69314718055994531, 1e-9);
  }
  {  // representation alignment
    oracle::Mat a = {{0.3, -0.2, 0.5, 0.1}};
    push("rep identical = 0",
         auda::loss_representation_alignment(to_var(a), to_var(a), to_var(a),
                                             to_var(a))
             ->value[0],
         0.0, 1e-12);
    oracle::Mat zero = {{0.0, 0.0, 0.0, 0.0}};
    oracle::Mat e0 = {{1.0, 0.0, 0.0, 0.0}};
    push("rep unit diff = 1",
         auda::loss_representation_alignment(to_var(e0), to_var(zero),
                                             to_var(zero), to_var(zero))
             ->value[0],
         1.0, 1e-12);
    oracle::Mat d1 = {{1.0, 1.0}};
    oracle::Mat d2 = {{2.0, 0.0}};
    oracle::Mat z2 = {{0.0, 0.0}};
    push("rep [1,1],[2,0] = 6",
         auda::loss_representation_alignment(to_var(d1), to_var(z2),
                                             to_var(d2), to_var(z2))
             ->value[0],
         6.0, 1e-12);
  }
  {  // reconstruction
    auda::Tensor<double> img({1, 1, 2, 2}, 0.2);
    push("rec identity = 0",
         auda::loss_reconstruction(auda::make_var(img), auda::make_var(img))
             ->value[0],
         0.0, 1e-12);
    auda::Tensor<double> shifted({1, 1, 2, 2}, 0.7);
    push("rec +0.5 = 0.5",
         auda::loss_reconstruction(auda::make_var(img),
                                   auda::make_var(shifted))
             ->value[0],
         0.5, 1e-12);
    auda::Tensor<double> rec = img;
    rec[1] = 0.4;
    push("rec 2x2 case = 0.05",
         auda::loss_reconstruction(auda::make_var(img), auda::make_var(rec))
             ->value[0],
         0.05, 1e-12);
  }
  {  // adversarial
    auda::Tensor<double> real({1, 1, 1, 1}, 1.0 - 1e-7);
    auda::Tensor<double> fake({1, 1, 1, 1}, 1e-7);
    push("adv perfect ~ 0",
         auda::loss_adversarial(auda::make_var(real), auda::make_var(fake),
                                auda::AdvRole::discriminator)
             ->value[0],
         0.0, 1e-5);
    auda::Tensor<double> half({1, 1, 1, 1}, 0.5);
    push("adv half = -2 ln 2",
         auda::loss_adversarial(auda::make_var(half), auda::make_var(half),
                                auda::AdvRole::discriminator)
             ->value[0],
         -1.3862943611198906, 1e-9);
    push("adv generator half = ln 2",
         auda::loss_adversarial(auda::make_var(half), auda::make_var(half),
                                auda::AdvRole::generator)
             ->value[0],
         0.69314718055994531, 1e-9);
  }
  {  // decoupling: L_au = L_rep = L_rec = L_ort = 1, both adversarial
     // terms 1, paper weights -> 1 + 1 + 5 + 0.1*2 + 1 = 8.2
    auda::LossWeights w;  // defaults are the paper values
    auto one = [] { return auda::make_scalar(1.0); };
    auto zero = [] { return auda::make_scalar(0.0); };
    push("deco unit components = 8.2",
         auda::loss_decoupling(one(), zero(), one(), zero(), one(), zero(),
                               one(), one(), one(), w)
             ->value[0],
         8.2, 1e-9);
    auda::LossWeights zw;
    zw.gamma1 = zw.gamma2 = zw.gamma3 = zw.gamma4 = 0.0;
    push("deco zero gammas = l_au",
         auda::loss_decoupling(one(), zero(), one(), zero(), one(), zero(),
                               one(), one(), one(), zw)
             ->value[0],
         1.0, 1e-12);
  }
  {  // ICL: 8 orthogonal unit embeddings -> every similarity 0
    auda::Tensor<double> e({8, 8});
    for (std::size_t i = 0; i < 8; ++i) e.at2(i, i) = 1.0;
    std::vector<std::pair<std::size_t, std::size_t>> pairs = {
        {0, 1}, {2, 3}, {4, 5}, {6, 7}};
    push("icl uniform = ln 7",
         auda::loss_icl(auda::make_var(e), pairs, 1.0)->value[0],
         1.9459101490553132, 1e-9);

    // saturated positive: s+/tau = 20, all negative similarities 0
    auda::Tensor<double> sat({8, 4});
    for (std::size_t i = 0; i < 8; ++i) sat.at2(i, i / 2) = 1.0;
    push("icl saturated < 1e-7",
         auda::loss_icl(auda::make_var(sat), pairs, 0.05)->value[0], 0.0,
         1e-7);

    // single-negative anchor value, straight from the definition
    double single = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
    push("icl one-negative anchor = 0.31326", single, 0.31326168751822286,
         1e-9);
  }
  {  // FCL hinge arithmetic
    auto tri = std::vector<std::array<std::size_t, 3>>{{0, 1, 2}};
    std::vector<int> ids = {0, 0, 1};
    oracle::Mat sep = {{1.0, 0.0}, {1.0, 0.0}, {-1.0, 0.0}};
    push("fcl separated = 0",
         auda::loss_fcl(to_var(sep), ids, tri, 0.1)->value[0], 0.0, 1e-12);
    double r32 = std::sqrt(3.0) / 2.0;
    oracle::Mat mid = {{1.0, 0.0}, {0.5, r32}, {0.5, -r32}};
    push("fcl equal cosines = 0.1",
         auda::loss_fcl(to_var(mid), ids, tri, 0.1)->value[0], 0.1, 1e-9);
    oracle::Mat spread = {{1.0, 0.0},
                          {0.2, std::sqrt(1.0 - 0.04)},
                          {0.6, -std::sqrt(1.0 - 0.36)}};
    push("fcl 0.2/0.6 = 0.5",
         auda::loss_fcl(to_var(spread), ids, tri, 0.1)->value[0], 0.5, 1e-9);
  }
  {  // total
    push("total 8.2 + 0.1*(1.9459+0.1) = 8.40459",
         auda::loss_total(auda::make_scalar(8.2), auda::make_scalar(1.9459),
                          auda::make_scalar(0.1), 0.1)
             ->value[0],
         8.40459, 1e-9);
    push("total lambda 0 = deco",
         auda::loss_total(auda::make_scalar(8.2), auda::make_scalar(1.9459),
                          auda::make_scalar(0.1), 0.0)
             ->value[0],
         8.2, 1e-12);
  }
  return checks;
}

}  // namespace loss_suite
