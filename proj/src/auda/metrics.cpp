#include "auda/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "auda/image.hpp"
#include "auda/rng.hpp"
#include "auda/train.hpp"

namespace auda {

namespace {

using EigenRowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kCovRidge = 1e-6;
constexpr std::size_t kEvalBatch = 32;

void check_rank2(const Tensor<float>& t, const char* who) {
  if (t.shape().size() != 2 || t.shape()[0] == 0 || t.shape()[1] == 0)
    throw std::invalid_argument(std::string(who) +
                                ": expected a non-empty [n, d] matrix");
}

// PSD square root via eigendecomposition; min_eig reports the smallest
// eigenvalue before clamping so callers can reject genuinely non-PSD input.
EigenRowMat psd_sqrt(const EigenRowMat& m, double* min_eig) {
  Eigen::SelfAdjointEigenSolver<EigenRowMat> es(m);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("frechet_distance: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  *min_eig = ev.minCoeff();
  Eigen::VectorXd root = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Tensor<float> single_image_batch(const Tensor<float>& img,
                                 const ModelConfig& cfg, const char* who) {
  const Shape want{3, cfg.image_size, cfg.image_size};
  if (img.shape() != want)
    throw std::invalid_argument(std::string(who) + ": image must be [3," +
                                std::to_string(cfg.image_size) + "," +
                                std::to_string(cfg.image_size) + "]");
  Tensor<float> out({1, 3, cfg.image_size, cfg.image_size});
  std::copy_n(img.data(), img.numel(), out.data());
  return out;
}

std::vector<Tensor<float>> preload_images(const DatasetManifest& m) {
  std::vector<Tensor<float>> out;
  out.reserve(m.records.size());
  for (std::size_t i = 0; i < m.records.size(); ++i)
    out.push_back(load_record_image(m, i));
  return out;
}

Tensor<float> stack_rows(const std::vector<Tensor<float>>& images,
                         const std::size_t* rows, std::size_t n) {
  const std::size_t chunk = images.front().numel();
  Shape s = images.front().shape();
  Tensor<float> out({n, s[0], s[1], s[2]});
  for (std::size_t r = 0; r < n; ++r)
    std::copy_n(images[rows[r]].data(), chunk, out.data() + r * chunk);
  return out;
}

void check_manifest_for_model(const DatasetManifest& m, const ModelConfig& cfg,
                              const char* who) {
  if (m.height != cfg.image_size || m.width != cfg.image_size)
    throw std::invalid_argument(std::string(who) +
                                ": manifest image size does not match model");
  if (m.records.empty())
    throw std::invalid_argument(std::string(who) + ": empty manifest");
}

double mean_abs_diff(const float* a, const float* b, std::size_t n) {
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(double(a[i]) - b[i]);
  return acc / n;
}

void format_value(std::string& line, float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", double(v));
  line += buf;
}

}  // namespace

F1Report f1_scores(const Tensor<float>& probabilities,
                   const Tensor<float>& labels, double threshold) {
  check_rank2(probabilities, "f1_scores");
  if (labels.shape() != probabilities.shape())
    throw std::invalid_argument("f1_scores: shape mismatch");
  const std::size_t n = probabilities.shape()[0], k = probabilities.shape()[1];
  for (std::size_t i = 0; i < labels.numel(); ++i)
    if (labels[i] != 0.0f && labels[i] != 1.0f)
      throw std::invalid_argument("f1_scores: labels must be binary");

  F1Report rep;
  rep.threshold = threshold;
  rep.precision.resize(k);
  rep.recall.resize(k);
  rep.f1.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool pred = probabilities[i * k + j] >= threshold;
      const bool pos = labels[i * k + j] == 1.0f;
      tp += pred && pos;
      fp += pred && !pos;
      fn += !pred && pos;
    }
    const double p = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
    const double r = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
    rep.precision[j] = p;
    rep.recall[j] = r;
    rep.f1[j] = p + r > 0 ? 2.0 * r * p / (r + p) : 0.0;
    rep.ave += rep.f1[j] / k;
  }
  return rep;
}

FrechetStats compute_frechet_stats(const Tensor<float>& features) {
  check_rank2(features, "compute_frechet_stats");
  const std::size_t n = features.shape()[0], d = features.shape()[1];
  if (n < 2)
    throw std::invalid_argument(
        "compute_frechet_stats: need at least 2 samples");

  FrechetStats s;
  s.dim = d;
  s.count = n;
  s.mu.assign(d, 0.0);
  s.cov.assign(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.mu[j] += features[i * d + j];
  for (double& v : s.mu) v /= n;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double dj = features[i * d + j] - s.mu[j];
      for (std::size_t l = j; l < d; ++l)
        s.cov[j * d + l] += dj * (features[i * d + l] - s.mu[l]);
    }
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t l = j; l < d; ++l) {
      s.cov[j * d + l] /= (n - 1);
      s.cov[l * d + j] = s.cov[j * d + l];
    }
  return s;
}

double frechet_distance(const FrechetStats& a, const FrechetStats& b) {
  if (a.dim == 0 || a.dim != b.dim)
    throw std::invalid_argument("frechet_distance: dimension mismatch");
  if (a.mu.size() != a.dim || b.mu.size() != b.dim ||
      a.cov.size() != a.dim * a.dim || b.cov.size() != b.dim * b.dim)
    throw std::invalid_argument("frechet_distance: malformed stats");
  const auto d = static_cast<Eigen::Index>(a.dim);

  EigenRowMat sa = Eigen::Map<const EigenRowMat>(a.cov.data(), d, d);
  EigenRowMat sb = Eigen::Map<const EigenRowMat>(b.cov.data(), d, d);
  sa.diagonal().array() += kCovRidge;
  sb.diagonal().array() += kCovRidge;

  double min_a = 0;
  EigenRowMat ra = psd_sqrt(sa, &min_a);
  if (min_a < 0)
    throw std::runtime_error(
        "frechet_distance: covariance a not PSD after ridge (min eigenvalue " +
        std::to_string(min_a) + ")");
  {
    Eigen::SelfAdjointEigenSolver<EigenRowMat> check_b(sb);
    const double min_b = check_b.eigenvalues().minCoeff();
    if (min_b < 0)
      throw std::runtime_error(
          "frechet_distance: covariance b not PSD after ridge (min "
          "eigenvalue " +
          std::to_string(min_b) + ")");
  }

  // sqrt(Sa) Sb sqrt(Sa) shares eigenvalues with Sa Sb but is symmetric,
  // so its PSD root is stable; roundoff negatives clamp to zero inside.
  EigenRowMat prod = ra * sb * ra;
  prod = 0.5 * (prod + prod.transpose()).eval();
  double min_p = 0;
  EigenRowMat root = psd_sqrt(prod, &min_p);

  double dist = sa.trace() + sb.trace() - 2.0 * root.trace();
  for (std::size_t j = 0; j < a.dim; ++j) {
    const double dm = a.mu[j] - b.mu[j];
    dist += dm * dm;
  }
  return std::max(dist, 0.0);
}

SwapFidelityReport swap_fidelity(
    const Model<float>& model, const DatasetManifest& source,
    const DatasetManifest& target,
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("swap_fidelity: no pairs");
  if (source.domain_id != Domain::source || target.domain_id != Domain::target)
    throw std::invalid_argument(
        "swap_fidelity: manifests must be (source, target)");
  check_manifest_for_model(source, model.cfg, "swap_fidelity");
  check_manifest_for_model(target, model.cfg, "swap_fidelity");
  for (const auto& [si, ti] : pairs)
    if (si >= source.records.size() || ti >= target.records.size())
      throw std::invalid_argument("swap_fidelity: pair index out of range");

  const std::vector<Tensor<float>> src_images = preload_images(source);
  const std::vector<Tensor<float>> tgt_images = preload_images(target);
  const std::size_t px = 3 * model.cfg.image_size * model.cfg.image_size;

  SwapFidelityReport rep;
  rep.pairs = pairs.size();
  std::size_t wins = 0;
  for (std::size_t p0 = 0; p0 < pairs.size(); p0 += kEvalBatch) {
    const std::size_t b = std::min(kEvalBatch, pairs.size() - p0);
    std::vector<std::size_t> srows(b), trows(b);
    for (std::size_t i = 0; i < b; ++i) {
      srows[i] = pairs[p0 + i].first;
      trows[i] = pairs[p0 + i].second;
    }
    auto src = make_var(stack_rows(src_images, srows.data(), b));
    auto tgt = make_var(stack_rows(tgt_images, trows.data(), b));
    auto gen = model.decode(model.encode_au(tgt),
                            model.encode_domain(src, Domain::source));

    for (std::size_t i = 0; i < b; ++i) {
      const SampleRecord& rs = source.records[srows[i]];
      const SampleRecord& rt = target.records[trows[i]];
      ToyFaceSample s{src_images[srows[i]], rs.au, rs.identity, rs.style,
                      rs.frame_seed};
      ToyFaceSample t{tgt_images[trows[i]], rt.au, rt.identity, rt.style,
                      rt.frame_seed};
      const Tensor<float> oracle =
          dequantize(quantize(oracle_swap(s, t).first));
      const float* g = gen->value.data() + i * px;
      const double lo = mean_abs_diff(g, oracle.data(), px);
      const double ls = mean_abs_diff(g, src_images[srows[i]].data(), px);
      rep.l1_oracle += lo;
      rep.l1_source += ls;
      wins += lo < ls;
    }
  }
  rep.l1_oracle /= rep.pairs;
  rep.l1_source /= rep.pairs;
  rep.win_rate = double(wins) / rep.pairs;
  return rep;
}

FidReport synthesis_fid(const Model<float>& eval_model,
                        const Model<float>& feature_model,
                        const DatasetManifest& source,
                        const DatasetManifest& target, std::size_t samples,
                        std::uint64_t seed) {
  if (samples < 2)
    throw std::invalid_argument("synthesis_fid: need at least 2 samples");
  check_manifest_for_model(source, eval_model.cfg, "synthesis_fid");
  check_manifest_for_model(target, eval_model.cfg, "synthesis_fid");
  if (feature_model.cfg.image_size != eval_model.cfg.image_size)
    throw std::invalid_argument(
        "synthesis_fid: feature model image size mismatch");

  const std::vector<Tensor<float>> src_images = preload_images(source);
  const std::vector<Tensor<float>> tgt_images = preload_images(target);
  const std::size_t d = feature_model.cfg.d_au;

  auto draw_rows = [](Rng& rng, std::size_t limit, std::size_t n) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = rng.uniform_index(limit);
    return rows;
  };
  auto copy_rows = [d](const Var<float>& feats, Tensor<float>& dst,
                       std::size_t at) {
    std::copy_n(feats->value.data(), feats->value.numel(),
                dst.data() + at * d);
  };

  Tensor<float> gen_s({samples, d}), gen_t({samples, d});
  Rng pair_rng(derive_seed(seed, "fid-pairs"));
  for (std::size_t at = 0; at < samples; at += kEvalBatch) {
    const std::size_t b = std::min(kEvalBatch, samples - at);
    const auto srows = draw_rows(pair_rng, src_images.size(), b);
    const auto trows = draw_rows(pair_rng, tgt_images.size(), b);
    auto src = make_var(stack_rows(src_images, srows.data(), b));
    auto tgt = make_var(stack_rows(tgt_images, trows.data(), b));
    SynthesisBundle<float> bundle;
    detail::synthesis_stage1(eval_model, src, tgt, bundle);
    auto feats =
        feature_model.encode_au(concat_rows(bundle.swap_s, bundle.swap_t));
    copy_rows(slice_rows(feats, 0, b), gen_s, at);
    copy_rows(slice_rows(feats, b, 2 * b), gen_t, at);
  }

  auto real_stats = [&](const std::vector<Tensor<float>>& images,
                        const char* tag) {
    Tensor<float> feats({samples, d});
    Rng rng(derive_seed(seed, tag));
    for (std::size_t at = 0; at < samples; at += kEvalBatch) {
      const std::size_t b = std::min(kEvalBatch, samples - at);
      const auto rows = draw_rows(rng, images.size(), b);
      auto batch = make_var(stack_rows(images, rows.data(), b));
      copy_rows(feature_model.encode_au(batch), feats, at);
    }
    return compute_frechet_stats(feats);
  };

  FidReport rep;
  rep.samples = samples;
  rep.fid_source = frechet_distance(real_stats(src_images, "fid-real-src"),
                                    compute_frechet_stats(gen_s));
  rep.fid_target = frechet_distance(real_stats(tgt_images, "fid-real-tgt"),
                                    compute_frechet_stats(gen_t));
  rep.mean = 0.5 * (rep.fid_source + rep.fid_target);
  return rep;
}

std::vector<Tensor<float>> interpolate_au(const Model<float>& model,
                                          const Tensor<float>& target_image,
                                          const Tensor<float>& source_a,
                                          const Tensor<float>& source_b,
                                          std::size_t steps) {
  if (steps < 2)
    throw std::invalid_argument("interpolate_au: steps must be >= 2");
  auto tgt = make_var(single_image_batch(target_image, model.cfg,
                                         "interpolate_au"));
  auto a = make_var(single_image_batch(source_a, model.cfg, "interpolate_au"));
  auto b = make_var(single_image_batch(source_b, model.cfg, "interpolate_au"));

  auto au_a_var = model.encode_au(a);
  auto au_b_var = model.encode_au(b);
  const Tensor<float>& au_a = au_a_var->value;
  const Tensor<float>& au_b = au_b_var->value;
  auto dm = model.encode_domain(tgt, Domain::target);

  std::vector<Tensor<float>> out;
  out.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const float t = float(double(k) / double(steps - 1));
    Tensor<float> au({1, model.cfg.d_au});
    for (std::size_t j = 0; j < model.cfg.d_au; ++j)
      au[j] = au_a[j] * (1.0f - t) + au_b[j] * t;
    auto img = model.decode(make_var(std::move(au)), dm);
    Tensor<float> tile({3, model.cfg.image_size, model.cfg.image_size});
    std::copy_n(img->value.data(), tile.numel(), tile.data());
    out.push_back(std::move(tile));
  }
  return out;
}

FeatureKind feature_kind_from_name(const std::string& name) {
  if (name == "au") return FeatureKind::au;
  if (name == "dm") return FeatureKind::dm;
  throw std::invalid_argument("unknown feature kind \"" + name +
                              "\" (expected au or dm)");
}

void export_features(const Model<float>& model, const DatasetManifest& m,
                     FeatureKind which, const std::string& out_path) {
  check_manifest_for_model(m, model.cfg, "export_features");
  const std::size_t d =
      which == FeatureKind::au ? model.cfg.d_au : model.cfg.d_dm;

  std::ofstream out(out_path, std::ios::binary);
  if (!out)
    throw std::runtime_error("export_features: cannot write " + out_path);
  std::string line = "domain,identity";
  for (std::size_t j = 0; j < m.num_au; ++j)
    line += ",au" + std::to_string(j);
  for (std::size_t j = 0; j < d; ++j) line += ",f" + std::to_string(j);
  out << line << "\n";

  const std::vector<Tensor<float>> images = preload_images(m);
  for (std::size_t at = 0; at < m.records.size(); at += kEvalBatch) {
    const std::size_t b = std::min(kEvalBatch, m.records.size() - at);
    std::vector<std::size_t> rows(b);
    for (std::size_t i = 0; i < b; ++i) rows[i] = at + i;
    auto batch = make_var(stack_rows(images, rows.data(), b));
    auto feats = which == FeatureKind::au
                     ? model.encode_au(batch)
                     : model.encode_domain(batch, m.domain_id);
    for (std::size_t i = 0; i < b; ++i) {
      const SampleRecord& r = m.records[at + i];
      line = domain_name(m.domain_id);
      line += ',';
      line += std::to_string(r.identity_id);
      for (std::uint8_t bit : r.au.bits) {
        line += ',';
        line += bit ? '1' : '0';
      }
      for (std::size_t j = 0; j < d; ++j) {
        line += ',';
        format_value(line, feats->value[i * d + j]);
      }
      out << line << "\n";
    }
  }
  if (!out)
    throw std::runtime_error("export_features: write failed: " + out_path);
}

}  // namespace auda
