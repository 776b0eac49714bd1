// Command-line entry point: data generation, training, evaluation,
// synthesis grids, AU interpolation, and feature export.  Every command
// exits 0 only when all of its outputs were written; errors go to stderr
// with a nonzero status.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "auda/checkpoint.hpp"
#include "auda/config.hpp"
#include "auda/dataset.hpp"
#include "auda/image.hpp"
#include "auda/metrics.hpp"
#include "auda/rundir.hpp"
#include "auda/train.hpp"

namespace fs = std::filesystem;
using namespace auda;

namespace {

constexpr const char* kDataRootEnv = "AUDA_DATA_ROOT";

struct DataPaths {
  std::string root, source, target;
};

// file < flags: the config file loads first, then --set overrides, then
// the dedicated flags.
struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> sets;

  Config resolve() const {
    Config cfg =
        config_path.empty() ? default_config() : load_config(config_path);
    for (const std::string& s : sets) apply_override(cfg, s);
    return cfg;
  }
};

void add_config_args(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_path, "config file to load");
  cmd->add_option("--set", args.sets,
                  "key=value config override (repeatable)");
}

void add_data_args(CLI::App* cmd, DataPaths& paths) {
  cmd->add_option("--data-root", paths.root,
                  std::string("dataset root holding source/ and target/ "
                              "(default: $") +
                      kDataRootEnv + ")");
  cmd->add_option("--source", paths.source, "source dataset directory");
  cmd->add_option("--target", paths.target, "target dataset directory");
}

std::string data_root_or_die(const DataPaths& p) {
  if (!p.root.empty()) return p.root;
  if (const char* env = std::getenv(kDataRootEnv)) return env;
  throw std::runtime_error(std::string("no dataset location: pass "
                                       "--data-root/--source/--target or "
                                       "set $") +
                           kDataRootEnv);
}

std::string manifest_path(std::string dir_or_file) {
  if (dir_or_file.size() > 5 &&
      dir_or_file.substr(dir_or_file.size() - 5) == ".json")
    return dir_or_file;
  return (fs::path(dir_or_file) / "manifest.json").string();
}

DatasetManifest load_domain(const DataPaths& p, Domain d) {
  std::string dir = d == Domain::source ? p.source : p.target;
  if (dir.empty())
    dir = (fs::path(data_root_or_die(p)) / domain_name(d)).string();
  DatasetManifest m = load_manifest(manifest_path(dir));
  if (m.domain_id != d)
    throw std::runtime_error(std::string("manifest at ") + dir + " is not a " +
                             domain_name(d) + " dataset");
  return m;
}

Model<float> load_model(const std::string& checkpoint) {
  return std::move(load_checkpoint(checkpoint).model);
}

void check_compatible(const Model<float>& model, const DatasetManifest& m,
                      const char* what) {
  if (m.height != model.cfg.image_size || m.width != model.cfg.image_size)
    throw std::runtime_error(std::string(what) +
                             ": dataset image size does not match checkpoint");
  if (m.num_au != model.cfg.num_au)
    throw std::runtime_error(std::string(what) +
                             ": dataset AU count does not match checkpoint");
}

Tensor<float> stack_images(const DatasetManifest& m,
                           const std::vector<std::size_t>& rows) {
  Tensor<float> out({rows.size(), 3, m.height, m.width});
  const std::size_t chunk = 3 * m.height * m.width;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Tensor<float> img = load_record_image(m, rows[i]);
    std::copy_n(img.data(), chunk, out.data() + i * chunk);
  }
  return out;
}

ImageU8 tile_of(const Var<float>& batch, std::size_t row, std::size_t hw) {
  Tensor<float> img({3, hw, hw});
  std::copy_n(batch->value.data() + row * img.numel(), img.numel(),
              img.data());
  return quantize(img);
}

// ---- gen-data ----------------------------------------------------------

int cmd_gen_data(const ConfigArgs& cargs, const DataPaths& dpaths,
                 std::uint64_t seed) {
  const Config cfg = cargs.resolve();
  DataGenConfig gen;
  gen.subjects = cfg.gen.subjects;
  gen.frames_per_subject = cfg.gen.frames_per_subject;
  gen.au_marginals = cfg.gen.marginals;
  gen.height = cfg.gen.height;
  gen.width = cfg.gen.width;
  gen.out_root = data_root_or_die(dpaths);
  for (Domain d : {Domain::source, Domain::target}) {
    gen.domain = d;
    DatasetManifest m = generate_domain_dataset(gen, seed);
    std::printf("wrote %s (%zu images)\n",
                (fs::path(m.dir) / "manifest.json").string().c_str(),
                m.records.size());
  }
  return 0;
}

// ---- train -------------------------------------------------------------

int cmd_train(const ConfigArgs& cargs, const DataPaths& dpaths,
              const std::string& out, const std::string& resume_from) {
  Config cfg = cargs.resolve();
  cfg.train.validate();

  const DatasetManifest source = load_domain(dpaths, Domain::source);
  const DatasetManifest target = load_domain(dpaths, Domain::target);

  RunDirectory run = RunDirectory::create(out);
  save_config(cfg, run.file("config.snapshot"));
  run.add("config.snapshot", "config");
  fs::copy_file((fs::path(source.dir) / "manifest.json").string(),
                run.file("source-manifest.json"),
                fs::copy_options::overwrite_existing);
  run.add("source-manifest.json", "manifest");
  fs::copy_file((fs::path(target.dir) / "manifest.json").string(),
                run.file("target-manifest.json"),
                fs::copy_options::overwrite_existing);
  run.add("target-manifest.json", "manifest");

  Trainer trainer(cfg.train, make_train_view(source), make_train_view(target));
  if (!resume_from.empty()) trainer.resume(resume_from);
  const FitResult res = trainer.fit(run.path());

  run.add("metrics.jsonl", "metrics");
  for (const auto& entry : fs::directory_iterator(run.path())) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 5 && name.substr(name.size() - 5) == ".ckpt")
      run.add(name, "checkpoint");
  }
  run.finalize();
  std::printf("run complete: steps=%llu epochs=%llu final=%s\n",
              static_cast<unsigned long long>(res.steps),
              static_cast<unsigned long long>(res.epochs),
              res.final_checkpoint.c_str());
  return 0;
}

// ---- eval --------------------------------------------------------------

F1Report target_f1(const Model<float>& model, const DatasetManifest& target) {
  const std::size_t n = target.records.size(), k = target.num_au;
  Tensor<float> probs({n, k});
  Tensor<float> labels({n, k});
  constexpr std::size_t kBatch = 32;
  for (std::size_t at = 0; at < n; at += kBatch) {
    const std::size_t b = std::min(kBatch, n - at);
    std::vector<std::size_t> rows(b);
    for (std::size_t i = 0; i < b; ++i) rows[i] = at + i;
    auto imgs = make_var(stack_images(target, rows));
    auto p = model.predict_au(model.encode_au(imgs));
    std::copy_n(p->value.data(), b * k, probs.data() + at * k);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const AULabelVector& au = target.records[i].au;
    for (std::size_t j = 0; j < k; ++j) labels[i * k + j] = au.bits[j];
  }
  return f1_scores(probs, labels);
}

void write_f1_report(const F1Report& rep, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  char buf[128];
  std::snprintf(buf, sizeof buf, "threshold %.2f\n", rep.threshold);
  out << buf << "au precision recall f1\n";
  for (std::size_t j = 0; j < rep.f1.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%zu %.4f %.4f %.4f\n", j,
                  rep.precision[j], rep.recall[j], rep.f1[j]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "AVE %.4f\n", rep.ave);
  out << buf;
  if (!out) throw std::runtime_error("write failed: " + path);
}

int cmd_eval(const std::string& checkpoint, const DataPaths& dpaths,
             const std::string& out, const std::string& fid_reference,
             std::size_t pairs, std::size_t fid_samples, std::uint64_t seed) {
  const Model<float> model = load_model(checkpoint);
  const DatasetManifest source = load_domain(dpaths, Domain::source);
  const DatasetManifest target = load_domain(dpaths, Domain::target);
  check_compatible(model, source, "eval");
  check_compatible(model, target, "eval");

  RunDirectory run = RunDirectory::create(out);

  const F1Report f1 = target_f1(model, target);
  write_f1_report(f1, run.file("f1.txt"));
  run.add("f1.txt", "report");

  Rng pair_rng(derive_seed(seed, "eval-pairs"));
  std::vector<std::pair<std::size_t, std::size_t>> eval_pairs(pairs);
  for (auto& [si, ti] : eval_pairs) {
    si = pair_rng.uniform_index(source.records.size());
    ti = pair_rng.uniform_index(target.records.size());
  }
  const SwapFidelityReport swap = swap_fidelity(model, source, target,
                                                eval_pairs);
  {
    std::ofstream sf(run.file("swap_fidelity.txt"), std::ios::binary);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "pairs %zu\nl1_oracle %.6f\nl1_source %.6f\nwin_rate "
                  "%.4f\n",
                  swap.pairs, swap.l1_oracle, swap.l1_source, swap.win_rate);
    sf << buf;
    if (!sf) throw std::runtime_error("cannot write swap_fidelity.txt");
  }
  run.add("swap_fidelity.txt", "report");

  const Model<float> feature_model = load_model(fid_reference);
  check_compatible(feature_model, source, "eval --fid-reference");
  const FidReport fid = synthesis_fid(model, feature_model, source, target,
                                      fid_samples, derive_seed(seed, "fid"));
  {
    std::ofstream ff(run.file("fid.txt"), std::ios::binary);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "samples %zu\nfid_source %.6f\nfid_target %.6f\nfid_mean "
                  "%.6f\n",
                  fid.samples, fid.fid_source, fid.fid_target, fid.mean);
    ff << buf;
    if (!ff) throw std::runtime_error("cannot write fid.txt");
  }
  run.add("fid.txt", "report");

  run.finalize();
  std::printf("AVE F1: %.4f\n", f1.ave);
  return 0;
}

// ---- synth-grid --------------------------------------------------------

int cmd_synth_grid(const std::string& checkpoint, const DataPaths& dpaths,
                   const std::string& out, std::size_t n,
                   std::uint64_t seed) {
  const Model<float> model = load_model(checkpoint);
  const DatasetManifest source = load_domain(dpaths, Domain::source);
  const DatasetManifest target = load_domain(dpaths, Domain::target);
  check_compatible(model, source, "synth-grid");
  check_compatible(model, target, "synth-grid");

  Rng rng(derive_seed(seed, "synth-grid"));
  std::vector<std::size_t> srows(n), trows(n);
  for (std::size_t i = 0; i < n; ++i) {
    srows[i] = rng.uniform_index(source.records.size());
    trows[i] = rng.uniform_index(target.records.size());
  }
  auto src = make_var(stack_images(source, srows));
  auto tgt = make_var(stack_images(target, trows));
  const SynthesisBundle<float> b = forward_synthesis(model, src, tgt);

  const std::size_t hw = model.cfg.image_size;
  std::vector<ImageU8> tiles;
  tiles.reserve(n * 6);
  for (std::size_t i = 0; i < n; ++i)
    for (const Var<float>* v :
         {&b.src, &b.tgt, &b.swap_s, &b.swap_t, &b.cyc_s, &b.cyc_t})
      tiles.push_back(tile_of(*v, i, hw));
  if (const fs::path dir = fs::path(out).parent_path(); !dir.empty())
    fs::create_directories(dir);
  save_png(out, compose_grid(tiles, n, 6));
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

// ---- interpolate -------------------------------------------------------

int cmd_interpolate(const std::string& checkpoint, const DataPaths& dpaths,
                    const std::string& out_dir, std::size_t target_index,
                    std::size_t source_a, std::size_t source_b,
                    std::size_t steps) {
  const Model<float> model = load_model(checkpoint);
  const DatasetManifest source = load_domain(dpaths, Domain::source);
  const DatasetManifest target = load_domain(dpaths, Domain::target);
  check_compatible(model, source, "interpolate");
  check_compatible(model, target, "interpolate");
  if (target_index >= target.records.size() ||
      source_a >= source.records.size() || source_b >= source.records.size())
    throw std::runtime_error("interpolate: record index out of range");

  const Tensor<float> tgt = load_record_image(target, target_index);
  const Tensor<float> a = load_record_image(source, source_a);
  const Tensor<float> c = load_record_image(source, source_b);
  const auto strip = interpolate_au(model, tgt, a, c, steps);

  std::vector<ImageU8> tiles;
  tiles.reserve(3 + steps);
  tiles.push_back(quantize(tgt));
  tiles.push_back(quantize(a));
  tiles.push_back(quantize(c));
  for (const Tensor<float>& img : strip) tiles.push_back(quantize(img));

  char name[128];
  std::snprintf(name, sizeof name, "interp-%016llx-t%zu-a%zu-b%zu.png",
                static_cast<unsigned long long>(file_fingerprint(checkpoint)),
                target_index, source_a, source_b);
  fs::create_directories(out_dir);
  const std::string out = (fs::path(out_dir) / name).string();
  save_png(out, compose_grid(tiles, 1, tiles.size()));
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

// ---- export-features ---------------------------------------------------

int cmd_export_features(const std::string& checkpoint, const DataPaths& dpaths,
                        const std::string& domain, const std::string& which,
                        const std::string& out) {
  const Model<float> model = load_model(checkpoint);
  Domain d;
  if (domain == "source")
    d = Domain::source;
  else if (domain == "target")
    d = Domain::target;
  else
    throw std::runtime_error("unknown domain \"" + domain +
                             "\" (expected source or target)");
  const DatasetManifest m = load_domain(dpaths, d);
  check_compatible(model, m, "export-features");
  if (const fs::path dir = fs::path(out).parent_path(); !dir.empty())
    fs::create_directories(dir);
  export_features(model, m, feature_kind_from_name(which), out);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-domain AU adaptation on procedural toy faces"};
  app.require_subcommand(1);

  ConfigArgs cargs;
  DataPaths dpaths;
  std::string out, checkpoint, resume_from, fid_reference;
  std::string domain = "source", which = "au";
  std::uint64_t seed = 1;
  std::size_t n = 4, pairs = 200, fid_samples = 2000;
  std::size_t target_index = 0, source_a = 0, source_b = 1, steps = 8;

  CLI::App* gen = app.add_subcommand("gen-data",
                                     "render both toy-face domains");
  add_config_args(gen, cargs);
  add_data_args(gen, dpaths);
  gen->add_option("--seed", seed, "master seed for the renderer");

  CLI::App* train = app.add_subcommand("train", "run the training loop");
  add_config_args(train, cargs);
  add_data_args(train, dpaths);
  train->add_option("--out", out, "run directory to create")->required();
  train->add_option("--resume", resume_from, "checkpoint to resume from");
  bool no_icl = false, no_fcl = false, source_only = false;
  std::uint64_t train_seed = 0;
  std::size_t epochs = 0;
  train->add_flag("--no-icl", no_icl, "disable image-level contrast");
  train->add_flag("--no-fcl", no_fcl, "disable feature-level contrast");
  train->add_flag("--source-only", source_only,
                  "supervised source baseline, no adaptation");
  train->add_option("--seed", train_seed, "training seed override");
  train->add_option("--epochs", epochs, "epoch count override");

  CLI::App* eval = app.add_subcommand("eval",
                                      "score a checkpoint on the target");
  add_data_args(eval, dpaths);
  eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate")
      ->required();
  eval->add_option("--out", out, "report directory to create")->required();
  eval->add_option("--fid-reference", fid_reference,
                   "reference checkpoint whose AU encoder scores FID")
      ->required();
  eval->add_option("--pairs", pairs, "swap-fidelity pair count");
  eval->add_option("--fid-samples", fid_samples, "FID sample count");
  eval->add_option("--seed", seed, "sampling seed");

  CLI::App* grid = app.add_subcommand("synth-grid",
                                      "cross-domain synthesis image grid");
  add_data_args(grid, dpaths);
  grid->add_option("--checkpoint", checkpoint, "trained checkpoint")
      ->required();
  grid->add_option("--out", out, "output PNG path")->required();
  grid->add_option("--n", n, "number of pairs (rows)")
      ->check(CLI::PositiveNumber);
  grid->add_option("--seed", seed, "pair-sampling seed");

  CLI::App* interp = app.add_subcommand("interpolate",
                                        "AU interpolation strip");
  add_data_args(interp, dpaths);
  interp->add_option("--checkpoint", checkpoint, "trained checkpoint")
      ->required();
  interp->add_option("--out", out, "output directory")->required();
  interp->add_option("--target-index", target_index, "target record index");
  interp->add_option("--source-a", source_a, "first source record index");
  interp->add_option("--source-b", source_b, "second source record index");
  interp->add_option("--steps", steps, "interpolation steps");

  CLI::App* exp = app.add_subcommand("export-features",
                                     "dump encoder features as CSV");
  add_data_args(exp, dpaths);
  exp->add_option("--checkpoint", checkpoint, "trained checkpoint")
      ->required();
  exp->add_option("--domain", domain, "which dataset to encode")
      ->check(CLI::IsMember({"source", "target"}));
  exp->add_option("--which", which, "feature head: au or dm")
      ->check(CLI::IsMember({"au", "dm"}));
  exp->add_option("--out", out, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(cargs, dpaths, seed);
    if (train->parsed()) {
      if (no_icl) cargs.sets.push_back("disable_icl=true");
      if (no_fcl) cargs.sets.push_back("disable_fcl=true");
      if (source_only) cargs.sets.push_back("source_only=true");
      if (train->count("--seed"))
        cargs.sets.push_back("seed=" + std::to_string(train_seed));
      if (train->count("--epochs"))
        cargs.sets.push_back("epochs=" + std::to_string(epochs));
      return cmd_train(cargs, dpaths, out, resume_from);
    }
    if (eval->parsed())
      return cmd_eval(checkpoint, dpaths, out, fid_reference, pairs,
                      fid_samples, seed);
    if (grid->parsed())
      return cmd_synth_grid(checkpoint, dpaths, out, n, seed);
    if (interp->parsed())
      return cmd_interpolate(checkpoint, dpaths, out, target_index, source_a,
                             source_b, steps);
    if (exp->parsed())
      return cmd_export_features(checkpoint, dpaths, domain, which, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "auda: %s\n", e.what());
    return 1;
  }
  return 1;
}
