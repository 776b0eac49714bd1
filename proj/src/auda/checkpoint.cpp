#include "auda/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace auda {

namespace {

constexpr char kMagic[8] = {'A', 'U', 'D', 'A', 'C', 'K', 'P', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

double get_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  std::string s(get_u64(in), '\0');
  in.read(s.data(), static_cast<std::streamsize>(s.size()));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

void put_tensor(std::ostream& out, const Tensor<float>& t) {
  put_u64(out, t.rank());
  for (std::size_t i = 0; i < t.rank(); ++i) put_u64(out, t.dim(i));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

Tensor<float> get_tensor(std::istream& in) {
  Shape shape(get_u64(in));
  for (std::size_t& d : shape) d = get_u64(in);
  Tensor<float> t(shape);
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return t;
}

void put_store(std::ostream& out, const ParamStore<float>& store) {
  put_u64(out, store.entries.size());
  for (const auto& e : store.entries) {
    put_string(out, e.name);
    put_tensor(out, e.var->value);
  }
}

void load_into_store(std::istream& in, ParamStore<float>& store,
                     const char* which) {
  const std::uint64_t n = get_u64(in);
  if (n != store.entries.size())
    throw std::runtime_error(std::string("checkpoint: ") + which +
                             " parameter count mismatch");
  for (auto& e : store.entries) {
    const std::string name = get_string(in);
    Tensor<float> t = get_tensor(in);
    if (name != e.name)
      throw std::runtime_error("checkpoint: parameter name mismatch, expected " +
                               e.name + " got " + name);
    if (t.shape() != e.var->value.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    e.var->value = std::move(t);
  }
}

void put_adam(std::ostream& out, const Adam<float>& a) {
  put_f64(out, a.lr);
  put_f64(out, a.beta1);
  put_f64(out, a.beta2);
  put_f64(out, a.eps);
  put_u64(out, a.t);
  put_u64(out, a.m.size());
  for (std::size_t i = 0; i < a.m.size(); ++i) {
    put_tensor(out, a.m[i]);
    put_tensor(out, a.v[i]);
  }
}

Adam<float> get_adam(std::istream& in, const ParamStore<float>& store,
                     const char* which) {
  const double lr = get_f64(in);
  const double b1 = get_f64(in);
  const double b2 = get_f64(in);
  const double eps = get_f64(in);
  Adam<float> a(store, lr, b1, b2);
  a.eps = eps;
  a.t = get_u64(in);
  const std::uint64_t n = get_u64(in);
  if (n != a.m.size())
    throw std::runtime_error(std::string("checkpoint: ") + which +
                             " optimizer slot count mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    Tensor<float> m = get_tensor(in);
    Tensor<float> v = get_tensor(in);
    if (m.shape() != a.m[i].shape() || v.shape() != a.v[i].shape())
      throw std::runtime_error(std::string("checkpoint: ") + which +
                               " optimizer slot shape mismatch");
    a.m[i] = std::move(m);
    a.v[i] = std::move(v);
  }
  return a;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainCheckpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof kMagic);
  put_u64(out, static_cast<std::uint64_t>(ck.model.version));
  put_u64(out, ck.model.cfg.num_au);
  put_u64(out, ck.model.cfg.d_au);
  put_u64(out, ck.model.cfg.d_dm);
  put_u64(out, ck.model.cfg.d_proj);
  put_u64(out, ck.model.cfg.image_size);
  put_u64(out, ck.step);
  put_u64(out, ck.epoch);
  put_store(out, ck.model.gen_params);
  put_store(out, ck.model.disc_params);
  put_adam(out, ck.opt_gen);
  put_adam(out, ck.opt_disc);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

TrainCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const std::uint64_t version = get_u64(in);
  if (version != static_cast<std::uint64_t>(kModelVersion))
    throw std::runtime_error("checkpoint model version mismatch");

  ModelConfig cfg;
  cfg.num_au = get_u64(in);
  cfg.d_au = get_u64(in);
  cfg.d_dm = get_u64(in);
  cfg.d_proj = get_u64(in);
  cfg.image_size = get_u64(in);

  TrainCheckpoint ck;
  ck.step = get_u64(in);
  ck.epoch = get_u64(in);
  ck.model = Model<float>::init(cfg, 0);
  load_into_store(in, ck.model.gen_params, "generator");
  load_into_store(in, ck.model.disc_params, "discriminator");
  ck.opt_gen = get_adam(in, ck.model.gen_params, "generator");
  ck.opt_disc = get_adam(in, ck.model.disc_params, "discriminator");
  return ck;
}

}  // namespace auda
