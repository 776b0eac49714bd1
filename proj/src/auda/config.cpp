#include "auda/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace auda {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad value for " + key + ": " + v);
  }
  if (used != v.size())
    throw std::invalid_argument("config: bad value for " + key + ": " + v);
  return x;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x;
  try {
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad value for " + key + ": " + v);
  }
  if (used != v.size() || v[0] == '-')
    throw std::invalid_argument("config: bad value for " + key + ": " + v);
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

std::vector<double> parse_real_list(const std::string& key,
                                    const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
  if (out.empty())
    throw std::invalid_argument("config: empty list for " + key);
  return out;
}

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void set_key(Config& cfg, const std::string& key, const std::string& value) {
  TrainConfig& t = cfg.train;
  GenSettings& g = cfg.gen;
  if (key == "gamma1") t.gamma1 = parse_real(key, value);
  else if (key == "gamma2") t.gamma2 = parse_real(key, value);
  else if (key == "gamma3") t.gamma3 = parse_real(key, value);
  else if (key == "gamma4") t.gamma4 = parse_real(key, value);
  else if (key == "lambda") t.lambda = parse_real(key, value);
  else if (key == "tau") t.tau = parse_real(key, value);
  else if (key == "alpha") t.alpha = parse_real(key, value);
  else if (key == "batch_pairs") t.batch_pairs = parse_uint(key, value);
  else if (key == "learning_rate") t.learning_rate = parse_real(key, value);
  else if (key == "beta1") t.beta1 = parse_real(key, value);
  else if (key == "beta2") t.beta2 = parse_real(key, value);
  else if (key == "epochs") t.epochs = parse_uint(key, value);
  else if (key == "d_au") t.d_au = parse_uint(key, value);
  else if (key == "d_dm") t.d_dm = parse_uint(key, value);
  else if (key == "d_proj") t.d_proj = parse_uint(key, value);
  else if (key == "num_au") t.num_au = parse_uint(key, value);
  else if (key == "seed") t.seed = parse_uint(key, value);
  else if (key == "disable_icl") t.disable_icl = parse_bool(key, value);
  else if (key == "disable_fcl") t.disable_fcl = parse_bool(key, value);
  else if (key == "source_only") t.source_only = parse_bool(key, value);
  else if (key == "fcl_per_anchor") t.fcl_per_anchor = parse_uint(key, value);
  else if (key == "checkpoint_every_epochs")
    t.checkpoint_every_epochs = parse_uint(key, value);
  else if (key == "gen_subjects") g.subjects = parse_uint(key, value);
  else if (key == "gen_frames_per_subject")
    g.frames_per_subject = parse_uint(key, value);
  else if (key == "gen_marginals") g.marginals = parse_real_list(key, value);
  else if (key == "gen_height") g.height = parse_uint(key, value);
  else if (key == "gen_width") g.width = parse_uint(key, value);
  else
    throw std::invalid_argument("config: unknown key: " + key);
}

}  // namespace

LossWeights TrainConfig::weights() const {
  LossWeights w;
  w.gamma1 = gamma1;
  w.gamma2 = gamma2;
  w.gamma3 = gamma3;
  w.gamma4 = gamma4;
  w.lambda = lambda;
  w.tau = tau;
  w.alpha = alpha;
  return w;
}

ModelConfig TrainConfig::model() const {
  ModelConfig m;
  m.num_au = num_au;
  m.d_au = d_au;
  m.d_dm = d_dm;
  m.d_proj = d_proj;
  return m;
}

void TrainConfig::validate() const {
  weights().validate();
  model().validate();
  if (batch_pairs < 2)
    throw std::invalid_argument("TrainConfig: batch_pairs must be at least 2");
  if (epochs == 0)
    throw std::invalid_argument("TrainConfig: epochs must be positive");
  if (!(learning_rate > 0))
    throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw std::invalid_argument("TrainConfig: betas must lie in [0,1)");
  if (num_au < 3 || num_au > 10)
    throw std::invalid_argument("TrainConfig: num_au out of range [3,10]");
  if (fcl_per_anchor == 0)
    throw std::invalid_argument("TrainConfig: fcl_per_anchor must be positive");
  if (checkpoint_every_epochs == 0)
    throw std::invalid_argument(
        "TrainConfig: checkpoint_every_epochs must be positive");
}

Config default_config() { return Config{}; }

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  Config cfg;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second)
      throw std::invalid_argument("config: duplicate key: " + key);
    set_key(cfg, key, value);
  }
  return cfg;
}

void save_config(const Config& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  const TrainConfig& t = cfg.train;
  const GenSettings& g = cfg.gen;
  out << "gamma1 = " << format_real(t.gamma1) << "\n"
      << "gamma2 = " << format_real(t.gamma2) << "\n"
      << "gamma3 = " << format_real(t.gamma3) << "\n"
      << "gamma4 = " << format_real(t.gamma4) << "\n"
      << "lambda = " << format_real(t.lambda) << "\n"
      << "tau = " << format_real(t.tau) << "\n"
      << "alpha = " << format_real(t.alpha) << "\n"
      << "batch_pairs = " << t.batch_pairs << "\n"
      << "learning_rate = " << format_real(t.learning_rate) << "\n"
      << "beta1 = " << format_real(t.beta1) << "\n"
      << "beta2 = " << format_real(t.beta2) << "\n"
      << "epochs = " << t.epochs << "\n"
      << "d_au = " << t.d_au << "\n"
      << "d_dm = " << t.d_dm << "\n"
      << "d_proj = " << t.d_proj << "\n"
      << "num_au = " << t.num_au << "\n"
      << "seed = " << t.seed << "\n"
      << "disable_icl = " << (t.disable_icl ? "true" : "false") << "\n"
      << "disable_fcl = " << (t.disable_fcl ? "true" : "false") << "\n"
      << "source_only = " << (t.source_only ? "true" : "false") << "\n"
      << "fcl_per_anchor = " << t.fcl_per_anchor << "\n"
      << "checkpoint_every_epochs = " << t.checkpoint_every_epochs << "\n";
  out << "gen_subjects = " << g.subjects << "\n"
      << "gen_frames_per_subject = " << g.frames_per_subject << "\n";
  out << "gen_marginals = ";
  for (std::size_t i = 0; i < g.marginals.size(); ++i)
    out << (i ? "," : "") << format_real(g.marginals[i]);
  out << "\n";
  out << "gen_height = " << g.height << "\n"
      << "gen_width = " << g.width << "\n";
  if (!out) throw std::runtime_error("config write failed: " + path);
}

void apply_override(Config& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override is not key=value: " + assignment);
  set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

}  // namespace auda
