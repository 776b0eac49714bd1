#include "auda/rundir.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace auda {

namespace fs = std::filesystem;

RunDirectory RunDirectory::create(const std::string& path) {
  fs::create_directories(path);
  if (fs::exists(fs::path(path) / kRunIndexName))
    throw std::runtime_error("run directory already holds a completed run: " +
                             path);

  // "x" makes the open fail if the file exists, which is the whole lock.
  const std::string lock = (fs::path(path) / kRunLockName).string();
  std::FILE* f = std::fopen(lock.c_str(), "wx");
  if (!f)
    throw std::runtime_error("run directory is locked by another process: " +
                             path);
  std::fclose(f);

  RunDirectory d;
  d.path_ = path;
  d.locked_ = true;
  return d;
}

RunDirectory::RunDirectory(RunDirectory&& other) noexcept
    : path_(std::move(other.path_)),
      outputs_(std::move(other.outputs_)),
      locked_(other.locked_),
      finalized_(other.finalized_) {
  other.locked_ = false;
}

RunDirectory::~RunDirectory() { release_lock(); }

std::string RunDirectory::file(const std::string& relative) const {
  return (fs::path(path_) / relative).string();
}

void RunDirectory::add(const std::string& relative, const std::string& kind) {
  if (finalized_)
    throw std::logic_error("run directory already finalized: " + path_);
  outputs_.emplace_back(relative, kind);
}

void RunDirectory::finalize() {
  if (finalized_) return;
  nlohmann::ordered_json index;
  index["outputs"] = nlohmann::ordered_json::array();
  for (const auto& [file, kind] : outputs_) {
    nlohmann::ordered_json entry;
    entry["file"] = file;
    entry["kind"] = kind;
    index["outputs"].push_back(entry);
  }
  const std::string tmp = file(std::string(kRunIndexName) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write run index: " + tmp);
    out << index.dump(2) << "\n";
  }
  fs::rename(tmp, file(kRunIndexName));
  finalized_ = true;
  release_lock();
}

void RunDirectory::release_lock() {
  if (!locked_) return;
  std::error_code ec;
  fs::remove(fs::path(path_) / kRunLockName, ec);
  locked_ = false;
}

std::uint64_t file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for fingerprint: " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return h;
}

}  // namespace auda
