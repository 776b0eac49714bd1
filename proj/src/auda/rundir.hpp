#pragma once
// Immutable run directories: a lock file against concurrent writers, and a
// machine-readable index of every file the run produced.  A directory that
// already carries an index is a completed run and cannot be reused.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace auda {

inline constexpr const char* kRunIndexName = "run-index.json";
inline constexpr const char* kRunLockName = ".lock";

class RunDirectory {
 public:
  // Creates the directory (parents included), refuses one that already
  // holds a run index, and takes the lock.  The lock is released on
  // finalize() or destruction; the index is only written by finalize().
  static RunDirectory create(const std::string& path);

  RunDirectory(RunDirectory&& other) noexcept;
  RunDirectory& operator=(RunDirectory&&) = delete;
  RunDirectory(const RunDirectory&) = delete;
  ~RunDirectory();

  const std::string& path() const { return path_; }
  std::string file(const std::string& relative) const;

  // Registers one output file (path relative to the run directory).
  void add(const std::string& relative, const std::string& kind);

  // Writes the run index over the registered outputs and releases the lock.
  void finalize();
  bool finalized() const { return finalized_; }

 private:
  RunDirectory() = default;
  void release_lock();

  std::string path_;
  std::vector<std::pair<std::string, std::string>> outputs_;
  bool locked_ = false;
  bool finalized_ = false;
};

// FNV-1a over the file's bytes; used to stamp output filenames with the
// identity of the checkpoint that produced them.
std::uint64_t file_fingerprint(const std::string& path);

}  // namespace auda
