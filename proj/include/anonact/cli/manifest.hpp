#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace anonact::cli {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct Artifact {
  std::string path;  // relative to the run directory
  std::string sha256;
  bool operator==(const Artifact&) const = default;
};

enum class StageStatus { complete, failed };
std::string to_string(StageStatus s);

struct StageRecord {
  std::string name;
  std::string config_hash;  // stage config plus input artifact hashes
  StageStatus status = StageStatus::complete;
  std::string started;
  std::string finished;
  std::vector<Artifact> inputs;
  std::vector<Artifact> outputs;
  std::string message;
};

struct RunManifest {
  std::string experiment;
  std::uint64_t seed = 0;
  std::map<std::string, std::uint64_t> seeds;  // per-stage seeds derived from `seed`
  std::string config_path;  // relative; resolved config written by the pipeline
  std::vector<StageRecord> stages;

  const StageRecord* find(const std::string& stage) const;
  void put(StageRecord record);  // replaces a record of the same name

  // Every artifact of every complete stage exists with its stored hash.
  bool verify(const std::filesystem::path& run_dir) const;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

std::string utc_timestamp();

}  // namespace anonact::cli
