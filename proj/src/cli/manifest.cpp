#include "anonact/cli/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>

#include "anonact/errors.hpp"
#include "json.hpp"

namespace anonact::cli {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw StateError("sha256 initialisation failed");
    }
  }
  void update(const char* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw StateError("sha256 update failed");
  }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw StateError("sha256 final failed");
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StateError("cannot read artifact " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string to_string(StageStatus s) { return s == StageStatus::complete ? "complete" : "failed"; }

const StageRecord* RunManifest::find(const std::string& stage) const {
  for (const auto& s : stages) {
    if (s.name == stage) return &s;
  }
  return nullptr;
}

void RunManifest::put(StageRecord record) {
  for (auto& s : stages) {
    if (s.name == record.name) {
      s = std::move(record);
      return;
    }
  }
  stages.push_back(std::move(record));
}

bool RunManifest::verify(const std::filesystem::path& run_dir) const {
  for (const auto& s : stages) {
    if (s.status != StageStatus::complete) continue;
    for (const auto& a : s.outputs) {
      const auto p = run_dir / a.path;
      if (!std::filesystem::exists(p) || sha256_file(p) != a.sha256) return false;
    }
  }
  return true;
}

namespace {

nlohmann::ordered_json artifacts_json(const std::vector<Artifact>& list) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& a : list) arr.push_back({{"path", a.path}, {"sha256", a.sha256}});
  return arr;
}

std::vector<Artifact> artifacts_from(const nlohmann::json& arr) {
  std::vector<Artifact> out;
  for (const auto& a : arr) out.push_back({a.at("path").get<std::string>(), a.at("sha256").get<std::string>()});
  return out;
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["experiment"] = m.experiment;
  j["seed"] = m.seed;
  j["seeds"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.seeds) j["seeds"][k] = v;
  j["config"] = m.config_path;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : m.stages) {
    j["stages"].push_back({{"name", s.name},
                           {"config_hash", s.config_hash},
                           {"status", to_string(s.status)},
                           {"started", s.started},
                           {"finished", s.finished},
                           {"inputs", artifacts_json(s.inputs)},
                           {"outputs", artifacts_json(s.outputs)},
                           {"message", s.message}});
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StateError("cannot write manifest " + path.string());
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StateError("no manifest at " + path.string());
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.experiment = j.at("experiment").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("seeds").items()) m.seeds[k] = v.get<std::uint64_t>();
    m.config_path = j.at("config").get<std::string>();
    for (const auto& s : j.at("stages")) {
      StageRecord r;
      r.name = s.at("name").get<std::string>();
      r.config_hash = s.at("config_hash").get<std::string>();
      const auto status = s.at("status").get<std::string>();
      if (status != "complete" && status != "failed") throw FormatError("bad stage status " + status);
      r.status = status == "complete" ? StageStatus::complete : StageStatus::failed;
      r.started = s.at("started").get<std::string>();
      r.finished = s.at("finished").get<std::string>();
      r.inputs = artifacts_from(s.at("inputs"));
      r.outputs = artifacts_from(s.at("outputs"));
      r.message = s.value("message", "");
      m.stages.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace anonact::cli
