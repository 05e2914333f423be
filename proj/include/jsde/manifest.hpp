#pragma once

// Result files plus a manifest of their content hashes. Needs libcrypto.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/version.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "jsde/errors.hpp"
#include "jsde/version.hpp"

namespace jsde {

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct OutputFile {
  std::string name;
  std::uint64_t bytes = 0;
  std::string sha256;
};

/// Collects the files of one run under a directory and writes manifest.json last.
class OutputSet {
 public:
  OutputSet(std::filesystem::path dir, std::string format) : dir_(std::move(dir)), format_(std::move(format)) {
    std::filesystem::create_directories(dir_);
  }

  bool json() const { return format_ == "json" || format_ == "both"; }
  bool csv() const { return format_ == "csv" || format_ == "both"; }
  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<OutputFile>& files() const { return files_; }

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot write " + path.string());
    os << content;
    os.close();
    if (!os) throw FormatError("write failed: " + path.string());
    files_.push_back({name, content.size(), sha256_hex(content)});
  }

  void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

  /// meta is copied into the manifest; outputs are appended in write order.
  nlohmann::json write_manifest(nlohmann::json meta) const {
    meta["versions"] = {{"jsde", JSDE_VERSION_STRING},
                        {"noise_format", 1},
                        {"compiler", __VERSION__},
                        {"boost", BOOST_LIB_VERSION},
                        {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                     std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                     std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    meta["outputs"] = nlohmann::json::array();
    for (const auto& f : files_) meta["outputs"].push_back({{"file", f.name}, {"bytes", f.bytes}, {"sha256", f.sha256}});
    std::ofstream os(dir_ / "manifest.json", std::ios::binary);
    os << meta.dump(2) << "\n";
    if (!os) throw FormatError("cannot write manifest");
    return meta;
  }

 private:
  std::filesystem::path dir_;
  std::string format_;
  std::vector<OutputFile> files_;
};

}  // namespace jsde
