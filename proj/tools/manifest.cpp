#include "manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include "hetattn/error.hpp"
#include "json.hpp"

namespace hetattn::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 init failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  char b[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(b, sizeof(b), "%02x", md[i]);
    hex += b;
  }
  return hex;
}

void Manifest::add_input(const std::filesystem::path& path) { inputs_.push_back(path); }
void Manifest::add_artifact(const std::filesystem::path& path) { artifacts_.push_back(path); }

void Manifest::write(const std::filesystem::path& out) const {
  using nlohmann::ordered_json;
  ordered_json j;
  j["tool"] = "hetattn";
  j["version"] = HETATTN_VERSION;
  j["command"] = command_;
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : config_) cfg[k] = v;
  j["config"] = cfg;
  j["seeds"] = seeds_;
  auto files = [](const std::vector<std::filesystem::path>& paths) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : paths) arr.push_back({{"path", p.generic_string()}, {"sha256", sha256_file(p)}});
    return arr;
  };
  j["inputs"] = files(inputs_);
  j["artifacts"] = files(artifacts_);
  std::ofstream f(out, std::ios::binary);
  if (!f) throw InputError("cannot write " + out.string());
  f << j.dump(2) << "\n";
}

}  // namespace hetattn::cli
