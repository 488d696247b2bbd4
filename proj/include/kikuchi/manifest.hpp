#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kikuchi/version.hpp"

namespace kikuchi {

inline std::uint64_t fnv1a64_file(const std::string& path, std::uint64_t* bytes_out = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checksum: cannot open " + path);
  std::uint64_t h = 1469598103934665603ull;
  std::uint64_t bytes = 0;
  char buf[65536];
  while (is) {
    is.read(buf, sizeof(buf));
    const std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    bytes += static_cast<std::uint64_t>(got);
  }
  if (bytes_out) *bytes_out = bytes;
  return h;
}

// Every output file gets a sibling <path>.manifest.json recording the verb,
// the full parameter set, seeds, and the artifact checksum. Re-running the
// manifest's command reproduces the artifact bit-identically single-threaded.
inline void write_manifest(const std::string& artifact_path, const std::string& verb,
                           const std::vector<std::pair<std::string, std::string>>& params,
                           double wall_time_s) {
  std::uint64_t bytes = 0;
  const std::uint64_t h = fnv1a64_file(artifact_path, &bytes);
  std::ostringstream os;
  os << "{\n  \"verb\": \"" << verb << "\",\n  \"version\": \"" << kVersion << "\",\n";
  os << "  \"params\": {";
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i) os << ", ";
    os << "\"" << params[i].first << "\": \"" << params[i].second << "\"";
  }
  os << "},\n";
  os << "  \"artifact\": {\"path\": \"" << artifact_path << "\", \"bytes\": " << bytes
     << ", \"fnv1a64\": \"" << std::hex << h << std::dec << "\"},\n";
  os << "  \"wall_time_s\": " << wall_time_s << "\n}\n";
  std::ofstream out(artifact_path + ".manifest.json", std::ios::binary);
  out << os.str();
}

} // namespace kikuchi
