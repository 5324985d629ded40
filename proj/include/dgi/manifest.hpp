#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace dgi {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_hex(const std::string& bytes);

struct RunManifest {
  std::string command;
  nlohmann::ordered_json config;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;   // role -> path
  std::vector<std::pair<std::string, std::string>> outputs;  // role -> path
  double duration_seconds = 0.0;
};

/// Serializes the manifest with a checksum for every input and output file.
nlohmann::ordered_json manifest_json(const RunManifest& m);
/// Writes to `path` through a temporary file and a rename.
void write_manifest(const std::string& path, const RunManifest& m);
/// Writes text to `path` through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace dgi
