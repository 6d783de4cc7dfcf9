// MatrixMarket, CSV, JSON config and manifest helpers.
#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sympmor/symplectic.hpp"

namespace sympmor::io {

using Json = nlohmann::ordered_json;

/// Shortest round-tripping text for a double (17 significant digits).
std::string format_double(double x);

/// `%%MatrixMarket matrix array real general`, column-major, one value per
/// line. Extra `% key value` comment lines may precede the size line.
void write_matrix_market(const std::filesystem::path& path, const Mat<double>& m,
                         const std::vector<std::string>& comments = {});
Mat<double> read_matrix_market(const std::filesystem::path& path,
                               std::vector<std::string>* comments = nullptr);

/// Snapshots as MatrixMarket with one `% time <t>` comment per column.
void write_snapshots(const std::filesystem::path& path, const SnapshotSet<double>& snapshots);
SnapshotSet<double> read_snapshots(const std::filesystem::path& path);

/// Columns of equal length under a header row.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& value);

/// Applies `a.b.c=value`. The value is parsed as JSON when possible and kept
/// as a string otherwise.
void apply_override(Json& config, const std::string& assignment);

/// Records produced files with their hashes and verifies them later.
class Manifest {
 public:
  explicit Manifest(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void set_config(Json config) { config_ = std::move(config); }
  void add_file(const std::string& relative_path);
  void add_timing(const std::string& key, double seconds);
  void write(const std::string& name = "manifest.json") const;

  /// Checks every listed file exists and matches its hash; returns the
  /// problems found (empty when all pass).
  static std::vector<std::string> verify(const std::filesystem::path& manifest_path);

 private:
  std::filesystem::path dir_;
  Json config_ = Json::object();
  std::vector<std::pair<std::string, std::string>> files_;
  Json timings_ = Json::object();
};

}  // namespace sympmor::io
