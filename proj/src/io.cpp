#include "sympmor/io.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <openssl/evp.h>

#include "sympmor/errors.hpp"
#include "sympmor/version.hpp"

namespace sympmor {

namespace detail {
void warn(const std::string& message) { std::clog << "warning: " << message << '\n'; }
}  // namespace detail

namespace io {

namespace fs = std::filesystem;

std::string format_double(double x) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", x);
  return buf.data();
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_matrix_market(const fs::path& path, const Mat<double>& m,
                         const std::vector<std::string>& comments) {
  std::ofstream out = open_out(path);
  out << "%%MatrixMarket matrix array real general\n";
  for (const auto& c : comments) out << "% " << c << '\n';
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) out << format_double(m(i, j)) << '\n';
}

Mat<double> read_matrix_market(const fs::path& path, std::vector<std::string>* comments) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket matrix array real general", 0) != 0)
    throw ConfigError(path.string() + ": not a MatrixMarket real array file");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] != '%') break;
    if (comments) comments->push_back(line.size() > 2 ? line.substr(2) : std::string());
  }
  std::istringstream size_line(line);
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  if (!(size_line >> rows >> cols) || rows < 0 || cols < 0)
    throw ConfigError(path.string() + ": bad size line");
  Mat<double> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      if (!(in >> m(i, j))) throw ConfigError(path.string() + ": truncated data");
  return m;
}

void write_snapshots(const fs::path& path, const SnapshotSet<double>& snapshots) {
  std::vector<std::string> comments;
  comments.reserve(snapshots.times().size());
  for (double t : snapshots.times()) comments.push_back("time " + format_double(t));
  write_matrix_market(path, snapshots.states(), comments);
}

SnapshotSet<double> read_snapshots(const fs::path& path) {
  std::vector<std::string> comments;
  Mat<double> states = read_matrix_market(path, &comments);
  std::vector<double> times;
  for (const auto& c : comments)
    if (c.rfind("time ", 0) == 0) times.push_back(std::stod(c.substr(5)));
  if (static_cast<Eigen::Index>(times.size()) != states.cols())
    throw ConfigError(path.string() + ": snapshot times missing");
  return SnapshotSet<double>(std::move(times), std::move(states));
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw ShapeError("write_csv: header and columns differ");
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns)
    if (c.size() != rows) throw ShapeError("write_csv: columns differ in length");
  std::ofstream out = open_out(path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << format_double(columns[j][i]);
    out << '\n';
  }
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xf];
  }
  return hex;
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& value) {
  std::ofstream out = open_out(path);
  out << value.dump(2) << '\n';
}

void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  Json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("--set: empty path segment in '" + key + "'");
    if (!node->is_object()) throw ConfigError("--set: '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

void Manifest::add_file(const std::string& relative_path) {
  files_.emplace_back(relative_path, sha256_file(dir_ / relative_path));
}

void Manifest::add_timing(const std::string& key, double seconds) { timings_[key] = seconds; }

void Manifest::write(const std::string& name) const {
  Json files = Json::array();
  for (const auto& [p, h] : files_) files.push_back({{"path", p}, {"sha256", h}});
  Json doc = {{"version", kVersion}, {"config", config_}, {"files", files}, {"timings", timings_}};
  write_json(dir_ / name, doc);
}

std::vector<std::string> Manifest::verify(const fs::path& manifest_path) {
  const Json doc = read_json(manifest_path);
  const fs::path dir = manifest_path.parent_path();
  std::vector<std::string> problems;
  if (!doc.contains("files") || !doc["files"].is_array()) {
    problems.push_back("manifest has no file list");
    return problems;
  }
  for (const auto& f : doc["files"]) {
    const std::string p = f.value("path", "");
    const fs::path full = dir / p;
    if (!fs::exists(full)) {
      problems.push_back(p + ": missing");
      continue;
    }
    if (sha256_file(full) != f.value("sha256", "")) problems.push_back(p + ": hash mismatch");
  }
  return problems;
}

}  // namespace io
}  // namespace sympmor
