#pragma once

#include "dynnet/koopman.hpp"
#include "dynnet/mlp.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace dynnet::tools {

using Json = nlohmann::ordered_json;

/// Shortest decimal that parses back to the same double.
std::string format_number(double x);

class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);
  void row(const std::vector<std::string>& cells);

private:
  std::ofstream out_;
  std::size_t columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<double> column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const Json& value);
Json read_json(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

inline constexpr const char* kCheckpointSchema = "dynnet.checkpoint/1";

struct Checkpoint {
  std::string system;
  Vec z0;
  double horizon = 0.0;
  MlpParams params;
  int iterations = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// One header line `#observable=...;stride=...;first_iter=...;source_run=...`,
/// then one row per component and one column per recorded iteration.
void save_snapshots(const std::filesystem::path& path, const SnapshotMatrix& snapshots);
SnapshotMatrix load_snapshots(const std::filesystem::path& path);

}  // namespace dynnet::tools
