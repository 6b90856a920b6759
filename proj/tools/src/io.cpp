#include "dynnet/tools/io.hpp"

#include "dynnet/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace dynnet::tools {

namespace fs = std::filesystem;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) cells.push_back(cell);
  if (!line.empty() && line.back() == sep) cells.emplace_back();
  return cells;
}

double parse_number(const std::string& text, const std::string& where) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return HUGE_VAL;
  if (text == "-inf") return -HUGE_VAL;
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError("malformed number '" + text + "' in " + where);
  return value;
}

}  // namespace

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header)
    : out_(open_output(path)), columns_(header.size()) {
  row(header);
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_number(v));
  row(cells);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw std::logic_error("CSV row width does not match header");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ConfigError("no column '" + name + "'");
  const auto idx = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(parse_number(r.at(idx), "column " + name));
  return out;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  CsvTable table;
  std::string line;
  if (std::getline(in, line)) table.header = split(line, ',');
  while (std::getline(in, line))
    if (!line.empty()) table.rows.push_back(split(line, ','));
  return table;
}

void write_json(const fs::path& path, const Json& value) {
  write_text(path, value.dump(2) + "\n");
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_output(path);
  out << text;
}

void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint) {
  Json j;
  j["schema"] = kCheckpointSchema;
  j["system"] = checkpoint.system;
  j["z0"] = std::vector<double>(checkpoint.z0.begin(), checkpoint.z0.end());
  j["T"] = checkpoint.horizon;
  j["layer_sizes"] = checkpoint.params.layer_sizes;
  j["seed"] = checkpoint.params.seed;
  j["iterations"] = checkpoint.iterations;
  const Vec w = checkpoint.params.flatten();
  j["weights"] = std::vector<double>(w.begin(), w.end());
  write_json(path, j);
}

Checkpoint load_checkpoint(const fs::path& path) {
  const Json j = read_json(path);
  try {
    if (j.at("schema").get<std::string>() != kCheckpointSchema)
      throw ConfigError(path.string() + ": unsupported checkpoint schema '" +
                        j.at("schema").get<std::string>() + "'");
    Checkpoint c;
    c.system = j.at("system").get<std::string>();
    const auto z0 = j.at("z0").get<std::vector<double>>();
    c.z0 = Eigen::Map<const Vec>(z0.data(), static_cast<Eigen::Index>(z0.size()));
    c.horizon = j.at("T").get<double>();
    c.iterations = j.at("iterations").get<int>();
    const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
    c.params = init_params(sizes, j.at("seed").get<std::uint64_t>());
    const auto w = j.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != c.params.size())
      throw ConfigError(path.string() + ": weight count " + std::to_string(w.size()) +
                        " does not match layer sizes");
    c.params.assign(Eigen::Map<const Vec>(w.data(), static_cast<Eigen::Index>(w.size())));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": malformed checkpoint: " + e.what());
  }
}

void save_snapshots(const fs::path& path, const SnapshotMatrix& snapshots) {
  std::ofstream out = open_output(path);
  out << "#observable=" << observable_name(snapshots.observable)
      << ";stride=" << snapshots.iter_stride << ";first_iter=" << snapshots.first_iter
      << ";source_run=" << snapshots.source_run << '\n';
  for (Eigen::Index i = 0; i < snapshots.columns.rows(); ++i) {
    for (Eigen::Index j = 0; j < snapshots.columns.cols(); ++j) {
      if (j) out << ',';
      out << format_number(snapshots.columns(i, j));
    }
    out << '\n';
  }
}

SnapshotMatrix load_snapshots(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read snapshot file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty() || line[0] != '#')
    throw ConfigError(path.string() + ": missing snapshot header line");
  SnapshotMatrix s;
  bool have_observable = false;
  for (const std::string& field : split(line.substr(1), ';')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ConfigError(path.string() + ": bad header field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "observable") {
      s.observable = parse_observable(value);
      have_observable = true;
    } else if (key == "stride") {
      s.iter_stride = static_cast<int>(parse_number(value, path.string()));
    } else if (key == "first_iter") {
      s.first_iter = static_cast<int>(parse_number(value, path.string()));
    } else if (key == "source_run") {
      s.source_run = value;
    }
  }
  if (!have_observable) throw ConfigError(path.string() + ": header lacks observable tag");
  if (s.iter_stride < 1) throw ConfigError(path.string() + ": stride must be positive");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const std::string& cell : split(line, ',')) row.push_back(parse_number(cell, path.string()));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError(path.string() + ": ragged snapshot rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path.string() + ": no snapshot rows");
  s.columns.resize(static_cast<Eigen::Index>(rows.size()),
                   static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      s.columns(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return s;
}

}  // namespace dynnet::tools
