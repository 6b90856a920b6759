#pragma once

// Loads a command's output directory with wall-clock fields removed, so two
// runs can be compared byte for byte.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace outputs {

inline bool is_wall(const std::string& name) { return name.rfind("wall_", 0) == 0; }

inline void strip_json(nlohmann::ordered_json& j) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end();) {
      if (is_wall(it.key())) {
        it = j.erase(it);
      } else {
        strip_json(it.value());
        ++it;
      }
    }
  } else if (j.is_array()) {
    for (auto& e : j) strip_json(e);
  }
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

inline std::string strip_csv(const std::string& text) {
  std::stringstream in(text);
  std::string line, out;
  std::vector<bool> keep;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      out += line + "\n";
      continue;
    }
    const std::vector<std::string> cells = split(line);
    if (header) {
      for (const auto& c : cells) keep.push_back(!is_wall(c));
      header = false;
    }
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (i >= keep.size() || keep[i]) out += cells[i] + ",";
    out += "\n";
  }
  return out;
}

inline std::string read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::map<std::string, std::string> load_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    std::string text = read(entry.path());
    if (entry.path().extension() == ".json") {
      auto j = nlohmann::ordered_json::parse(text);
      strip_json(j);
      text = j.dump(2);
    } else if (entry.path().extension() == ".csv") {
      text = strip_csv(text);
    }
    files[name] = text;
  }
  return files;
}

// Names of files that differ or exist on one side only.
inline std::vector<std::string> differences(const std::map<std::string, std::string>& a,
                                            const std::map<std::string, std::string>& b) {
  std::vector<std::string> diff;
  for (const auto& [name, text] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != text) diff.push_back(name);
  }
  for (const auto& [name, text] : b)
    if (!a.count(name)) diff.push_back(name);
  return diff;
}

}  // namespace outputs
