#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "depthkit/depthio.hpp"
#include "depthkit/error.hpp"
#include "depthkit/util/atomic_file.hpp"

namespace depthkit {
namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& raw) {
  std::filesystem::path p(raw);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  std::vector<ManifestEntry> entries;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (is_blank(line)) continue;

    auto fail = [line_no](const std::string& what) -> FormatError {
      return FormatError("manifest line " + std::to_string(line_no) + ": " + what);
    };
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw fail("expected a JSON object");

    ManifestEntry entry;
    try {
      entry.id = obj.at("id").get<std::string>();
      entry.depth_path = resolve(base_dir, obj.at("depth_path").get<std::string>());
      const std::string format = obj.at("format").get<std::string>();
      try {
        entry.format = parse_depth_format(format);
      } catch (const ConfigError&) {
        throw fail("unknown format \"" + format + "\" (expected pfm or png16)");
      }
      entry.depth_scale = obj.value("depth_scale", 1.0);
      entry.dataset = obj.value("dataset", std::string());
      if (auto it = obj.find("rgb_path"); it != obj.end() && !it->is_null()) {
        entry.rgb_path = resolve(base_dir, it->get<std::string>());
      }
    } catch (const json::exception& e) {
      throw fail(std::string("bad field: ") + e.what());
    }
    if (entry.id.empty()) throw fail("empty id");
    if (!(entry.depth_scale > 0.0)) throw fail("depth_scale must be positive");
    if (!seen.insert(entry.id).second) throw fail("duplicate id \"" + entry.id + "\"");
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::filesystem::path base = std::filesystem::absolute(path).parent_path();
  return parse_manifest(ss.str(), base);
}

std::string manifest_line(const ManifestEntry& entry) {
  json obj = json::object();
  obj["id"] = entry.id;
  obj["depth_path"] = entry.depth_path.string();
  obj["format"] = std::string(to_string(entry.format));
  obj["depth_scale"] = entry.depth_scale;
  obj["dataset"] = entry.dataset;
  if (entry.rgb_path) obj["rgb_path"] = entry.rgb_path->string();
  return obj.dump();
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::string text;
  for (const auto& e : entries) {
    text += manifest_line(e);
    text += '\n';
  }
  write_file_atomic(path, text);
}

}  // namespace depthkit
