#include "blenda/manifest.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "blenda/error.hpp"

namespace blenda {

using nlohmann::json;

std::string_view to_string(SampleRole role) {
  switch (role) {
    case SampleRole::source: return "source";
    case SampleRole::translated: return "translated";
    case SampleRole::blended: return "blended";
    case SampleRole::target: return "target";
    case SampleRole::source_target_mix: return "source_target_mix";
  }
  return "unknown";
}

SampleRole parse_role(std::string_view text) {
  for (auto role : {SampleRole::source, SampleRole::translated, SampleRole::blended,
                    SampleRole::target, SampleRole::source_target_mix}) {
    if (to_string(role) == text) {
      return role;
    }
  }
  throw InvalidArgument("unknown sample role '" + std::string(text) + "'");
}

void SampleRecord::validate() const {
  auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (!in_unit(domain_label) || !in_unit(delta_at_creation)) {
    throw InvalidArgument("record " + source_path + ": labels must lie in [0, 1]");
  }
  switch (role) {
    case SampleRole::source:
      if (domain_label != 0.0) {
        throw InvalidArgument("source record " + source_path + " must have domain_label 0");
      }
      break;
    case SampleRole::target:
      if (domain_label != 1.0) {
        throw InvalidArgument("target record " + source_path + " must have domain_label 1");
      }
      break;
    case SampleRole::blended:
    case SampleRole::source_target_mix:
      if (domain_label != delta_at_creation) {
        throw InvalidArgument("mixed record " + source_path +
                              " must have domain_label equal to delta_at_creation");
      }
      break;
    case SampleRole::translated:
      break;
  }
}

namespace {

json to_json(const SampleRecord& r) {
  json annotations = json::array();
  for (const auto& a : r.annotations) {
    annotations.push_back({a.row, a.col, a.class_id});
  }
  json j = {{"role", std::string(to_string(r.role))},
            {"source_path", r.source_path},
            {"translated_path", r.translated_path},
            {"annotations", std::move(annotations)},
            {"domain_label", r.domain_label},
            {"delta_at_creation", r.delta_at_creation}};
  if (r.blended_path) {
    j["blended_path"] = *r.blended_path;
  }
  return j;
}

SampleRecord from_json(const json& j) {
  SampleRecord r;
  r.role = parse_role(j.at("role").get<std::string>());
  r.source_path = j.at("source_path").get<std::string>();
  r.translated_path = j.at("translated_path").get<std::string>();
  if (auto it = j.find("blended_path"); it != j.end()) {
    r.blended_path = it->get<std::string>();
  }
  for (const auto& a : j.at("annotations")) {
    if (!a.is_array() || a.size() != 3) {
      throw IoError("annotation entries must be [row, col, class_id] triples");
    }
    r.annotations.push_back({a[0].get<int>(), a[1].get<int>(), a[2].get<int>()});
  }
  r.domain_label = j.at("domain_label").get<double>();
  r.delta_at_creation = j.at("delta_at_creation").get<double>();
  return r;
}

}  // namespace

void write_manifest(const std::filesystem::path& path, std::span<const SampleRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open manifest for writing: " + path.string());
  }
  out << json{{"schema_version", kManifestSchemaVersion}}.dump() << '\n';
  for (const auto& r : records) {
    r.validate();
    out << to_json(r).dump() << '\n';
  }
  if (!out) {
    throw IoError("failed writing manifest " + path.string());
  }
}

std::vector<SampleRecord> read_manifest(const std::filesystem::path& path, bool check_files) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open manifest: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError("empty manifest: " + path.string());
  }
  try {
    const json header = json::parse(line);
    if (!header.is_object() || header.value("schema_version", -1) != kManifestSchemaVersion) {
      throw IoError("manifest schema mismatch in " + path.string() + ": expected schema_version " +
                    std::to_string(kManifestSchemaVersion));
    }
  } catch (const json::exception& e) {
    throw IoError("malformed manifest header in " + path.string() + ": " + e.what());
  }

  const auto base = path.parent_path();
  std::vector<SampleRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    SampleRecord record;
    try {
      record = from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    record.validate();
    if (check_files) {
      for (const std::string* p : {&record.source_path, &record.translated_path,
                                   record.blended_path ? &*record.blended_path : nullptr}) {
        if (p != nullptr && !p->empty() && !std::filesystem::exists(base / *p)) {
          throw IoError("manifest references missing file: " + (base / *p).string());
        }
      }
    }
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace blenda
