#include "pcrowd/run_store.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <sstream>

#include "pcrowd/common.hpp"

namespace pcrowd {

using nlohmann::json;

std::uint64_t prompt_hash(std::string_view prompt_text) { return fnv1a64(prompt_text); }

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json to_json(const RunRecord& r) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.prompt_hash));
  return json{{"run_id", r.run_id},
              {"model", r.model},
              {"persona_id", r.persona_id ? json(*r.persona_id) : json(nullptr)},
              {"template", std::string(to_string(r.template_id))},
              {"instance_id", r.instance_id},
              {"raw", r.raw},
              {"label", r.label.text()},
              {"ts", r.ts},
              {"prompt_hash", hash}};
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.model = j.at("model").get<std::string>();
  if (!j.at("persona_id").is_null()) r.persona_id = j.at("persona_id").get<std::string>();
  r.template_id = parse_template_id(j.at("template").get<std::string>());
  r.instance_id = j.at("instance_id").get<std::string>();
  r.raw = j.at("raw").get<std::string>();
  r.label = label_from_text(j.at("label").get<std::string>(), schema_for(r.template_id).kind);
  r.ts = j.at("ts").get<std::string>();
  const auto hash = j.at("prompt_hash").get<std::string>();
  r.prompt_hash = std::stoull(hash, nullptr, 16);
  return r;
}

std::vector<RunKey> RunManifest::expected() const {
  std::vector<RunKey> out;
  out.reserve(expected_size());
  for (const auto& r : run_ids)
    for (const auto& i : instance_ids) out.emplace_back(r, i);
  return out;
}

void RunManifest::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path);
  out << json{{"experiment", experiment},
              {"config", config_snapshot},
              {"run_ids", run_ids},
              {"instance_ids", instance_ids}}
             .dump(2)
      << '\n';
}

RunManifest RunManifest::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path);
  try {
    json j = json::parse(in);
    RunManifest m;
    m.experiment = j.at("experiment").get<std::string>();
    m.config_snapshot = j.value("config", json::object());
    m.run_ids = j.at("run_ids").get<std::vector<std::string>>();
    m.instance_ids = j.at("instance_ids").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw ValidationError("manifest " + path + ": " + e.what());
  }
}

RunStore::RunStore(std::string path) : RunStore(std::move(path), true) {}

RunStore::RunStore(std::string path, bool writable) : path_(std::move(path)), writable_(writable) {
  load_existing();
  if (writable_) {
    if (dropped_torn_line_) {
      // Rewrite without the torn tail so later appends start on a fresh line.
      std::ofstream rewrite(path_, std::ios::binary | std::ios::trunc);
      for (const auto& r : records_) rewrite << to_json(r).dump() << '\n';
    }
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw IoError("cannot open run store " + path_ + " for appending");
  }
}

RunStore RunStore::open_read_only(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("run store " + path + " does not exist");
  return RunStore(path, false);
}

void RunStore::load_existing() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    if (!terminated) nl = content.size();
    ++line_no;
    const std::string line = content.substr(pos, nl - pos);
    pos = nl + 1;
    if (trim(line).empty()) continue;
    RunRecord r;
    try {
      r = record_from_json(json::parse(line));
    } catch (const std::exception& e) {
      if (!terminated) {
        dropped_torn_line_ = true;
        break;
      }
      throw ValidationError(path_ + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    RunKey key{r.run_id, r.instance_id};
    if (index_.count(key)) {
      throw ValidationError(path_ + ": line " + std::to_string(line_no) + ": duplicate key (" +
                            key.first + ", " + key.second + ")");
    }
    index_.emplace(std::move(key), records_.size());
    records_.push_back(std::move(r));
  }
}

void RunStore::append(const RunRecord& record) {
  if (!writable_) throw ValidationError("run store " + path_ + " is read-only");
  RunKey key{record.run_id, record.instance_id};
  if (index_.count(key)) {
    throw DuplicateRecordError("duplicate record (" + key.first + ", " + key.second + ")");
  }
  // Validates the label against the template schema.
  label_from_text(record.label.text(), schema_for(record.template_id).kind);
  if (record.label.kind != schema_for(record.template_id).kind) {
    throw ValidationError("label kind does not match template " +
                          std::string(to_string(record.template_id)));
  }
  const std::string line = to_json(record).dump() + '\n';
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw IoError("write to run store " + path_ + " failed");
  index_.emplace(std::move(key), records_.size());
  records_.push_back(record);
}

void RunStore::check_prompt_hash(const RunKey& key, std::uint64_t hash) const {
  const RunRecord* r = find(key);
  if (r && r->prompt_hash != hash) {
    throw ValidationError("prompt drift for (" + key.first + ", " + key.second +
                          "): stored prompt hash differs from the current template rendering");
  }
}

const RunRecord* RunStore::find(const RunKey& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &records_[it->second];
}

std::set<RunKey> RunStore::missing(const RunManifest& manifest) const {
  std::set<RunKey> out;
  for (const auto& r : manifest.run_ids)
    for (const auto& i : manifest.instance_ids) {
      RunKey key{r, i};
      if (!index_.count(key)) out.insert(std::move(key));
    }
  return out;
}

}  // namespace pcrowd
