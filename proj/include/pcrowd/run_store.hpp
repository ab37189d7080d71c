#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pcrowd/common.hpp"
#include "pcrowd/labels.hpp"
#include "pcrowd/prompting.hpp"

namespace pcrowd {

struct RunRecord {
  std::string run_id;
  std::string model;
  std::optional<std::string> persona_id;
  TemplateId template_id = TemplateId::T2;
  std::string instance_id;
  std::string raw;
  Label label;
  std::string ts;  // ISO-8601 UTC
  std::uint64_t prompt_hash = 0;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

using RunKey = std::pair<std::string, std::string>;  // (run_id, instance_id)

nlohmann::json to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& j);

std::uint64_t prompt_hash(std::string_view prompt_text);
std::string utc_timestamp();

// Expected keys are the cartesian product run_ids x instance_ids.
struct RunManifest {
  std::string experiment;
  nlohmann::json config_snapshot = nlohmann::json::object();
  std::vector<std::string> run_ids;
  std::vector<std::string> instance_ids;

  std::size_t expected_size() const { return run_ids.size() * instance_ids.size(); }
  std::vector<RunKey> expected() const;

  void save(const std::string& path) const;
  static RunManifest load(const std::string& path);
};

class DuplicateRecordError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Append-only JSONL store, one record per line. Single writer; reopening an
// existing file replays it. A torn final line (crash mid-write) is dropped.
class RunStore {
 public:
  // Opens or creates `path` for appending.
  explicit RunStore(std::string path);
  // Read-only view over an existing file.
  static RunStore open_read_only(const std::string& path);

  void append(const RunRecord& record);

  // Throws ValidationError if a stored record for the key was produced from a
  // different prompt text.
  void check_prompt_hash(const RunKey& key, std::uint64_t hash) const;

  bool contains(const RunKey& key) const { return index_.count(key) > 0; }
  const RunRecord* find(const RunKey& key) const;
  std::size_t size() const { return records_.size(); }
  const std::vector<RunRecord>& records() const { return records_; }
  const std::string& path() const { return path_; }
  bool dropped_torn_line() const { return dropped_torn_line_; }

  std::set<RunKey> missing(const RunManifest& manifest) const;

 private:
  RunStore(std::string path, bool writable);
  void load_existing();

  std::string path_;
  bool writable_ = true;
  bool dropped_torn_line_ = false;
  std::vector<RunRecord> records_;
  std::map<RunKey, std::size_t> index_;
  std::ofstream out_;
};

}  // namespace pcrowd
