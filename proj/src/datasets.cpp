#include "pcrowd/datasets.hpp"

#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "pcrowd/common.hpp"
#include "pcrowd/csv.hpp"

namespace pcrowd {

using nlohmann::json;

std::string_view to_string(SubsetTag tag) {
  switch (tag) {
    case SubsetTag::vulgar: return "vulgar";
    case SubsetTag::anti_black: return "anti_black";
    case SubsetTag::aae: return "aae";
  }
  return "?";
}

SubsetTag parse_subset_tag(std::string_view text) {
  if (text == "vulgar") return SubsetTag::vulgar;
  if (text == "anti_black") return SubsetTag::anti_black;
  if (text == "aae") return SubsetTag::aae;
  throw ValidationError("unknown subset tag '" + std::string(text) + "'");
}

std::vector<BinaryLabel> SingleLabelDataset::labels() const {
  std::vector<BinaryLabel> out;
  out.reserve(instances.size());
  for (const auto& li : instances) out.push_back(li.label);
  return out;
}

std::size_t MultiLabelDataset::num_annotations() const {
  std::size_t n = 0;
  for (const auto& row : ratings)
    for (const auto& cell : row) n += cell.has_value();
  return n;
}

std::vector<HumanAnnotation> MultiLabelDataset::annotations() const {
  std::vector<HumanAnnotation> out;
  for (std::size_t a = 0; a < annotator_ids.size(); ++a) {
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (ratings[a][i]) out.push_back({instances[i].instance_id, annotator_ids[a], *ratings[a][i]});
    }
  }
  return out;
}

BinaryLabel binarize(const std::vector<int>& ratings) {
  if (ratings.empty()) throw ValidationError("binarize: empty rating list");
  for (int r : ratings) {
    if (r < 1 || r > 5) throw ValidationError("binarize: rating " + std::to_string(r) + " outside [1,5]");
  }
  // Integer comparison avoids any rounding at the 2.5 boundary: sum/n > 5/2.
  const long long sum = std::accumulate(ratings.begin(), ratings.end(), 0LL);
  return 2 * sum > 5 * static_cast<long long>(ratings.size()) ? BinaryLabel::toxic
                                                               : BinaryLabel::not_toxic;
}

namespace {

std::set<SubsetTag> parse_subsets(std::string_view field) {
  std::set<SubsetTag> out;
  std::size_t pos = 0;
  while (pos <= field.size()) {
    auto semi = field.find(';', pos);
    if (semi == std::string_view::npos) semi = field.size();
    auto tok = trim(field.substr(pos, semi - pos));
    if (!tok.empty()) out.insert(parse_subset_tag(tok));
    pos = semi + 1;
  }
  return out;
}

std::string join_subsets(const std::set<SubsetTag>& tags) {
  std::string out;
  for (auto t : tags) {
    if (!out.empty()) out += ';';
    out += to_string(t);
  }
  return out;
}

}  // namespace

MultiLabelDataset load_long_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  const auto c_inst = table.column("instance_id");
  const auto c_ann = table.column("annotator_id");
  const auto c_rating = table.column("rating");
  const auto c_text = table.column("text");
  const auto c_sub = table.column("subsets");

  MultiLabelDataset ds;
  std::unordered_map<std::string, std::size_t> inst_index;
  std::unordered_map<std::string, std::size_t> ann_index;
  struct Cell {
    std::size_t ann, inst;
    int rating;
    std::size_t line;
  };
  std::vector<Cell> cells;

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.row_lines[r];
    const std::string where = "line " + std::to_string(line) + ": ";
    int rating = 0;
    try {
      std::size_t used = 0;
      rating = std::stoi(row[c_rating], &used);
      if (used != trim(row[c_rating]).size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError(where + "rating '" + row[c_rating] + "' is not an integer");
    }
    if (rating < 1 || rating > 5) {
      throw ValidationError(where + "rating " + std::to_string(rating) + " outside [1,5]");
    }
    const std::string& iid = row[c_inst];
    if (iid.empty()) throw ValidationError(where + "empty instance_id");
    auto [it, inserted] = inst_index.emplace(iid, ds.instances.size());
    if (inserted) {
      if (trim(row[c_text]).empty()) throw ValidationError(where + "empty text");
      ds.instances.push_back({iid, row[c_text], parse_subsets(row[c_sub]), std::nullopt});
    }
    auto [at, a_inserted] = ann_index.emplace(row[c_ann], ds.annotator_ids.size());
    if (a_inserted) ds.annotator_ids.push_back(row[c_ann]);
    cells.push_back({at->second, it->second, rating, line});
  }

  ds.ratings.assign(ds.annotator_ids.size(),
                    std::vector<std::optional<int>>(ds.instances.size()));
  for (const auto& c : cells) {
    auto& slot = ds.ratings[c.ann][c.inst];
    if (slot) {
      throw ValidationError("line " + std::to_string(c.line) + ": duplicate rating for (" +
                            ds.annotator_ids[c.ann] + ", " + ds.instances[c.inst].instance_id +
                            ")");
    }
    slot = c.rating;
  }
  return ds;
}

void write_long_csv(const std::string& path, const MultiLabelDataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  csv::write_row(out, {"instance_id", "annotator_id", "rating", "text", "subsets"});
  for (std::size_t a = 0; a < ds.annotator_ids.size(); ++a) {
    for (std::size_t i = 0; i < ds.instances.size(); ++i) {
      const auto& cell = ds.ratings[a][i];
      if (!cell) continue;
      const auto& inst = ds.instances[i];
      csv::write_row(out, {inst.instance_id, ds.annotator_ids[a], std::to_string(*cell),
                           inst.text, join_subsets(inst.subsets)});
    }
  }
}

SingleLabelDataset single_label_from(const MultiLabelDataset& ds) {
  SingleLabelDataset out;
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    std::vector<int> ratings;
    for (const auto& row : ds.ratings)
      if (row[i]) ratings.push_back(*row[i]);
    if (ratings.empty()) continue;
    Instance inst = ds.instances[i];
    inst.human_mean = static_cast<double>(std::accumulate(ratings.begin(), ratings.end(), 0)) /
                      static_cast<double>(ratings.size());
    out.instances.push_back({std::move(inst), binarize(ratings)});
  }
  return out;
}

SingleLabelDataset subset(const SingleLabelDataset& dataset, SubsetTag tag) {
  SingleLabelDataset out;
  for (const auto& li : dataset.instances) {
    if (li.instance.has(tag)) out.instances.push_back(li);
  }
  return out;
}

SingleLabelDataset load_single_label_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  SingleLabelDataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      Instance inst;
      inst.instance_id = j.at("instance_id").get<std::string>();
      inst.text = j.at("text").get<std::string>();
      if (trim(inst.text).empty()) throw ValidationError("empty text");
      for (const auto& t : j.value("subsets", json::array()))
        inst.subsets.insert(parse_subset_tag(t.get<std::string>()));
      if (j.contains("human_mean") && !j["human_mean"].is_null())
        inst.human_mean = j["human_mean"].get<double>();
      if (!seen.insert(inst.instance_id).second)
        throw ValidationError("duplicate instance_id '" + inst.instance_id + "'");
      ds.instances.push_back({std::move(inst), parse_binary_label(j.at("label").get<std::string>())});
    } catch (const json::exception& e) {
      throw ValidationError(path + ": line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

void write_single_label_jsonl(const std::string& path, const SingleLabelDataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& li : ds.instances) {
    json subsets = json::array();
    for (auto t : li.instance.subsets) subsets.push_back(std::string(to_string(t)));
    json j{{"instance_id", li.instance.instance_id},
           {"text", li.instance.text},
           {"subsets", subsets},
           {"label", std::string(to_string(li.label))}};
    if (li.instance.human_mean) j["human_mean"] = *li.instance.human_mean;
    out << j.dump() << '\n';
  }
}

}  // namespace pcrowd
