// SPDX-License-Identifier: Apache-2.0
#include "intent/corpus_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "intent/errors.hpp"

namespace intent {

using ojson = nlohmann::ordered_json;

namespace {

ojson record_to_json(const LabeledSession& item) {
  ojson pages = ojson::array();
  for (const auto& page : item.session.pages) {
    ojson attrs = ojson::array();
    for (const auto& a : page.attrs()) attrs.push_back(ojson::array({a.key, a.value}));
    pages.push_back(ojson{{"attrs", std::move(attrs)}});
  }
  ojson j;
  j["user_id"] = item.session.user_id;
  j["pages"] = std::move(pages);
  j["intent"] = item.intent;
  j["class"] = class_code(item.label);
  j["split"] = item.split ? ojson(split_name(*item.split)) : ojson(nullptr);
  return j;
}

LabeledSession record_from_json(const ojson& j) {
  LabeledSession item;
  item.session.user_id = j.at("user_id").get<std::string>();
  for (const auto& pj : j.at("pages")) {
    std::vector<Attribute> attrs;
    for (const auto& pair : pj.at("attrs")) {
      if (!pair.is_array() || pair.size() != 2)
        throw std::invalid_argument("attribute must be a [key, value] pair");
      attrs.push_back({pair[0].get<std::string>(), pair[1].get<std::string>()});
    }
    item.session.pages.emplace_back(std::move(attrs));
  }
  if (item.session.pages.empty()) throw std::invalid_argument("session has no pages");
  item.intent = j.at("intent").get<std::string>();
  if (item.intent.empty()) throw std::invalid_argument("empty intent");
  const auto code = j.at("class").get<std::string>();
  const auto label = parse_class_code(code);
  if (!label) throw std::invalid_argument("unknown class '" + code + "'");
  item.label = *label;
  if (j.contains("split") && !j["split"].is_null()) {
    const auto name = j["split"].get<std::string>();
    item.split = parse_split(name);
    if (!item.split) throw std::invalid_argument("unknown split '" + name + "'");
  }
  return item;
}

}  // namespace

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& item : corpus.items) {
    out += record_to_json(item).dump();
    out += '\n';
  }
  return out;
}

Corpus corpus_from_jsonl(std::string_view text, std::string_view source) {
  Corpus corpus;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    try {
      corpus.items.push_back(record_from_json(ojson::parse(line)));
    } catch (const std::exception& e) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, corpus_to_jsonl(corpus));
}

Corpus load_corpus(const std::filesystem::path& path) {
  return corpus_from_jsonl(read_file(path), path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PrerequisiteError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace intent
