// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "intent/session.hpp"

namespace intent {

// One JSON object per line:
// {"user_id": str, "pages": [{"attrs": [[k, v], ...]}], "intent": str,
//  "class": "INS"|..., "split": "train"|"val"|"test"|null}
std::string corpus_to_jsonl(const Corpus& corpus);
Corpus corpus_from_jsonl(std::string_view text, std::string_view source = "<corpus>");

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

// Reads a whole file; throws PrerequisiteError when it does not exist.
std::string read_file(const std::filesystem::path& path);

// Writes via a sibling temp file and rename, so readers never observe a
// partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace intent
