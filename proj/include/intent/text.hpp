// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace intent::text {

// Splits on ASCII whitespace; never yields empty pieces.
std::vector<std::string_view> split_ws(std::string_view s);

std::size_t count_words(std::string_view s);

// ASCII lowercase.
std::string to_lower(std::string_view s);

// The first n whitespace words joined by single spaces. Strings that already
// have at most n words are returned unchanged.
std::string first_words(std::string_view s, std::size_t n);

std::string trim(std::string_view s);

bool starts_with_icase(std::string_view s, std::string_view prefix);

}  // namespace intent::text
