// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <set>
#include <string>
#include <string_view>

namespace setsdb {

using KeywordSet = std::set<std::string>;

// Lowercase and drop every non-alphanumeric character.
std::string normalize_token(std::string_view token);

// Splits free text on non-alphanumeric boundaries into normalized keywords,
// dropping a small set of English stop words.
KeywordSet extract_keywords(std::string_view text);

void add_keywords(KeywordSet& into, std::string_view text);

}  // namespace setsdb
