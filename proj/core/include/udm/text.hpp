#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace udm {

/// Splits raw text into lowercased tokens.
///
/// Rules: split on Unicode whitespace, strip leading/trailing punctuation
/// per token (interior hyphens and apostrophes survive), lowercase only
/// scripts that have case (ASCII + Latin-1 cover English and Spanish;
/// Devanagari passes through untouched). Empty tokens are dropped.
///
/// The language tag does not change tokenization; casing is decided per
/// character. It is accepted here so call sites carry it alongside the text.
std::vector<std::string> tokenize(std::string_view raw,
                                  std::string_view language = "en");

/// Validates UTF-8 encoding (rejects overlongs, surrogates, > U+10FFFF).
bool valid_utf8(std::string_view text);

/// Small built-in function-word list for "en", "es", "hi"; empty set for
/// anything else. Meant as a default, overridable via load_stopwords.
const std::set<std::string>& builtin_stopwords(std::string_view language);

/// Loads a stopword file, one token per line (tokenized the same way as
/// descriptions so the casing matches).
std::set<std::string> load_stopwords(const std::filesystem::path& path);

}  // namespace udm
