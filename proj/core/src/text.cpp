#include "udm/text.hpp"

#include <cstdint>
#include <fstream>

#include "udm/errors.hpp"

namespace udm {

namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

// Decodes one UTF-8 codepoint starting at `pos`. Advances `pos` past it.
// Returns kInvalid (advancing one byte) on malformed input; strict mode is
// handled separately by valid_utf8.
char32_t decode_utf8(std::string_view text, std::size_t& pos) {
  const auto byte = [&](std::size_t i) {
    return static_cast<unsigned char>(text[i]);
  };
  const unsigned char b0 = byte(pos);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return kInvalid;
  }
  if (pos + static_cast<std::size_t>(len) > text.size()) {
    ++pos;
    return kInvalid;
  }
  for (int i = 1; i < len; ++i) {
    const unsigned char bi = byte(pos + static_cast<std::size_t>(i));
    if ((bi & 0xC0) != 0x80) {
      ++pos;
      return kInvalid;
    }
    cp = (cp << 6) | (bi & 0x3F);
  }
  // Overlongs, surrogates, out of range.
  if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
      (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
      (cp >= 0xD800 && cp <= 0xDFFF)) {
    ++pos;
    return kInvalid;
  }
  pos += static_cast<std::size_t>(len);
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
    case 0x20: case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Punctuation stripped from token edges. Interior occurrences survive.
bool is_strippable_punct(char32_t cp) {
  if ((cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
      (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E)) {
    return true;  // ASCII punctuation
  }
  switch (cp) {
    case 0xA1:   // inverted exclamation
    case 0xA7:   // section sign
    case 0xAB:   // left guillemet
    case 0xB6:   // pilcrow
    case 0xB7:   // middle dot
    case 0xBB:   // right guillemet
    case 0xBF:   // inverted question mark
    case 0x964:  // Devanagari danda
    case 0x965:  // Devanagari double danda
    case 0x970:  // Devanagari abbreviation sign
      return true;
    default:
      break;
  }
  if (cp >= 0x2010 && cp <= 0x2027) return true;  // dashes, curly quotes, dots
  if (cp >= 0x2030 && cp <= 0x205E) return true;  // permille, primes, brackets
  if (cp >= 0x3001 && cp <= 0x3003) return true;
  if (cp >= 0x3008 && cp <= 0x3011) return true;
  if (cp >= 0x3014 && cp <= 0x301F) return true;
  if (cp >= 0xFF01 && cp <= 0xFF0F) return true;  // fullwidth punctuation
  if (cp >= 0xFF1A && cp <= 0xFF20) return true;
  if (cp >= 0xFF3B && cp <= 0xFF40) return true;
  if (cp >= 0xFF5B && cp <= 0xFF65) return true;
  return false;
}

// Case folding for the scripts this corpus actually contains: ASCII and
// Latin-1. Everything else (Devanagari etc.) has no case and passes through.
char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  return cp;
}

}  // namespace

bool valid_utf8(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (decode_utf8(text, pos) == kInvalid) return false;
  }
  return true;
}

std::vector<std::string> tokenize(std::string_view raw,
                                  std::string_view /*language*/) {
  std::vector<std::string> tokens;
  std::vector<char32_t> current;

  const auto flush = [&]() {
    if (current.empty()) return;
    // Strip leading/trailing punctuation; keep interior characters intact.
    std::size_t begin = 0, end = current.size();
    while (begin < end && is_strippable_punct(current[begin])) ++begin;
    while (end > begin && is_strippable_punct(current[end - 1])) --end;
    if (begin < end) {
      std::string token;
      for (std::size_t i = begin; i < end; ++i) encode_utf8(current[i], token);
      tokens.push_back(std::move(token));
    }
    current.clear();
  };

  std::size_t pos = 0;
  while (pos < raw.size()) {
    char32_t cp = decode_utf8(raw, pos);
    if (cp == kInvalid) cp = 0xFFFD;  // lenient here; loaders validate first
    if (is_space(cp)) {
      flush();
    } else {
      current.push_back(to_lower(cp));
    }
  }
  flush();
  return tokens;
}

const std::set<std::string>& builtin_stopwords(std::string_view language) {
  static const std::set<std::string> en = {
      "a",    "an",   "and",  "are", "as",   "at",   "be",   "been", "but",
      "by",   "for",  "from", "had", "has",  "have", "in",   "is",   "it",
      "its",  "m",    "not",  "of",  "on",   "or",   "s",    "that", "the",
      "they", "this", "to",   "was", "were", "which", "with"};
  static const std::set<std::string> es = {
      "a",   "al",  "como", "con", "de",  "del", "el",   "en",   "es",
      "esta", "este", "la",  "las", "lo",  "los", "muy",  "o",    "para",
      "pero", "por", "que",  "se",  "son", "su",  "sus",  "u",    "un",
      "una", "unas", "unos", "y"};
  static const std::set<std::string> hi = {
      "एक", "और", "का", "की", "के", "को", "जो", "तो", "था", "थी",
      "थे", "ने", "पर", "भी", "मैं", "में", "यह", "वह", "से", "ही",
      "है", "हैं", "हो", "इस", "उस"};
  static const std::set<std::string> none;
  if (language == "en") return en;
  if (language == "es") return es;
  if (language == "hi") return hi;
  return none;
}

std::set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(errc::io_error, "cannot open stopword file " + path.string());
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (auto& token : tokenize(line)) words.insert(std::move(token));
  }
  return words;
}

}  // namespace udm
