#include <cctype>
#include <fstream>

#include "polnet/error.hpp"
#include "polnet/ingest.hpp"

namespace polnet {

namespace {

// Keep in sync with data/stopwords_en.txt (checked by test_ingest).
constexpr std::string_view kStopwords[] = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
    "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
    "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "that'll",
    "these", "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has",
    "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
    "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "against",
    "between", "into", "through", "during", "before", "after", "above", "below", "to", "from",
    "up", "down", "in", "out", "on", "off", "over", "under", "again", "further", "then", "once",
    "here", "there", "when", "where", "why", "how", "all", "any", "both", "each", "few", "more",
    "most", "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than",
    "too", "very", "s", "t", "can", "will", "just", "don", "don't", "should", "should've", "now",
    "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn",
    "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn",
    "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't",
    "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn",
    "wouldn't"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_word(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         static_cast<unsigned char>(c) >= 0x80;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = s[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[i]) return false;
  }
  return true;
}

std::size_t find_url(std::string_view token) {
  for (std::size_t i = 0; i < token.size(); ++i) {
    auto rest = token.substr(i);
    if (starts_with_ci(rest, "http://") || starts_with_ci(rest, "https://") ||
        starts_with_ci(rest, "www."))
      return i;
  }
  return std::string_view::npos;
}

// URLs, RT tokens, @-mentions and hashtag markers, applied per whitespace token.
std::string strip_social(std::string_view text, bool keep_hashtag_body) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      out.push_back(' ');
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    std::string_view token = text.substr(i, j - i);
    i = j;

    if (auto u = find_url(token); u != std::string_view::npos) token = token.substr(0, u);
    if (token == "RT") continue;

    for (std::size_t k = 0; k < token.size();) {
      const char c = token[k];
      const bool boundary = k == 0 || !is_word(token[k - 1]);
      if (c == '@' && boundary && k + 1 < token.size() && is_word(token[k + 1])) {
        ++k;
        while (k < token.size() && is_word(token[k])) ++k;
        continue;
      }
      if (c == '#' && boundary && (k == 0 || token[k - 1] != '&') && k + 1 < token.size() &&
          is_word(token[k + 1])) {
        ++k;
        if (!keep_hashtag_body)
          while (k < token.size() && is_word(token[k])) ++k;
        continue;
      }
      out.push_back(c);
      ++k;
    }
  }
  return out;
}

bool is_unicode_punct(char32_t cp) {
  return (cp >= 0x00A0 && cp <= 0x00BF) || cp == 0x00D7 || cp == 0x00F7 ||
         (cp >= 0x2000 && cp <= 0x206F) || (cp >= 0x3000 && cp <= 0x303F) || cp == 0xFEFF;
}

}  // namespace

// Emoji blocks: pictographs and symbols U+1F000-1FAFF (includes regional
// indicators), misc symbols and dingbats U+2600-27BF, misc technical
// U+2300-23FF, arrows/stars U+2B00-2BFF, variation selectors U+FE00-FE0F,
// zero-width joiner U+200D, keycap U+20E3, tag characters U+E0020-E007F.
bool is_emoji(char32_t cp) noexcept {
  return (cp >= 0x1F000 && cp <= 0x1FAFF) || (cp >= 0x2600 && cp <= 0x27BF) ||
         (cp >= 0x2300 && cp <= 0x23FF) || (cp >= 0x2B00 && cp <= 0x2BFF) ||
         (cp >= 0xFE00 && cp <= 0xFE0F) || cp == 0x200D || cp == 0x20E3 ||
         (cp >= 0xE0020 && cp <= 0xE007F);
}

const StopwordList& default_stopwords() {
  static const StopwordList list = [] {
    StopwordList l;
    for (auto w : kStopwords) l.emplace(w);
    return l;
  }();
  return list;
}

StopwordList load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot read " + path.string());
  StopwordList list;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && is_space(line.back())) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    list.insert(line);
  }
  return list;
}

std::optional<std::vector<std::string>> clean_text(std::string_view raw,
                                                   const CleanOptions& options) {
  if (options.max_tokens < options.min_tokens)
    throw Error(Errc::kParameter, "max_tokens < min_tokens");

  // literal "\n" escapes count as newline symbols
  std::string text;
  text.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\\' && i + 1 < raw.size() && (raw[i + 1] == 'n' || raw[i + 1] == 'r')) {
      text.push_back(' ');
      ++i;
    } else {
      text.push_back(raw[i]);
    }
  }

  text = strip_social(text, options.keep_hashtag_body);

  std::u32string cps = utf8_decode(text);
  std::erase_if(cps, is_emoji);

  // &amp; &#39; &#x27; ... -> space
  std::u32string ent;
  ent.reserve(cps.size());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (cps[i] == U'&') {
      std::size_t j = i + 1;
      if (j < cps.size() && cps[j] == U'#') ++j;
      const std::size_t body = j;
      while (j < cps.size() && j - body < 10 && cps[j] < 0x80 &&
             std::isalnum(static_cast<unsigned char>(cps[j])))
        ++j;
      if (j > body && j < cps.size() && cps[j] == U';') {
        ent.push_back(U' ');
        i = j;
        continue;
      }
    }
    ent.push_back(cps[i]);
  }

  // punctuation, digits, control characters -> space; ASCII lower-casing
  for (char32_t& cp : ent) {
    if (cp < 0x80) {
      if (cp >= U'A' && cp <= U'Z') {
        cp = cp - U'A' + U'a';
      } else if (!(cp >= U'a' && cp <= U'z')) {
        cp = U' ';
      }
    } else if (is_unicode_punct(cp)) {
      cp = U' ';
    }
  }

  const StopwordList& stop = options.stopwords ? *options.stopwords : default_stopwords();
  std::vector<std::string> tokens;
  const std::string cleaned = utf8_encode(ent);
  std::size_t i = 0;
  while (i < cleaned.size() && tokens.size() < options.max_tokens) {
    while (i < cleaned.size() && cleaned[i] == ' ') ++i;
    std::size_t j = i;
    while (j < cleaned.size() && cleaned[j] != ' ') ++j;
    if (j > i) {
      std::string tok = cleaned.substr(i, j - i);
      if (!stop.count(tok)) tokens.push_back(std::move(tok));
    }
    i = j;
  }
  if (tokens.empty() || tokens.size() < options.min_tokens) return std::nullopt;
  return tokens;
}

}  // namespace polnet
