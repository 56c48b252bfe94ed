#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "polnet/csv.hpp"
#include "polnet/error.hpp"
#include "polnet/ingest.hpp"

namespace polnet {

std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = 1;
    char32_t cp = c;
    if (c >= 0xF0 && c < 0xF8) {
      len = 4;
      cp = c & 0x07;
    } else if (c >= 0xE0) {
      len = c < 0xF0 ? 3 : 1;
      cp = c & 0x0F;
    } else if (c >= 0xC0) {
      len = 2;
      cp = c & 0x1F;
    }
    if (len == 1 || i + len > s.size()) {
      // ASCII, or a stray/truncated byte kept as-is (Latin-1 interpretation)
      out.push_back(c);
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(c);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) {
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
  return out;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace {

int partial_ratio_decoded(std::u32string_view a, std::u32string_view b) {
  std::u32string_view shorter = a.size() <= b.size() ? a : b;
  std::u32string_view longer = a.size() <= b.size() ? b : a;
  const std::size_t m = shorter.size();
  if (m == 0) return 100;
  std::size_t best = m;
  for (std::size_t start = 0; start + m <= longer.size() && best > 0; ++start)
    best = std::min(best, levenshtein(shorter, longer.substr(start, m)));
  if (best == 0) return 100;
  // round_half_up(100 * (m - best) / m) in integers
  const auto score = static_cast<int>((200 * (m - best) + m) / (2 * m));
  return std::min(score, 99);
}

std::string normalize_title(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

}  // namespace

int levenshtein_partial_ratio(std::string_view a, std::string_view b) {
  return partial_ratio_decoded(utf8_decode(a), utf8_decode(b));
}

std::vector<SeedLabel> read_seeds(std::istream& in) {
  std::vector<SeedLabel> seeds;
  auto header = csv::read_record(in);
  if (!header || header->size() < 2 || (*header)[0] != "title" || (*header)[1] != "class")
    throw Error(Errc::kFormat, "seed CSV needs header title,class");
  std::size_t line = 1;
  while (auto rec = csv::read_record(in)) {
    ++line;
    if (rec->size() == 1 && (*rec)[0].empty()) continue;
    if (rec->size() < 2) throw Error(Errc::kFormat, "seed line " + std::to_string(line));
    auto cls = parse_pol_class((*rec)[1]);
    if (!cls || *cls == PolClass::kNonpolitical)
      throw Error(Errc::kFormat, "seed class must be conservative or liberal (line " +
                                     std::to_string(line) + ")");
    seeds.push_back({(*rec)[0], *cls});
  }
  return seeds;
}

std::vector<SeedLabel> load_seeds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot read " + path.string());
  return read_seeds(in);
}

SeedMatchResult match_seeds(std::span<const SeedLabel> seeds,
                            std::span<const ProductMeta> products, int threshold) {
  if (threshold < 0 || threshold > 100) throw Error(Errc::kParameter, "threshold outside [0,100]");

  std::vector<std::string> norm_titles;
  std::vector<std::u32string> titles;
  norm_titles.reserve(products.size());
  titles.reserve(products.size());
  for (const auto& p : products) {
    norm_titles.push_back(normalize_title(p.title));
    titles.push_back(utf8_decode(norm_titles.back()));
  }

  SeedMatchResult result;
  std::unordered_map<std::string, std::size_t> by_asin;
  for (const SeedLabel& seed : seeds) {
    const std::string norm_seed = normalize_title(seed.title);
    const std::u32string seed32 = utf8_decode(norm_seed);

    std::optional<std::size_t> best;
    int best_score = -1;
    bool best_exact = false;
    for (std::size_t i = 0; i < products.size(); ++i) {
      if (titles[i].empty()) continue;
      const int score = partial_ratio_decoded(seed32, titles[i]);
      if (score < threshold) continue;
      const bool exact = norm_titles[i] == norm_seed;
      bool better = !best || score > best_score;
      if (best && score == best_score) {
        const auto& cur = products[*best];
        if (exact != best_exact) {
          better = exact;
        } else if (titles[i].size() != titles[*best].size()) {
          better = titles[i].size() < titles[*best].size();
        } else {
          better = products[i].asin < cur.asin;
        }
      }
      if (better) {
        best = i;
        best_score = score;
        best_exact = exact;
      }
    }

    if (!best) {
      result.unmatched.push_back(seed);
      continue;
    }
    const std::string& asin = products[*best].asin;
    if (auto it = by_asin.find(asin); it != by_asin.end()) {
      ++result.duplicates;
      if (result.matches[it->second].cls != seed.cls) ++result.class_conflicts;
      continue;
    }
    by_asin.emplace(asin, result.matches.size());
    result.matches.push_back({asin, seed.cls, best_score, !best_exact, seed.title});
  }
  return result;
}

}  // namespace polnet
