#include <json.hpp>

#include <fstream>
#include <unordered_map>

#include "polnet/error.hpp"
#include "polnet/ingest.hpp"

namespace polnet {

namespace {

using nlohmann::json;

struct Skip {
  std::string reason;
};

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) throw Skip{"missing_key"};
  return *it;
}

std::string require_string(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_string()) throw Skip{"bad_type"};
  auto s = v.get<std::string>();
  if (s.empty()) throw Skip{"missing_key"};
  return s;
}

std::string optional_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) throw Skip{"bad_type"};
  return it->get<std::string>();
}

std::vector<std::string> string_list(const json& v) {
  if (!v.is_array()) throw Skip{"bad_type"};
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw Skip{"bad_type"};
    out.push_back(e.get<std::string>());
  }
  return out;
}

ReviewRecord review_from_json(const json& j) {
  if (!j.is_object()) throw Skip{"malformed_json"};
  ReviewRecord r;
  r.reviewer_id = require_string(j, "reviewerID");
  r.asin = require_string(j, "asin");

  if (auto it = j.find("helpful"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_integer() ||
        !(*it)[1].is_number_integer())
      throw Skip{"bad_helpful"};
    const auto up = (*it)[0].get<std::int64_t>();
    const auto total = (*it)[1].get<std::int64_t>();
    if (up < 0 || total < 0 || up > total) throw Skip{"bad_helpful"};
    r.helpful_up = static_cast<std::uint32_t>(up);
    r.helpful_total = static_cast<std::uint32_t>(total);
  }

  const json& overall = require(j, "overall");
  if (!overall.is_number()) throw Skip{"bad_type"};
  r.overall = overall.get<double>();
  if (r.overall < 1.0 || r.overall > 5.0 || r.overall != static_cast<int>(r.overall))
    throw Skip{"range"};

  const json& t = require(j, "unixReviewTime");
  if (!t.is_number_integer()) throw Skip{"bad_type"};
  r.unix_time = t.get<std::int64_t>();

  r.review_text = optional_string(j, "reviewText");
  r.summary = optional_string(j, "summary");
  return r;
}

ProductMeta meta_from_json(const json& j, std::size_t& self_refs) {
  if (!j.is_object()) throw Skip{"malformed_json"};
  ProductMeta m;
  m.asin = require_string(j, "asin");
  m.title = optional_string(j, "title");
  if (auto it = j.find("price"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw Skip{"bad_type"};
    const double price = it->get<double>();
    if (price < 0) throw Skip{"range"};
    m.price = price;
  }
  if (auto brand = optional_string(j, "brand"); !brand.empty()) m.brand = brand;
  if (auto it = j.find("salesRank"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw Skip{"bad_type"};
    for (const auto& [cat, rank] : it->items()) {
      if (!rank.is_number_integer()) throw Skip{"bad_type"};
      m.sales_rank[cat] = rank.get<std::int64_t>();
    }
  }
  if (auto it = j.find("categories"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw Skip{"bad_type"};
    for (const auto& path : *it) m.categories.push_back(string_list(path));
  }
  if (auto it = j.find("related"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw Skip{"bad_type"};
    auto take = [&](const char* key, std::vector<std::string>& dst) {
      auto r = it->find(key);
      if (r == it->end() || r->is_null()) return;
      for (auto& asin : string_list(*r)) {
        if (asin == m.asin) {
          ++self_refs;
          continue;
        }
        dst.push_back(std::move(asin));
      }
    };
    take("also_bought", m.related.also_bought);
    take("also_viewed", m.related.also_viewed);
    take("bought_together", m.related.bought_together);
    take("buy_after_viewing", m.related.buy_after_viewing);
  }
  return m;
}

template <typename F>
void for_each_line(std::istream& in, F&& f) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    f(line);
  }
}

}  // namespace

void parse_reviews(std::istream& in, Corpus& out) {
  ParseReport& rep = out.report;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < out.reviews.size(); ++i)
    seen.emplace(out.reviews[i].reviewer_id + '\x1f' + out.reviews[i].asin, i);

  for_each_line(in, [&](const std::string& line) {
    ++rep.review_lines;
    try {
      json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (j.is_discarded()) throw Skip{"malformed_json"};
      ReviewRecord r = review_from_json(j);
      const std::string key = r.reviewer_id + '\x1f' + r.asin;
      if (auto it = seen.find(key); it != seen.end()) {
        ++rep.reviews_deduped;
        ReviewRecord& kept = out.reviews[it->second];
        if (r.unix_time >= kept.unix_time) kept = std::move(r);
        return;
      }
      seen.emplace(key, out.reviews.size());
      out.reviews.push_back(std::move(r));
      ++rep.reviews_parsed;
    } catch (const Skip& s) {
      ++rep.reviews_skipped;
      ++rep.skip_reasons[s.reason];
    }
  });
}

void parse_meta(std::istream& in, Corpus& out) {
  ParseReport& rep = out.report;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < out.products.size(); ++i) seen.emplace(out.products[i].asin, i);

  for_each_line(in, [&](const std::string& line) {
    ++rep.meta_lines;
    try {
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) throw Skip{"malformed_json"};
      std::size_t self_refs = 0;
      ProductMeta m = meta_from_json(j, self_refs);
      if (seen.count(m.asin)) {
        ++rep.meta_deduped;
        return;
      }
      rep.self_references_removed += self_refs;
      seen.emplace(m.asin, out.products.size());
      out.products.push_back(std::move(m));
      ++rep.meta_parsed;
    } catch (const Skip& s) {
      ++rep.meta_skipped;
      ++rep.skip_reasons["meta_" + s.reason];
    }
  });
}

Corpus parse_corpus(const std::filesystem::path& reviews_path,
                    const std::filesystem::path& meta_path) {
  std::ifstream reviews(reviews_path);
  if (!reviews) throw Error(Errc::kIo, "cannot read " + reviews_path.string());
  std::ifstream meta(meta_path);
  if (!meta) throw Error(Errc::kIo, "cannot read " + meta_path.string());
  Corpus c;
  parse_reviews(reviews, c);
  parse_meta(meta, c);
  return c;
}

}  // namespace polnet
