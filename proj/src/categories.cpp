#include <json.hpp>

#include <fstream>

#include "polnet/error.hpp"
#include "polnet/ingest.hpp"

namespace polnet {

CategoryMap CategoryMap::builtin() {
  // Same content as data/category_regroup.json.
  CategoryMap m;
  m.aliases_ = {
      {"CDs & Vinyl", "Music"},
      {"Digital Music", "Music"},
      {"Clothing, Shoes & Jewelry", "Fashion"},
      {"Kindle Store", "Books"},
      {"Cell Phones & Accessories", "Electronics"},
      {"Amazon Instant Video", "Movies & TV"},
      {"Beauty", "Health & Personal Care"},
  };
  m.main_to_big_ = {
      {"Books", "Culture"},
      {"Music", "Culture"},
      {"Arts, Crafts & Sewing", "Culture"},
      {"Movies & TV", "Entertainment"},
      {"Video Games", "Entertainment"},
      {"Toys & Games", "Entertainment"},
      {"Sports & Outdoors", "Entertainment"},
      {"Health & Personal Care", "Personal & Family"},
      {"Baby", "Personal & Family"},
      {"Pet Supplies", "Personal & Family"},
      {"Electronics", "Products"},
      {"Fashion", "Products"},
      {"Office Products", "Products"},
      {"Patio, Lawn & Garden", "Home"},
      {"Home & Kitchen", "Home"},
      {"Tools & Home Improvement", "Home"},
      {"Grocery & Gourmet Food", "Home"},
      {"Automotive", "Home"},
  };
  return m;
}

CategoryMap CategoryMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot read " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("main_to_big"))
    throw Error(Errc::kFormat, path.string() + ": expected {\"aliases\", \"main_to_big\"}");
  CategoryMap m;
  try {
    for (const auto& [k, v] : j.at("main_to_big").items()) m.main_to_big_[k] = v.get<std::string>();
    if (j.contains("aliases"))
      for (const auto& [k, v] : j.at("aliases").items()) m.aliases_[k] = v.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kFormat, path.string() + ": " + e.what());
  }
  for (const auto& [alias, main] : m.aliases_)
    if (!m.main_to_big_.count(main))
      throw Error(Errc::kFormat, "alias " + alias + " points at unknown main category " + main);
  return m;
}

CategoryGroup CategoryMap::regroup_root(std::string_view root) const {
  std::string key(root);
  if (auto a = aliases_.find(key); a != aliases_.end()) key = a->second;
  if (auto it = main_to_big_.find(key); it != main_to_big_.end()) return {key, it->second, true};
  return {std::string(kOtherCategory), std::string(kOtherCategory), false};
}

CategoryGroup CategoryMap::regroup(std::span<const std::vector<std::string>> paths) const {
  for (const auto& path : paths)
    if (!path.empty()) return regroup_root(path.front());
  return {std::string(kOtherCategory), std::string(kOtherCategory), false};
}

std::set<std::string> CategoryMap::main_categories() const {
  std::set<std::string> out;
  for (const auto& [main, big] : main_to_big_) out.insert(main);
  return out;
}

std::set<std::string> CategoryMap::big_categories() const {
  std::set<std::string> out;
  for (const auto& [main, big] : main_to_big_) out.insert(big);
  return out;
}

}  // namespace polnet
