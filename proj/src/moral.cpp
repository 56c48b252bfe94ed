#include <charconv>
#include <cmath>
#include <fstream>

#include "polnet/csv.hpp"
#include "polnet/error.hpp"
#include "polnet/ingest.hpp"

namespace polnet {

namespace {

std::string header_key(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (c == '-' || c == ' ') c = '_';
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  return out;
}

std::optional<double> parse_prob(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

MoralScores read_moral_scores(std::istream& in, const std::set<ReviewKey>* known) {
  auto header = csv::read_record(in);
  if (!header) throw Error(Errc::kFormat, "moral scores: empty file");

  std::optional<std::size_t> col_reviewer, col_asin;
  std::array<std::optional<std::size_t>, kMoralDims> col_label{};
  for (std::size_t i = 0; i < header->size(); ++i) {
    const std::string& name = (*header)[i];
    if (name == "reviewerID") {
      col_reviewer = i;
      continue;
    }
    if (name == "asin") {
      col_asin = i;
      continue;
    }
    const std::string key = header_key(name);
    for (std::size_t d = 0; d < kMoralDims; ++d)
      if (key == kMoralLabels[d]) col_label[d] = i;
  }
  if (!col_reviewer || !col_asin) throw Error(Errc::kFormat, "moral scores: need reviewerID,asin");
  for (std::size_t d = 0; d < kMoralDims; ++d)
    if (!col_label[d])
      throw Error(Errc::kFormat, "moral scores: missing column " + std::string(kMoralLabels[d]));

  MoralScores out;
  MoralLoadReport& rep = out.report;
  while (auto rec = csv::read_record(in)) {
    if (rec->size() == 1 && (*rec)[0].empty()) continue;
    ++rep.rows;
    auto skip = [&](const char* reason) { ++rep.skip_reasons[reason]; };
    if (rec->size() < header->size()) {
      skip("short_row");
      continue;
    }
    ReviewKey key{(*rec)[*col_reviewer], (*rec)[*col_asin]};
    if (key.first.empty() || key.second.empty()) {
      skip("missing_key");
      continue;
    }
    MoralVector v;
    const char* bad = nullptr;
    for (std::size_t d = 0; d < kMoralDims && !bad; ++d) {
      auto p = parse_prob((*rec)[*col_label[d]]);
      if (!p)
        bad = "bad_number";
      else if (!(*p >= 0.0 && *p <= 1.0))
        bad = "range";
      else
        v.p[d] = *p;
    }
    if (bad) {
      skip(bad);
      continue;
    }
    if (known && !known->count(key)) {
      ++rep.unmatched;
      continue;
    }
    if (!out.vectors.emplace(std::move(key), v).second) {
      skip("duplicate");
      continue;
    }
    ++rep.loaded;
    for (std::size_t d = 0; d < kMoralDims; ++d) {
      if (v.p[d] > 0.0) ++rep.presence[d];
      rep.mass[d] += v.p[d];
    }
  }
  return out;
}

MoralScores load_moral_scores(const std::filesystem::path& path,
                              const std::set<ReviewKey>* known) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot read " + path.string());
  return read_moral_scores(in, known);
}

}  // namespace polnet
