#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "psyosr/csv.hpp"
#include "psyosr/error.hpp"
#include "psyosr/pipeline.hpp"

namespace psyosr::pipeline {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTestKnown: return "test_known";
    case Split::kTestUnknown: return "test_unknown";
  }
  return "train";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test_known") return Split::kTestKnown;
  if (s == "test_unknown") return Split::kTestUnknown;
  throw Error(ErrorKind::kManifest, "unknown split '" + std::string(s) + "'");
}

void DatasetManifest::validate() const {
  std::set<int> known;
  std::set<int> unknown;
  std::optional<std::size_t> dim;
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.sample_id).second) {
      throw Error(ErrorKind::kManifest, "duplicate sample_id " + e.sample_id);
    }
    if (dim && *dim != e.features.size()) {
      throw Error(ErrorKind::kManifest, "sample " + e.sample_id + " has a different feature dimension");
    }
    dim = e.features.size();
    if (e.split == Split::kTestUnknown) {
      unknown.insert(e.label);
    } else {
      known.insert(e.label);
    }
    if (e.mean_rt_seconds &&
        (e.split == Split::kTestKnown || e.split == Split::kTestUnknown)) {
      throw Error(ErrorKind::kManifest, "test sample " + e.sample_id + " carries an RT");
    }
  }
  for (int u : unknown) {
    if (known.contains(u)) {
      throw Error(ErrorKind::kManifest,
                  "unknown class " + std::to_string(u) + " appears outside test_unknown");
    }
  }
  if (!known.empty() && (*known.begin() != 0 || *known.rbegin() != static_cast<int>(known.size()) - 1)) {
    throw Error(ErrorKind::kManifest, "known class labels must be 0..K-1");
  }
}

int DatasetManifest::n_known_classes() const {
  int k = 0;
  for (const auto& e : entries) {
    if (e.split != Split::kTestUnknown) k = std::max(k, e.label + 1);
  }
  return k;
}

int DatasetManifest::feature_dim() const {
  return entries.empty() ? 0 : static_cast<int>(entries.front().features.size());
}

std::vector<const ManifestEntry*> DatasetManifest::of_split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

void write_manifest(std::ostream& out, const DatasetManifest& m) {
  csv::Row header{"sample_id", "split", "label", "mean_rt_seconds"};
  for (int i = 0; i < m.feature_dim(); ++i) header.push_back("f" + std::to_string(i));
  csv::write_row(out, header);
  for (const auto& e : m.entries) {
    csv::Row row{e.sample_id, std::string(to_string(e.split)), std::to_string(e.label),
                 e.mean_rt_seconds ? csv::format_double(*e.mean_rt_seconds) : ""};
    for (double f : e.features) row.push_back(csv::format_double(f));
    csv::write_row(out, row);
  }
}

DatasetManifest read_manifest(std::istream& in) {
  const auto t = csv::read(in);
  const auto c_id = t.column("sample_id");
  const auto c_split = t.column("split");
  const auto c_label = t.column("label");
  const auto c_rt = t.column("mean_rt_seconds");
  std::vector<std::size_t> feature_cols;
  for (std::size_t i = 0;; ++i) {
    const std::string name = "f" + std::to_string(i);
    auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) break;
    feature_cols.push_back(static_cast<std::size_t>(it - t.header.begin()));
  }
  if (feature_cols.empty()) throw Error(ErrorKind::kManifest, "manifest has no feature columns");
  DatasetManifest m;
  for (const auto& row : t.rows) {
    ManifestEntry e;
    e.sample_id = row[c_id];
    e.split = split_from_string(row[c_split]);
    e.label = static_cast<int>(csv::parse_int(row[c_label], "label"));
    if (!row[c_rt].empty()) e.mean_rt_seconds = csv::parse_double(row[c_rt], "mean_rt_seconds");
    for (auto c : feature_cols) e.features.push_back(csv::parse_double(row[c], "feature"));
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return read_manifest(in);
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  write_manifest(out, m);
}

DatasetManifest split_train_valid(const DatasetManifest& m, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::kSplit, "split ratio must be in (0, 1)");
  m.validate();
  DatasetManifest out = m;
  // Per class: indices of pool entries, annotated and not.
  std::map<int, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> pool;
  for (std::size_t i = 0; i < out.entries.size(); ++i) {
    const auto& e = out.entries[i];
    if (e.split != Split::kTrain && e.split != Split::kValid) continue;
    auto& [annotated, plain] = pool[e.label];
    (e.mean_rt_seconds ? annotated : plain).push_back(i);
  }
  std::mt19937_64 rng(seed);
  for (auto& [label, groups] : pool) {
    auto& [annotated, plain] = groups;
    const std::size_t n = annotated.size() + plain.size();
    if (n < 2) {
      throw Error(ErrorKind::kSplit, "class " + std::to_string(label) + " has fewer than 2 samples");
    }
    const auto n_train = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(n)));
    auto n_train_annotated =
        static_cast<std::size_t>(std::lround(ratio * static_cast<double>(annotated.size())));
    n_train_annotated = std::min(n_train_annotated, n_train);
    const std::size_t n_train_plain = std::min(n_train - n_train_annotated, plain.size());
    std::shuffle(annotated.begin(), annotated.end(), rng);
    std::shuffle(plain.begin(), plain.end(), rng);
    for (std::size_t i = 0; i < annotated.size(); ++i) {
      out.entries[annotated[i]].split = i < n_train_annotated ? Split::kTrain : Split::kValid;
    }
    for (std::size_t i = 0; i < plain.size(); ++i) {
      out.entries[plain[i]].split = i < n_train_plain ? Split::kTrain : Split::kValid;
    }
  }
  return out;
}

std::vector<std::vector<double>> features_of(const DatasetManifest& m, Split s) {
  std::vector<std::vector<double>> out;
  for (const auto* e : m.of_split(s)) out.push_back(e->features);
  return out;
}

std::vector<osr::LabeledSample> labeled_of(const DatasetManifest& m, Split s) {
  std::vector<osr::LabeledSample> out;
  for (const auto* e : m.of_split(s)) {
    osr::LabeledSample ls{e->sample_id, e->features, std::nullopt};
    if (s != Split::kTestUnknown) ls.label = e->label;
    out.push_back(std::move(ls));
  }
  return out;
}

}  // namespace psyosr::pipeline
