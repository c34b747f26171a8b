#pragma once

// In-memory dataset construction and temp-dir fixtures shared by the suites.

#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <string>
#include <vector>

#include "simmf/hin.hpp"

namespace support {

struct TypeDef {
  std::string name;
  int count;
};

struct RelDef {
  std::string name, source, target;
  std::vector<simmf::Triplet> edges;  // value ignored (presence)
  bool is_rating = false;
};

// Builds a HinDataset directly, bypassing the file loader. Types use declared
// counts with identity id maps.
inline simmf::HinDataset make_dataset(const std::vector<TypeDef>& types,
                                      const std::vector<RelDef>& rels,
                                      const std::vector<simmf::RatingEntry>& ratings = {},
                                      double scale_min = 1, double scale_max = 5) {
  simmf::HinDataset ds;
  ds.schema.scale_min = scale_min;
  ds.schema.scale_max = scale_max;
  ds.ratings.scale_min = scale_min;
  ds.ratings.scale_max = scale_max;
  for (const TypeDef& t : types) {
    ds.schema.entity_types.push_back({t.name, t.count, true});
    simmf::IdMap m;
    m.identity = true;
    m.declared_count = t.count;
    ds.id_maps.emplace(t.name, std::move(m));
  }
  std::uint64_t checksum = 0x1234;
  for (const RelDef& r : rels) {
    ds.schema.relations.push_back({r.name, r.source, r.target, r.name + ".tsv", r.is_rating});
    int rows = 0, cols = 0;
    for (const TypeDef& t : types) {
      if (t.name == r.source) rows = t.count;
      if (t.name == r.target) cols = t.count;
    }
    simmf::RelationMatrix rel;
    rel.name = r.name;
    rel.source = r.source;
    rel.target = r.target;
    rel.mat = simmf::CsrMatrix::from_triplets(rows, cols, r.edges,
                                              simmf::DuplicatePolicy::Presence);
    ds.relations.push_back(std::move(rel));
    if (r.is_rating) {
      ds.user_type = r.source;
      ds.item_type = r.target;
      ds.ratings.users = rows;
      ds.ratings.items = cols;
    }
    for (const simmf::Triplet& t : r.edges) checksum = simmf::fnv1a(&t.row, sizeof(t.row), checksum);
  }
  ds.checksum = checksum;
  if (!ratings.empty()) {
    ds.ratings.entries = ratings;
    ds.ratings.build_index();
  }
  return ds;
}

// The canonical two-user graph: user0 rated {m0, m1}, user1 rated {m1}.
inline simmf::HinDataset two_user_graph() {
  return make_dataset({{"U", 2}, {"M", 2}},
                      {{"UM", "U", "M", {{0, 0, 1}, {0, 1, 1}, {1, 1, 1}}, true}},
                      {{0, 0, 4}, {0, 1, 3}, {1, 1, 5}});
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("simmf_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  void write(const std::string& name, const std::string& content) const {
    std::ofstream out(file(name));
    out << content;
  }
};

}  // namespace support
