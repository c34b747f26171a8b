#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "simmf/sparse.hpp"

namespace simmf {

struct EntityType {
  std::string name;
  int count = 0;              // instances; inferred at load unless declared
  bool count_declared = false;
};

struct RelationDecl {
  std::string name;    // e.g. "UM"
  std::string source;  // entity type name
  std::string target;
  std::string file;    // relative to the dataset directory
  bool is_rating = false;
};

/// Typed network schema: entity types plus the relations connecting them.
/// Loaded from schema.json (format version 1, documented in the README).
struct HinSchema {
  int version = 1;
  std::vector<EntityType> entity_types;
  std::vector<RelationDecl> relations;
  double scale_min = 1.0;
  double scale_max = 5.0;

  void validate() const;
  const EntityType* find_type(const std::string& name) const;
  const RelationDecl& rating_relation() const;

  static HinSchema from_json_file(const std::string& path);
};

/// Raw-id to dense-index mapping for one entity type. Identity when the
/// schema declares a count (ids are then required to be 0-based integers).
struct IdMap {
  bool identity = false;
  int declared_count = 0;
  std::vector<std::string> dense_to_raw;
  std::unordered_map<std::string, int> raw_to_dense;

  int size() const { return identity ? declared_count : static_cast<int>(dense_to_raw.size()); }
  int add_or_get(const std::string& raw);              // remapping mode
  std::optional<int> lookup(const std::string& raw) const;
  std::string raw_of(int dense) const;
};

struct RelationMatrix {
  std::string name;
  std::string source;  // entity type names
  std::string target;
  CsrMatrix mat;       // binary for attribute/social relations
};

RelationMatrix transpose(const RelationMatrix& rel);

struct RatingEntry {
  int user = 0;
  int item = 0;
  double value = 0.0;
};

/// Sparse user-item ratings with both user-major and item-major CSR views.
struct RatingMatrix {
  int users = 0;
  int items = 0;
  double scale_min = 1.0;
  double scale_max = 5.0;
  std::vector<RatingEntry> entries;  // sorted by (user, item)
  CsrMatrix by_user;
  CsrMatrix by_item;

  void build_index();  // sorts entries and rebuilds both CSR views
  std::int64_t count() const { return static_cast<std::int64_t>(entries.size()); }
  double clamp(double v) const;
};

struct HinDataset {
  HinSchema schema;
  std::vector<RelationMatrix> relations;  // rating relation stored binarized
  RatingMatrix ratings;
  std::map<std::string, IdMap> id_maps;   // per entity type
  std::uint64_t checksum = 0;             // content hash over schema + relation files
  std::string user_type;                  // endpoints of the rating relation
  std::string item_type;

  const RelationMatrix* find_relation(const std::string& source, const std::string& target) const;
  const RelationMatrix* find_relation_named(const std::string& name) const;
  int type_count(const std::string& type) const;
};

HinDataset load_relations(const std::string& dataset_dir, const HinSchema& schema);
HinDataset load_dataset(const std::string& dataset_dir);  // reads <dir>/schema.json

// On-disk relation format: `source_id<TAB>target_id[<TAB>value]`, one edge per
// line, `#` starts a comment. Round-trips exactly.
void write_relation_file(const std::string& path, const RelationMatrix& rel, const IdMap& src,
                         const IdMap& dst);
void save_id_maps(const HinDataset& ds, const std::string& dir);

std::uint64_t fnv1a(const void* data, size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a_str(const std::string& s, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace simmf
