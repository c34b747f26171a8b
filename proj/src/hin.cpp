#include "simmf/hin.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "simmf/errors.hpp"

namespace simmf {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a(const void* data, size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a_str(const std::string& s, std::uint64_t seed) {
  return fnv1a(s.data(), s.size(), seed);
}

void HinSchema::validate() const {
  std::set<std::string> names;
  for (const EntityType& t : entity_types) {
    if (t.name.empty()) throw ValidationError("schema: entity type with empty name");
    if (!names.insert(t.name).second)
      throw ValidationError("schema: duplicate entity type '" + t.name + "'");
    if (t.count_declared && t.count < 1)
      throw ValidationError("schema: entity type '" + t.name + "' declares count < 1");
  }
  int rating_count = 0;
  for (const RelationDecl& r : relations) {
    if (!find_type(r.source))
      throw ValidationError("schema: relation '" + r.name + "' names undeclared source type '" +
                            r.source + "'");
    if (!find_type(r.target))
      throw ValidationError("schema: relation '" + r.name + "' names undeclared target type '" +
                            r.target + "'");
    if (r.is_rating) ++rating_count;
  }
  if (rating_count != 1)
    throw ValidationError("schema: exactly one relation must be marked as the rating relation");
  if (entity_types.size() <= 1 && relations.size() <= 1)
    throw ValidationError("schema: network is not heterogeneous (need >1 entity type or >1 relation)");
  if (!(scale_min < scale_max)) throw ValidationError("schema: invalid rating scale");
}

const EntityType* HinSchema::find_type(const std::string& name) const {
  for (const EntityType& t : entity_types)
    if (t.name == name) return &t;
  return nullptr;
}

const RelationDecl& HinSchema::rating_relation() const {
  for (const RelationDecl& r : relations)
    if (r.is_rating) return r;
  throw ValidationError("schema: no rating relation declared");
}

HinSchema HinSchema::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open schema file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DatasetError("schema file " + path + ": " + e.what());
  }
  HinSchema s;
  s.version = j.value("version", 1);
  if (s.version != 1)
    throw DatasetError("schema file " + path + ": unsupported version " +
                       std::to_string(s.version));
  for (const auto& t : j.at("entity_types")) {
    EntityType et;
    et.name = t.at("name").get<std::string>();
    if (t.contains("count")) {
      et.count = t.at("count").get<int>();
      et.count_declared = true;
    }
    s.entity_types.push_back(std::move(et));
  }
  for (const auto& r : j.at("relations")) {
    RelationDecl rd;
    rd.name = r.at("name").get<std::string>();
    rd.source = r.at("source").get<std::string>();
    rd.target = r.at("target").get<std::string>();
    rd.file = r.at("file").get<std::string>();
    rd.is_rating = r.value("kind", "") == "rating";
    s.relations.push_back(std::move(rd));
  }
  if (j.contains("rating_scale")) {
    s.scale_min = j.at("rating_scale").at(0).get<double>();
    s.scale_max = j.at("rating_scale").at(1).get<double>();
  }
  s.validate();
  return s;
}

int IdMap::add_or_get(const std::string& raw) {
  auto it = raw_to_dense.find(raw);
  if (it != raw_to_dense.end()) return it->second;
  int idx = static_cast<int>(dense_to_raw.size());
  raw_to_dense.emplace(raw, idx);
  dense_to_raw.push_back(raw);
  return idx;
}

std::optional<int> IdMap::lookup(const std::string& raw) const {
  if (identity) {
    try {
      size_t pos = 0;
      int v = std::stoi(raw, &pos);
      if (pos != raw.size() || v < 0 || v >= declared_count) return std::nullopt;
      return v;
    } catch (...) {
      return std::nullopt;
    }
  }
  auto it = raw_to_dense.find(raw);
  if (it == raw_to_dense.end()) return std::nullopt;
  return it->second;
}

std::string IdMap::raw_of(int dense) const {
  if (identity) return std::to_string(dense);
  return dense_to_raw.at(static_cast<size_t>(dense));
}

RelationMatrix transpose(const RelationMatrix& rel) {
  return RelationMatrix{rel.name + "^T", rel.target, rel.source, transpose(rel.mat)};
}

void RatingMatrix::build_index() {
  for (const RatingEntry& e : entries)
    if (e.value == 0.0)
      throw ValidationError("zero-valued ratings are not representable; shift the rating scale");
  std::sort(entries.begin(), entries.end(), [](const RatingEntry& a, const RatingEntry& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  std::vector<Triplet> trips;
  trips.reserve(entries.size());
  for (const RatingEntry& e : entries) trips.push_back({e.user, e.item, e.value});
  by_user = CsrMatrix::from_triplets(users, items, trips, DuplicatePolicy::Error);
  by_item = transpose(by_user);
}

double RatingMatrix::clamp(double v) const { return std::min(scale_max, std::max(scale_min, v)); }

const RelationMatrix* HinDataset::find_relation(const std::string& source,
                                                const std::string& target) const {
  for (const RelationMatrix& r : relations)
    if (r.source == source && r.target == target) return &r;
  return nullptr;
}

const RelationMatrix* HinDataset::find_relation_named(const std::string& name) const {
  for (const RelationMatrix& r : relations)
    if (r.name == name) return &r;
  return nullptr;
}

int HinDataset::type_count(const std::string& type) const {
  auto it = id_maps.find(type);
  if (it == id_maps.end()) throw ValidationError("unknown entity type '" + type + "'");
  return it->second.size();
}

namespace {

struct RawEdge {
  std::string src, dst;
  double value = 1.0;
  bool has_value = false;
  int line = 0;
};

std::vector<RawEdge> read_edge_file(const std::string& path, const std::string& relation_name) {
  std::ifstream in(path);
  if (!in)
    throw DatasetError("relation '" + relation_name + "': missing file " + path);
  std::vector<RawEdge> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() < 2)
      throw ValidationError("relation '" + relation_name + "' line " + std::to_string(lineno) +
                            ": expected source<TAB>target[<TAB>value]");
    RawEdge e;
    e.src = cols[0];
    e.dst = cols[1];
    e.line = lineno;
    if (cols.size() >= 3 && !cols[2].empty()) {
      try {
        e.value = std::stod(cols[2]);
        e.has_value = true;
      } catch (...) {
        throw ValidationError("relation '" + relation_name + "' line " + std::to_string(lineno) +
                              ": bad value '" + cols[2] + "'");
      }
    }
    edges.push_back(std::move(e));
  }
  return edges;
}

std::uint64_t hash_file(const std::string& path, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return seed;
  char buf[1 << 14];
  std::uint64_t h = seed;
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a(buf, static_cast<size_t>(in.gcount()), h);
  }
  return h;
}

}  // namespace

HinDataset load_relations(const std::string& dataset_dir, const HinSchema& schema) {
  schema.validate();
  HinDataset ds;
  ds.schema = schema;
  ds.ratings.scale_min = schema.scale_min;
  ds.ratings.scale_max = schema.scale_max;

  for (const EntityType& t : schema.entity_types) {
    IdMap m;
    if (t.count_declared) {
      m.identity = true;
      m.declared_count = t.count;
    }
    ds.id_maps.emplace(t.name, std::move(m));
  }

  // Two passes: first collect ids (so inferred counts cover every relation),
  // then build matrices against the final counts.
  struct Parsed {
    const RelationDecl* decl;
    std::vector<RawEdge> edges;
  };
  std::vector<Parsed> parsed;
  std::uint64_t checksum = fnv1a_str("simmf-dataset-v1");
  for (const RelationDecl& decl : schema.relations) {
    std::string path = (fs::path(dataset_dir) / decl.file).string();
    parsed.push_back({&decl, read_edge_file(path, decl.name)});
    checksum = fnv1a_str(decl.name, checksum);
    checksum = hash_file(path, checksum);
  }
  ds.checksum = checksum;

  auto resolve = [&](const std::string& type, const std::string& raw, const std::string& rel,
                     int line) -> int {
    IdMap& m = ds.id_maps.at(type);
    if (m.identity) {
      auto idx = m.lookup(raw);
      if (!idx)
        throw ValidationError("relation '" + rel + "' line " + std::to_string(line) +
                              ": unknown entity ID '" + raw + "' for type '" + type +
                              "' (declared count " + std::to_string(m.declared_count) + ")");
      return *idx;
    }
    return m.add_or_get(raw);
  };

  for (Parsed& p : parsed)
    for (RawEdge& e : p.edges) {
      resolve(p.decl->source, e.src, p.decl->name, e.line);
      resolve(p.decl->target, e.dst, p.decl->name, e.line);
    }

  const RelationDecl& rating_decl = schema.rating_relation();
  ds.user_type = rating_decl.source;
  ds.item_type = rating_decl.target;

  for (Parsed& p : parsed) {
    const RelationDecl& decl = *p.decl;
    int rows = ds.type_count(decl.source);
    int cols = ds.type_count(decl.target);
    std::vector<Triplet> trips;
    trips.reserve(p.edges.size());
    for (RawEdge& e : p.edges) {
      int s = resolve(decl.source, e.src, decl.name, e.line);
      int t = resolve(decl.target, e.dst, decl.name, e.line);
      trips.push_back({s, t, 1.0});
      if (decl.is_rating) {
        if (!e.has_value)
          throw ValidationError("relation '" + decl.name + "' line " + std::to_string(e.line) +
                                ": rating value column required");
        if (e.value < schema.scale_min || e.value > schema.scale_max)
          throw ValidationError("relation '" + decl.name + "' line " + std::to_string(e.line) +
                                ": rating " + std::to_string(e.value) + " outside scale [" +
                                std::to_string(schema.scale_min) + "," +
                                std::to_string(schema.scale_max) + "]");
        ds.ratings.entries.push_back({s, t, e.value});
      }
    }
    RelationMatrix rel;
    rel.name = decl.name;
    rel.source = decl.source;
    rel.target = decl.target;
    // Attribute/social edges are presence-valued; the rating relation is also
    // binarized here (meta paths count co-occurrence, not rating magnitude).
    rel.mat = CsrMatrix::from_triplets(rows, cols, std::move(trips), DuplicatePolicy::Presence);
    ds.relations.push_back(std::move(rel));

    if (decl.is_rating) {
      if (ds.ratings.entries.empty())
        throw DatasetError("relation '" + decl.name + "': no ratings");
      ds.ratings.users = rows;
      ds.ratings.items = cols;
      // duplicate (user, item) pairs are a validation error
      std::vector<RatingEntry>& es = ds.ratings.entries;
      std::sort(es.begin(), es.end(), [](const RatingEntry& a, const RatingEntry& b) {
        return a.user != b.user ? a.user < b.user : a.item < b.item;
      });
      for (size_t i = 1; i < es.size(); ++i)
        if (es[i].user == es[i - 1].user && es[i].item == es[i - 1].item)
          throw ValidationError("relation '" + decl.name + "': duplicate rating for (user " +
                                ds.id_maps.at(ds.user_type).raw_of(es[i].user) + ", item " +
                                ds.id_maps.at(ds.item_type).raw_of(es[i].item) + ")");
      ds.ratings.build_index();
    }
  }
  return ds;
}

HinDataset load_dataset(const std::string& dataset_dir) {
  std::string schema_path = (fs::path(dataset_dir) / "schema.json").string();
  HinSchema schema = HinSchema::from_json_file(schema_path);
  return load_relations(dataset_dir, schema);
}

void write_relation_file(const std::string& path, const RelationMatrix& rel, const IdMap& src,
                         const IdMap& dst) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path);
  out << "# " << rel.name << ": " << rel.source << " -> " << rel.target << "\n";
  for (int i = 0; i < rel.mat.rows; ++i) {
    auto idx = rel.mat.row_indices(i);
    auto val = rel.mat.row_values(i);
    for (size_t k = 0; k < idx.size(); ++k) {
      out << src.raw_of(i) << '\t' << dst.raw_of(idx[k]);
      if (val[k] != 1.0) out << '\t' << val[k];
      out << '\n';
    }
  }
}

void save_id_maps(const HinDataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  for (const auto& [type, map] : ds.id_maps) {
    if (map.identity) continue;  // nothing to translate
    std::ofstream out((fs::path(dir) / ("idmap_" + type + ".tsv")).string());
    out << "# dense index\traw id\n";
    for (size_t i = 0; i < map.dense_to_raw.size(); ++i)
      out << i << '\t' << map.dense_to_raw[i] << '\n';
  }
}

}  // namespace simmf
