#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "docsim/error.hpp"

namespace docsim {

// Store file layout: magic "DPS1", u32 header length, schema JSON, then
// records. Each record is the schema's fields in order, each field a u32
// byte length followed by the payload. Strings are UTF-8, ints are 8-byte
// little-endian two's complement. The schema travels with the data, and any
// field can be skipped by its length prefix without touching the payload.
inline constexpr char kStoreMagic[4] = {'D', 'P', 'S', '1'};

enum class FieldType { String, Int };

inline const char* field_type_name(FieldType t) {
  return t == FieldType::String ? "string" : "int";
}

inline FieldType parse_field_type(const std::string& s) {
  if (s == "string") return FieldType::String;
  if (s == "int") return FieldType::Int;
  throw DataError("unknown field type: " + s);
}

struct StoreSchema {
  std::string name;
  int version = 1;
  std::vector<std::pair<std::string, FieldType>> fields;

  bool operator==(const StoreSchema& o) const = default;

  std::optional<size_t> index_of(const std::string& field) const {
    for (size_t i = 0; i < fields.size(); ++i)
      if (fields[i].first == field) return i;
    return std::nullopt;
  }

  // A reader schema is valid against a writer schema iff every reader field
  // exists in the writer with the same type. Throws naming the first field
  // that fails.
  void check_projection_of(const StoreSchema& writer) const {
    for (const auto& [fname, ftype] : fields) {
      auto wi = writer.index_of(fname);
      if (!wi)
        throw DataError("schema mismatch: field '" + fname +
                        "' not present in writer schema");
      if (writer.fields[*wi].second != ftype)
        throw DataError("schema mismatch: field '" + fname +
                        "' has writer type " +
                        field_type_name(writer.fields[*wi].second) +
                        ", reader expects " + field_type_name(ftype));
    }
  }

  std::string to_json_string() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["version"] = version;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [fname, ftype] : fields) {
      nlohmann::ordered_json f;
      f["name"] = fname;
      f["type"] = field_type_name(ftype);
      arr.push_back(std::move(f));
    }
    j["fields"] = std::move(arr);
    return j.dump();
  }

  static StoreSchema from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("store schema json: ") + e.what());
    }
    StoreSchema s;
    s.name = j.at("name").get<std::string>();
    s.version = j.at("version").get<int>();
    for (const auto& f : j.at("fields")) {
      s.fields.emplace_back(f.at("name").get<std::string>(),
                            parse_field_type(f.at("type").get<std::string>()));
    }
    return s;
  }
};

using FieldValue = std::variant<std::string, int64_t>;
using Row = std::vector<FieldValue>;

/// One document record: a legislative-proposal-like unit of text plus the
/// metadata used for filtering. primary_key is state/year/docversion.
struct DocumentRecord {
  std::string primary_key;
  std::string content;
  int64_t year = 0;
  std::string state;
  std::string docversion;

  bool operator==(const DocumentRecord&) const = default;
};

inline const StoreSchema& document_schema() {
  static const StoreSchema schema{
      "documents",
      1,
      {{"primary_key", FieldType::String},
       {"content", FieldType::String},
       {"year", FieldType::Int},
       {"state", FieldType::String},
       {"docversion", FieldType::String}}};
  return schema;
}

inline std::string make_primary_key(const std::string& state, int64_t year,
                                    const std::string& docversion) {
  return state + "/" + std::to_string(year) + "/" + docversion;
}

namespace detail {

inline void write_u32le(std::ostream& os, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline bool read_u32le(std::istream& is, uint32_t& out) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  out = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
        (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  return true;
}

inline void write_i64le(std::ostream& os, int64_t v) {
  auto u = static_cast<uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline int64_t read_i64le(const char* b) {
  uint64_t u = 0;
  for (int i = 7; i >= 0; --i)
    u = (u << 8) | static_cast<uint8_t>(b[i]);
  return static_cast<int64_t>(u);
}

}  // namespace detail

inline bool valid_utf8(std::string_view s) {
  size_t i = 0;
  const auto n = s.size();
  while (i < n) {
    const auto c = static_cast<uint8_t>(s[i]);
    size_t extra;
    uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c >> 5) == 0x6) {
      extra = 1;
      cp = c & 0x1f;
    } else if ((c >> 4) == 0xe) {
      extra = 2;
      cp = c & 0x0f;
    } else if ((c >> 3) == 0x1e) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= n) return false;
    for (size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<uint8_t>(s[i + k]);
      if ((cc >> 6) != 0x2) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    // Reject overlong encodings, surrogates, and out-of-range code points.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
        (extra == 3 && cp < 0x10000))
      return false;
    if (cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
    i += extra + 1;
  }
  return true;
}

/// Writes a store file. Single writer per file; the store is immutable once
/// closed.
class StoreWriter {
 public:
  StoreWriter(const std::filesystem::path& path, StoreSchema schema)
      : schema_(std::move(schema)), os_(path, std::ios::binary | std::ios::trunc) {
    if (!os_) throw DataError("cannot open store for writing: " + path.string());
    os_.write(kStoreMagic, 4);
    const std::string header = schema_.to_json_string();
    detail::write_u32le(os_, static_cast<uint32_t>(header.size()));
    os_.write(header.data(), static_cast<std::streamsize>(header.size()));
  }

  const StoreSchema& schema() const { return schema_; }

  void append(const Row& row) {
    if (row.size() != schema_.fields.size())
      throw DataError("row arity does not match schema '" + schema_.name + "'");
    for (size_t i = 0; i < row.size(); ++i) {
      const FieldType ft = schema_.fields[i].second;
      if (ft == FieldType::String) {
        const auto* s = std::get_if<std::string>(&row[i]);
        if (!s)
          throw DataError("field '" + schema_.fields[i].first +
                          "' expects a string value");
        detail::write_u32le(os_, static_cast<uint32_t>(s->size()));
        os_.write(s->data(), static_cast<std::streamsize>(s->size()));
      } else {
        const auto* v = std::get_if<int64_t>(&row[i]);
        if (!v)
          throw DataError("field '" + schema_.fields[i].first +
                          "' expects an int value");
        detail::write_u32le(os_, 8);
        detail::write_i64le(os_, *v);
      }
    }
    ++count_;
  }

  void append(const DocumentRecord& rec) {
    append(Row{rec.primary_key, rec.content, rec.year, rec.state,
               rec.docversion});
  }

  size_t count() const { return count_; }

  void close() {
    if (os_.is_open()) {
      os_.flush();
      if (!os_) throw DataError("store write failed");
      os_.close();
    }
  }

 private:
  StoreSchema schema_;
  std::ofstream os_;
  size_t count_ = 0;
};

/// Reads a store file. Each scan opens its own stream, so concurrent readers
/// of the same store are safe.
class StoreReader {
 public:
  explicit StoreReader(const std::filesystem::path& path) : path_(path) {
    std::ifstream is(path_, std::ios::binary);
    if (!is) throw DataError("cannot open store: " + path_.string());
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kStoreMagic, 4) != 0)
      throw DataError("not a record store (bad magic): " + path_.string());
    uint32_t header_len = 0;
    if (!detail::read_u32le(is, header_len))
      throw DataError("truncated store header: " + path_.string());
    std::string header(header_len, '\0');
    if (!is.read(header.data(), header_len))
      throw DataError("truncated store header: " + path_.string());
    schema_ = StoreSchema::from_json_string(header);
    data_offset_ = 8 + static_cast<std::streamoff>(header_len);
  }

  const StoreSchema& schema() const { return schema_; }

  // Full scan in writer-schema order.
  void for_each(const std::function<void(const Row&)>& fn) const {
    scan(schema_, fn);
  }

  std::vector<Row> read_all() const {
    std::vector<Row> rows;
    for_each([&](const Row& r) { rows.push_back(r); });
    return rows;
  }

  // Projected scan: yields rows holding only the reader-schema fields, in
  // reader-schema order. Skipped fields are jumped over by their length
  // prefix and never materialized.
  void project(const StoreSchema& reader,
               const std::function<void(const Row&)>& fn) const {
    reader.check_projection_of(schema_);
    scan(reader, fn);
  }

  std::vector<Row> read_projected(const StoreSchema& reader) const {
    std::vector<Row> rows;
    project(reader, [&](const Row& r) { rows.push_back(r); });
    return rows;
  }

 private:
  void scan(const StoreSchema& reader,
            const std::function<void(const Row&)>& fn) const {
    // Map each writer field to its reader slot, or -1 to skip.
    std::vector<int> slot(schema_.fields.size(), -1);
    for (size_t w = 0; w < schema_.fields.size(); ++w) {
      if (auto r = reader.index_of(schema_.fields[w].first)) {
        slot[w] = static_cast<int>(*r);
      }
    }

    std::ifstream is(path_, std::ios::binary);
    if (!is) throw DataError("cannot open store: " + path_.string());
    is.seekg(data_offset_);

    Row row(reader.fields.size());
    for (;;) {
      for (size_t w = 0; w < schema_.fields.size(); ++w) {
        uint32_t len = 0;
        if (!detail::read_u32le(is, len)) {
          if (w == 0 && is.eof()) return;  // clean end of store
          throw DataError("truncated record in store: " + path_.string());
        }
        const FieldType ft = schema_.fields[w].second;
        if (ft == FieldType::Int && len != 8)
          throw DataError("corrupt int field length in store: " + path_.string());
        if (slot[w] < 0) {
          is.seekg(static_cast<std::streamoff>(len), std::ios::cur);
          if (!is) throw DataError("truncated record in store: " + path_.string());
          continue;
        }
        if (ft == FieldType::String) {
          std::string s(len, '\0');
          if (len > 0 && !is.read(s.data(), len))
            throw DataError("truncated record in store: " + path_.string());
          row[static_cast<size_t>(slot[w])] = std::move(s);
        } else {
          char b[8];
          if (!is.read(b, 8))
            throw DataError("truncated record in store: " + path_.string());
          row[static_cast<size_t>(slot[w])] = detail::read_i64le(b);
        }
      }
      fn(row);
    }
  }

  std::filesystem::path path_;
  StoreSchema schema_;
  std::streamoff data_offset_ = 0;
};

inline DocumentRecord row_to_document(const Row& row) {
  DocumentRecord rec;
  rec.primary_key = std::get<std::string>(row[0]);
  rec.content = std::get<std::string>(row[1]);
  rec.year = std::get<int64_t>(row[2]);
  rec.state = std::get<std::string>(row[3]);
  rec.docversion = std::get<std::string>(row[4]);
  return rec;
}

inline std::vector<DocumentRecord> read_all_documents(
    const std::filesystem::path& store) {
  StoreReader reader(store);
  if (!(reader.schema() == document_schema()))
    throw DataError("store is not a document store: " + store.string());
  std::vector<DocumentRecord> out;
  reader.for_each([&](const Row& r) { out.push_back(row_to_document(r)); });
  return out;
}

struct ManifestEntry {
  std::filesystem::path file;
  std::string state;
  int64_t year = 0;
  std::string docversion;
};

// Manifest: CSV with header `path,state,year,docversion`, no quoting.
// Relative paths are resolved against the manifest's directory.
inline std::vector<ManifestEntry> read_manifest(
    const std::filesystem::path& manifest) {
  std::ifstream is(manifest);
  if (!is) throw DataError("cannot open manifest: " + manifest.string());
  const auto base = manifest.parent_path();

  auto strip_cr = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };

  std::string line;
  if (!std::getline(is, line))
    throw DataError("empty manifest (missing header): " + manifest.string());
  strip_cr(line);
  if (line != "path,state,year,docversion")
    throw DataError("manifest header must be 'path,state,year,docversion': " +
                    manifest.string());

  std::vector<ManifestEntry> entries;
  size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        cols.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (cols.size() != 4)
      throw DataError("manifest line " + std::to_string(lineno) +
                      ": expected 4 columns");
    ManifestEntry e;
    std::filesystem::path p(cols[0]);
    e.file = p.is_absolute() ? p : base / p;
    e.state = cols[1];
    if (e.state.size() != 2)
      throw DataError("manifest line " + std::to_string(lineno) +
                      ": state must be a 2-letter code, got '" + e.state + "'");
    try {
      e.year = std::stoll(cols[2]);
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(lineno) +
                      ": bad year '" + cols[2] + "'");
    }
    e.docversion = cols[3];
    entries.push_back(std::move(e));
  }
  return entries;
}

/// Converts the raw files listed in a manifest into a document store.
/// Returns the number of records written. Duplicate primary keys and files
/// that are not valid UTF-8 are rejected.
inline size_t ingest(const std::filesystem::path& manifest,
                     const std::filesystem::path& out_store) {
  const auto entries = read_manifest(manifest);

  StoreWriter writer(out_store, document_schema());
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    std::ifstream is(e.file, std::ios::binary);
    if (!is) throw DataError("cannot read input file: " + e.file.string());
    std::string content((std::istreambuf_iterator<char>(is)),
                        std::istreambuf_iterator<char>());
    if (!valid_utf8(content))
      throw DataError("file is not valid UTF-8: " + e.file.string());

    DocumentRecord rec;
    rec.state = e.state;
    rec.year = e.year;
    rec.docversion = e.docversion;
    rec.primary_key = make_primary_key(e.state, e.year, e.docversion);
    rec.content = std::move(content);
    if (!seen.insert(rec.primary_key).second)
      throw DataError("duplicate key: " + rec.primary_key);
    writer.append(rec);
  }
  writer.close();
  return writer.count();
}

/// Metadata predicate evaluated without ever reading the content field.
using MetaPredicate =
    std::function<bool(int64_t year, const std::string& state,
                       const std::string& docversion)>;

inline std::vector<std::string> filter_records(
    const std::filesystem::path& store, const MetaPredicate& pred) {
  static const StoreSchema meta_schema{
      "documents_meta",
      1,
      {{"primary_key", FieldType::String},
       {"year", FieldType::Int},
       {"state", FieldType::String},
       {"docversion", FieldType::String}}};
  StoreReader reader(store);
  std::vector<std::string> keys;
  reader.project(meta_schema, [&](const Row& r) {
    if (pred(std::get<int64_t>(r[1]), std::get<std::string>(r[2]),
             std::get<std::string>(r[3])))
      keys.push_back(std::get<std::string>(r[0]));
  });
  return keys;
}

}  // namespace docsim
