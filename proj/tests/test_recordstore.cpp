#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "docsim/recordstore.hpp"
#include "docsim/rng.hpp"

using namespace docsim;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("docsim_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

fs::path write_manifest(const fs::path& dir,
                        const std::vector<std::array<std::string, 4>>& rows) {
  const auto path = dir / "manifest.csv";
  std::ofstream os(path);
  os << "path,state,year,docversion\n";
  for (const auto& r : rows)
    os << r[0] << ',' << r[1] << ',' << r[2] << ',' << r[3] << '\n';
  return path;
}

}  // namespace

TEST_CASE("schema json round-trips and is self-describing", "[recordstore]") {
  const auto& schema = document_schema();
  const auto text = schema.to_json_string();
  const auto back = StoreSchema::from_json_string(text);
  REQUIRE(back == schema);
  REQUIRE(back.fields.size() == 5);
  REQUIRE(back.fields[1].first == "content");
}

TEST_CASE("write then read is the identity on documents", "[recordstore]") {
  const auto dir = temp_dir("rs_roundtrip");
  const auto store = dir / "docs.dps";

  std::vector<DocumentRecord> records{
      {"FL/2005/SB436", "stand your ground\nsection 776", 2005, "FL", "SB436"},
      {"MI/2005/SB1046", "", 2005, "MI", "SB1046"},
      {"SC/2011/SB1415", std::string("binary\0byte", 11), 2011, "SC", "SB1415"},
  };
  {
    StoreWriter writer(store, document_schema());
    for (const auto& r : records) writer.append(r);
    writer.close();
  }
  const auto back = read_all_documents(store);
  REQUIRE(back == records);

  // A reader recovers the writer schema from the file alone.
  StoreReader reader(store);
  REQUIRE(reader.schema() == document_schema());
}

TEST_CASE("ingest writes one record per manifest row", "[recordstore]") {
  const auto dir = temp_dir("rs_ingest");
  write_file(dir / "a.txt", "an act relating to self defense");
  write_file(dir / "b.txt", "an act about water rights");
  write_file(dir / "c.txt", "the education budget act");
  const auto manifest = write_manifest(dir, {{"a.txt", "FL", "2005", "SB436"},
                                             {"b.txt", "FL", "2005", "HB101"},
                                             {"c.txt", "FL", "2005", "HB102"}});
  const auto store = dir / "docs.dps";
  REQUIRE(ingest(manifest, store) == 3);

  const auto docs = read_all_documents(store);
  REQUIRE(docs.size() == 3);
  CHECK(docs[0].primary_key == "FL/2005/SB436");
  CHECK(docs[0].content == "an act relating to self defense");
  CHECK(docs[2].year == 2005);
}

TEST_CASE("ingest round-trip preserves file bytes", "[recordstore]") {
  const auto dir = temp_dir("rs_bytes");
  const std::string text = "Line one.\n\tLine two with unicode: \xc3\xa9\n";
  write_file(dir / "doc.txt", text);
  const auto manifest = write_manifest(dir, {{"doc.txt", "CA", "2010", "SB1"}});
  const auto store = dir / "docs.dps";
  ingest(manifest, store);
  REQUIRE(read_all_documents(store)[0].content == text);
}

TEST_CASE("ingest rejects duplicate primary keys", "[recordstore]") {
  const auto dir = temp_dir("rs_dup");
  write_file(dir / "a.txt", "one");
  write_file(dir / "b.txt", "two");
  const auto manifest = write_manifest(dir, {{"a.txt", "FL", "2005", "SB436"},
                                             {"b.txt", "FL", "2005", "SB436"}});
  REQUIRE_THROWS_MATCHES(ingest(manifest, dir / "docs.dps"), DataError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "duplicate key: FL/2005/SB436")));
}

TEST_CASE("ingest rejects files that are not UTF-8", "[recordstore]") {
  const auto dir = temp_dir("rs_utf8");
  write_file(dir / "bad.txt", std::string("\xff\xfe broken", 9));
  const auto manifest = write_manifest(dir, {{"bad.txt", "TX", "2001", "HB1"}});
  REQUIRE_THROWS_MATCHES(ingest(manifest, dir / "docs.dps"), DataError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("bad.txt")));
}

TEST_CASE("empty manifest produces a valid empty store", "[recordstore]") {
  const auto dir = temp_dir("rs_empty");
  const auto manifest = write_manifest(dir, {});
  const auto store = dir / "docs.dps";
  REQUIRE(ingest(manifest, store) == 0);
  REQUIRE(read_all_documents(store).empty());
}

TEST_CASE("projection yields requested fields only", "[recordstore]") {
  const auto dir = temp_dir("rs_proj");
  const auto store = dir / "docs.dps";
  {
    StoreWriter writer(store, document_schema());
    for (int i = 0; i < 5; ++i) {
      DocumentRecord r;
      r.state = "FL";
      r.year = 2000 + i;
      r.docversion = "SB" + std::to_string(i);
      r.primary_key = make_primary_key(r.state, r.year, r.docversion);
      r.content = "content " + std::to_string(i);
      writer.append(r);
    }
    writer.close();
  }

  const StoreSchema reader_schema{"meta",
                                  1,
                                  {{"primary_key", FieldType::String},
                                   {"year", FieldType::Int},
                                   {"state", FieldType::String}}};
  StoreReader reader(store);
  const auto rows = reader.read_projected(reader_schema);
  REQUIRE(rows.size() == 5);
  CHECK(std::get<std::string>(rows[2][0]) == "FL/2002/SB2");
  CHECK(std::get<int64_t>(rows[2][1]) == 2002);
  CHECK(std::get<std::string>(rows[2][2]) == "FL");
  for (const auto& row : rows) REQUIRE(row.size() == 3);
}

TEST_CASE("projection of an unknown field is a schema mismatch", "[recordstore]") {
  const auto dir = temp_dir("rs_badproj");
  const auto store = dir / "docs.dps";
  {
    StoreWriter writer(store, document_schema());
    writer.append(DocumentRecord{"FL/2005/SB1", "x", 2005, "FL", "SB1"});
    writer.close();
  }
  StoreReader reader(store);
  const StoreSchema bad{"bad", 1, {{"nonexistent_field", FieldType::String}}};
  REQUIRE_THROWS_MATCHES(reader.read_projected(bad), DataError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "nonexistent_field")));
  const StoreSchema bad_type{"bad", 1, {{"year", FieldType::String}}};
  REQUIRE_THROWS_AS(reader.read_projected(bad_type), DataError);
}

TEST_CASE("projection soundness against full reads", "[recordstore]") {
  const auto dir = temp_dir("rs_sound");
  const auto store = dir / "docs.dps";
  Rng rng(99);
  std::vector<DocumentRecord> records;
  {
    StoreWriter writer(store, document_schema());
    for (int i = 0; i < 40; ++i) {
      DocumentRecord r;
      r.state = rng.chance(0.5) ? "FL" : "MI";
      r.year = 2000 + static_cast<int64_t>(rng.index(12));
      r.docversion = "SB" + std::to_string(i);
      r.primary_key = make_primary_key(r.state, r.year, r.docversion);
      const size_t len = rng.index(200);
      for (size_t c = 0; c < len; ++c)
        r.content.push_back(static_cast<char>('a' + rng.index(26)));
      records.push_back(r);
      writer.append(r);
    }
    writer.close();
  }
  StoreReader reader(store);

  // Identity projection equals read_all.
  const auto full = reader.read_projected(document_schema());
  REQUIRE(full.size() == records.size());
  for (size_t i = 0; i < full.size(); ++i)
    CHECK(row_to_document(full[i]) == records[i]);

  // Every single-field projection matches the per-record restriction.
  for (const auto& [fname, ftype] : document_schema().fields) {
    const StoreSchema one{"one", 1, {{fname, ftype}}};
    const auto rows = reader.read_projected(one);
    REQUIRE(rows.size() == records.size());
    const auto widx = *document_schema().index_of(fname);
    for (size_t i = 0; i < rows.size(); ++i) CHECK(rows[i][0] == full[i][widx]);
  }
}

TEST_CASE("filter_records matches a brute-force scan", "[recordstore]") {
  const auto dir = temp_dir("rs_filter");
  const auto store = dir / "docs.dps";
  {
    StoreWriter writer(store, document_schema());
    int i = 0;
    for (const auto& [state, year] :
         std::vector<std::pair<std::string, int64_t>>{
             {"FL", 2005}, {"FL", 2005}, {"MI", 2011}, {"FL", 2007}, {"MI", 2005}}) {
      DocumentRecord r;
      r.state = state;
      r.year = year;
      r.docversion = "SB" + std::to_string(i++);
      r.primary_key = make_primary_key(state, year, r.docversion);
      r.content = "body";
      writer.append(r);
    }
    writer.close();
  }

  SECTION("year equality") {
    const auto keys = filter_records(
        store, [](int64_t year, const std::string&, const std::string&) {
          return year == 2005;
        });
    REQUIRE(keys.size() == 3);
  }
  SECTION("empty state set") {
    const auto keys = filter_records(
        store,
        [](int64_t, const std::string&, const std::string&) { return false; });
    REQUIRE(keys.empty());
  }
  SECTION("conjunction matches full deserialization") {
    const auto keys = filter_records(
        store, [](int64_t year, const std::string& state, const std::string&) {
          return state == "FL" && year >= 2005;
        });
    std::set<std::string> expected;
    for (const auto& d : read_all_documents(store))
      if (d.state == "FL" && d.year >= 2005) expected.insert(d.primary_key);
    REQUIRE(std::set<std::string>(keys.begin(), keys.end()) == expected);
  }
}

TEST_CASE("manifest validation", "[recordstore]") {
  const auto dir = temp_dir("rs_manifest");
  SECTION("missing header") {
    write_file(dir / "m.csv", "a.txt,FL,2005,SB1\n");
    REQUIRE_THROWS_AS(read_manifest(dir / "m.csv"), DataError);
  }
  SECTION("bad state code") {
    write_file(dir / "m.csv",
               "path,state,year,docversion\na.txt,FLA,2005,SB1\n");
    REQUIRE_THROWS_AS(read_manifest(dir / "m.csv"), DataError);
  }
  SECTION("bad year") {
    write_file(dir / "m.csv", "path,state,year,docversion\na.txt,FL,abc,SB1\n");
    REQUIRE_THROWS_AS(read_manifest(dir / "m.csv"), DataError);
  }
}

TEST_CASE("utf-8 validation accepts and rejects correctly", "[recordstore]") {
  CHECK(valid_utf8("plain ascii"));
  CHECK(valid_utf8("caf\xc3\xa9"));
  CHECK(valid_utf8("\xe6\x97\xa5\xe6\x9c\xac"));
  CHECK(valid_utf8("\xf0\x9f\x8e\x89"));
  CHECK_FALSE(valid_utf8("\xff"));
  CHECK_FALSE(valid_utf8("\xc3"));                  // truncated sequence
  CHECK_FALSE(valid_utf8("\xc0\xaf"));              // overlong
  CHECK_FALSE(valid_utf8("\xed\xa0\x80"));          // surrogate
  CHECK_FALSE(valid_utf8(std::string("\x80", 1)));  // stray continuation
}
