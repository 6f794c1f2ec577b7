#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "loom/errors.hpp"
#include "loom/json.hpp"

struct sqlite3;

namespace loom {

struct LakeManifest {
    std::string name;
    std::filesystem::path db_path;
    std::filesystem::path media_root;
    std::filesystem::path docs_root;

    static LakeManifest load(const std::filesystem::path& manifest_file);
};

struct ColumnInfo {
    std::string name;
    std::string declared_type;
};

struct ForeignKeyInfo {
    std::string column;
    std::string ref_table;
    std::string ref_column;
};

struct TableInfo {
    std::string name;
    std::vector<ColumnInfo> columns;
    std::vector<ForeignKeyInfo> foreign_keys;
    std::int64_t row_count = -1;
};

// Introspected view of the relational store, rendered into prompts as a
// compact `table(col:type, ...)` listing.
struct SchemaCatalog {
    std::vector<TableInfo> tables;

    std::string to_prompt_text() const;
    std::string fingerprint() const;
    bool empty() const { return tables.empty(); }
};

// The data lake: one embedded relational store plus media and document
// directories. Read-only; shareable across workers.
class DataLake {
public:
    explicit DataLake(LakeManifest manifest);
    ~DataLake();

    DataLake(const DataLake&) = delete;
    DataLake& operator=(const DataLake&) = delete;

    const LakeManifest& manifest() const { return manifest_; }

    SchemaCatalog schema_catalog(bool with_row_counts = false) const;

    // Executes a single read-only statement; rows come back as
    // column-name -> value maps. Write statements are rejected and engine
    // errors are propagated verbatim for self-debug feedback.
    json run_sql(const std::string& sql) const;

    // Relative paths are jailed to their root; escapes and absolute
    // paths are rejected because tool-produced paths are untrusted.
    std::filesystem::path resolve_media(const std::string& rel_path) const;
    std::filesystem::path resolve_document(const std::string& rel_path) const;
    std::string read_document(const std::string& rel_path) const;

private:
    LakeManifest manifest_;
    sqlite3* db_ = nullptr;
};

// Builds a lake directory from a DDL+insert script: creates <name>.db,
// the media/ and docs/ directories, placeholder files for every
// `images/...` or `docs/...` path mentioned in the store, and writes
// manifest.json. Returns the manifest path.
std::filesystem::path build_lake_from_script(const std::filesystem::path& sql_file,
                                             const std::filesystem::path& out_dir,
                                             const std::string& name);

} // namespace loom
