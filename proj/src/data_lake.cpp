#include "loom/data_lake.hpp"

#include <sqlite3.h>

#include <fstream>
#include <sstream>

namespace loom {

namespace fs = std::filesystem;

LakeManifest LakeManifest::load(const fs::path& manifest_file) {
    std::ifstream in(manifest_file);
    if (!in) {
        throw IoError("cannot open lake manifest: " + manifest_file.string());
    }
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw IoError("lake manifest is not valid JSON: " + manifest_file.string());
    }
    LakeManifest m;
    fs::path base = manifest_file.parent_path();
    m.name = doc.value("name", "lake");
    m.db_path = base / doc.value("db", "lake.db");
    m.media_root = base / doc.value("media_root", "images");
    m.docs_root = base / doc.value("docs_root", "docs");
    return m;
}

DataLake::DataLake(LakeManifest manifest) : manifest_(std::move(manifest)) {
    if (!fs::exists(manifest_.db_path)) {
        throw IoError("lake database not found: " + manifest_.db_path.string());
    }
    int rc = sqlite3_open_v2(manifest_.db_path.string().c_str(), &db_,
                             SQLITE_OPEN_READONLY | SQLITE_OPEN_FULLMUTEX, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = db_ != nullptr ? sqlite3_errmsg(db_) : "unknown sqlite error";
        if (db_ != nullptr) sqlite3_close(db_);
        db_ = nullptr;
        throw IoError("cannot open lake database: " + msg);
    }
}

DataLake::~DataLake() {
    if (db_ != nullptr) {
        sqlite3_close(db_);
    }
}

namespace {

json column_value(sqlite3_stmt* stmt, int col) {
    switch (sqlite3_column_type(stmt, col)) {
        case SQLITE_INTEGER:
            return json(static_cast<std::int64_t>(sqlite3_column_int64(stmt, col)));
        case SQLITE_FLOAT:
            return json(sqlite3_column_double(stmt, col));
        case SQLITE_NULL:
            return json(nullptr);
        case SQLITE_BLOB: {
            const auto* bytes = static_cast<const char*>(sqlite3_column_blob(stmt, col));
            int n = sqlite3_column_bytes(stmt, col);
            return json(std::string(bytes, bytes + n));
        }
        default: {
            const unsigned char* text = sqlite3_column_text(stmt, col);
            return json(text != nullptr ? reinterpret_cast<const char*>(text) : "");
        }
    }
}

json query_rows(sqlite3* db, const std::string& sql) {
    sqlite3_stmt* stmt = nullptr;
    const char* tail = nullptr;
    int rc = sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, &tail);
    if (rc != SQLITE_OK) {
        std::string msg = sqlite3_errmsg(db);
        if (stmt != nullptr) sqlite3_finalize(stmt);
        throw SqlError(msg);
    }
    json rows = json::array();
    while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
        json row = json::object();
        int cols = sqlite3_column_count(stmt);
        for (int c = 0; c < cols; ++c) {
            row[sqlite3_column_name(stmt, c)] = column_value(stmt, c);
        }
        rows.push_back(std::move(row));
    }
    if (rc != SQLITE_DONE) {
        std::string msg = sqlite3_errmsg(db);
        sqlite3_finalize(stmt);
        throw SqlError(msg);
    }
    sqlite3_finalize(stmt);
    return rows;
}

} // namespace

SchemaCatalog DataLake::schema_catalog(bool with_row_counts) const {
    SchemaCatalog catalog;
    json tables = query_rows(
        db_, "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%' "
             "ORDER BY rowid");
    for (const auto& row : tables) {
        TableInfo info;
        info.name = row.at("name").get<std::string>();
        json cols = query_rows(db_, "PRAGMA table_info(\"" + info.name + "\")");
        for (const auto& col : cols) {
            info.columns.push_back(
                {col.at("name").get<std::string>(), col.at("type").get<std::string>()});
        }
        json fks = query_rows(db_, "PRAGMA foreign_key_list(\"" + info.name + "\")");
        for (const auto& fk : fks) {
            std::string to = fk.at("to").is_null() ? "" : fk.at("to").get<std::string>();
            info.foreign_keys.push_back(
                {fk.at("from").get<std::string>(), fk.at("table").get<std::string>(), to});
        }
        if (with_row_counts) {
            json count = query_rows(db_, "SELECT COUNT(*) AS n FROM \"" + info.name + "\"");
            info.row_count = count.at(0).at("n").get<std::int64_t>();
        }
        catalog.tables.push_back(std::move(info));
    }
    return catalog;
}

std::string SchemaCatalog::to_prompt_text() const {
    std::ostringstream os;
    for (const auto& table : tables) {
        os << table.name << "(";
        bool first = true;
        for (const auto& col : table.columns) {
            if (!first) os << ", ";
            first = false;
            os << col.name << ":" << (col.declared_type.empty() ? "ANY" : col.declared_type);
        }
        os << ")";
        for (const auto& fk : table.foreign_keys) {
            os << " -- fk: " << fk.column << " -> " << fk.ref_table;
            if (!fk.ref_column.empty()) os << "." << fk.ref_column;
        }
        os << "\n";
    }
    return os.str();
}

std::string SchemaCatalog::fingerprint() const {
    // FNV-1a over the prompt rendering.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : to_prompt_text()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

json DataLake::run_sql(const std::string& sql) const {
    sqlite3_stmt* stmt = nullptr;
    const char* tail = nullptr;
    int rc = sqlite3_prepare_v2(db_, sql.c_str(), -1, &stmt, &tail);
    if (rc != SQLITE_OK) {
        std::string msg = sqlite3_errmsg(db_);
        if (stmt != nullptr) sqlite3_finalize(stmt);
        throw SqlError(msg);
    }
    if (stmt == nullptr) {
        throw SqlError("empty SQL statement");
    }
    if (tail != nullptr) {
        std::string rest(tail);
        if (rest.find_first_not_of(" \t\r\n;") != std::string::npos) {
            sqlite3_finalize(stmt);
            throw SqlError("only a single statement is allowed");
        }
    }
    if (sqlite3_stmt_readonly(stmt) == 0) {
        sqlite3_finalize(stmt);
        throw SqlError("write statements are not allowed on the data lake");
    }

    json rows = json::array();
    while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
        json row = json::object();
        int cols = sqlite3_column_count(stmt);
        for (int c = 0; c < cols; ++c) {
            row[sqlite3_column_name(stmt, c)] = column_value(stmt, c);
        }
        rows.push_back(std::move(row));
    }
    if (rc != SQLITE_DONE) {
        std::string msg = sqlite3_errmsg(db_);
        sqlite3_finalize(stmt);
        throw SqlError(msg);
    }
    sqlite3_finalize(stmt);
    return rows;
}

namespace {

fs::path resolve_in_root(const fs::path& root, const std::string& rel_path,
                         const std::string& what) {
    fs::path rel(rel_path);
    if (rel.is_absolute()) {
        throw PathEscapeError(what + " path must be relative: " + rel_path);
    }
    fs::path normal_root = root.lexically_normal();
    fs::path combined = (root / rel).lexically_normal();
    auto root_it = normal_root.begin();
    auto comb_it = combined.begin();
    for (; root_it != normal_root.end(); ++root_it, ++comb_it) {
        if (comb_it == combined.end() || *comb_it != *root_it) {
            throw PathEscapeError(what + " path escapes its root: " + rel_path);
        }
    }
    if (!fs::exists(combined)) {
        throw NotFoundError(what + " not found: " + rel_path);
    }
    return combined;
}

} // namespace

fs::path DataLake::resolve_media(const std::string& rel_path) const {
    // Paths in the store are usually relative to the lake, e.g.
    // "images/img_0.jpg"; accept both lake-relative and media-relative.
    fs::path rel(rel_path);
    if (!rel.empty() && rel.begin()->string() == manifest_.media_root.filename().string()) {
        return resolve_in_root(manifest_.media_root.parent_path(), rel_path, "media");
    }
    return resolve_in_root(manifest_.media_root, rel_path, "media");
}

fs::path DataLake::resolve_document(const std::string& rel_path) const {
    fs::path rel(rel_path);
    if (!rel.empty() && rel.begin()->string() == manifest_.docs_root.filename().string()) {
        return resolve_in_root(manifest_.docs_root.parent_path(), rel_path, "document");
    }
    return resolve_in_root(manifest_.docs_root, rel_path, "document");
}

std::string DataLake::read_document(const std::string& rel_path) const {
    fs::path p = resolve_document(rel_path);
    std::ifstream in(p);
    if (!in) {
        throw IoError("cannot read document: " + p.string());
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

namespace {

// Smallest valid PNG (1x1, grayscale); placeholder media content.
const unsigned char kTinyPng[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
    0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00,
    0x00, 0x3a, 0x7e, 0x9b, 0x55, 0x00, 0x00, 0x00, 0x0a, 0x49, 0x44, 0x41, 0x54, 0x78,
    0x9c, 0x63, 0x62, 0x00, 0x00, 0x00, 0x06, 0x00, 0x03, 0x36, 0x37, 0x7c, 0xa8, 0x00,
    0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

void write_placeholder(const fs::path& p) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(kTinyPng), sizeof(kTinyPng));
}

} // namespace

fs::path build_lake_from_script(const fs::path& sql_file, const fs::path& out_dir,
                                const std::string& name) {
    std::ifstream in(sql_file);
    if (!in) {
        throw IoError("cannot open lake script: " + sql_file.string());
    }
    std::ostringstream script;
    script << in.rdbuf();

    fs::create_directories(out_dir);
    fs::path db_path = out_dir / (name + ".db");
    fs::remove(db_path);

    sqlite3* db = nullptr;
    if (sqlite3_open(db_path.string().c_str(), &db) != SQLITE_OK) {
        std::string msg = db != nullptr ? sqlite3_errmsg(db) : "unknown sqlite error";
        if (db != nullptr) sqlite3_close(db);
        throw IoError("cannot create lake database: " + msg);
    }
    char* err = nullptr;
    if (sqlite3_exec(db, script.str().c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err != nullptr ? err : "unknown sqlite error";
        sqlite3_free(err);
        sqlite3_close(db);
        throw SqlError("lake script failed: " + msg);
    }

    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "docs");

    // Materialize every media/doc path referenced by the store so that
    // path resolution works without shipping binary fixtures.
    sqlite3_stmt* stmt = nullptr;
    const char* master = "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%'";
    if (sqlite3_prepare_v2(db, master, -1, &stmt, nullptr) == SQLITE_OK) {
        std::vector<std::string> tables;
        while (sqlite3_step(stmt) == SQLITE_ROW) {
            tables.emplace_back(reinterpret_cast<const char*>(sqlite3_column_text(stmt, 0)));
        }
        sqlite3_finalize(stmt);
        for (const auto& table : tables) {
            std::string q = "SELECT * FROM \"" + table + "\"";
            sqlite3_stmt* rows = nullptr;
            if (sqlite3_prepare_v2(db, q.c_str(), -1, &rows, nullptr) != SQLITE_OK) continue;
            while (sqlite3_step(rows) == SQLITE_ROW) {
                for (int c = 0; c < sqlite3_column_count(rows); ++c) {
                    if (sqlite3_column_type(rows, c) != SQLITE_TEXT) continue;
                    std::string value =
                        reinterpret_cast<const char*>(sqlite3_column_text(rows, c));
                    if (value.rfind("images/", 0) == 0) {
                        write_placeholder(out_dir / value);
                    } else if (value.rfind("docs/", 0) == 0 && !fs::exists(out_dir / value)) {
                        fs::create_directories((out_dir / value).parent_path());
                        std::ofstream doc(out_dir / value);
                        doc << "placeholder document\n";
                    }
                }
            }
            sqlite3_finalize(rows);
        }
    }
    sqlite3_close(db);

    json manifest = {{"name", name},
                     {"db", name + ".db"},
                     {"media_root", "images"},
                     {"docs_root", "docs"}};
    fs::path manifest_path = out_dir / "manifest.json";
    std::ofstream mout(manifest_path);
    mout << manifest.dump(2) << "\n";
    return manifest_path;
}

} // namespace loom
