#include "nrep/sqlite_db.hpp"

#include <sqlite3.h>

#include <charconv>

namespace nrep {

namespace {

struct DeadlineGuard {
    sqlite3* db;
    std::chrono::steady_clock::time_point deadline;

    static int check(void* self) {
        auto* guard = static_cast<DeadlineGuard*>(self);
        return std::chrono::steady_clock::now() >= guard->deadline ? 1 : 0;
    }
};

constexpr int kProgressOps = 1000;

}  // namespace

std::string render_value(const SqlValue& value) {
    struct Visitor {
        std::string operator()(const NullValue&) const { return "None"; }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(double v) const {
            char buf[64];
            auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
            std::string out(buf, end);
            if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
            return out;
        }
        std::string operator()(const std::string& v) const { return v; }
        std::string operator()(const BlobValue& v) const { return "<blob " + std::to_string(v.bytes.size()) + " bytes>"; }
    };
    return std::visit(Visitor{}, value);
}

Database::Database(const std::string& path, Mode mode) {
    int flags = SQLITE_OPEN_NOMUTEX;
    std::string target = path;
    switch (mode) {
        case Mode::ReadOnly: flags |= SQLITE_OPEN_READONLY; break;
        case Mode::ReadWriteCreate: flags |= SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE; break;
        case Mode::Memory:
            flags |= SQLITE_OPEN_READWRITE | SQLITE_OPEN_MEMORY;
            target = ":memory:";
            break;
    }
    int rc = sqlite3_open_v2(target.c_str(), &db_, flags, nullptr);
    if (rc != SQLITE_OK) {
        std::string message = db_ ? sqlite3_errmsg(db_) : sqlite3_errstr(rc);
        sqlite3_close(db_);
        db_ = nullptr;
        throw SqliteError(rc, message);
    }
    sqlite3_extended_result_codes(db_, 0);
}

Database::~Database() {
    if (db_) sqlite3_close_v2(db_);
}

Database::Database(Database&& other) noexcept : db_(other.db_) { other.db_ = nullptr; }

Database& Database::operator=(Database&& other) noexcept {
    if (this != &other) {
        if (db_) sqlite3_close_v2(db_);
        db_ = other.db_;
        other.db_ = nullptr;
    }
    return *this;
}

void Database::exec(const std::string& sql) {
    char* err = nullptr;
    int rc = sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err);
    if (rc != SQLITE_OK) {
        std::string message = err ? err : sqlite3_errstr(rc);
        sqlite3_free(err);
        throw SqliteError(rc, message);
    }
}

Statement Database::prepare(std::string_view sql) {
    sqlite3_stmt* stmt = nullptr;
    int rc = sqlite3_prepare_v2(db_, sql.data(), static_cast<int>(sql.size()), &stmt, nullptr);
    if (rc != SQLITE_OK) {
        throw SqliteError(rc, sqlite3_errmsg(db_));
    }
    if (!stmt) throw SqliteError(SQLITE_MISUSE, "empty statement");
    return Statement(db_, stmt);
}

std::vector<SqlRow> Database::query(std::string_view sql,
                                    std::optional<std::chrono::steady_clock::time_point> deadline) {
    DeadlineGuard guard{db_, deadline.value_or(std::chrono::steady_clock::time_point::max())};
    if (deadline) sqlite3_progress_handler(db_, kProgressOps, &DeadlineGuard::check, &guard);
    struct Unhook {
        sqlite3* db;
        bool active;
        ~Unhook() {
            if (active) sqlite3_progress_handler(db, 0, nullptr, nullptr);
        }
    } unhook{db_, deadline.has_value()};

    Statement stmt = prepare(sql);
    std::vector<SqlRow> rows;
    while (stmt.step()) {
        SqlRow row;
        row.reserve(static_cast<size_t>(stmt.column_count()));
        for (int i = 0; i < stmt.column_count(); ++i) row.push_back(stmt.column(i));
        rows.push_back(std::move(row));
    }
    return rows;
}

Statement::~Statement() {
    if (stmt_) sqlite3_finalize(stmt_);
}

Statement::Statement(Statement&& other) noexcept : db_(other.db_), stmt_(other.stmt_) { other.stmt_ = nullptr; }

bool Statement::step() {
    int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw SqliteError(rc, sqlite3_errmsg(db_));
}

int Statement::column_count() const { return sqlite3_column_count(stmt_); }

SqlValue Statement::column(int index) const {
    switch (sqlite3_column_type(stmt_, index)) {
        case SQLITE_INTEGER: return static_cast<std::int64_t>(sqlite3_column_int64(stmt_, index));
        case SQLITE_FLOAT: return sqlite3_column_double(stmt_, index);
        case SQLITE_TEXT: {
            const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, index));
            return std::string(text, static_cast<size_t>(sqlite3_column_bytes(stmt_, index)));
        }
        case SQLITE_BLOB: {
            const auto* data = static_cast<const unsigned char*>(sqlite3_column_blob(stmt_, index));
            BlobValue blob;
            blob.bytes.assign(data, data + sqlite3_column_bytes(stmt_, index));
            return blob;
        }
        default: return NullValue{};
    }
}

std::string Statement::column_text(int index) const {
    const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, index));
    return text ? std::string(text, static_cast<size_t>(sqlite3_column_bytes(stmt_, index))) : std::string();
}

bool Statement::column_is_null(int index) const { return sqlite3_column_type(stmt_, index) == SQLITE_NULL; }

void Statement::bind_text(int index, std::string_view text) {
    int rc = sqlite3_bind_text(stmt_, index, text.data(), static_cast<int>(text.size()), SQLITE_TRANSIENT);
    if (rc != SQLITE_OK) throw SqliteError(rc, sqlite3_errmsg(db_));
}

void Statement::reset() {
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
}

std::string quote_identifier(std::string_view name) {
    std::string out = "\"";
    for (char c : name) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace nrep
