#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

struct sqlite3;
struct sqlite3_stmt;

namespace nrep {

class SqliteError : public std::runtime_error {
public:
    SqliteError(int code, const std::string& message) : std::runtime_error(message), code_(code) {}
    int code() const { return code_; }

private:
    int code_;
};

struct NullValue {
    bool operator==(const NullValue&) const = default;
};
struct BlobValue {
    std::vector<unsigned char> bytes;
    bool operator==(const BlobValue&) const = default;
};
using SqlValue = std::variant<NullValue, std::int64_t, double, std::string, BlobValue>;
using SqlRow = std::vector<SqlValue>;

// Literal rendering used for sample values and result previews: integers in
// decimal, reals in shortest round-trip form, text verbatim.
std::string render_value(const SqlValue& value);

class Statement;

// Owning handle for one SQLite connection.
class Database {
public:
    enum class Mode { ReadOnly, ReadWriteCreate, Memory };

    explicit Database(const std::string& path, Mode mode = Mode::ReadOnly);
    ~Database();
    Database(Database&& other) noexcept;
    Database& operator=(Database&& other) noexcept;
    Database(const Database&) = delete;
    Database& operator=(const Database&) = delete;

    sqlite3* handle() const { return db_; }

    void exec(const std::string& sql);
    Statement prepare(std::string_view sql);

    // Runs a single statement and collects every row. When `deadline` is set
    // the statement is interrupted once it passes, raising SqliteError with
    // SQLITE_INTERRUPT.
    std::vector<SqlRow> query(std::string_view sql,
                              std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt);

private:
    sqlite3* db_ = nullptr;
};

class Statement {
public:
    Statement(sqlite3* db, sqlite3_stmt* stmt) : db_(db), stmt_(stmt) {}
    ~Statement();
    Statement(Statement&& other) noexcept;
    Statement& operator=(Statement&&) = delete;
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    // Returns false once the statement is done.
    bool step();
    int column_count() const;
    SqlValue column(int index) const;
    std::string column_text(int index) const;
    bool column_is_null(int index) const;
    void bind_text(int index, std::string_view text);
    void reset();

private:
    sqlite3* db_;
    sqlite3_stmt* stmt_;
};

// Double-quoted SQL identifier with embedded quotes doubled.
std::string quote_identifier(std::string_view name);

}  // namespace nrep
