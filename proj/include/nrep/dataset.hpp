#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nrep {

struct BenchmarkItem {
    std::string question_id;
    std::string db_id;
    std::string question;
    std::optional<std::string> evidence;
    std::string gold_sql;
    std::optional<std::string> difficulty;
    std::string db_path;  // resolved database file
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// BIRD records carry "SQL" and "evidence"; SPIDER records carry "query".
enum class DatasetFlavor { Auto, Bird, Spider };

struct Dataset {
    std::vector<BenchmarkItem> items;
    std::size_t skipped = 0;  // malformed records
};

// Database file for a db_id under the published layouts:
// <root>/<db_id>/<db_id>.sqlite, then <root>/<db_id>.sqlite, then <root>/<db_id>.db.
std::optional<std::string> resolve_db_path(const std::string& db_root, const std::string& db_id);

// Column-description directory for BIRD databases, when present.
std::optional<std::string> description_dir(const std::string& db_path);

// Reads a JSON array (or line-delimited JSON) question file. Items keep file
// order; malformed records are skipped with a warning and counted. Throws
// DatasetError when a database file is missing or the file is unreadable.
Dataset load_dataset(const std::string& path, const std::string& db_root, DatasetFlavor flavor = DatasetFlavor::Auto);

std::optional<DatasetFlavor> parse_flavor(std::string_view name);

}  // namespace nrep
