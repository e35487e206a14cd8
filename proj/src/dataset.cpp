#include "nrep/dataset.hpp"

#include <json.hpp>

#include <filesystem>

#include "nrep/log.hpp"
#include "nrep/text.hpp"

namespace nrep {

namespace fs = std::filesystem;

namespace {

using json = nlohmann::json;

std::optional<std::string> optional_text(const json& record, const char* key) {
    if (!record.contains(key) || record.at(key).is_null()) return std::nullopt;
    std::string value = record.at(key).get<std::string>();
    if (trim(value).empty()) return std::nullopt;
    return value;
}

BenchmarkItem parse_record(const json& record, std::size_t position, DatasetFlavor flavor) {
    if (!record.is_object()) throw std::invalid_argument("record is not an object");
    BenchmarkItem item;
    item.db_id = record.at("db_id").get<std::string>();
    item.question = record.at("question").get<std::string>();
    const bool bird = flavor == DatasetFlavor::Bird || (flavor == DatasetFlavor::Auto && record.contains("SQL"));
    item.gold_sql = record.at(bird ? "SQL" : "query").get<std::string>();
    if (record.contains("question_id") && !record.at("question_id").is_null()) {
        const auto& id = record.at("question_id");
        item.question_id = id.is_string() ? id.get<std::string>() : id.dump();
    } else {
        item.question_id = std::to_string(position);
    }
    item.evidence = optional_text(record, "evidence");
    item.difficulty = optional_text(record, "difficulty");
    if (item.db_id.empty() || item.question.empty()) throw std::invalid_argument("empty db_id or question");
    return item;
}

}  // namespace

std::optional<DatasetFlavor> parse_flavor(std::string_view name) {
    const std::string lower = to_lower(name);
    if (lower == "auto") return DatasetFlavor::Auto;
    if (lower == "bird") return DatasetFlavor::Bird;
    if (lower == "spider") return DatasetFlavor::Spider;
    return std::nullopt;
}

std::optional<std::string> resolve_db_path(const std::string& db_root, const std::string& db_id) {
    const fs::path root(db_root);
    for (const fs::path& candidate :
         {root / db_id / (db_id + ".sqlite"), root / (db_id + ".sqlite"), root / (db_id + ".db")}) {
        std::error_code ec;
        if (fs::is_regular_file(candidate, ec)) return candidate.string();
    }
    return std::nullopt;
}

std::optional<std::string> description_dir(const std::string& db_path) {
    const fs::path dir = fs::path(db_path).parent_path() / "database_description";
    std::error_code ec;
    if (fs::is_directory(dir, ec)) return dir.string();
    return std::nullopt;
}

Dataset load_dataset(const std::string& path, const std::string& db_root, DatasetFlavor flavor) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw DatasetError("cannot read dataset " + path + ": " + e.what());
    }

    std::vector<json> records;
    std::size_t skipped = 0;
    const std::string body = trim(text);
    if (body.empty()) return {};
    if (body.front() == '[') {
        try {
            records = json::parse(body).get<std::vector<json>>();
        } catch (const json::exception& e) {
            throw DatasetError("dataset " + path + " is not a JSON array: " + e.what());
        }
    } else {
        std::size_t line_no = 0;
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string::npos) end = text.size();
            std::string line = trim(std::string_view(text).substr(start, end - start));
            ++line_no;
            start = end + 1;
            if (line.empty()) continue;
            json record = json::parse(line, nullptr, false);
            if (record.is_discarded()) {
                log_warn(path + ":" + std::to_string(line_no) + ": malformed JSON record skipped");
                ++skipped;
                continue;
            }
            records.push_back(std::move(record));
        }
    }

    Dataset dataset;
    dataset.skipped = skipped;
    for (std::size_t i = 0; i < records.size(); ++i) {
        BenchmarkItem item;
        try {
            item = parse_record(records[i], i, flavor);
        } catch (const std::exception& e) {
            log_warn(path + ": record " + std::to_string(i) + " skipped: " + e.what());
            ++dataset.skipped;
            continue;
        }
        auto db_path = resolve_db_path(db_root, item.db_id);
        if (!db_path) {
            throw DatasetError("database file for '" + item.db_id + "' not found under " + db_root);
        }
        item.db_path = *db_path;
        dataset.items.push_back(std::move(item));
    }
    if (dataset.skipped > 0) log_warn(std::to_string(dataset.skipped) + " malformed dataset records skipped");
    return dataset;
}

}  // namespace nrep
