#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "nrep/catalog.hpp"
#include "nrep/sqlite_db.hpp"
#include "nrep/text.hpp"

namespace nrep::testing {

inline std::string data_path(const std::string& name) { return std::string(NREP_TEST_DATA_DIR) + "/" + name; }
inline std::string golden_path(const std::string& name) { return std::string(NREP_GOLDEN_DIR) + "/" + name; }
inline std::string golden(const std::string& name) { return read_file(golden_path(name)); }

// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("nrep_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Creates <dir>/<name> from a script in tests/data.
inline std::string build_db(const std::filesystem::path& dir, const std::string& script, const std::string& name) {
    const auto target = dir / name;
    std::filesystem::create_directories(target.parent_path());
    std::filesystem::remove(target);
    Database db(target.string(), Database::Mode::ReadWriteCreate);
    db.exec(read_file(data_path(script)));
    return target.string();
}

// The financial fixture laid out like BIRD: <root>/financial/financial.sqlite
// plus its database_description directory.
inline std::string build_financial(const std::filesystem::path& root) {
    const std::string db = build_db(root, "financial.sql", "financial/financial.sqlite");
    std::filesystem::copy(data_path("financial_description"), root / "financial" / "database_description",
                          std::filesystem::copy_options::recursive | std::filesystem::copy_options::overwrite_existing);
    return db;
}

inline SchemaCatalog financial_catalog(const std::filesystem::path& root) {
    const std::string db = build_financial(root);
    const DescriptionMap descriptions = load_bird_descriptions((root / "financial" / "database_description").string());
    IntrospectOptions options;
    options.descriptions = &descriptions;
    return introspect(db, options);
}

}  // namespace nrep::testing
