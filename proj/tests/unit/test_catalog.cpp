#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "nrep/catalog.hpp"
#include "nrep/log.hpp"

using namespace nrep;
using namespace nrep::testing;

namespace {

SchemaCatalog toy_catalog(const TempDir& dir) { return introspect(build_db(dir.path(), "toy.sql", "toy.db")); }

SchemaCatalog catalog_from_sql(const TempDir& dir, const std::string& name, const std::string& sql) {
    const std::string path = dir.file(name);
    {
        Database db(path, Database::Mode::ReadWriteCreate);
        db.exec(sql);
    }
    return introspect(path);
}

std::vector<std::string> column_names(const TableDef& table) {
    std::vector<std::string> out;
    for (const auto& c : table.columns) out.push_back(c.name);
    return out;
}

}  // namespace

TEST_CASE("toy database introspects to three tables and two foreign keys") {
    TempDir dir;
    const SchemaCatalog catalog = toy_catalog(dir);
    CHECK(catalog.db_id == "toy");
    REQUIRE(catalog.tables.size() == 3);
    CHECK(catalog.tables[0].name == "users");
    CHECK(catalog.tables[1].name == "products");
    CHECK(catalog.tables[2].name == "orders");
    CHECK(column_names(catalog.tables[2]) ==
          std::vector<std::string>{"order_id", "user_id", "product_id", "quantity", "order_date"});
    CHECK(catalog.tables[0].primary_key == std::vector<std::string>{"user_id"});
    REQUIRE(catalog.foreign_keys.size() == 2);
    CHECK(catalog.foreign_keys[0] == ForeignKeyDef{"orders", "user_id", "users", "user_id"});
    CHECK(catalog.foreign_keys[1] == ForeignKeyDef{"orders", "product_id", "products", "product_id"});
    CHECK_NOTHROW(validate(catalog));
}

TEST_CASE("empty database gives an empty catalog") {
    TempDir dir;
    const SchemaCatalog catalog = catalog_from_sql(dir, "empty.db", "");
    CHECK(catalog.tables.empty());
    CHECK(catalog.foreign_keys.empty());
}

TEST_CASE("unreadable and malformed files raise CatalogError") {
    TempDir dir;
    try {
        introspect(dir.file("nope.sqlite"));
        FAIL("expected an error");
    } catch (const CatalogError& e) {
        CHECK(e.kind() == CatalogError::Kind::Unreadable);
        CHECK(e.db_id() == "nope");
    }
    write_file(dir.file("junk.sqlite"), "this is not a database at all, just text that is long enough");
    try {
        introspect(dir.file("junk.sqlite"));
        FAIL("expected an error");
    } catch (const CatalogError& e) {
        CHECK(e.kind() == CatalogError::Kind::Malformed);
    }
}

TEST_CASE("value examples are the first distinct non-null values") {
    TempDir dir;
    const SchemaCatalog catalog = catalog_from_sql(dir, "v.db",
                                                   "CREATE TABLE t (a INTEGER, b TEXT);"
                                                   "INSERT INTO t VALUES (5, NULL), (5, 'x'), (NULL, 'y'), (7, 'x'), (9, 'z');");
    const TableDef& t = catalog.tables.at(0);
    CHECK(t.columns[0].value_examples == std::vector<std::string>{"5", "7", "9"});
    CHECK(t.columns[1].value_examples == std::vector<std::string>{"x", "y", "z"});
    // Categorical values: most frequent first, ties by value.
    CHECK(t.columns[1].categorical_values == std::vector<std::string>{"x", "y", "z"});
    CHECK(t.columns[0].categorical_values.empty());
}

TEST_CASE("financial fixture carries descriptions, defaults and nullability") {
    TempDir dir;
    const SchemaCatalog catalog = financial_catalog(dir.path());
    const TableDef* account = catalog.find_table("ACCOUNT");
    REQUIRE(account);
    CHECK(account->columns[1].description == std::optional<std::string>("location of branch"));
    CHECK_FALSE(account->columns[0].nullable);
    CHECK(account->columns[0].default_value == std::optional<std::string>("0"));
    const TableDef* loan = catalog.find_table("loan");
    REQUIRE(loan);
    CHECK(loan->primary_key.empty());
    CHECK(loan->columns[1].categorical_values == std::vector<std::string>{"C", "A", "D", "B"});
    CHECK_FALSE(loan->columns[1].description.has_value());
}

TEST_CASE("dangling foreign keys are dropped with a warning") {
    TempDir dir;
    ScopedLogCapture capture;
    const SchemaCatalog catalog = catalog_from_sql(
        dir, "d.db", "CREATE TABLE a (id INTEGER PRIMARY KEY, ghost_id INTEGER REFERENCES ghost (id));");
    CHECK(catalog.foreign_keys.empty());
    CHECK_FALSE(capture.warnings().empty());
}

TEST_CASE("foreign keys to the implicit primary key resolve to it") {
    TempDir dir;
    const SchemaCatalog catalog = catalog_from_sql(
        dir, "i.db",
        "CREATE TABLE p (pid INTEGER PRIMARY KEY); CREATE TABLE c (x INTEGER, p_ref INTEGER REFERENCES p);");
    REQUIRE(catalog.foreign_keys.size() == 1);
    CHECK(catalog.foreign_keys[0] == ForeignKeyDef{"c", "p_ref", "p", "pid"});
}

TEST_CASE("composite primary keys keep their declared order") {
    TempDir dir;
    const SchemaCatalog catalog =
        catalog_from_sql(dir, "k.db", "CREATE TABLE m (a INT, b INT, c INT, PRIMARY KEY (c, a));");
    CHECK(catalog.tables[0].primary_key == std::vector<std::string>{"c", "a"});
}

TEST_CASE("validate reports broken invariants") {
    ColumnDef a;
    a.name = "a";
    a.sql_type = "INTEGER";
    SchemaCatalog catalog{"x", {{"t", {a}, {"missing"}}}, {}};
    CHECK_THROWS_AS(validate(catalog), CatalogError);
    catalog.tables[0].primary_key = {"a"};
    CHECK_NOTHROW(validate(catalog));
    catalog.foreign_keys.push_back({"t", "a", "nowhere", "id"});
    CHECK_THROWS_AS(validate(catalog), CatalogError);
}

TEST_CASE("table-only filtering keeps whole tables and their mutual relations") {
    TempDir dir;
    const SchemaCatalog catalog = toy_catalog(dir);
    const LinkingPrediction prediction{{{"users", {"user_id", "name"}}, {"orders", {"user_id", "order_date"}}}, "x"};
    const SchemaCatalog filtered = apply_filter(catalog, prediction, FilterLevel::TableOnly);
    REQUIRE(filtered.tables.size() == 2);
    CHECK(filtered.tables[0] == catalog.tables[0]);
    CHECK(filtered.tables[1] == catalog.tables[2]);
    REQUIRE(filtered.foreign_keys.size() == 1);
    CHECK(filtered.foreign_keys[0].to_table == "users");
}

TEST_CASE("full filtering keeps selected columns plus foreign key endpoints") {
    TempDir dir;
    const SchemaCatalog catalog = toy_catalog(dir);
    SUBCASE("users and orders example") {
        const LinkingPrediction prediction{{{"users", {"user_id", "name"}}, {"orders", {"user_id", "order_date"}}}, "x"};
        const SchemaCatalog filtered = apply_filter(catalog, prediction, FilterLevel::FullFiltering);
        REQUIRE(filtered.tables.size() == 2);
        CHECK(column_names(filtered.tables[0]) == std::vector<std::string>{"user_id", "name"});
        CHECK(column_names(filtered.tables[1]) == std::vector<std::string>{"user_id", "order_date"});
        CHECK(filtered.tables[1].primary_key.empty());
        CHECK(filtered.foreign_keys.size() == 1);
    }
    SUBCASE("endpoint columns are added back in catalog order") {
        const LinkingPrediction prediction{{{"orders", {"quantity"}}, {"products", {"name"}}}, "x"};
        const SchemaCatalog filtered = apply_filter(catalog, prediction, FilterLevel::FullFiltering);
        REQUIRE(filtered.tables.size() == 2);
        CHECK(filtered.tables[0].name == "products");
        CHECK(column_names(filtered.tables[0]) == std::vector<std::string>{"product_id", "name"});
        CHECK(column_names(filtered.tables[1]) == std::vector<std::string>{"product_id", "quantity"});
        CHECK(filtered.foreign_keys == std::vector<ForeignKeyDef>{{"orders", "product_id", "products", "product_id"}});
    }
}

TEST_CASE("unknown names in a prediction are dropped with a warning") {
    TempDir dir;
    const SchemaCatalog catalog = toy_catalog(dir);
    ScopedLogCapture capture;
    const LinkingPrediction prediction{{{"Users", {"NAME", "shoe_size"}}, {"invoices", {"id"}}}, "x"};
    const SchemaCatalog filtered = apply_filter(catalog, prediction, FilterLevel::FullFiltering);
    REQUIRE(filtered.tables.size() == 1);
    CHECK(column_names(filtered.tables[0]) == std::vector<std::string>{"name"});
    CHECK(capture.warnings().size() >= 2);
}

TEST_CASE("filter levels nest: full within table-only within none (random predictions)") {
    TempDir dir;
    const SchemaCatalog catalog = toy_catalog(dir);
    std::mt19937 rng(7);
    ScopedLogCapture quiet;
    for (int trial = 0; trial < 200; ++trial) {
        LinkingPrediction prediction;
        for (const auto& table : catalog.tables) {
            if (rng() % 2) continue;
            std::vector<std::string> cols;
            for (const auto& c : table.columns) {
                if (rng() % 2) cols.push_back(c.name);
            }
            if (rng() % 5 == 0) cols.push_back("bogus");
            prediction.selection.emplace_back(table.name, cols);
        }
        const SchemaCatalog none = apply_filter(catalog, prediction, FilterLevel::NoFiltering);
        const SchemaCatalog table_only = apply_filter(catalog, prediction, FilterLevel::TableOnly);
        const SchemaCatalog full = apply_filter(catalog, prediction, FilterLevel::FullFiltering);
        CHECK(none == catalog);
        CHECK(is_sub_catalog(table_only, none));
        CHECK(is_sub_catalog(full, table_only));
        CHECK_NOTHROW(validate(full));
        CHECK_NOTHROW(validate(table_only));
        // Filtering is idempotent.
        CHECK(apply_filter(full, prediction, FilterLevel::FullFiltering) == full);
    }
}

TEST_CASE("filter level names") {
    for (auto level : kAllFilterLevels) CHECK(parse_filter_level(to_string(level)) == level);
    CHECK_FALSE(parse_filter_level("partial").has_value());
}

TEST_CASE("csv reader handles quotes, commas and newlines") {
    const auto rows = parse_csv("a,b,c\n\"x, y\",\"say \"\"hi\"\"\",\"two\nlines\"\r\n,,\n");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1] == std::vector<std::string>{"x, y", "say \"hi\"", "two\nlines"});
    CHECK(rows[2] == std::vector<std::string>{"", "", ""});
}

TEST_CASE("BIRD description loader falls back to column_description") {
    TempDir dir;
    std::filesystem::create_directories(dir.path() / "desc");
    write_file((dir.path() / "desc" / "T.csv").string(),
               "original_column_name,column_name,column_description,data_format,value_description\n"
               "a,,the a column,integer,\n"
               "B ,bee,,text,\n");
    const DescriptionMap map = load_bird_descriptions((dir.path() / "desc").string());
    CHECK(map.at({"t", "a"}) == "the a column");
    CHECK(map.at({"t", "b"}) == "bee");
}
