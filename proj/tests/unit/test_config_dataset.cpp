#include <doctest.h>

#include <json.hpp>

#include "fixtures.hpp"
#include "nrep/config.hpp"
#include "nrep/dataset.hpp"
#include "nrep/log.hpp"

using namespace nrep;
using namespace nrep::testing;

namespace {

nlohmann::json default_json() { return nlohmann::json::parse(PipelineConfig::defaults().to_json()); }

void expect_config_error(const nlohmann::json& j, const std::string& fragment) {
    CAPTURE(fragment);
    try {
        PipelineConfig::from_json(j.dump());
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
}

// Database root with toy.sqlite and financial/financial.sqlite.
struct DbRoot {
    TempDir dir;
    DbRoot() {
        build_db(dir.path(), "toy.sql", "toy.sqlite");
        build_financial(dir.path());
    }
    std::string root() const { return dir.path().string(); }
};

}  // namespace

TEST_CASE("defaults are valid and survive a json round trip") {
    const PipelineConfig config = PipelineConfig::defaults();
    CHECK_NOTHROW(config.validate());
    CHECK(config.linker_runs.size() == 3);
    CHECK(config.candidates.size() == 5);
    CHECK(config.confidence_rules.has(5));
    const PipelineConfig again = PipelineConfig::from_json(config.to_json());
    CHECK(again.to_json() == config.to_json());
    CHECK_THROWS_AS(PipelineConfig::from_json("{}"), ConfigError);
}

TEST_CASE("unknown fields are rejected at every level") {
    auto j = default_json();
    j["temperature"] = 0.2;
    expect_config_error(j, "temperature");
    j = default_json();
    j["models"]["reranker"] = "x";
    expect_config_error(j, "reranker");
    j = default_json();
    j["candidates"][0]["weight"] = 2;
    expect_config_error(j, "weight");
    j = default_json();
    j["fewshot"]["n"] = 2;
    expect_config_error(j, "n");
}

TEST_CASE("semantic problems are reported") {
    auto j = default_json();
    j["candidates"] = nlohmann::json::array();
    expect_config_error(j, "candidate");
    j = default_json();
    j["candidates"][1]["linker_run"] = "nope";
    expect_config_error(j, "nope");
    j = default_json();
    j["linker_runs"][1]["id"] = j["linker_runs"][0]["id"];
    expect_config_error(j, "duplicate");
    j = default_json();
    j["candidates"][0]["format"] = "yaml";
    expect_config_error(j, "yaml");
    j = default_json();
    j["timeout_ms"] = 0;
    expect_config_error(j, "timeout");
    j = default_json();
    j["workers"] = 0;
    expect_config_error(j, "workers");
    j = default_json();
    j["float_precision"] = 20;
    expect_config_error(j, "precision");
    j = default_json();
    j["candidates"].erase(4);
    expect_config_error(j, "4");
    j["confidence_rules"]["4"] = {{2, 2}};
    CHECK_NOTHROW(PipelineConfig::from_json(j.dump()));
    j["confidence_rules"]["4"] = {{3, 2}};
    CHECK_THROWS_AS(PipelineConfig::from_json(j.dump()), ConfigError);
    CHECK_THROWS(PipelineConfig::from_json("not json"));
}

TEST_CASE("prompt overrides come from files") {
    TempDir dir;
    write_file(dir.file("judge.txt"), "custom judge {question}");
    auto j = default_json();
    j["prompts"]["judge"] = dir.file("judge.txt");
    const PipelineConfig config = PipelineConfig::from_json(j.dump());
    CHECK(config.judge_prompt() == "custom judge {question}");
    CHECK(config.linking_examples().size() == 3);
    CHECK_FALSE(config.generator_system_prompt().empty());
}

TEST_CASE("config file loading") {
    TempDir dir;
    write_file(dir.file("c.json"), PipelineConfig::defaults().to_json());
    CHECK(PipelineConfig::load(dir.file("c.json")).to_json() == PipelineConfig::defaults().to_json());
    CHECK_THROWS(PipelineConfig::load(dir.file("missing.json")));
}

TEST_CASE("three-item BIRD file") {
    DbRoot db;
    TempDir dir;
    write_file(dir.file("dev.json"), R"([
  {"question_id": 0, "db_id": "toy", "question": "How many users?", "evidence": "", "SQL": "SELECT COUNT(*) FROM users", "difficulty": "simple"},
  {"question_id": 1, "db_id": "financial", "question": "Accounts in Prague?", "evidence": "Prague is a district", "SQL": "SELECT 1"},
  {"question_id": 2, "db_id": "toy", "question": "Names?", "SQL": "SELECT name FROM users"}
])");
    const Dataset dataset = load_dataset(dir.file("dev.json"), db.root());
    REQUIRE(dataset.items.size() == 3);
    CHECK(dataset.skipped == 0);
    CHECK(dataset.items[0].question_id == "0");
    CHECK(dataset.items[0].gold_sql == "SELECT COUNT(*) FROM users");
    CHECK_FALSE(dataset.items[0].evidence.has_value());
    CHECK(dataset.items[0].difficulty == std::optional<std::string>("simple"));
    CHECK(dataset.items[1].evidence == std::optional<std::string>("Prague is a district"));
    CHECK(dataset.items[1].db_path == (db.dir.path() / "financial" / "financial.sqlite").string());
    CHECK(dataset.items[0].db_path == (db.dir.path() / "toy.sqlite").string());
    CHECK_FALSE(dataset.items[2].evidence.has_value());
    CHECK(description_dir(dataset.items[1].db_path).has_value());
    CHECK_FALSE(description_dir(dataset.items[0].db_path).has_value());
}

TEST_CASE("SPIDER records and line-delimited files") {
    DbRoot db;
    TempDir dir;
    write_file(dir.file("spider.jsonl"), "{\"db_id\": \"toy\", \"question\": \"Q\", \"query\": \"SELECT 1\"}\n\n"
                                         "{\"db_id\": \"toy\", \"question\": \"R\", \"query\": \"SELECT 2\"}\n");
    const Dataset dataset = load_dataset(dir.file("spider.jsonl"), db.root(), DatasetFlavor::Spider);
    REQUIRE(dataset.items.size() == 2);
    CHECK(dataset.items[1].question_id == "1");
    CHECK(dataset.items[1].gold_sql == "SELECT 2");
}

TEST_CASE("empty files give empty datasets") {
    TempDir dir;
    write_file(dir.file("empty.json"), "");
    CHECK(load_dataset(dir.file("empty.json"), dir.path().string()).items.empty());
    write_file(dir.file("empty_array.json"), "[]");
    CHECK(load_dataset(dir.file("empty_array.json"), dir.path().string()).items.empty());
}

TEST_CASE("missing databases are fatal") {
    TempDir dir;
    write_file(dir.file("d.json"), R"([{"db_id": "ghost", "question": "Q", "SQL": "SELECT 1"}])");
    try {
        load_dataset(dir.file("d.json"), dir.path().string());
        FAIL("expected an error");
    } catch (const DatasetError& e) {
        CHECK(std::string(e.what()).find("ghost") != std::string::npos);
    }
    CHECK_THROWS_AS(load_dataset(dir.file("absent.json"), dir.path().string()), DatasetError);
}

TEST_CASE("malformed records are skipped and counted") {
    DbRoot db;
    TempDir dir;
    ScopedLogCapture capture;
    write_file(dir.file("m.jsonl"), "{\"db_id\": \"toy\", \"question\": \"Q\", \"SQL\": \"SELECT 1\"}\n"
                                    "{broken\n"
                                    "{\"db_id\": \"toy\", \"SQL\": \"SELECT 1\"}\n"
                                    "[1, 2]\n"
                                    "{\"db_id\": \"toy\", \"question\": \"R\", \"SQL\": \"SELECT 2\"}\n");
    const Dataset dataset = load_dataset(dir.file("m.jsonl"), db.root());
    CHECK(dataset.items.size() == 2);
    CHECK(dataset.skipped == 3);
    CHECK_FALSE(capture.warnings().empty());
}

TEST_CASE("flavor names") {
    CHECK(parse_flavor("BIRD") == DatasetFlavor::Bird);
    CHECK(parse_flavor("spider") == DatasetFlavor::Spider);
    CHECK(parse_flavor("auto") == DatasetFlavor::Auto);
    CHECK_FALSE(parse_flavor("wikisql").has_value());
}
