#include <doctest.h>

#include "fixtures.hpp"
#include "nrep/log.hpp"
#include "nrep/sweep.hpp"
#include "toy_benchmark.hpp"

using namespace nrep;
using namespace nrep::testing;

namespace {

SweepOptions two_format_options(std::size_t n) {
    SweepOptions options;
    options.formats = {RepresentationFormat::MSchema, RepresentationFormat::Ddl};
    options.n = n;
    return options;
}

// Linker answers from the toy script; the generator is right only when it
// sees an M-Schema rendering.
ChatResponse mschema_only(const ChatRequest& request, const std::string& linking_prompt) {
    const std::string prompt = last_user_message(request);
    const ToyQuestion* q = find_toy_question(prompt);
    if (request.messages.front().content == linking_prompt) return {q ? q->linker_reply : "{}", {40, 5}};
    const bool mschema = between(prompt, "Database schema:\n", "\n").rfind("[DB_ID]", 0) == 0;
    return {"```sql\n" + (mschema && q ? q->gold : std::string("SELECT 42")) + "\n```", {80, 8}};
}

}  // namespace

TEST_CASE("multiset counts") {
    CHECK(multiset_count(6, 1) == 6);
    CHECK(multiset_count(6, 2) == 21);
    CHECK(multiset_count(18, 5) == 26334);
    CHECK(multiset_count(3, 0) == 1);
    for (std::size_t u = 1; u <= 6; ++u) {
        for (std::size_t n = 1; n <= 4; ++n) CHECK(enumerate_multisets(u, n).size() == multiset_count(u, n));
    }
}

TEST_CASE("multisets are non-decreasing and lexicographic") {
    const auto all = enumerate_multisets(3, 2);
    const std::vector<std::vector<std::size_t>> expected{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
    CHECK(all == expected);
}

TEST_CASE("sweep specs: formats outermost, linker per format") {
    const auto specs = sweep_specs(two_format_options(1));
    REQUIRE(specs.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(specs[i].spec_index == i);
    CHECK(specs[0].format == RepresentationFormat::MSchema);
    CHECK(specs[0].filter_level == FilterLevel::NoFiltering);
    CHECK_FALSE(specs[0].linker_run.has_value());
    CHECK(specs[5].format == RepresentationFormat::Ddl);
    CHECK(specs[5].linker_run == std::optional<std::string>("ddl-linker"));
    CHECK_NOTHROW(validate_specs(specs));
}

TEST_CASE("sweeps stop at the configuration cap") {
    SweepOptions options = two_format_options(5);
    options.max_configs = 100;
    FunctionBackend never([](const ChatRequest&) -> ChatResponse { throw std::logic_error("no calls expected"); });
    Gateway gateway(never);
    MockEmbeddingBackend embedder;
    CHECK_THROWS_AS(sweep({}, PipelineConfig::defaults(), options, gateway, embedder, nullptr), SweepLimitError);
}

TEST_CASE("sweep ranking with a scripted generator") {
    TempDir dir;
    const std::string root = toy_db_root(dir.path());
    write_file(dir.file("toy.json"), toy_dataset_json());
    const auto items = load_dataset(dir.file("toy.json"), root).items;
    const PipelineConfig base = PipelineConfig::from_json(toy_config_json());
    const std::string linking_prompt = base.linking_system_prompt();
    FunctionBackend backend([&](const ChatRequest& r) { return mschema_only(r, linking_prompt); });
    Gateway gateway(backend, 4);
    MockEmbeddingBackend embedder;
    ScopedLogCapture quiet;

    const SweepResult single = sweep(items, base, two_format_options(1), gateway, embedder, nullptr);
    REQUIRE(single.ranked.size() == 6);
    REQUIRE(single.records.size() == 10);
    for (std::size_t i = 0; i < 6; ++i) {
        // Stable ranking: ties keep enumeration order.
        CHECK(single.ranked[i].members == std::vector<std::size_t>{i});
        CHECK(single.ranked[i].items == 9);
        CHECK(single.ranked[i].correct == (i < 3 ? 9u : 0u));
    }
    CHECK(single.ranked[0].label(single.specs) == "mschema/none");
    for (const auto& record : single.records) CHECK_FALSE(record.selection.has_value());

    const SweepResult pairs = sweep(items, base, two_format_options(2), gateway, embedder, nullptr);
    REQUIRE(pairs.ranked.size() == 21);
    // Mixed pairs split 1-1 and plain voting keeps the first-listed (M-Schema) member.
    CHECK(pairs.ranked[0].members == std::vector<std::size_t>{0, 0});
    CHECK(pairs.ranked.back().members == std::vector<std::size_t>{5, 5});
    CHECK(pairs.ranked.back().correct == 0);
    CHECK(pairs.to_text(3).find("21 configurations evaluated") != std::string::npos);
}

TEST_CASE("subsets are deterministic and keep dataset order") {
    std::vector<BenchmarkItem> items(10);
    for (std::size_t i = 0; i < items.size(); ++i) items[i].question_id = std::to_string(i);
    const auto a = sample_subset(items, 0.25, 7);
    const auto b = sample_subset(items, 0.25, 7);
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].question_id == b[i].question_id);
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(std::stoi(a[i - 1].question_id) < std::stoi(a[i].question_id));
    CHECK(sample_subset(items, 1.0, 1).size() == 10);
    CHECK_THROWS(sample_subset(items, 0.0, 1));
    CHECK_THROWS(sample_subset(items, 1.5, 1));
}
