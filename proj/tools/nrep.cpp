// nrep: command-line entry point for the N-rep text-to-SQL engine.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>

#include "nrep/analysis.hpp"
#include "nrep/http_backend.hpp"
#include "nrep/log.hpp"
#include "nrep/pipeline.hpp"
#include "nrep/sweep.hpp"
#include "nrep/text.hpp"

namespace fs = std::filesystem;
using namespace nrep;

namespace {

// Signals a bad combination of flags that CLI11 cannot express.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BackendFlags {
    std::string replay;
    bool live = false;
    std::string record;
};

struct Backends {
    std::unique_ptr<ChatBackend> chat;
    std::unique_ptr<ChatBackend> recorder;
    std::unique_ptr<EmbeddingBackend> embedder;
    std::unique_ptr<Gateway> gateway;
};

Backends make_backends(const BackendFlags& flags, const PipelineConfig& config, bool uses_fewshots) {
    if (flags.replay.empty() == !flags.live) throw UsageError("pass exactly one of --replay FILE or --live");
    if (!flags.record.empty() && !flags.live) throw UsageError("--record needs --live");
    Backends b;
    if (flags.live) {
        const HttpOptions options = HttpOptions::from_environment();
        if (options.api_key.empty()) throw BackendError(BackendError::Kind::Config, "no API key in NREP_API_KEY or OPENAI_API_KEY");
        b.chat = std::make_unique<HttpChatBackend>(options);
        if (config.embedding_model != "mock") {
            b.embedder = std::make_unique<HttpEmbeddingBackend>(options, config.embedding_model);
        }
    } else {
        b.chat = std::make_unique<ReplayBackend>(flags.replay);
        if (config.embedding_model != "mock" && uses_fewshots) {
            throw UsageError("replay runs with a few-shot store need the mock embedding model");
        }
    }
    if (!b.embedder) b.embedder = std::make_unique<MockEmbeddingBackend>();
    ChatBackend* chat = b.chat.get();
    if (!flags.record.empty()) {
        b.recorder = std::make_unique<RecordingBackend>(*b.chat, flags.record);
        chat = b.recorder.get();
    }
    b.gateway = std::make_unique<Gateway>(*chat, config.max_in_flight);
    return b;
}

PipelineConfig load_config(const std::string& path) {
    return path.empty() ? PipelineConfig::defaults() : PipelineConfig::load(path);
}

std::vector<BenchmarkItem> load_items(const std::string& dataset, const std::string& db_root, const std::string& flavor,
                                      std::size_t limit) {
    auto parsed = parse_flavor(flavor);
    if (!parsed) throw UsageError("unknown dataset flavor '" + flavor + "'");
    Dataset data = load_dataset(dataset, db_root, *parsed);
    if (data.skipped > 0) std::cerr << data.skipped << " malformed records skipped\n";
    if (limit > 0 && data.items.size() > limit) data.items.resize(limit);
    return std::move(data.items);
}

std::vector<RepresentationFormat> parse_formats(const std::vector<std::string>& names) {
    std::vector<RepresentationFormat> out;
    for (const auto& name : names) {
        if (name == "all") {
            out.insert(out.end(), std::begin(kAllFormats), std::end(kAllFormats));
            continue;
        }
        auto format = parse_format(name);
        if (!format) throw UsageError("unknown format '" + name + "'");
        out.push_back(*format);
    }
    return out;
}

void write_report_files(const fs::path& dir, const std::vector<RunRecord>& records) {
    const Report report = aggregate(records);
    write_file((dir / "report.txt").string(), report.to_text());
    write_file((dir / "report.json").string(), report.to_json());
}

std::string analysis_text(const std::vector<RunRecord>& records) {
    std::string out = "\nExecution accuracy bounds\n" + bounds_analysis(records).to_text();
    out += "\nEX by vote count\n" + vote_table_text(ex_by_vote(records));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"N-rep: text-to-SQL with multiple schema representations"};
    app.require_subcommand(1);

    std::string config_path;
    std::string db_root;
    std::string dataset;
    std::string flavor = "auto";
    std::string out;
    std::size_t limit = 0;
    std::uint64_t seed = 0;
    std::string fewshot_store;
    BackendFlags backend;
    bool timing = false;
    bool verbose = false;

    auto add_backend = [&](CLI::App* sub) {
        sub->add_option("--replay", backend.replay, "Replay fixture file (line-delimited JSON)");
        sub->add_flag("--live", backend.live, "Call the live endpoint from NREP_API_BASE / NREP_API_KEY");
        sub->add_option("--record", backend.record, "With --live, append every response to this fixture file");
        sub->add_option("--config", config_path, "Pipeline config (JSON); built-in default when omitted");
        sub->add_option("--fewshot-store", fewshot_store, "Few-shot store built by build-fewshot-store");
    };
    auto add_dataset = [&](CLI::App* sub) {
        sub->add_option("--dataset", dataset, "Benchmark question file (BIRD or SPIDER JSON)")->required();
        sub->add_option("--db-root", db_root, "Directory holding the benchmark databases")->required();
        sub->add_option("--flavor", flavor, "auto, bird or spider");
        sub->add_option("--limit", limit, "Process only the first N items");
    };
    app.add_flag("-v,--verbose", verbose, "Log informational messages");

    auto* run = app.add_subcommand("run", "Run the benchmark and write records and a report");
    add_backend(run);
    add_dataset(run);
    run->add_option("--out", out, "Output directory")->default_val("nrep_out");
    run->add_option("--seed", seed, "Seed for --fraction sampling");
    double run_fraction = 1.0;
    run->add_option("--fraction", run_fraction, "Run a seeded random subset of this size")->check(CLI::Range(0.0, 1.0));
    run->add_flag("--timing", timing, "Store wall time in records (breaks byte-identical reruns)");

    auto* ask = app.add_subcommand("ask", "Answer one question against one database");
    add_backend(ask);
    std::string db_path;
    std::string question;
    std::string hint;
    ask->add_option("--db", db_path, "SQLite database file")->required()->check(CLI::ExistingFile);
    ask->add_option("--question,-q", question, "Natural-language question")->required();
    ask->add_option("--hint", hint, "Optional evidence / hint");

    auto* render_cmd = app.add_subcommand("render", "Print a schema representation of a database");
    std::string format_name = "mschema";
    std::string descriptions;
    render_cmd->add_option("--db", db_path, "SQLite database file")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--format", format_name, "mschema, macschema, ddl, dinsql, json, sqlalchemy or all");
    render_cmd->add_option("--descriptions", descriptions, "BIRD database_description directory");

    auto* link_eval = app.add_subcommand("link-eval", "Schema-linking precision/recall per format");
    add_backend(link_eval);
    add_dataset(link_eval);
    std::vector<std::string> formats;
    std::string model;
    link_eval->add_option("--formats", formats, "Formats to evaluate (default: the config's linker runs)");
    link_eval->add_option("--model", model, "Linker model for --formats")->default_val("gpt-4o");

    auto* build_store = app.add_subcommand("build-fewshot-store", "Embed training pairs into a few-shot store");
    add_dataset(build_store);
    build_store->add_option("--out", out, "Store file to write")->required();
    build_store->add_option("--config", config_path, "Pipeline config (embedding model)");
    build_store->add_flag("--live", backend.live, "Use the live embedding endpoint");

    auto* sweep_cmd = app.add_subcommand("sweep", "Rank format x filter-level combinations by voting EX");
    add_backend(sweep_cmd);
    add_dataset(sweep_cmd);
    std::vector<std::string> levels;
    std::size_t sweep_n = 1;
    double fraction = 0.1;
    std::size_t max_configs = 1000;
    std::string generator_model;
    sweep_cmd->add_option("--formats", formats, "Formats to combine")->required();
    sweep_cmd->add_option("--levels", levels, "Filter levels (none, table, full)");
    sweep_cmd->add_option("-n,--candidates", sweep_n, "Candidates per configuration");
    sweep_cmd->add_option("--fraction", fraction, "Dataset share to use")->check(CLI::Range(0.0, 1.0));
    sweep_cmd->add_option("--seed", seed, "Subset seed");
    sweep_cmd->add_option("--max-configs", max_configs, "Raise the combination cap");
    sweep_cmd->add_option("--linker-model", model, "Linker model")->default_val("gpt-4o");
    sweep_cmd->add_option("--generator-model", generator_model, "Generator model (default: config)");
    sweep_cmd->add_option("--out", out, "Write sweep records here");

    auto* report_cmd = app.add_subcommand("report", "Re-aggregate a RunRecord file");
    std::string records_path;
    report_cmd->add_option("records", records_path, "records.jsonl")->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--out", out, "Also write report.txt / report.json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (verbose) {
        set_log_sink([](LogLevel level, std::string_view message) {
            std::cerr << (level == LogLevel::Info ? "info: " : level == LogLevel::Warn ? "warning: " : "error: ")
                      << message << "\n";
        });
    }

    try {
        if (render_cmd->parsed()) {
            IntrospectOptions options;
            DescriptionMap map;
            if (!descriptions.empty()) {
                map = load_bird_descriptions(descriptions);
                options.descriptions = &map;
            } else if (auto dir = description_dir(db_path)) {
                map = load_bird_descriptions(*dir);
                options.descriptions = &map;
            }
            const SchemaCatalog catalog = introspect(db_path, options);
            const auto chosen = parse_formats({format_name});
            for (std::size_t i = 0; i < chosen.size(); ++i) {
                if (chosen.size() > 1) std::cout << (i ? "\n" : "") << "=== " << to_string(chosen[i]) << " ===\n";
                std::cout << render(catalog, chosen[i]);
            }
            return 0;
        }

        if (report_cmd->parsed()) {
            const auto records = load_records(records_path);
            std::cout << aggregate(records).to_text() << analysis_text(records);
            if (!out.empty()) {
                fs::create_directories(out);
                write_report_files(out, records);
            }
            return 0;
        }

        const PipelineConfig config = load_config(config_path);
        std::unique_ptr<FewShotStore> store;
        if (!fewshot_store.empty()) store = std::make_unique<FewShotStore>(FewShotStore::load(fewshot_store));
        else if (!config.fewshot_store.empty()) store = std::make_unique<FewShotStore>(FewShotStore::load(config.fewshot_store));

        if (build_store->parsed()) {
            std::unique_ptr<EmbeddingBackend> embedder;
            if (backend.live && config.embedding_model != "mock") {
                embedder = std::make_unique<HttpEmbeddingBackend>(HttpOptions::from_environment(), config.embedding_model);
            } else {
                embedder = std::make_unique<MockEmbeddingBackend>();
            }
            const auto items = load_items(dataset, db_root, flavor, limit);
            CatalogCache catalogs;
            std::vector<FewShotRecord> records;
            std::size_t skipped = 0;
            for (const auto& item : items) {
                try {
                    const auto catalog = catalogs.get(item.db_path);
                    auto embedding = embedder->embed({item.question}).at(0);
                    records.push_back(make_fewshot_record(item.question, item.gold_sql, *catalog, std::move(embedding)));
                } catch (const std::exception& e) {
                    ++skipped;
                    log_warn("few-shot item " + item.question_id + " skipped: " + e.what());
                }
            }
            FewShotStore(std::move(records)).save(out);
            std::cout << "wrote " << (items.size() - skipped) << " examples to " << out;
            if (skipped) std::cout << " (" << skipped << " skipped)";
            std::cout << "\n";
            return 0;
        }

        Backends backends = make_backends(backend, config, store != nullptr);

        if (run->parsed()) {
            auto items = load_items(dataset, db_root, flavor, limit);
            if (run_fraction < 1.0) items = sample_subset(items, run_fraction, seed);
            fs::create_directories(out);
            PipelineEnv env(config, *backends.gateway, *backends.embedder, store.get());
            env.timing = timing;
            const auto result = run_benchmark(items, env, (fs::path(out) / "records.jsonl").string());
            write_report_files(out, result.records);
            write_file((fs::path(out) / "config.json").string(), config.to_json());
            std::cout << result.report.to_text() << analysis_text(result.records);
            std::cout << "\nrecords, report and config written to " << out << "\n";
            return 0;
        }

        if (ask->parsed()) {
            BenchmarkItem item;
            item.question_id = "ask";
            item.db_path = db_path;
            item.db_id = fs::path(db_path).stem().string();
            item.question = question;
            if (!hint.empty()) item.evidence = hint;
            PipelineEnv env(config, *backends.gateway, *backends.embedder, store.get());
            const RunRecord record = run_item(item, env);
            if (record.status == ItemStatus::Failed) throw std::runtime_error(record.error);
            const auto& sel = *record.selection;
            std::cout << sel.chosen_sql << "\n\n";
            std::vector<std::string> dist;
            for (auto d : sel.distribution) dist.push_back(std::to_string(d));
            std::cout << "-- selection: " << to_string(sel.method) << ", votes [" << join(dist, ", ") << "], "
                      << record.calls() << " LLM calls, $" << format_pico_dollars(record.cost_pico) << "\n";
            const auto& chosen = record.candidates.at(sel.chosen_index).candidate;
            if (chosen.execution && chosen.execution->status == ExecStatus::Ok) {
                std::cout << "-- result preview:\n" << chosen.execution->preview;
            } else if (chosen.execution) {
                std::cout << "-- execution " << to_string(chosen.execution->status) << ": " << chosen.execution->error_text
                          << "\n";
            }
            return 0;
        }

        if (link_eval->parsed()) {
            const auto items = load_items(dataset, db_root, flavor, limit);
            std::vector<LinkerRunSpec> specs;
            if (formats.empty()) {
                specs = config.linker_runs;
            } else {
                for (auto f : parse_formats(formats)) specs.push_back({std::string(to_string(f)), f, model});
            }
            const auto examples = config.linking_examples();
            const std::string system_prompt = config.linking_system_prompt();
            CatalogCache catalogs;
            CostLedger ledger;
            std::vector<GoldLinking> golds;
            std::vector<std::shared_ptr<const SchemaCatalog>> item_catalogs;
            std::vector<const BenchmarkItem*> usable;
            for (const auto& item : items) {
                try {
                    auto catalog = catalogs.get(item.db_path);
                    golds.push_back(derive_gold_linking(item.gold_sql, *catalog));
                    item_catalogs.push_back(catalog);
                    usable.push_back(&item);
                } catch (const std::exception& e) {
                    log_warn("item " + item.question_id + " has no usable gold linking: " + e.what());
                }
            }
            std::printf("%-22s %8s %8s %8s %8s %8s %8s\n", "run", "tab P", "tab R", "tab F1", "col P", "col R", "col F1");
            for (const auto& spec : specs) {
                std::vector<LinkingPrediction> predictions(usable.size());
                for (std::size_t i = 0; i < usable.size(); ++i) {
                    LinkingContext context{usable[i]->question, usable[i]->evidence, examples, system_prompt, "linking"};
                    predictions[i] = run_linker(spec, *item_catalogs[i], context, *backends.gateway, ledger).prediction;
                }
                const auto m = linking_metrics(predictions, golds);
                std::printf("%-22s %8.2f %8.2f %8.2f %8.2f %8.2f %8.2f\n", spec.id.c_str(), m.table_precision * 100,
                            m.table_recall * 100, m.table_f1 * 100, m.column_precision * 100, m.column_recall * 100,
                            m.column_f1 * 100);
            }
            const auto cost = price(ledger, config.prices());
            std::cout << usable.size() << " questions, " << ledger.total().calls << " calls, $"
                      << format_pico_dollars(cost.total_pico) << "\n";
            return 0;
        }

        if (sweep_cmd->parsed()) {
            SweepOptions options;
            options.formats = parse_formats(formats);
            if (!levels.empty()) {
                options.levels.clear();
                for (const auto& name : levels) {
                    auto level = parse_filter_level(name);
                    if (!level) throw UsageError("unknown filter level '" + name + "'");
                    options.levels.push_back(*level);
                }
            }
            options.n = sweep_n;
            options.linker_model = model;
            options.generator_model = generator_model.empty() ? config.generator_model : generator_model;
            options.max_configs = max_configs;
            const auto all = load_items(dataset, db_root, flavor, limit);
            const auto subset = sample_subset(all, fraction, seed);
            std::cout << "sweeping " << multiset_count(sweep_specs(options).size(), sweep_n) << " configurations over "
                      << subset.size() << " of " << all.size() << " items\n";
            const auto result = sweep(subset, config, options, *backends.gateway, *backends.embedder, store.get());
            std::cout << result.to_text();
            if (!out.empty()) {
                std::string lines;
                for (const auto& r : result.records) lines += r.to_json_line() + "\n";
                write_file(out, lines);
            }
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const SweepLimitError& e) {
        std::cerr << "error: " << e.what() << " (use --max-configs)\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
