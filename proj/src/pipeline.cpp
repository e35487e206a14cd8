#include "nrep/pipeline.hpp"

#include <chrono>
#include <fstream>

#include "nrep/log.hpp"
#include "nrep/parallel.hpp"
#include "nrep/text.hpp"

namespace nrep {

int execution_accuracy(std::string_view pred_sql, std::string_view gold_sql, const std::string& db_path,
                       const ExecutionOptions& options) {
    const ExecutionResult gold = execute_candidate(gold_sql, db_path, options);
    if (gold.status != ExecStatus::Ok) {
        throw GoldExecutionError("gold SQL failed (" + std::string(to_string(gold.status)) + "): " + gold.error_text);
    }
    const ExecutionResult pred = execute_candidate(pred_sql, db_path, options);
    return pred.status == ExecStatus::Ok && pred.signature == gold.signature ? 1 : 0;
}

std::shared_ptr<const SchemaCatalog> CatalogCache::get(const std::string& db_path) {
    {
        std::lock_guard lock(mutex_);
        auto it = catalogs_.find(db_path);
        if (it != catalogs_.end()) return it->second;
    }
    // Introspection happens outside the lock; a racing duplicate is harmless.
    IntrospectOptions options;
    DescriptionMap descriptions;
    if (auto dir = description_dir(db_path)) {
        descriptions = load_bird_descriptions(*dir);
        options.descriptions = &descriptions;
    }
    auto catalog = std::make_shared<const SchemaCatalog>(introspect(db_path, options));
    std::lock_guard lock(mutex_);
    return catalogs_.emplace(db_path, std::move(catalog)).first->second;
}

PipelineEnv::PipelineEnv(const PipelineConfig& config, Gateway& gateway, EmbeddingBackend& embedder,
                         const FewShotStore* store)
    : config(config),
      gateway(gateway),
      embedder(embedder),
      fewshot_store(store),
      prices(config.prices()),
      generator_prompt_(config.generator_system_prompt()),
      linking_prompt_(config.linking_system_prompt()),
      linking_examples_(config.linking_examples()),
      judge_prompt_(config.judge_prompt()) {}

namespace {

ExecutionOptions execution_options(const PipelineConfig& config) {
    ExecutionOptions options;
    options.timeout = config.timeout;
    options.float_precision = config.float_precision;
    return options;
}

void run_stages(const BenchmarkItem& item, PipelineEnv& env, RunRecord& record) {
    const PipelineConfig& config = env.config;
    const auto catalog = env.catalogs.get(item.db_path);

    // Only linker runs that some candidate filters with are called.
    std::vector<const LinkerRunSpec*> needed;
    for (const auto& run : config.linker_runs) {
        for (const auto& spec : config.candidates) {
            if (spec.linker_run == run.id) {
                needed.push_back(&run);
                break;
            }
        }
    }
    LinkingContext linking{item.question, item.evidence, env.linking_examples(), env.linking_prompt(), "linking"};
    std::vector<LinkerRun> runs(needed.size());
    parallel_for(needed.size(), config.max_in_flight, [&](std::size_t i) {
        runs[i] = run_linker(*needed[i], *catalog, linking, env.gateway, record.ledger);
    });
    std::map<LinkerRunId, LinkerRun> run_map;
    for (const auto& run : runs) run_map.emplace(run.id, run);
    record.linker_runs = std::move(runs);

    GenerationContext generation;
    generation.nlq = item.question;
    generation.hint = item.evidence;
    generation.catalog = catalog.get();
    generation.linker_runs = &run_map;
    generation.system_prompt = env.generator_prompt();
    generation.max_in_flight = config.max_in_flight;
    if (env.fewshot_store && !env.fewshot_store->empty() && config.fewshot_k > 0) {
        const auto embedding = env.embedder.embed({item.question}).at(0);
        for (std::size_t index : rank_fewshots(embedding, *env.fewshot_store, config.fewshot_k)) {
            generation.fewshots.push_back(&env.fewshot_store->records()[index]);
        }
    }
    std::vector<SqlCandidate> candidates = generate_candidates(config.candidates, generation, env.gateway, record.ledger);

    // Each candidate runs once; the signature serves both voting and scoring.
    const ExecutionOptions options = execution_options(config);
    parallel_for(candidates.size(), config.max_in_flight, [&](std::size_t i) {
        if (candidates[i].state == CandidateState::Generated) {
            candidates[i].execution = execute_candidate(candidates[i].sql, item.db_path, options);
        }
    });
    const bool scored = record.status == ItemStatus::Scored;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        CandidateRecord c{config.candidates[i], candidates[i], false};
        if (scored && c.candidate.execution && c.candidate.execution->status == ExecStatus::Ok) {
            c.correct = c.candidate.execution->signature == record.gold->signature;
        }
        record.candidates.push_back(std::move(c));
    }

    const auto groups = group_votes(std::span<const SqlCandidate>(candidates));
    record.regular_vote_index = regular_vote_choice(groups);
    if (env.run_selection) {
        JudgeContext judge;
        judge.question = item.question;
        judge.hint = item.evidence;
        judge.schema_text = render(*catalog, RepresentationFormat::MSchema);
        judge.model_id = config.judge_model;
        judge.prompt_template = env.judge_prompt();
        judge.max_in_flight = config.max_in_flight;
        record.selection = select(candidates, config.confidence_rules, judge, env.gateway, record.ledger);
        if (scored) {
            const auto& chosen = record.candidates.at(record.selection->chosen_index);
            record.ex = chosen.correct ? 1 : 0;
        }
    }
}

}  // namespace

RunRecord run_item(const BenchmarkItem& item, PipelineEnv& env) {
    const auto started = std::chrono::steady_clock::now();
    RunRecord record;
    record.question_id = item.question_id;
    record.db_id = item.db_id;
    record.question = item.question;
    record.evidence = item.evidence;
    record.gold_sql = item.gold_sql;
    record.difficulty = item.difficulty;
    record.status = ItemStatus::Unscored;

    bool proceed = true;
    if (!trim(item.gold_sql).empty()) {
        ExecutionResult gold = execute_candidate(item.gold_sql, item.db_path, execution_options(env.config));
        if (gold.status == ExecStatus::Ok) {
            record.status = ItemStatus::Scored;
        } else {
            record.status = ItemStatus::GoldError;
            record.error = "gold SQL " + std::string(to_string(gold.status)) +
                           (gold.error_text.empty() ? std::string() : ": " + gold.error_text);
            log_warn("question " + item.question_id + ": " + record.error + "; excluded from EX");
            proceed = false;
        }
        record.gold = std::move(gold);
    }
    if (proceed) {
        try {
            run_stages(item, env, record);
        } catch (const std::exception& e) {
            record.status = ItemStatus::Failed;
            record.error = e.what();
            record.ex = 0;
            log_warn("question " + item.question_id + " failed: " + record.error);
        }
    }
    record.cost_pico = price(record.ledger, env.prices).total_pico;
    if (env.timing) {
        record.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started)
                             .count();
    }
    return record;
}

BenchmarkResult run_benchmark(std::span<const BenchmarkItem> items, PipelineEnv& env, const std::string& records_path) {
    BenchmarkResult result;
    result.records.resize(items.size());

    std::ofstream out;
    if (!records_path.empty()) {
        out.open(records_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write records file " + records_path);
    }
    // Reorder buffer: a record is written once every earlier one is done.
    std::mutex mutex;
    std::vector<bool> done(items.size(), false);
    std::size_t next = 0;
    parallel_for(items.size(), env.config.workers, [&](std::size_t i) {
        RunRecord record = run_item(items[i], env);
        std::lock_guard lock(mutex);
        result.records[i] = std::move(record);
        done[i] = true;
        while (next < items.size() && done[next]) {
            if (out.is_open()) {
                out << result.records[next].to_json_line() << '\n';
                out.flush();
            }
            ++next;
        }
    });
    result.report = aggregate(result.records);
    return result;
}

}  // namespace nrep
