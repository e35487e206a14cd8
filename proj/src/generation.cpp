#include "nrep/generation.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>

#include "nrep/assets.hpp"
#include "nrep/log.hpp"
#include "nrep/parallel.hpp"
#include "nrep/text.hpp"

namespace nrep {

using json = nlohmann::json;

void validate_specs(std::span<const CandidateSpec> specs) {
    for (size_t i = 0; i < specs.size(); ++i) {
        const auto& spec = specs[i];
        if (spec.spec_index != i) {
            throw std::invalid_argument("candidate spec indices must be contiguous from 0; position " +
                                        std::to_string(i) + " has index " + std::to_string(spec.spec_index));
        }
        if (spec.filter_level == FilterLevel::NoFiltering && spec.linker_run) {
            throw std::invalid_argument("candidate spec " + std::to_string(i) + " uses no filtering but names linker run " +
                                        *spec.linker_run);
        }
        if (spec.filter_level != FilterLevel::NoFiltering && !spec.linker_run) {
            throw std::invalid_argument("candidate spec " + std::to_string(i) + " filters without a linker run");
        }
    }
}

FewShotExample FewShotRecord::example(RepresentationFormat format) const {
    FewShotExample out{question, {}, sql, db_id};
    auto it = schema_texts.find(format);
    if (it != schema_texts.end()) {
        out.schema_text = it->second;
    } else if (!schema_texts.empty()) {
        out.schema_text = schema_texts.begin()->second;
    }
    return out;
}

std::string FewShotStore::to_line(const FewShotRecord& record) {
    json texts = json::object();
    for (const auto& [format, text] : record.schema_texts) texts[std::string(to_string(format))] = text;
    json j = {{"question", record.question},
              {"db_id", record.db_id},
              {"sql", record.sql},
              {"schema_text", std::move(texts)},
              {"embedding", record.embedding}};
    return j.dump();
}

FewShotRecord FewShotStore::from_line(std::string_view line) {
    const auto j = json::parse(line);
    FewShotRecord record;
    record.question = j.at("question").get<std::string>();
    record.db_id = j.value("db_id", std::string());
    record.sql = j.at("sql").get<std::string>();
    const auto& texts = j.at("schema_text");
    if (texts.is_string()) {
        for (auto format : kAllFormats) record.schema_texts[format] = texts.get<std::string>();
    } else {
        for (const auto& [name, text] : texts.items()) {
            auto format = parse_format(name);
            if (!format) throw std::invalid_argument("unknown schema format in few-shot record: " + name);
            record.schema_texts[*format] = text.get<std::string>();
        }
    }
    record.embedding = j.at("embedding").get<std::vector<double>>();
    if (trim(record.sql).empty()) throw std::invalid_argument("few-shot record with empty SQL");
    return record;
}

FewShotStore FewShotStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open few-shot store: " + path);
    std::vector<FewShotRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            records.push_back(from_line(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return FewShotStore(std::move(records));
}

void FewShotStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write few-shot store: " + path);
    for (const auto& record : records_) out << to_line(record) << '\n';
}

std::vector<std::size_t> rank_fewshots(const std::vector<double>& query_embedding, const FewShotStore& store,
                                       std::size_t k) {
    if (k == 0) return {};
    if (store.size() < k) {
        log_warn("few-shot store holds " + std::to_string(store.size()) + " examples, fewer than k=" + std::to_string(k));
    }
    std::vector<double> scores(store.size());
    for (size_t i = 0; i < store.size(); ++i) {
        scores[i] = cosine_similarity(query_embedding, store.records()[i].embedding);
    }
    std::vector<std::size_t> order(store.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });
    order.resize(std::min(k, order.size()));
    return order;
}

std::vector<FewShotExample> retrieve_fewshots(std::string_view nlq, const FewShotStore& store, std::size_t k,
                                              EmbeddingBackend& embedder, RepresentationFormat format) {
    if (k == 0) return {};
    const auto embedding = embedder.embed({std::string(nlq)}).at(0);
    std::vector<FewShotExample> out;
    for (size_t index : rank_fewshots(embedding, store, k)) out.push_back(store.records()[index].example(format));
    return out;
}

std::string wrap_in_sql_fence(std::string_view sql) { return "```sql\n" + trim(sql) + "\n```"; }

std::vector<ChatMessage> build_generation_prompt(std::string_view schema_text, std::string_view nlq,
                                                 const std::optional<std::string>& hint,
                                                 std::span<const FewShotExample> fewshots,
                                                 std::string_view system_prompt) {
    std::vector<ChatMessage> messages;
    messages.push_back(
        {"system", std::string(system_prompt.empty() ? asset("generator_system_prompt.txt") : system_prompt)});
    for (const auto& example : fewshots) {
        messages.push_back({"user", format_question_turn(example.schema_text, example.question, std::nullopt)});
        messages.push_back({"assistant", wrap_in_sql_fence(example.sql)});
    }
    messages.push_back({"user", format_question_turn(schema_text, nlq, hint)});
    return messages;
}

std::string extract_sql(std::string_view response) {
    struct Block {
        std::string tag;
        std::string body;
    };
    std::vector<Block> blocks;
    size_t pos = 0;
    while (true) {
        const size_t open = response.find("```", pos);
        if (open == std::string_view::npos) break;
        size_t info_end = response.find('\n', open + 3);
        if (info_end == std::string_view::npos) break;
        std::string tag = trim(response.substr(open + 3, info_end - open - 3));
        const size_t close = response.find("```", info_end + 1);
        if (close == std::string_view::npos) break;
        blocks.push_back({to_lower(tag), trim(response.substr(info_end + 1, close - info_end - 1))});
        pos = close + 3;
    }
    for (const auto& block : blocks) {
        if (block.tag == "sql" || block.tag == "sqlite") return block.body;
    }
    for (const auto& block : blocks) {
        if (block.tag.empty()) return block.body;
    }
    throw NoCodeBlockError("no SQL code block in response");
}

std::vector<SqlCandidate> generate_candidates(std::span<const CandidateSpec> specs, const GenerationContext& context,
                                              Gateway& gateway, CostLedger& ledger) {
    if (!context.catalog) throw std::invalid_argument("generate_candidates: no catalog");
    std::vector<SqlCandidate> candidates(specs.size());
    parallel_for(specs.size(), context.max_in_flight, [&](size_t i) {
        const CandidateSpec& spec = specs[i];
        SqlCandidate& candidate = candidates[i];
        candidate.spec_index = spec.spec_index;

        const LinkerRun* run = nullptr;
        if (spec.linker_run) {
            if (!context.linker_runs || !context.linker_runs->count(*spec.linker_run)) {
                throw std::invalid_argument("candidate spec " + std::to_string(spec.spec_index) +
                                            " references unknown linker run " + *spec.linker_run);
            }
            run = &context.linker_runs->at(*spec.linker_run);
        }
        const SchemaCatalog schema = filtered_catalog(*context.catalog, run, spec.filter_level);
        std::vector<FewShotExample> fewshots;
        for (const FewShotRecord* record : context.fewshots) fewshots.push_back(record->example(spec.format));

        ChatRequest request;
        request.model_id = spec.generator_model;
        request.messages =
            build_generation_prompt(render(schema, spec.format), context.nlq, context.hint, fewshots, context.system_prompt);
        try {
            ChatResponse response = gateway.complete(request, Stage::Generation, ledger);
            candidate.raw_response = response.text;
            candidate.usage = response.usage;
            candidate.sql = extract_sql(response.text);
        } catch (const NoCodeBlockError& e) {
            candidate.state = CandidateState::NoCodeBlock;
            candidate.error = e.what();
        } catch (const BackendError& e) {
            candidate.state = CandidateState::BackendFailure;
            candidate.error = e.what();
            log_warn("generation for spec " + std::to_string(spec.spec_index) + " failed: " + candidate.error);
        }
    });
    return candidates;
}

}  // namespace nrep

namespace nrep {

FewShotRecord make_fewshot_record(std::string question, std::string sql, const SchemaCatalog& catalog,
                                  std::vector<double> embedding) {
    const LinkingPrediction gold = gold_as_prediction(derive_gold_linking(sql, catalog), catalog);
    const SchemaCatalog filtered = apply_filter(catalog, gold, FilterLevel::FullFiltering);
    FewShotRecord record;
    record.question = std::move(question);
    record.db_id = catalog.db_id;
    record.sql = std::move(sql);
    record.schema_texts = render_all(filtered);
    record.embedding = std::move(embedding);
    return record;
}

}  // namespace nrep
