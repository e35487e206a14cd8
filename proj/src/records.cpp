// RunRecord (de)serialization and the summary report fold.
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "nrep/pipeline.hpp"
#include "nrep/text.hpp"

namespace nrep {

namespace {

using ojson = nlohmann::ordered_json;

template <typename Enum, std::size_t N>
Enum enum_from(std::string_view text, const std::pair<Enum, std::string_view> (&names)[N], const char* what) {
    for (const auto& [value, name] : names) {
        if (name == text) return value;
    }
    throw std::invalid_argument(std::string("unknown ") + what + " '" + std::string(text) + "'");
}

constexpr std::pair<ExecStatus, std::string_view> kExecNames[] = {
    {ExecStatus::Ok, "ok"}, {ExecStatus::Error, "error"}, {ExecStatus::Timeout, "timeout"}};
constexpr std::pair<CandidateState, std::string_view> kStateNames[] = {
    {CandidateState::Generated, "generated"},
    {CandidateState::NoCodeBlock, "no_code_block"},
    {CandidateState::BackendFailure, "backend_failure"}};
constexpr std::pair<ItemStatus, std::string_view> kItemNames[] = {{ItemStatus::Scored, "scored"},
                                                                  {ItemStatus::GoldError, "gold_error"},
                                                                  {ItemStatus::Failed, "failed"},
                                                                  {ItemStatus::Unscored, "unscored"}};
constexpr std::pair<SelectionMethod, std::string_view> kMethodNames[] = {
    {SelectionMethod::RegularVote, "regular_vote"}, {SelectionMethod::PairwiseLLM, "pairwise_llm"}};
constexpr std::pair<Confidence, std::string_view> kConfidenceNames[] = {{Confidence::High, "high"},
                                                                        {Confidence::Low, "low"}};

std::string_view state_name(CandidateState state) {
    for (const auto& [value, name] : kStateNames) {
        if (value == state) return name;
    }
    return "generated";
}

ojson usage_json(const TokenUsage& usage) {
    return {{"input_tokens", usage.input_tokens}, {"output_tokens", usage.output_tokens}};
}

TokenUsage usage_from(const ojson& j) {
    return {j.at("input_tokens").get<std::int64_t>(), j.at("output_tokens").get<std::int64_t>()};
}

ojson optional_text(const std::optional<std::string>& value) { return value ? ojson(*value) : ojson(nullptr); }

std::optional<std::string> optional_text_from(const ojson& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

ojson execution_json(const ExecutionResult& r) {
    ojson j = {{"status", to_string(r.status)}};
    switch (r.status) {
        case ExecStatus::Ok:
            j["signature"] = r.signature;
            j["row_count"] = r.row_count;
            j["preview"] = r.preview;
            break;
        case ExecStatus::Error: j["error"] = r.error_text; break;
        case ExecStatus::Timeout: j["timeout_ms"] = r.timeout_ms; break;
    }
    return j;
}

ExecutionResult execution_from(const ojson& j) {
    ExecutionResult r;
    r.status = enum_from(j.at("status").get<std::string>(), kExecNames, "execution status");
    r.signature = j.value("signature", "");
    r.row_count = j.value("row_count", std::int64_t{0});
    r.preview = j.value("preview", "");
    r.error_text = j.value("error", "");
    r.timeout_ms = j.value("timeout_ms", std::int64_t{0});
    return r;
}

ojson prediction_json(const LinkingPrediction& prediction) {
    ojson j = ojson::object();
    for (const auto& [table, columns] : prediction.selection) j[table] = columns;
    return j;
}

LinkingPrediction prediction_from(const ojson& j, const std::string& source) {
    LinkingPrediction p;
    p.source = source;
    for (const auto& [table, columns] : j.items()) p.selection.emplace_back(table, columns.get<std::vector<std::string>>());
    return p;
}

ojson candidate_json(const CandidateRecord& c) {
    ojson j;
    j["spec_index"] = c.spec.spec_index;
    j["format"] = to_string(c.spec.format);
    j["filter"] = to_string(c.spec.filter_level);
    j["linker_run"] = optional_text(c.spec.linker_run);
    j["model"] = c.spec.generator_model;
    j["state"] = state_name(c.candidate.state);
    j["sql"] = c.candidate.sql;
    if (!c.candidate.error.empty()) j["error"] = c.candidate.error;
    j["usage"] = usage_json(c.candidate.usage);
    j["execution"] = c.candidate.execution ? execution_json(*c.candidate.execution) : ojson(nullptr);
    j["correct"] = c.correct;
    j["raw_response"] = c.candidate.raw_response;
    return j;
}

CandidateRecord candidate_from(const ojson& j) {
    CandidateRecord c;
    c.spec.spec_index = j.at("spec_index").get<std::size_t>();
    c.spec.format = parse_format(j.at("format").get<std::string>()).value();
    c.spec.filter_level = parse_filter_level(j.at("filter").get<std::string>()).value();
    c.spec.linker_run = optional_text_from(j, "linker_run");
    c.spec.generator_model = j.at("model").get<std::string>();
    c.candidate.spec_index = c.spec.spec_index;
    c.candidate.state = enum_from(j.at("state").get<std::string>(), kStateNames, "candidate state");
    c.candidate.sql = j.at("sql").get<std::string>();
    c.candidate.error = j.value("error", "");
    c.candidate.usage = usage_from(j.at("usage"));
    if (!j.at("execution").is_null()) c.candidate.execution = execution_from(j.at("execution"));
    c.correct = j.at("correct").get<bool>();
    c.candidate.raw_response = j.value("raw_response", "");
    return c;
}

ojson linker_json(const LinkerRun& run) {
    ojson j;
    j["id"] = run.id;
    j["format"] = to_string(run.format);
    j["model"] = run.model_id;
    j["ok"] = run.ok;
    if (!run.error.empty()) j["error"] = run.error;
    j["prediction"] = prediction_json(run.prediction);
    j["usage"] = usage_json(run.usage);
    j["raw_response"] = run.raw_response;
    return j;
}

LinkerRun linker_from(const ojson& j) {
    LinkerRun run;
    run.id = j.at("id").get<std::string>();
    run.format = parse_format(j.at("format").get<std::string>()).value();
    run.model_id = j.at("model").get<std::string>();
    run.ok = j.at("ok").get<bool>();
    run.error = j.value("error", "");
    run.prediction = prediction_from(j.at("prediction"), run.id);
    run.usage = usage_from(j.at("usage"));
    run.raw_response = j.value("raw_response", "");
    return run;
}

ojson selection_json(const SelectionOutcome& s) {
    ojson j;
    j["chosen_index"] = s.chosen_index;
    j["chosen_sql"] = s.chosen_sql;
    j["distribution"] = s.distribution;
    j["method"] = to_string(s.method);
    j["confidence"] = to_string(s.confidence);
    j["pairwise_calls"] = s.pairwise_calls;
    ojson groups = ojson::array();
    for (const auto& g : s.groups) {
        groups.push_back({{"key", g.key}, {"status", to_string(g.status)}, {"members", g.members}});
    }
    j["groups"] = groups;
    return j;
}

SelectionOutcome selection_from(const ojson& j) {
    SelectionOutcome s;
    s.chosen_index = j.at("chosen_index").get<std::size_t>();
    s.chosen_sql = j.at("chosen_sql").get<std::string>();
    s.distribution = j.at("distribution").get<Distribution>();
    s.method = enum_from(j.at("method").get<std::string>(), kMethodNames, "selection method");
    s.confidence = enum_from(j.at("confidence").get<std::string>(), kConfidenceNames, "confidence");
    s.pairwise_calls = j.at("pairwise_calls").get<std::size_t>();
    for (const auto& g : j.at("groups")) {
        s.groups.push_back({g.at("key").get<std::string>(),
                            enum_from(g.at("status").get<std::string>(), kExecNames, "execution status"),
                            g.at("members").get<std::vector<std::size_t>>()});
    }
    return s;
}

double mean_of(double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

std::string fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

std::string pad(std::string text, std::size_t width) {
    if (text.size() < width) text.append(width - text.size(), ' ');
    return text;
}

}  // namespace

std::string_view to_string(ItemStatus status) {
    for (const auto& [value, name] : kItemNames) {
        if (value == status) return name;
    }
    return "failed";
}

std::string RunRecord::to_json_line() const {
    ojson j;
    j["question_id"] = question_id;
    j["db_id"] = db_id;
    j["question"] = question;
    j["evidence"] = optional_text(evidence);
    j["gold_sql"] = gold_sql;
    j["difficulty"] = optional_text(difficulty);
    j["status"] = to_string(status);
    if (!error.empty()) j["error"] = error;
    j["gold"] = gold ? execution_json(*gold) : ojson(nullptr);
    j["linker_runs"] = ojson::array();
    for (const auto& run : linker_runs) j["linker_runs"].push_back(linker_json(run));
    j["candidates"] = ojson::array();
    for (const auto& c : candidates) j["candidates"].push_back(candidate_json(c));
    j["selection"] = selection ? selection_json(*selection) : ojson(nullptr);
    j["regular_vote_index"] = regular_vote_index ? ojson(*regular_vote_index) : ojson(nullptr);
    j["ex"] = ex;
    ojson usage = ojson::array();
    for (const auto& [key, tally] : ledger.entries()) {
        usage.push_back({{"model", key.first},
                         {"stage", key.second},
                         {"calls", tally.calls},
                         {"input_tokens", tally.usage.input_tokens},
                         {"output_tokens", tally.usage.output_tokens}});
    }
    j["usage"] = usage;
    j["cost_pico"] = cost_pico;
    if (wall_ms) j["wall_ms"] = *wall_ms;
    return j.dump();
}

RunRecord RunRecord::from_json_line(std::string_view line) {
    const ojson j = ojson::parse(line);
    RunRecord r;
    r.question_id = j.at("question_id").get<std::string>();
    r.db_id = j.at("db_id").get<std::string>();
    r.question = j.at("question").get<std::string>();
    r.evidence = optional_text_from(j, "evidence");
    r.gold_sql = j.at("gold_sql").get<std::string>();
    r.difficulty = optional_text_from(j, "difficulty");
    r.status = enum_from(j.at("status").get<std::string>(), kItemNames, "item status");
    r.error = j.value("error", "");
    if (!j.at("gold").is_null()) r.gold = execution_from(j.at("gold"));
    for (const auto& run : j.at("linker_runs")) r.linker_runs.push_back(linker_from(run));
    for (const auto& c : j.at("candidates")) r.candidates.push_back(candidate_from(c));
    if (!j.at("selection").is_null()) r.selection = selection_from(j.at("selection"));
    if (!j.at("regular_vote_index").is_null()) r.regular_vote_index = j.at("regular_vote_index").get<std::size_t>();
    r.ex = j.at("ex").get<int>();
    for (const auto& u : j.at("usage")) {
        r.ledger.add(u.at("model").get<std::string>(), u.at("stage").get<std::string>(),
                     Tally{u.at("calls").get<std::int64_t>(),
                           {u.at("input_tokens").get<std::int64_t>(), u.at("output_tokens").get<std::int64_t>()}});
    }
    r.cost_pico = j.at("cost_pico").get<std::int64_t>();
    if (j.contains("wall_ms")) r.wall_ms = j.at("wall_ms").get<std::int64_t>();
    return r;
}

std::vector<RunRecord> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open records file " + path);
    std::vector<RunRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            records.push_back(RunRecord::from_json_line(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad record: " + e.what());
        }
    }
    return records;
}

Report aggregate(std::span<const RunRecord> records) {
    Report report;
    report.items = records.size();
    std::vector<std::int64_t> calls;
    double input = 0;
    double output = 0;
    for (const auto& r : records) {
        switch (r.status) {
            case ItemStatus::Scored:
                ++report.scored;
                report.correct += r.ex == 1 ? 1 : 0;
                break;
            case ItemStatus::GoldError: ++report.gold_errors; break;
            case ItemStatus::Failed:
                // A crashed item still counts as a wrong answer.
                ++report.scored;
                ++report.failed;
                break;
            case ItemStatus::Unscored: ++report.unscored; break;
        }
        if (!r.ran()) continue;
        const Tally total = r.ledger.total();
        calls.push_back(total.calls);
        input += static_cast<double>(total.usage.input_tokens);
        output += static_cast<double>(total.usage.output_tokens);
        report.total_cost_pico += r.cost_pico;
        for (const auto& [stage, tally] : r.ledger.by_stage()) report.by_stage[stage] += tally;
        for (const auto& [model, tally] : r.ledger.by_model()) report.by_model[model] += tally;
        if (r.selection && r.selection->method == SelectionMethod::PairwiseLLM) {
            ++report.escalations;
            report.pairwise_calls += r.selection->pairwise_calls;
        }
    }
    report.ex = mean_of(static_cast<double>(report.correct), report.scored);
    if (!calls.empty()) {
        std::sort(calls.begin(), calls.end());
        const std::size_t mid = calls.size() / 2;
        report.median_calls = calls.size() % 2 == 1 ? static_cast<double>(calls[mid])
                                                    : (static_cast<double>(calls[mid - 1]) + calls[mid]) / 2.0;
        double sum = 0;
        for (auto c : calls) sum += static_cast<double>(c);
        report.mean_calls = mean_of(sum, calls.size());
    }
    report.mean_input_k = mean_of(input, calls.size()) / 1000.0;
    report.mean_output_k = mean_of(output, calls.size()) / 1000.0;
    report.mean_total_k = report.mean_input_k + report.mean_output_k;
    report.mean_cost = mean_of(pico_to_dollars(report.total_cost_pico), calls.size());
    return report;
}

std::string Report::to_text() const {
    std::string calls = (median_calls == static_cast<double>(static_cast<std::int64_t>(median_calls))
                             ? std::to_string(static_cast<std::int64_t>(median_calls))
                             : fixed(median_calls, 1)) +
                        "(" + fixed(mean_calls, 2) + ")";
    std::string out;
    out += "items " + std::to_string(items) + ", scored " + std::to_string(scored) + ", gold errors " +
           std::to_string(gold_errors) + ", failed " + std::to_string(failed) + ", unscored " +
           std::to_string(unscored) + "\n\n";
    out += pad("Method", 8) + pad("EX", 8) + pad("LLM Calls Typical(Avg.)", 26) + pad("Tokens (K) in/out/total", 28) +
           "Cost ($/query)\n";
    out += pad("N-rep", 8) + pad(fixed(ex * 100.0, 2), 8) + pad(calls, 26) +
           pad(fixed(mean_input_k, 2) + "/" + fixed(mean_output_k, 2) + "/" + fixed(mean_total_k, 2), 28) +
           fixed(mean_cost, 6) + "\n\n";
    out += "correct " + std::to_string(correct) + "/" + std::to_string(scored) + "\n";
    out += "escalated selections " + std::to_string(escalations) + " (" + std::to_string(pairwise_calls) +
           " pairwise calls)\n";
    out += "total cost $" + format_pico_dollars(total_cost_pico) + "\n\n";
    out += pad("stage", 12) + pad("calls", 8) + pad("input", 12) + "output\n";
    for (const auto& [stage, t] : by_stage) {
        out += pad(stage, 12) + pad(std::to_string(t.calls), 8) + pad(std::to_string(t.usage.input_tokens), 12) +
               std::to_string(t.usage.output_tokens) + "\n";
    }
    out += "\n" + pad("model", 24) + pad("calls", 8) + pad("input", 12) + "output\n";
    for (const auto& [model, t] : by_model) {
        out += pad(model, 24) + pad(std::to_string(t.calls), 8) + pad(std::to_string(t.usage.input_tokens), 12) +
               std::to_string(t.usage.output_tokens) + "\n";
    }
    return out;
}

std::string Report::to_json() const {
    ojson j;
    j["items"] = items;
    j["scored"] = scored;
    j["correct"] = correct;
    j["gold_errors"] = gold_errors;
    j["failed"] = failed;
    j["unscored"] = unscored;
    j["ex"] = ex;
    j["llm_calls"] = {{"typical", median_calls}, {"avg", mean_calls}};
    j["tokens_k"] = {{"input", mean_input_k}, {"output", mean_output_k}, {"total", mean_total_k}};
    j["cost_usd"] = {{"per_query", mean_cost}, {"total", format_pico_dollars(total_cost_pico)}};
    j["escalations"] = escalations;
    j["pairwise_calls"] = pairwise_calls;
    auto tallies = [](const std::map<std::string, Tally>& m) {
        ojson out = ojson::object();
        for (const auto& [name, t] : m) {
            out[name] = {{"calls", t.calls},
                         {"input_tokens", t.usage.input_tokens},
                         {"output_tokens", t.usage.output_tokens}};
        }
        return out;
    };
    j["by_stage"] = tallies(by_stage);
    j["by_model"] = tallies(by_model);
    return j.dump(2) + "\n";
}

}  // namespace nrep
