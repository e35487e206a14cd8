#include "nrep/selection.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>

#include "nrep/assets.hpp"
#include "nrep/log.hpp"
#include "nrep/parallel.hpp"
#include "nrep/text.hpp"

namespace nrep {

namespace {

// Each cell is tag + byte length + ':' + payload, so concatenations are
// unambiguous.
std::string tagged(char tag, std::string_view payload) {
    return std::string(1, tag) + std::to_string(payload.size()) + ":" + std::string(payload);
}

std::string canonical_real(double value, int precision) {
    if (std::isnan(value)) return tagged('R', "nan");
    if (std::isinf(value)) return tagged('R', value > 0 ? "inf" : "-inf");
    const double scale = std::pow(10.0, precision);
    double rounded = std::round(value * scale) / scale;
    if (std::isfinite(rounded) && rounded == std::floor(rounded) && std::fabs(rounded) < 9.2e18) {
        return tagged('I', std::to_string(static_cast<std::int64_t>(rounded)));
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, rounded);
    std::string text(buf);
    if (text == "-0" || text.find_first_not_of("-0.") == std::string::npos) text = "0";
    return tagged('R', text);
}

std::string canonical_cell(const SqlValue& value, int precision) {
    struct Visitor {
        int precision;
        std::string operator()(const NullValue&) const { return "N0:"; }
        std::string operator()(std::int64_t v) const { return tagged('I', std::to_string(v)); }
        std::string operator()(double v) const { return canonical_real(v, precision); }
        std::string operator()(const std::string& v) const { return tagged('T', v); }
        std::string operator()(const BlobValue& v) const {
            static constexpr char kHex[] = "0123456789abcdef";
            std::string hex;
            for (unsigned char b : v.bytes) {
                hex.push_back(kHex[b >> 4]);
                hex.push_back(kHex[b & 0xF]);
            }
            return tagged('B', hex);
        }
    };
    return std::visit(Visitor{precision}, value);
}

std::string render_preview(const std::vector<SqlRow>& rows, size_t limit) {
    std::string out;
    for (size_t r = 0; r < rows.size() && r < limit; ++r) {
        std::vector<std::string> cells;
        for (const auto& cell : rows[r]) cells.push_back(render_value(cell));
        out += "(" + join(cells, ", ") + ")\n";
    }
    if (rows.size() > limit) out += "... (" + std::to_string(rows.size()) + " rows total)\n";
    if (rows.empty()) out = "(no rows)\n";
    return out;
}

ExecutionResult synthetic_error(const SqlCandidate& candidate) {
    ExecutionResult result;
    result.status = ExecStatus::Error;
    result.error_text = candidate.state == CandidateState::NoCodeBlock ? "invalid candidate: no SQL code block"
                                                                       : "invalid candidate: backend failure";
    return result;
}

void replace_all(std::string& text, std::string_view from, std::string_view to) {
    size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
}

}  // namespace

std::string_view to_string(ExecStatus status) {
    switch (status) {
        case ExecStatus::Ok: return "ok";
        case ExecStatus::Error: return "error";
        case ExecStatus::Timeout: return "timeout";
    }
    return "error";
}

std::string canonical_row(const SqlRow& row, int float_precision) {
    std::string out;
    for (const auto& cell : row) out += canonical_cell(cell, float_precision);
    return out;
}

std::string normalize_result(std::span<const SqlRow> rows, int float_precision) {
    std::vector<std::string> keys;
    keys.reserve(rows.size());
    for (const auto& row : rows) keys.push_back(canonical_row(row, float_precision));
    std::sort(keys.begin(), keys.end());
    std::string payload;
    for (const auto& key : keys) payload += tagged('W', key);
    return sha256_hex(payload);
}

ExecutionResult execute_candidate(std::string_view sql, const std::string& db_path, const ExecutionOptions& options) {
    ExecutionResult result;
    if (trim(sql).empty()) {
        result.status = ExecStatus::Error;
        result.error_text = "empty SQL";
        return result;
    }
    try {
        Database db(db_path, Database::Mode::ReadOnly);
        const auto deadline = std::chrono::steady_clock::now() + options.timeout;
        std::vector<SqlRow> rows = db.query(sql, deadline);
        result.status = ExecStatus::Ok;
        result.row_count = static_cast<std::int64_t>(rows.size());
        result.signature = normalize_result(rows, options.float_precision);
        result.preview = render_preview(rows, options.preview_rows);
    } catch (const SqliteError& e) {
        if (e.code() == SQLITE_INTERRUPT) {
            result.status = ExecStatus::Timeout;
            result.timeout_ms = options.timeout.count();
        } else {
            result.status = ExecStatus::Error;
            result.error_text = e.what();
        }
    }
    return result;
}

std::string error_class(const ExecutionResult& result) {
    if (result.status == ExecStatus::Timeout) return "timeout";
    if (result.status == ExecStatus::Ok) return "ok";
    const std::string& text = result.error_text;
    // SQLite messages look like "no such column: t.x" or 'near "FROM": syntax error'.
    if (text.find("syntax error") != std::string::npos) return "syntax error";
    const size_t colon = text.find(':');
    return trim(colon == std::string::npos ? text : text.substr(0, colon));
}

std::vector<VoteGroup> group_votes(std::span<const ExecutionResult> results) {
    std::vector<VoteGroup> groups;
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        std::string key;
        switch (r.status) {
            case ExecStatus::Ok: key = "ok:" + r.signature; break;
            case ExecStatus::Error: key = "error:" + error_class(r); break;
            case ExecStatus::Timeout: key = "timeout"; break;
        }
        auto [it, inserted] = index.emplace(key, groups.size());
        if (inserted) groups.push_back({key, r.status, {}});
        groups[it->second].members.push_back(i);
    }
    std::stable_sort(groups.begin(), groups.end(), [](const VoteGroup& a, const VoteGroup& b) {
        if (a.count() != b.count()) return a.count() > b.count();
        return a.representative() < b.representative();
    });
    return groups;
}

std::vector<VoteGroup> group_votes(std::span<const SqlCandidate> candidates) {
    std::vector<ExecutionResult> results;
    results.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (c.execution) {
            results.push_back(*c.execution);
        } else if (c.state != CandidateState::Generated) {
            results.push_back(synthetic_error(c));
        } else {
            throw std::invalid_argument("candidate " + std::to_string(c.spec_index) + " was not executed");
        }
    }
    return group_votes(std::span<const ExecutionResult>(results));
}

Distribution distribution_of(std::span<const VoteGroup> groups) {
    Distribution out;
    for (const auto& g : groups) out.push_back(g.count());
    return out;
}

ConfidenceRules::ConfidenceRules() { rules_[5] = {{1, 1, 1, 1, 1}, {2, 2, 1}, {3, 2}}; }

void ConfidenceRules::set(std::size_t n, std::vector<Distribution> escalate) {
    for (const auto& d : escalate) {
        size_t sum = 0;
        for (size_t c : d) sum += c;
        if (sum != n || !std::is_sorted(d.rbegin(), d.rend())) {
            throw ConfigError("confidence rule for n=" + std::to_string(n) +
                              " must list descending distributions summing to n");
        }
    }
    rules_[n] = std::move(escalate);
}

ConfidenceDecision confidence_policy(const Distribution& distribution, std::size_t n, const ConfidenceRules& rules) {
    auto it = rules.rules().find(n);
    if (it == rules.rules().end()) {
        throw ConfigError("no confidence rule table for " + std::to_string(n) + " candidates");
    }
    return std::find(it->second.begin(), it->second.end(), distribution) != it->second.end()
               ? ConfidenceDecision::Escalate
               : ConfidenceDecision::AcceptTop;
}

std::string build_judge_prompt(const JudgeContext& context, const Finalist& first, const Finalist& second) {
    std::string prompt = context.prompt_template.empty() ? std::string(asset("judge_prompt.txt")) : context.prompt_template;
    auto fill = [&](std::string_view key, const std::string& value) { replace_all(prompt, key, value); };
    // Values are substituted in an order that keeps user text from being
    // re-expanded: free-form fields last.
    fill("{result_a}", trim(first.preview));
    fill("{result_b}", trim(second.preview));
    fill("{sql_a}", first.sql);
    fill("{sql_b}", second.sql);
    fill("{hint}", context.hint.value_or("(none)"));
    fill("{schema}", trim(context.schema_text));
    fill("{question}", context.question);
    return prompt;
}

std::optional<char> parse_judge_reply(std::string_view reply) {
    static const std::regex pattern(R"(^\s*[\(\[\*]*\s*([AB])\s*[\)\]\*]*\s*\.?\s*$)");
    std::match_results<std::string_view::const_iterator> match;
    if (std::regex_match(reply.begin(), reply.end(), match, pattern)) return match[1].str()[0];
    return std::nullopt;
}

PairwiseResult pairwise_select(std::span<const Finalist> finalists, const JudgeContext& context, Gateway& gateway,
                               CostLedger& ledger) {
    PairwiseResult result;
    const size_t m = finalists.size();
    result.half_wins.assign(m, 0);
    if (m == 0) throw std::invalid_argument("pairwise_select needs at least one finalist");
    if (m == 1) return result;

    struct Match {
        size_t first, second;
    };
    std::vector<Match> matches;
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = i + 1; j < m; ++j) {
            matches.push_back({i, j});
            matches.push_back({j, i});
        }
    }
    // 2 points to the winner, 1 each when the verdict is unusable.
    std::vector<std::pair<int, int>> points(matches.size());
    parallel_for(matches.size(), context.max_in_flight, [&](size_t k) {
        const auto& match = matches[k];
        ChatRequest request;
        request.model_id = context.model_id;
        request.messages = {{"user", build_judge_prompt(context, finalists[match.first], finalists[match.second])}};
        std::optional<char> verdict;
        try {
            verdict = parse_judge_reply(gateway.complete(request, Stage::Selection, ledger).text);
            if (!verdict) log_warn("unparseable judge reply; counting half a win each");
        } catch (const BackendError& e) {
            log_warn(std::string("judge call failed: ") + e.what() + "; counting half a win each");
        }
        if (!verdict) {
            points[k] = {1, 1};
        } else {
            points[k] = *verdict == 'A' ? std::pair{2, 0} : std::pair{0, 2};
        }
    });
    for (size_t k = 0; k < matches.size(); ++k) {
        result.half_wins[matches[k].first] += points[k].first;
        result.half_wins[matches[k].second] += points[k].second;
    }
    result.calls = matches.size();

    size_t best = 0;
    for (size_t i = 1; i < m; ++i) {
        const auto key = [&](size_t x) {
            return std::tuple(result.half_wins[x], finalists[x].votes, -static_cast<long long>(finalists[x].candidate_index));
        };
        if (key(i) > key(best)) best = i;
    }
    result.winner = best;
    return result;
}

std::string_view to_string(SelectionMethod method) {
    return method == SelectionMethod::RegularVote ? "regular_vote" : "pairwise_llm";
}

std::string_view to_string(Confidence confidence) { return confidence == Confidence::High ? "high" : "low"; }

std::size_t regular_vote_choice(std::span<const VoteGroup> groups) {
    if (groups.empty()) throw std::invalid_argument("no vote groups");
    for (const auto& g : groups) {
        if (g.status == ExecStatus::Ok) return g.representative();
    }
    return groups.front().representative();
}

SelectionOutcome select(std::span<const SqlCandidate> candidates, const ConfidenceRules& rules,
                        const JudgeContext& judge, Gateway& gateway, CostLedger& ledger) {
    if (candidates.empty()) throw std::invalid_argument("select: empty candidate list");
    SelectionOutcome outcome;
    outcome.groups = group_votes(candidates);
    outcome.distribution = distribution_of(outcome.groups);

    std::vector<const VoteGroup*> ok_groups;
    for (const auto& g : outcome.groups) {
        if (g.status == ExecStatus::Ok) ok_groups.push_back(&g);
    }

    auto finish = [&](size_t position) {
        outcome.chosen_index = candidates[position].spec_index;
        outcome.chosen_sql = candidates[position].sql;
        return outcome;
    };

    if (ok_groups.empty()) {
        outcome.method = SelectionMethod::PairwiseLLM;
        outcome.confidence = Confidence::Low;
        return finish(0);
    }
    if (confidence_policy(outcome.distribution, candidates.size(), rules) == ConfidenceDecision::AcceptTop) {
        outcome.method = SelectionMethod::RegularVote;
        outcome.confidence = Confidence::High;
        return finish(ok_groups.front()->representative());
    }

    outcome.method = SelectionMethod::PairwiseLLM;
    outcome.confidence = Confidence::Low;
    std::vector<Finalist> finalists;
    for (const VoteGroup* g : ok_groups) {
        const auto& c = candidates[g->representative()];
        finalists.push_back({c.spec_index, c.sql, c.execution ? c.execution->preview : std::string(), g->count()});
    }
    PairwiseResult tournament = pairwise_select(finalists, judge, gateway, ledger);
    outcome.pairwise_calls = tournament.calls;
    return finish(ok_groups[tournament.winner]->representative());
}

}  // namespace nrep
