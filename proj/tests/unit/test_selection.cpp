#include <doctest.h>

#include <atomic>
#include <map>
#include <set>

#include "nrep/log.hpp"
#include "nrep/selection.hpp"

using namespace nrep;

namespace {

ExecutionResult ok(const std::string& signature, std::string preview = {}) {
    ExecutionResult r;
    r.status = ExecStatus::Ok;
    r.signature = signature;
    r.preview = std::move(preview);
    return r;
}

ExecutionResult error(const std::string& text) {
    ExecutionResult r;
    r.status = ExecStatus::Error;
    r.error_text = text;
    return r;
}

ExecutionResult timeout() {
    ExecutionResult r;
    r.status = ExecStatus::Timeout;
    r.timeout_ms = 10;
    return r;
}

// Candidates whose SQL text is the signature letter, so a judge can read it.
std::vector<SqlCandidate> pool(const std::vector<ExecutionResult>& results) {
    std::vector<SqlCandidate> out;
    for (std::size_t i = 0; i < results.size(); ++i) {
        SqlCandidate c;
        c.spec_index = i;
        c.sql = "SELECT '" + (results[i].status == ExecStatus::Ok ? results[i].signature : std::string("err")) + "'";
        c.execution = results[i];
        out.push_back(c);
    }
    return out;
}

JudgeContext judge_context() {
    JudgeContext j;
    j.question = "Which one?";
    j.schema_text = "schema";
    j.model_id = "judge";
    j.max_in_flight = 2;
    return j;
}

// Judge preferring the candidate whose SQL holds the favourite letter;
// otherwise it answers with the first-listed candidate.
struct ScriptedJudge {
    char favourite = 0;
    std::atomic<int> calls{0};
    FunctionBackend backend{[this](const ChatRequest& r) {
        ++calls;
        const std::string& prompt = r.messages.back().content;
        const std::size_t a = prompt.find("Candidate A");
        const std::size_t b = prompt.find("Candidate B");
        const std::string fav = std::string("'") + favourite + "'";
        const std::size_t at = favourite ? prompt.find(fav) : std::string::npos;
        if (at != std::string::npos && a != std::string::npos && b != std::string::npos) {
            return ChatResponse{(at > a && at < b) == (a < b) ? "A" : "B", {10, 1}};
        }
        return ChatResponse{"A", {10, 1}};
    }};
};

}  // namespace

TEST_CASE("three and two") {
    const auto groups = group_votes(std::vector{ok("A"), ok("A"), ok("B"), ok("A"), ok("B")});
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].key == "ok:A");
    CHECK(groups[0].members == std::vector<std::size_t>{0, 1, 3});
    CHECK(groups[1].members == std::vector<std::size_t>{2, 4});
    CHECK(distribution_of(groups) == Distribution{3, 2});
}

TEST_CASE("unanimous and all distinct pools") {
    CHECK(distribution_of(group_votes(std::vector(5, ok("X")))) == Distribution{5});
    const auto distinct = group_votes(std::vector{ok("E"), ok("D"), ok("C"), ok("B"), ok("A")});
    CHECK(distribution_of(distinct) == Distribution{1, 1, 1, 1, 1});
    for (std::size_t i = 0; i < 5; ++i) CHECK(distinct[i].representative() == i);
}

TEST_CASE("failures group by class and timeouts together") {
    const auto groups = group_votes(std::vector{error("no such column: x"), timeout(), error("no such column: y"),
                                                error("near \"FROM\": syntax error"), timeout(), ok("A")});
    REQUIRE(groups.size() == 4);
    CHECK(groups[0].key == "error:no such column");
    CHECK(groups[0].members == std::vector<std::size_t>{0, 2});
    CHECK(groups[1].key == "timeout");
    CHECK(groups[2].key == "error:syntax error");
    CHECK(groups[3].key == "ok:A");
    CHECK(regular_vote_choice(groups) == 5);
    CHECK(regular_vote_choice(group_votes(std::vector{error("x: 1"), timeout(), timeout()})) == 1);
}

TEST_CASE("candidates without SQL vote as errors") {
    auto candidates = pool({ok("A"), ok("A")});
    candidates.push_back(SqlCandidate{2, "", "prose", {}, CandidateState::NoCodeBlock, "no SQL code block", std::nullopt});
    const auto groups = group_votes(candidates);
    REQUIRE(groups.size() == 2);
    CHECK(groups[1].status == ExecStatus::Error);
    CHECK(groups[1].key.rfind("error:", 0) == 0);
}

TEST_CASE("built-in escalation rule for five candidates") {
    const ConfidenceRules rules;
    CHECK(confidence_policy({5}, 5, rules) == ConfidenceDecision::AcceptTop);
    CHECK(confidence_policy({4, 1}, 5, rules) == ConfidenceDecision::AcceptTop);
    CHECK(confidence_policy({3, 2}, 5, rules) == ConfidenceDecision::Escalate);
    CHECK(confidence_policy({3, 1, 1}, 5, rules) == ConfidenceDecision::AcceptTop);
    CHECK(confidence_policy({2, 2, 1}, 5, rules) == ConfidenceDecision::Escalate);
    CHECK(confidence_policy({2, 1, 1, 1}, 5, rules) == ConfidenceDecision::AcceptTop);
    CHECK(confidence_policy({1, 1, 1, 1, 1}, 5, rules) == ConfidenceDecision::Escalate);
    CHECK_THROWS_AS(confidence_policy({2, 1}, 3, rules), ConfigError);
}

TEST_CASE("custom rules are validated") {
    ConfidenceRules rules;
    rules.set(3, {{1, 1, 1}});
    CHECK(confidence_policy({1, 1, 1}, 3, rules) == ConfidenceDecision::Escalate);
    CHECK(confidence_policy({2, 1}, 3, rules) == ConfidenceDecision::AcceptTop);
    CHECK_THROWS_AS(rules.set(3, {{1, 2}}), ConfigError);
    CHECK_THROWS_AS(rules.set(3, {{2, 2}}), ConfigError);
}

TEST_CASE("judge replies") {
    CHECK(parse_judge_reply("A") == 'A');
    CHECK(parse_judge_reply(" B.\n") == 'B');
    CHECK(parse_judge_reply("(A)") == 'A');
    CHECK(parse_judge_reply("**B**") == 'B');
    CHECK(parse_judge_reply("[A]") == 'A');
    CHECK_FALSE(parse_judge_reply("Both").has_value());
    CHECK_FALSE(parse_judge_reply("A or B").has_value());
    CHECK_FALSE(parse_judge_reply("").has_value());
}

TEST_CASE("judge prompt carries both candidates") {
    JudgeContext context = judge_context();
    context.hint = "a hint";
    const std::string prompt = build_judge_prompt(context, {0, "SELECT 1", "1", 3}, {2, "SELECT 2", "2", 2});
    CHECK(prompt.find("Which one?") != std::string::npos);
    CHECK(prompt.find("a hint") != std::string::npos);
    CHECK(prompt.find("SELECT 1") < prompt.find("SELECT 2"));
    CHECK(prompt.find('{') == std::string::npos);
    context.prompt_template = "{question}|{candidate_a}|{candidate_b}";
    CHECK(build_judge_prompt(context, {0, "X", "", 1}, {1, "Y", "", 1}).rfind("Which one?|", 0) == 0);
}

TEST_CASE("two finalists and a judge that always picks the first listed") {
    ScriptedJudge judge;
    Gateway gateway(judge.backend);
    CostLedger ledger;
    const std::vector<Finalist> finalists{{0, "SELECT 'A'", "", 3}, {1, "SELECT 'B'", "", 2}};
    const PairwiseResult r = pairwise_select(finalists, judge_context(), gateway, ledger);
    CHECK(r.calls == 2);
    CHECK(r.half_wins == std::vector<int>{2, 2});
    // One win each; the tie goes to more votes.
    CHECK(r.winner == 0);
    CHECK(ledger.total().calls == 2);
}

TEST_CASE("three finalists and a judge preferring B") {
    ScriptedJudge judge;
    judge.favourite = 'B';
    Gateway gateway(judge.backend);
    CostLedger ledger;
    const std::vector<Finalist> finalists{{0, "SELECT 'A'", "", 1}, {1, "SELECT 'B'", "", 1}, {2, "SELECT 'C'", "", 1}};
    const PairwiseResult r = pairwise_select(finalists, judge_context(), gateway, ledger);
    CHECK(r.calls == 6);
    CHECK(r.winner == 1);
    CHECK(r.half_wins[1] == 8);
    CHECK(r.half_wins[0] + r.half_wins[2] == 4);
}

TEST_CASE("unparseable and failed judgements split the point") {
    FunctionBackend backend([](const ChatRequest& r) -> ChatResponse {
        if (r.messages.back().content.find("SELECT 'A'") < r.messages.back().content.find("SELECT 'B'")) {
            return {"I cannot decide", {1, 1}};
        }
        throw BackendError(BackendError::Kind::HttpStatus, "HTTP 500", 500);
    });
    Gateway gateway(backend);
    CostLedger ledger;
    ScopedLogCapture quiet;
    const std::vector<Finalist> finalists{{4, "SELECT 'A'", "", 1}, {2, "SELECT 'B'", "", 1}};
    const PairwiseResult r = pairwise_select(finalists, judge_context(), gateway, ledger);
    CHECK(r.half_wins == std::vector<int>{2, 2});
    // Equal votes: the lower candidate index wins.
    CHECK(r.winner == 1);
}

TEST_CASE("a confident distribution is settled by vote") {
    ScriptedJudge judge;
    Gateway gateway(judge.backend);
    CostLedger ledger;
    const auto candidates = pool({ok("B"), ok("A"), ok("A"), ok("A"), ok("A")});
    const SelectionOutcome outcome = select(candidates, ConfidenceRules(), judge_context(), gateway, ledger);
    CHECK(outcome.method == SelectionMethod::RegularVote);
    CHECK(outcome.confidence == Confidence::High);
    CHECK(outcome.chosen_index == 1);
    CHECK(outcome.chosen_sql == "SELECT 'A'");
    CHECK(outcome.distribution == Distribution{4, 1});
    CHECK(outcome.pairwise_calls == 0);
    CHECK(judge.calls == 0);
}

TEST_CASE("a two-two-one split escalates to a tournament") {
    ScriptedJudge judge;
    judge.favourite = 'C';
    Gateway gateway(judge.backend);
    CostLedger ledger;
    const auto candidates = pool({ok("A"), ok("B"), ok("A"), ok("B"), ok("C")});
    const SelectionOutcome outcome = select(candidates, ConfidenceRules(), judge_context(), gateway, ledger);
    CHECK(outcome.method == SelectionMethod::PairwiseLLM);
    CHECK(outcome.confidence == Confidence::Low);
    CHECK(outcome.distribution == Distribution{2, 2, 1});
    CHECK(outcome.pairwise_calls == 6);
    CHECK(judge.calls == 6);
    // C beats both others twice; a lone vote can win the tournament.
    CHECK(outcome.chosen_index == 4);
}

TEST_CASE("failed groups are never finalists") {
    ScriptedJudge judge;
    Gateway gateway(judge.backend);
    CostLedger ledger;
    const auto candidates = pool({error("no such table: t"), error("no such table: u"), ok("A"), ok("A"), ok("B")});
    const SelectionOutcome outcome = select(candidates, ConfidenceRules(), judge_context(), gateway, ledger);
    CHECK(outcome.distribution == Distribution{2, 2, 1});
    CHECK(outcome.pairwise_calls == 2);
    // The judge picks whoever is listed first, so the two finalists split evenly
    // and the larger group wins the tie.
    CHECK(outcome.chosen_index == 2);
}

TEST_CASE("nothing executes: no judge calls and a low-confidence pick") {
    ScriptedJudge judge;
    Gateway gateway(judge.backend);
    CostLedger ledger;
    const auto candidates = pool({error("x: 1"), timeout(), timeout(), error("y: 2"), error("x: 3")});
    const SelectionOutcome outcome = select(candidates, ConfidenceRules(), judge_context(), gateway, ledger);
    CHECK(outcome.pairwise_calls == 0);
    CHECK(outcome.confidence == Confidence::Low);
    CHECK(outcome.chosen_index == 0);
    CHECK(judge.calls == 0);
    CHECK_THROWS_AS(select(std::span<const SqlCandidate>{}, ConfidenceRules(), judge_context(), gateway, ledger),
                    std::invalid_argument);
}
