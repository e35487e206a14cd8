#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrep/execution.hpp"
#include "nrep/gateway.hpp"
#include "nrep/generation.hpp"

namespace nrep {

using Distribution = std::vector<std::size_t>;

struct VoteGroup {
    // "ok:<signature>", "error:<class>" or "timeout".
    std::string key;
    ExecStatus status = ExecStatus::Ok;
    std::vector<std::size_t> members;  // candidate positions, ascending

    std::size_t count() const { return members.size(); }
    std::size_t representative() const { return members.front(); }
    bool operator==(const VoteGroup&) const = default;
};

// Error class used for grouping failed candidates, e.g. "no such column".
std::string error_class(const ExecutionResult& result);

// Partitions executed candidates; groups ordered by (count desc, smallest member asc).
std::vector<VoteGroup> group_votes(std::span<const SqlCandidate> candidates);
std::vector<VoteGroup> group_votes(std::span<const ExecutionResult> results);
Distribution distribution_of(std::span<const VoteGroup> groups);

enum class ConfidenceDecision { AcceptTop, Escalate };

// Vote distributions that trigger escalation, per candidate count. Five
// candidates ship with the built-in rule; other counts need explicit rules.
class ConfidenceRules {
public:
    ConfidenceRules();
    void set(std::size_t n, std::vector<Distribution> escalate);
    bool has(std::size_t n) const { return rules_.count(n) > 0; }
    const std::map<std::size_t, std::vector<Distribution>>& rules() const { return rules_; }

private:
    std::map<std::size_t, std::vector<Distribution>> rules_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// `distribution` sorted descending and summing to n. Throws ConfigError when
// no rule exists for n.
ConfidenceDecision confidence_policy(const Distribution& distribution, std::size_t n,
                                     const ConfidenceRules& rules = ConfidenceRules());

struct Finalist {
    std::size_t candidate_index = 0;  // spec_index of the representative
    std::string sql;
    std::string preview;
    std::size_t votes = 0;
};

struct PairwiseResult {
    std::size_t winner = 0;  // position in the finalist list
    std::size_t calls = 0;
    std::vector<int> half_wins;  // per finalist, in half-win units
};

struct JudgeContext {
    std::string question;
    std::optional<std::string> hint;
    std::string schema_text;
    std::string model_id;
    std::string prompt_template;  // empty: built-in
    std::size_t max_in_flight = 8;
};

// Fills the judge template placeholders for one ordered comparison.
std::string build_judge_prompt(const JudgeContext& context, const Finalist& first, const Finalist& second);

// "A" / "B" (optionally wrapped in brackets or followed by a period).
std::optional<char> parse_judge_reply(std::string_view reply);

// Every unordered pair judged twice with operands swapped: 2*C(M,2) calls.
// Unparseable replies and backend failures give each side half a win. Ties
// go to more votes, then lower candidate index.
PairwiseResult pairwise_select(std::span<const Finalist> finalists, const JudgeContext& context, Gateway& gateway,
                               CostLedger& ledger);

enum class SelectionMethod { RegularVote, PairwiseLLM };
enum class Confidence { High, Low };
std::string_view to_string(SelectionMethod method);
std::string_view to_string(Confidence confidence);

struct SelectionOutcome {
    std::size_t chosen_index = 0;
    std::string chosen_sql;
    Distribution distribution;
    SelectionMethod method = SelectionMethod::RegularVote;
    std::size_t pairwise_calls = 0;
    Confidence confidence = Confidence::High;
    std::vector<VoteGroup> groups;
};

// Regular vote, escalating to pairwise_select over the representatives of
// the successful groups when the distribution is low-confidence. Error
// groups count toward the distribution but are never chosen while a
// successful group exists. Throws std::invalid_argument on an empty pool.
SelectionOutcome select(std::span<const SqlCandidate> candidates, const ConfidenceRules& rules,
                        const JudgeContext& judge, Gateway& gateway, CostLedger& ledger);

// Choice of plain voting: representative of the largest successful group,
// or of the largest group when none succeeded.
std::size_t regular_vote_choice(std::span<const VoteGroup> groups);

}  // namespace nrep
