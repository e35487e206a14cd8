#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace nrep {

struct TokenUsage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;

    std::int64_t total() const { return input_tokens + output_tokens; }
    TokenUsage& operator+=(const TokenUsage& other) {
        input_tokens += other.input_tokens;
        output_tokens += other.output_tokens;
        return *this;
    }
    bool operator==(const TokenUsage&) const = default;
};

struct Tally {
    std::int64_t calls = 0;
    TokenUsage usage;

    Tally& operator+=(const Tally& other) {
        calls += other.calls;
        usage += other.usage;
        return *this;
    }
    bool operator==(const Tally&) const = default;
};

// Append-only call/token tallies keyed by (model id, stage label).
class CostLedger {
public:
    using Key = std::pair<std::string, std::string>;

    CostLedger() = default;
    CostLedger(const CostLedger& other);
    CostLedger& operator=(const CostLedger& other);

    void record(const std::string& model_id, std::string_view stage, const TokenUsage& usage);
    // Restores a tally read back from a record.
    void add(const std::string& model_id, std::string_view stage, const Tally& tally);
    void merge(const CostLedger& other);

    std::map<Key, Tally> entries() const;
    std::map<std::string, Tally> by_model() const;
    std::map<std::string, Tally> by_stage() const;
    Tally total() const;

    bool operator==(const CostLedger& other) const { return entries() == other.entries(); }

private:
    mutable std::mutex mutex_;
    std::map<Key, Tally> entries_;
};

// Prices in micro-dollars per million tokens, which is the same number as
// pico-dollars per token. Costs are therefore exact integers in pico-dollars.
struct ModelPrice {
    std::int64_t input_micro_per_million = 0;
    std::int64_t output_micro_per_million = 0;

    bool operator==(const ModelPrice&) const = default;
};

class PriceTable {
public:
    void set(const std::string& model_id, ModelPrice price);
    std::optional<ModelPrice> find(const std::string& model_id) const;
    const std::map<std::string, ModelPrice>& prices() const { return prices_; }

    // {"model": {"input_per_1m": "2.50", "output_per_1m": "10.00"}, ...};
    // prices may be decimal strings or JSON numbers.
    static PriceTable from_json(std::string_view text);
    static PriceTable load(const std::string& path);
    static PriceTable defaults();

private:
    std::map<std::string, ModelPrice> prices_;
};

// Parses a non-negative decimal dollar amount into micro-dollars, exactly.
std::int64_t parse_micro_dollars(std::string_view text);

struct ModelCost {
    Tally tally;
    std::int64_t cost_pico = 0;
    bool priced = true;
};

struct PriceReport {
    std::map<std::string, ModelCost> per_model;
    std::int64_t total_pico = 0;
};

// Models missing from the table are priced at zero with a warning.
PriceReport price(const CostLedger& ledger, const PriceTable& table);

double pico_to_dollars(std::int64_t pico);
// Exact decimal rendering, e.g. 1100000000000 -> "1.100000000000".
std::string format_pico_dollars(std::int64_t pico);

}  // namespace nrep
