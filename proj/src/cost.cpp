#include "nrep/cost.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

#include "nrep/assets.hpp"
#include "nrep/log.hpp"
#include "nrep/text.hpp"

namespace nrep {

CostLedger::CostLedger(const CostLedger& other) : entries_(other.entries()) {}

CostLedger& CostLedger::operator=(const CostLedger& other) {
    if (this != &other) {
        auto copy = other.entries();
        std::lock_guard lock(mutex_);
        entries_ = std::move(copy);
    }
    return *this;
}

void CostLedger::record(const std::string& model_id, std::string_view stage, const TokenUsage& usage) {
    std::lock_guard lock(mutex_);
    auto& tally = entries_[{model_id, std::string(stage)}];
    tally.calls += 1;
    tally.usage += usage;
}

void CostLedger::add(const std::string& model_id, std::string_view stage, const Tally& tally) {
    if (tally.calls < 0 || tally.usage.input_tokens < 0 || tally.usage.output_tokens < 0) {
        throw std::invalid_argument("negative tally for model " + model_id);
    }
    std::lock_guard lock(mutex_);
    entries_[{model_id, std::string(stage)}] += tally;
}

void CostLedger::merge(const CostLedger& other) {
    if (this == &other) {
        std::lock_guard lock(mutex_);
        for (auto& [_, tally] : entries_) tally += Tally(tally);
        return;
    }
    auto incoming = other.entries();
    std::lock_guard lock(mutex_);
    for (const auto& [key, tally] : incoming) entries_[key] += tally;
}

std::map<CostLedger::Key, Tally> CostLedger::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

std::map<std::string, Tally> CostLedger::by_model() const {
    std::map<std::string, Tally> out;
    for (const auto& [key, tally] : entries()) out[key.first] += tally;
    return out;
}

std::map<std::string, Tally> CostLedger::by_stage() const {
    std::map<std::string, Tally> out;
    for (const auto& [key, tally] : entries()) out[key.second] += tally;
    return out;
}

Tally CostLedger::total() const {
    Tally out;
    for (const auto& [_, tally] : entries()) out += tally;
    return out;
}

void PriceTable::set(const std::string& model_id, ModelPrice price) {
    if (price.input_micro_per_million < 0 || price.output_micro_per_million < 0) {
        throw std::invalid_argument("negative price for model " + model_id);
    }
    prices_[model_id] = price;
}

std::optional<ModelPrice> PriceTable::find(const std::string& model_id) const {
    auto it = prices_.find(model_id);
    if (it == prices_.end()) return std::nullopt;
    return it->second;
}

std::int64_t parse_micro_dollars(std::string_view text) {
    std::string s = trim(text);
    if (!s.empty() && s.front() == '$') s.erase(0, 1);
    if (s.empty()) throw std::invalid_argument("empty price");
    std::int64_t whole = 0;
    std::int64_t frac = 0;
    int frac_digits = 0;
    bool seen_dot = false;
    for (char c : s) {
        if (c == '.') {
            if (seen_dot) throw std::invalid_argument("bad price: " + s);
            seen_dot = true;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            if (!seen_dot) {
                whole = whole * 10 + (c - '0');
            } else if (frac_digits < 6) {
                frac = frac * 10 + (c - '0');
                ++frac_digits;
            } else if (c != '0') {
                throw std::invalid_argument("price finer than one micro-dollar: " + s);
            }
        } else {
            throw std::invalid_argument("bad price: " + s);
        }
    }
    while (frac_digits < 6) {
        frac *= 10;
        ++frac_digits;
    }
    return whole * 1'000'000 + frac;
}

namespace {

std::int64_t micro_from_json(const nlohmann::json& value) {
    if (value.is_string()) return parse_micro_dollars(value.get<std::string>());
    if (value.is_number()) {
        double v = value.get<double>();
        if (v < 0) throw std::invalid_argument("negative price");
        return std::llround(v * 1e6);
    }
    throw std::invalid_argument("price must be a number or decimal string");
}

}  // namespace

PriceTable PriceTable::from_json(std::string_view text) {
    PriceTable table;
    const auto root = nlohmann::json::parse(text);
    for (const auto& [model, entry] : root.items()) {
        for (const auto& [field, _] : entry.items()) {
            if (field != "input_per_1m" && field != "output_per_1m") {
                throw std::invalid_argument("unknown price field '" + field + "' for model " + model);
            }
        }
        table.set(model, {micro_from_json(entry.at("input_per_1m")), micro_from_json(entry.at("output_per_1m"))});
    }
    return table;
}

PriceTable PriceTable::load(const std::string& path) { return from_json(read_file(path)); }

PriceTable PriceTable::defaults() { return from_json(asset("default_prices.json")); }

namespace {

// Once per model and process; per-item pricing would otherwise repeat it.
void warn_unpriced(const std::string& model) {
    static std::mutex mutex;
    static std::set<std::string> warned;
    std::lock_guard lock(mutex);
    if (warned.insert(model).second) log_warn("no price for model '" + model + "', priced at $0");
}

}  // namespace

PriceReport price(const CostLedger& ledger, const PriceTable& table) {
    PriceReport report;
    for (const auto& [model, tally] : ledger.by_model()) {
        ModelCost cost;
        cost.tally = tally;
        if (auto p = table.find(model)) {
            cost.cost_pico = tally.usage.input_tokens * p->input_micro_per_million +
                             tally.usage.output_tokens * p->output_micro_per_million;
        } else {
            cost.priced = false;
            if (tally.usage.total() > 0) warn_unpriced(model);
        }
        report.total_pico += cost.cost_pico;
        report.per_model.emplace(model, cost);
    }
    return report;
}

double pico_to_dollars(std::int64_t pico) { return static_cast<double>(pico) / 1e12; }

std::string format_pico_dollars(std::int64_t pico) {
    const bool negative = pico < 0;
    const std::uint64_t magnitude = negative ? static_cast<std::uint64_t>(-(pico + 1)) + 1 : static_cast<std::uint64_t>(pico);
    std::string frac = std::to_string(magnitude % 1'000'000'000'000ULL);
    frac.insert(0, 12 - frac.size(), '0');
    return std::string(negative ? "-" : "") + std::to_string(magnitude / 1'000'000'000'000ULL) + "." + frac;
}

}  // namespace nrep
