#include "nrep/config.hpp"

#include <json.hpp>

#include <set>

#include "nrep/assets.hpp"
#include "nrep/text.hpp"

namespace nrep {

namespace {

using json = nlohmann::json;

void reject_unknown(const json& object, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!object.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& [key, value] : object.items()) {
        bool known = false;
        for (auto name : allowed) known = known || key == name;
        if (!known) throw ConfigError("unknown field '" + key + "' in " + std::string(where));
    }
}

template <typename T>
void read(const json& object, const char* key, T& out) {
    if (!object.contains(key)) return;
    try {
        out = object.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

RepresentationFormat format_field(const json& object, std::string_view where) {
    if (!object.contains("format")) throw ConfigError(std::string(where) + " needs a format");
    const auto name = object.at("format").get<std::string>();
    auto format = parse_format(name);
    if (!format) throw ConfigError("unknown format '" + name + "' in " + std::string(where));
    return *format;
}

}  // namespace

PipelineConfig PipelineConfig::defaults() { return from_json(asset("default_config.json")); }

PipelineConfig PipelineConfig::load(const std::string& path) { return from_json(read_file(path)); }

PipelineConfig PipelineConfig::from_json(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(root,
                   {"linker_runs", "candidates", "models", "fewshot", "prompts", "timeout_ms", "max_in_flight",
                    "workers", "float_precision", "price_table", "confidence_rules"},
                   "config");
    PipelineConfig config;

    if (root.contains("models")) {
        const auto& models = root.at("models");
        reject_unknown(models, {"generator", "judge", "embedding"}, "models");
        read(models, "generator", config.generator_model);
        read(models, "judge", config.judge_model);
        read(models, "embedding", config.embedding_model);
    }
    if (root.contains("linker_runs")) {
        for (const auto& entry : root.at("linker_runs")) {
            reject_unknown(entry, {"id", "format", "model"}, "linker_runs entry");
            LinkerRunSpec spec;
            read(entry, "id", spec.id);
            read(entry, "model", spec.model_id);
            spec.format = format_field(entry, "linker run");
            config.linker_runs.push_back(spec);
        }
    }
    if (root.contains("candidates")) {
        std::size_t index = 0;
        for (const auto& entry : root.at("candidates")) {
            reject_unknown(entry, {"format", "filter", "linker_run", "model"}, "candidates entry");
            CandidateSpec spec;
            spec.spec_index = index++;
            spec.format = format_field(entry, "candidate");
            std::string filter = "none";
            read(entry, "filter", filter);
            auto level = parse_filter_level(filter);
            if (!level) throw ConfigError("unknown filter level '" + filter + "'");
            spec.filter_level = *level;
            if (entry.contains("linker_run")) spec.linker_run = entry.at("linker_run").get<std::string>();
            spec.generator_model = config.generator_model;
            read(entry, "model", spec.generator_model);
            config.candidates.push_back(spec);
        }
    }
    if (root.contains("fewshot")) {
        const auto& fewshot = root.at("fewshot");
        reject_unknown(fewshot, {"k", "store"}, "fewshot");
        read(fewshot, "k", config.fewshot_k);
        read(fewshot, "store", config.fewshot_store);
    }
    if (root.contains("prompts")) {
        const auto& prompts = root.at("prompts");
        reject_unknown(prompts, {"generator_system", "linking_system", "linking_fewshots", "judge"}, "prompts");
        read(prompts, "generator_system", config.prompts.generator_system);
        read(prompts, "linking_system", config.prompts.linking_system);
        read(prompts, "linking_fewshots", config.prompts.linking_fewshots);
        read(prompts, "judge", config.prompts.judge);
    }
    std::int64_t timeout_ms = config.timeout.count();
    read(root, "timeout_ms", timeout_ms);
    config.timeout = std::chrono::milliseconds(timeout_ms);
    read(root, "max_in_flight", config.max_in_flight);
    read(root, "workers", config.workers);
    read(root, "float_precision", config.float_precision);
    read(root, "price_table", config.price_table);
    if (root.contains("confidence_rules")) {
        const auto& rules = root.at("confidence_rules");
        if (!rules.is_object()) throw ConfigError("confidence_rules must map a candidate count to distributions");
        for (const auto& [key, value] : rules.items()) {
            std::size_t n = 0;
            try {
                n = std::stoul(key);
            } catch (const std::exception&) {
                throw ConfigError("confidence_rules key '" + key + "' is not a candidate count");
            }
            config.confidence_rules.set(n, value.get<std::vector<Distribution>>());
        }
    }
    config.validate();
    return config;
}

void PipelineConfig::validate() const {
    if (candidates.empty()) throw ConfigError("config lists no candidates");
    std::set<std::string> run_ids;
    for (const auto& run : linker_runs) {
        if (run.id.empty()) throw ConfigError("linker run without an id");
        if (run.model_id.empty()) throw ConfigError("linker run '" + run.id + "' has no model");
        if (!run_ids.insert(run.id).second) throw ConfigError("duplicate linker run id '" + run.id + "'");
    }
    try {
        validate_specs(candidates);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    for (const auto& spec : candidates) {
        if (spec.linker_run && !run_ids.count(*spec.linker_run)) {
            throw ConfigError("candidate " + std::to_string(spec.spec_index) + " names unknown linker run '" +
                              *spec.linker_run + "'");
        }
        if (spec.generator_model.empty()) throw ConfigError("candidate without a generator model");
    }
    if (!confidence_rules.has(candidates.size())) {
        throw ConfigError("no confidence rule for " + std::to_string(candidates.size()) + " candidates");
    }
    if (timeout.count() <= 0) throw ConfigError("timeout_ms must be positive");
    if (max_in_flight == 0 || workers == 0) throw ConfigError("max_in_flight and workers must be at least 1");
    if (float_precision < 0 || float_precision > 15) throw ConfigError("float_precision must be within 0..15");
}

const LinkerRunSpec* PipelineConfig::find_linker_run(const std::string& id) const {
    for (const auto& run : linker_runs) {
        if (run.id == id) return &run;
    }
    return nullptr;
}

PriceTable PipelineConfig::prices() const {
    return price_table.empty() ? PriceTable::defaults() : PriceTable::load(price_table);
}

std::string PipelineConfig::generator_system_prompt() const {
    return asset_or_file("generator_system_prompt.txt", prompts.generator_system);
}

std::string PipelineConfig::linking_system_prompt() const {
    return asset_or_file("linking_system_prompt.txt", prompts.linking_system);
}

std::vector<LinkingExample> PipelineConfig::linking_examples() const {
    return parse_linking_examples(asset_or_file("linking_fewshots.json", prompts.linking_fewshots));
}

std::string PipelineConfig::judge_prompt() const { return asset_or_file("judge_prompt.txt", prompts.judge); }

std::string PipelineConfig::to_json() const {
    nlohmann::ordered_json root;
    root["linker_runs"] = nlohmann::ordered_json::array();
    for (const auto& run : linker_runs) {
        root["linker_runs"].push_back({{"id", run.id}, {"format", to_string(run.format)}, {"model", run.model_id}});
    }
    root["candidates"] = nlohmann::ordered_json::array();
    for (const auto& spec : candidates) {
        nlohmann::ordered_json entry = {{"format", to_string(spec.format)}, {"filter", to_string(spec.filter_level)}};
        if (spec.linker_run) entry["linker_run"] = *spec.linker_run;
        entry["model"] = spec.generator_model;
        root["candidates"].push_back(entry);
    }
    root["models"] = {{"generator", generator_model}, {"judge", judge_model}, {"embedding", embedding_model}};
    root["fewshot"] = {{"k", fewshot_k}, {"store", fewshot_store}};
    root["prompts"] = {{"generator_system", prompts.generator_system},
                       {"linking_system", prompts.linking_system},
                       {"linking_fewshots", prompts.linking_fewshots},
                       {"judge", prompts.judge}};
    root["timeout_ms"] = timeout.count();
    root["max_in_flight"] = max_in_flight;
    root["workers"] = workers;
    root["float_precision"] = float_precision;
    root["price_table"] = price_table;
    nlohmann::ordered_json rules = nlohmann::ordered_json::object();
    for (const auto& [n, dists] : confidence_rules.rules()) rules[std::to_string(n)] = dists;
    root["confidence_rules"] = rules;
    return root.dump(4) + "\n";
}

}  // namespace nrep
