#include "nrep/gateway.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>

#include "nrep/log.hpp"
#include "nrep/text.hpp"

namespace nrep {

using json = nlohmann::json;

std::string fixture_key(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json body = {{"model", request.model_id}, {"messages", std::move(messages)}};
    return sha256_hex(body.dump());
}

std::vector<FixtureEntry> load_fixtures(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw BackendError(BackendError::Kind::Config, "cannot open replay fixture file: " + path);
    std::vector<FixtureEntry> entries;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto j = json::parse(line);
            entries.push_back({j.at("key_hash").get<std::string>(), j.at("response_text").get<std::string>(),
                               j.value("input_tokens", std::int64_t{0}), j.value("output_tokens", std::int64_t{0})});
        } catch (const json::exception& e) {
            throw BackendError(BackendError::Kind::Config,
                               path + ":" + std::to_string(line_no) + ": bad fixture line: " + e.what());
        }
    }
    return entries;
}

std::string fixture_line(const FixtureEntry& entry) {
    json j = {{"key_hash", entry.key_hash},
              {"response_text", entry.response_text},
              {"input_tokens", entry.input_tokens},
              {"output_tokens", entry.output_tokens}};
    return j.dump();
}

ReplayBackend::ReplayBackend(const std::string& fixture_path) : ReplayBackend(load_fixtures(fixture_path)) {}

ReplayBackend::ReplayBackend(const std::vector<FixtureEntry>& entries) {
    for (const auto& e : entries) entries_.insert_or_assign(e.key_hash, e);
}

ChatResponse ReplayBackend::complete(const ChatRequest& request) {
    const std::string key = fixture_key(request);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw BackendError(BackendError::Kind::ReplayMiss, "replay miss for fixture key " + key);
    }
    return {it->second.response_text, {it->second.input_tokens, it->second.output_tokens}};
}

RecordingBackend::RecordingBackend(ChatBackend& inner, const std::string& fixture_path)
    : inner_(inner), path_(fixture_path) {
    std::ifstream existing(path_);
    if (existing) {
        for (const auto& e : load_fixtures(path_)) recorded_.insert_or_assign(e.key_hash, e);
    }
}

ChatResponse RecordingBackend::complete(const ChatRequest& request) {
    const std::string key = fixture_key(request);
    {
        std::lock_guard lock(mutex_);
        auto it = recorded_.find(key);
        if (it != recorded_.end()) {
            return {it->second.response_text, {it->second.input_tokens, it->second.output_tokens}};
        }
    }
    ChatResponse response = inner_.complete(request);
    FixtureEntry entry{key, response.text, response.usage.input_tokens, response.usage.output_tokens};
    std::lock_guard lock(mutex_);
    if (recorded_.emplace(key, entry).second) {
        std::ofstream out(path_, std::ios::app);
        out << fixture_line(entry) << '\n';
    }
    return response;
}

void normalize_in_place(std::vector<double>& vector) {
    double norm = 0.0;
    for (double v : vector) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) return;
    for (double& v : vector) v /= norm;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine similarity of vectors with different dimensions");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::vector<double>> MockEmbeddingBackend::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        const std::string digest = sha256_hex(text);
        std::uint64_t seed = std::stoull(digest.substr(0, 16), nullptr, 16);
        std::mt19937_64 rng(seed);
        std::vector<double> vector(dimension_);
        // Uniform in [-1, 1) from the top 53 bits; avoids distribution objects
        // whose output is implementation-defined.
        for (double& v : vector) v = static_cast<double>(rng() >> 11) / 4503599627370496.0 - 1.0;
        normalize_in_place(vector);
        out.push_back(std::move(vector));
    }
    return out;
}

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::Linking: return "linking";
        case Stage::Generation: return "generation";
        case Stage::Selection: return "selection";
    }
    return "linking";
}

Gateway::Gateway(ChatBackend& backend, size_t max_in_flight)
    : backend_(backend), in_flight_(static_cast<std::ptrdiff_t>(max_in_flight == 0 ? 1 : max_in_flight)) {}

ChatResponse Gateway::complete(const ChatRequest& request, Stage stage, CostLedger& ledger) {
    in_flight_.acquire();
    struct Release {
        std::counting_semaphore<>& sem;
        ~Release() { sem.release(); }
    } release{in_flight_};
    ChatResponse response = backend_.complete(request);
    ledger.record(request.model_id, to_string(stage), response.usage);
    total_.record(request.model_id, to_string(stage), response.usage);
    return response;
}

}  // namespace nrep
