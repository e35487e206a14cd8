#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrep/cost.hpp"

namespace nrep {

struct ChatMessage {
    std::string role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 1024;
};

struct ChatResponse {
    std::string text;
    TokenUsage usage;
};

class BackendError : public std::runtime_error {
public:
    enum class Kind { Transport, HttpStatus, ReplayMiss, BadResponse, Config };

    BackendError(Kind kind, const std::string& message, int status = 0, std::string body = {})
        : std::runtime_error(message), kind_(kind), status_(status), body_(std::move(body)) {}

    Kind kind() const { return kind_; }
    int status() const { return status_; }
    const std::string& body() const { return body_; }

private:
    Kind kind_;
    int status_;
    std::string body_;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// Stable content hash of (model id, message sequence). Replay fixtures are
// keyed by it, so any prompt drift shows up as a replay miss.
std::string fixture_key(const ChatRequest& request);

struct FixtureEntry {
    std::string key_hash;
    std::string response_text;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
};

std::vector<FixtureEntry> load_fixtures(const std::string& path);
std::string fixture_line(const FixtureEntry& entry);

class ReplayBackend : public ChatBackend {
public:
    explicit ReplayBackend(const std::string& fixture_path);
    explicit ReplayBackend(const std::vector<FixtureEntry>& entries);

    ChatResponse complete(const ChatRequest& request) override;
    size_t size() const { return entries_.size(); }

private:
    std::map<std::string, FixtureEntry> entries_;
};

// Forwards to another backend and appends one fixture line per distinct key.
class RecordingBackend : public ChatBackend {
public:
    RecordingBackend(ChatBackend& inner, const std::string& fixture_path);

    ChatResponse complete(const ChatRequest& request) override;

private:
    ChatBackend& inner_;
    std::string path_;
    std::mutex mutex_;
    std::map<std::string, FixtureEntry> recorded_;
};

// Backend driven by a callable; used for scripted judges and offline demos.
class FunctionBackend : public ChatBackend {
public:
    using Handler = std::function<ChatResponse(const ChatRequest&)>;
    explicit FunctionBackend(Handler handler) : handler_(std::move(handler)) {}

    ChatResponse complete(const ChatRequest& request) override { return handler_(request); }

private:
    Handler handler_;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    // One unit-norm vector per input, all of the same dimension.
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

// Deterministic pseudo-embedding seeded from a hash of the text.
class MockEmbeddingBackend : public EmbeddingBackend {
public:
    explicit MockEmbeddingBackend(size_t dimension = 64) : dimension_(dimension) {}
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    size_t dimension_;
};

// Scales to unit Euclidean norm; a zero vector is returned unchanged.
void normalize_in_place(std::vector<double>& vector);
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

enum class Stage { Linking, Generation, Selection };
std::string_view to_string(Stage stage);

// Entry point used by the pipeline: bounds in-flight calls and books usage
// to the caller's ledger and to the gateway-wide ledger.
class Gateway {
public:
    Gateway(ChatBackend& backend, size_t max_in_flight = 8);

    ChatResponse complete(const ChatRequest& request, Stage stage, CostLedger& ledger);
    const CostLedger& ledger() const { return total_; }

private:
    ChatBackend& backend_;
    std::counting_semaphore<> in_flight_;
    CostLedger total_;
};

}  // namespace nrep
