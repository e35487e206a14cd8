#pragma once

#include <chrono>
#include <string>

#include "nrep/gateway.hpp"

namespace nrep {

struct HttpOptions {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::seconds timeout{120};

    // NREP_API_BASE / NREP_API_KEY, falling back to OPENAI_BASE_URL / OPENAI_API_KEY.
    static HttpOptions from_environment();
};

// Chat-completions client for OpenAI-compatible endpoints. Transport errors,
// 429 and 5xx are retried with exponential backoff; other statuses fail
// immediately with the response body attached.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(HttpOptions options);
    ChatResponse complete(const ChatRequest& request) override;

private:
    HttpOptions options_;
};

class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    HttpEmbeddingBackend(HttpOptions options, std::string model);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    HttpOptions options_;
    std::string model_;
};

// Request body for the chat-completions endpoint.
std::string chat_request_body(const ChatRequest& request);
// Maps a chat-completions reply body; throws BackendError(BadResponse).
ChatResponse parse_chat_response(const std::string& body);

}  // namespace nrep
