#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "nrep/http_backend.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <thread>

#include "nrep/log.hpp"

namespace nrep {

using json = nlohmann::json;

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix, no trailing slash
};

Endpoint split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw BackendError(BackendError::Kind::Config, "bad base URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_start);
    e.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
    return e;
}

std::string env(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

// POSTs JSON with retries; returns the response body of a 2xx reply.
std::string post_json(const HttpOptions& options, const std::string& path, const std::string& body) {
    const Endpoint endpoint = split_url(options.base_url);
    httplib::Client client(endpoint.origin);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(options.timeout);
    client.set_write_timeout(options.timeout);
    httplib::Headers headers;
    if (!options.api_key.empty()) headers.emplace("Authorization", "Bearer " + options.api_key);

    auto backoff = options.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        auto result = client.Post(endpoint.prefix + path, headers, body, "application/json");
        if (!result) {
            last_error = "transport error: " + httplib::to_string(result.error());
            log_warn("POST " + path + " failed (" + last_error + "), attempt " + std::to_string(attempt + 1));
            continue;
        }
        if (result->status >= 200 && result->status < 300) return result->body;
        if (result->status == 429 || result->status >= 500) {
            last_error = "HTTP " + std::to_string(result->status);
            log_warn("POST " + path + " returned " + last_error + ", attempt " + std::to_string(attempt + 1));
            if (attempt == options.max_retries) {
                throw BackendError(BackendError::Kind::HttpStatus, last_error, result->status, result->body);
            }
            continue;
        }
        throw BackendError(BackendError::Kind::HttpStatus, "HTTP " + std::to_string(result->status), result->status,
                           result->body);
    }
    throw BackendError(BackendError::Kind::Transport, last_error);
}

}  // namespace

HttpOptions HttpOptions::from_environment() {
    HttpOptions options;
    std::string base = env("NREP_API_BASE");
    if (base.empty()) base = env("OPENAI_BASE_URL");
    if (!base.empty()) options.base_url = base;
    options.api_key = env("NREP_API_KEY");
    if (options.api_key.empty()) options.api_key = env("OPENAI_API_KEY");
    return options;
}

std::string chat_request_body(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json body = {{"model", request.model_id},
                 {"messages", std::move(messages)},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_tokens}};
    return body.dump();
}

ChatResponse parse_chat_response(const std::string& body) {
    try {
        const auto j = json::parse(body);
        ChatResponse response;
        const auto& content = j.at("choices").at(0).at("message").at("content");
        response.text = content.is_null() ? std::string() : content.get<std::string>();
        if (j.contains("usage") && j["usage"].is_object()) {
            response.usage.input_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
            response.usage.output_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
        }
        return response;
    } catch (const json::exception& e) {
        throw BackendError(BackendError::Kind::BadResponse, std::string("unexpected chat response: ") + e.what(), 200,
                           body);
    }
}

HttpChatBackend::HttpChatBackend(HttpOptions options) : options_(std::move(options)) {}

ChatResponse HttpChatBackend::complete(const ChatRequest& request) {
    return parse_chat_response(post_json(options_, "/chat/completions", chat_request_body(request)));
}

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpOptions options, std::string model)
    : options_(std::move(options)), model_(std::move(model)) {}

std::vector<std::vector<double>> HttpEmbeddingBackend::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    json body = {{"model", model_}, {"input", texts}};
    const std::string reply = post_json(options_, "/embeddings", body.dump());
    std::vector<std::vector<double>> out(texts.size());
    try {
        const auto j = json::parse(reply);
        for (const auto& item : j.at("data")) {
            const size_t index = item.value("index", size_t{0});
            if (index >= out.size()) throw BackendError(BackendError::Kind::BadResponse, "embedding index out of range");
            out[index] = item.at("embedding").get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw BackendError(BackendError::Kind::BadResponse, std::string("unexpected embedding response: ") + e.what(),
                           200, reply);
    }
    const size_t dimension = out.front().size();
    for (auto& v : out) {
        if (v.empty() || v.size() != dimension) {
            throw BackendError(BackendError::Kind::BadResponse, "embedding dimension mismatch");
        }
        normalize_in_place(v);
    }
    return out;
}

}  // namespace nrep
