#include "utilimax/llm_client.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "json_util.hpp"
#include "utilimax/error.hpp"
#include "utilimax/hash.hpp"

#include <algorithm>
#include <cstdlib>
#include <regex>
#include <thread>

namespace utilimax {

using detail::json;

void validate_provider_config(const ProviderConfig& cfg) {
    if (cfg.max_retries < 0) throw Error(ErrorCode::Config, "provider.max_retries must be >= 0");
    if (cfg.max_parallel < 1) throw Error(ErrorCode::Config, "provider.max_parallel must be >= 1");
    if (cfg.request_timeout.count() <= 0) {
        throw Error(ErrorCode::Config, "provider.request_timeout_ms must be > 0");
    }
    if (cfg.backoff_initial.count() < 0) {
        throw Error(ErrorCode::Config, "provider.backoff_initial_ms must be >= 0");
    }
}

std::string describe(const QueryOutcome& o) {
    struct {
        std::string operator()(const outcome::Ok&) const { return "ok"; }
        std::string operator()(const outcome::Timeout&) const { return "timeout"; }
        std::string operator()(const outcome::HttpError& e) const {
            return "http_error(" + std::to_string(e.code) + ")";
        }
        std::string operator()(const outcome::RateLimited&) const { return "rate_limited"; }
    } visitor;
    return std::visit(visitor, o);
}

bool is_transient(const QueryOutcome& o) {
    if (std::holds_alternative<outcome::Timeout>(o)) return true;
    if (std::holds_alternative<outcome::RateLimited>(o)) return true;
    if (const auto* e = std::get_if<outcome::HttpError>(&o)) return e->code == 0 || e->code >= 500;
    return false;
}

std::string QueryRequest::fingerprint() const { return sha256_hex(prompt_text); }

const std::string* QueryRecord::text() const noexcept {
    const auto* ok = std::get_if<outcome::Ok>(&outcome);
    return ok ? &ok->text : nullptr;
}

// ---------------------------------------------------------------------------
// Mock provider

namespace {

QueryOutcome parse_attempt(const json& j) {
    if (j.is_string()) return outcome::Ok{j.get<std::string>()};
    if (!j.is_object()) throw Error(ErrorCode::Config, "mock fixture: attempt must be an object");
    if (auto it = j.find("text"); it != j.end() && it->is_string()) {
        return outcome::Ok{it->get<std::string>()};
    }
    if (j.value("timeout", false)) return outcome::Timeout{};
    if (j.value("rate_limited", false)) return outcome::RateLimited{};
    if (auto it = j.find("http_status"); it != j.end() && it->is_number_integer()) {
        const int code = it->get<int>();
        if (code == 429) return outcome::RateLimited{};
        return outcome::HttpError{code};
    }
    throw Error(ErrorCode::Config, "mock fixture: unrecognised attempt " + j.dump());
}

std::vector<QueryOutcome> parse_script(const json& j) {
    if (j.is_string()) return {outcome::Ok{j.get<std::string>()}};
    if (j.is_object() && j.contains("attempts")) {
        const auto& a = j.at("attempts");
        if (!a.is_array() || a.empty()) {
            throw Error(ErrorCode::Config, "mock fixture: attempts must be a non-empty array");
        }
        std::vector<QueryOutcome> out;
        for (const auto& item : a) out.push_back(parse_attempt(item));
        return out;
    }
    throw Error(ErrorCode::Config, "mock fixture: unrecognised entry " + j.dump());
}

}  // namespace

std::unique_ptr<MockProvider> MockProvider::from_fixture_text(std::string_view text) {
    const json doc = detail::parse_json_text(text, ErrorCode::Config);
    detail::require_object(doc, "mock fixture", ErrorCode::Config);
    auto it = doc.find("responses");
    if (it == doc.end() || !it->is_object()) {
        throw Error(ErrorCode::Config, "mock fixture: missing 'responses' object");
    }
    auto mock = std::make_unique<MockProvider>();
    for (const auto& item : it->items()) {
        std::vector<std::vector<QueryOutcome>> per_sample;
        if (item.value().is_array()) {
            if (item.value().empty()) {
                throw Error(ErrorCode::Config, "mock fixture: empty sample list for " + item.key());
            }
            for (const auto& sample : item.value()) per_sample.push_back(parse_script(sample));
        } else {
            per_sample.push_back(parse_script(item.value()));
        }
        mock->scripts_[item.key()] = std::move(per_sample);
    }
    return mock;
}

std::unique_ptr<MockProvider> MockProvider::from_fixture_file(const std::filesystem::path& path) {
    std::string text;
    try {
        text = detail::read_text_file(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::Provider, e.what());
    }
    return from_fixture_text(text);
}

void MockProvider::set_response(const std::string& fingerprint, std::string text) {
    scripts_[fingerprint] = {{outcome::Ok{std::move(text)}}};
}

void MockProvider::set_script(const std::string& fingerprint, std::vector<QueryOutcome> attempts) {
    scripts_[fingerprint] = {std::move(attempts)};
}

void MockProvider::set_sample_scripts(const std::string& fingerprint,
                                      std::vector<std::vector<QueryOutcome>> per_sample) {
    scripts_[fingerprint] = std::move(per_sample);
}

QueryOutcome MockProvider::attempt(const QueryRequest& request, int attempt_index,
                                   const ProviderConfig& /*cfg*/) {
    const std::size_t now = ++in_flight_;
    std::size_t seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    ++total_attempts_;
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);

    QueryOutcome result = outcome::HttpError{404};
    auto it = scripts_.find(request.fingerprint());
    if (it != scripts_.end() && !it->second.empty()) {
        const auto& script = it->second[request.sample_index % it->second.size()];
        const auto idx = std::min<std::size_t>(static_cast<std::size_t>(attempt_index), script.size() - 1);
        result = script[idx];
    }
    --in_flight_;
    return result;
}

// ---------------------------------------------------------------------------
// HTTP provider

HttpProvider::HttpProvider(const ProviderConfig& cfg) {
    if (cfg.provider_name == "openai") {
        api_ = Api::OpenAi;
    } else if (cfg.provider_name == "anthropic") {
        api_ = Api::Anthropic;
    } else if (cfg.provider_name == "gemini") {
        api_ = Api::Gemini;
    } else {
        throw Error(ErrorCode::Config, "unknown provider: " + cfg.provider_name);
    }

    static const std::regex url_re(R"(^(https?)://([^/:\s]+)(:(\d{1,5}))?(/[^\s]*)?$)");
    std::smatch m;
    if (!std::regex_match(cfg.endpoint_url, m, url_re)) {
        throw Error(ErrorCode::Provider, "malformed endpoint: '" + cfg.endpoint_url + "'");
    }
    scheme_host_port_ = m[1].str() + "://" + m[2].str();
    if (m[4].matched) scheme_host_port_ += ":" + m[4].str();
    path_ = m[5].matched ? m[5].str() : "/";

    if (cfg.credential_env_var.empty()) {
        throw Error(ErrorCode::Provider, "missing credential: no credential_env_var configured");
    }
    const char* key = std::getenv(cfg.credential_env_var.c_str());
    if (!key || !*key) {
        throw Error(ErrorCode::Provider,
                    "missing credential: environment variable " + cfg.credential_env_var + " is not set");
    }
    credential_ = key;
}

std::string HttpProvider::request_body(const std::string& prompt, const ProviderConfig& cfg) const {
    json body;
    switch (api_) {
        case Api::OpenAi:
            body["model"] = cfg.model_id;
            body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
            if (cfg.temperature) body["temperature"] = *cfg.temperature;
            break;
        case Api::Anthropic:
            body["model"] = cfg.model_id;
            body["max_tokens"] = cfg.max_tokens;
            body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
            if (cfg.temperature) body["temperature"] = *cfg.temperature;
            break;
        case Api::Gemini:
            body["contents"] = json::array({{{"role", "user"}, {"parts", json::array({{{"text", prompt}}})}}});
            if (cfg.temperature) body["generationConfig"]["temperature"] = *cfg.temperature;
            break;
    }
    return body.dump();
}

std::optional<std::string> HttpProvider::extract_text(const std::string& body) const {
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) return std::nullopt;
    try {
        switch (api_) {
            case Api::OpenAi: return doc.at("choices").at(0).at("message").at("content").get<std::string>();
            case Api::Anthropic: {
                std::string text;
                for (const auto& block : doc.at("content")) {
                    if (block.value("type", "") == "text") text += block.at("text").get<std::string>();
                }
                return text;
            }
            case Api::Gemini: {
                std::string text;
                for (const auto& part : doc.at("candidates").at(0).at("content").at("parts")) {
                    text += part.value("text", "");
                }
                return text;
            }
        }
    } catch (const json::exception&) {
    }
    return std::nullopt;
}

QueryOutcome HttpProvider::attempt(const QueryRequest& request, int /*attempt_index*/,
                                   const ProviderConfig& cfg) {
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.request_timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.request_timeout - secs);
    client.set_connection_timeout(secs.count(), static_cast<time_t>(usecs.count()));
    client.set_read_timeout(secs.count(), static_cast<time_t>(usecs.count()));
    client.set_write_timeout(secs.count(), static_cast<time_t>(usecs.count()));

    httplib::Headers headers;
    std::string path = path_;
    switch (api_) {
        case Api::OpenAi: headers.emplace("Authorization", "Bearer " + credential_); break;
        case Api::Anthropic:
            headers.emplace("x-api-key", credential_);
            headers.emplace("anthropic-version", "2023-06-01");
            break;
        case Api::Gemini: {
            headers.emplace("x-goog-api-key", credential_);
            // Endpoint may carry a {model} placeholder.
            const auto pos = path.find("{model}");
            if (pos != std::string::npos) path.replace(pos, 7, cfg.model_id);
            break;
        }
    }

    auto res = client.Post(path, headers, request_body(request.prompt_text, cfg), "application/json");
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout ||
            err == httplib::Error::Write) {
            return outcome::Timeout{};
        }
        return outcome::HttpError{0};
    }
    if (res->status == 429) return outcome::RateLimited{};
    if (res->status < 200 || res->status >= 300) return outcome::HttpError{res->status};
    auto text = extract_text(res->body);
    if (!text) return outcome::HttpError{res->status};
    return outcome::Ok{std::move(*text)};
}

std::unique_ptr<Provider> make_provider(const ProviderConfig& cfg) {
    validate_provider_config(cfg);
    if (cfg.provider_name == "mock") return MockProvider::from_fixture_file(cfg.fixture_path);
    return std::make_unique<HttpProvider>(cfg);
}

// ---------------------------------------------------------------------------
// send / send_batch

QueryRecord send(Provider& provider, const QueryRequest& request, const ProviderConfig& cfg) {
    validate_provider_config(cfg);
    QueryRecord rec;
    rec.prompt_fingerprint = request.fingerprint();
    const auto start = std::chrono::steady_clock::now();
    auto delay = cfg.backoff_initial;
    constexpr std::chrono::milliseconds kMaxDelay{60000};
    for (int i = 0; i <= cfg.max_retries; ++i) {
        if (i > 0 && delay.count() > 0) {
            std::this_thread::sleep_for(delay);
            delay = std::min(delay * 2, kMaxDelay);
        }
        rec.attempt_count = i + 1;
        rec.outcome = provider.attempt(request, i, cfg);
        if (!is_transient(rec.outcome)) break;
    }
    rec.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    return rec;
}

std::vector<QueryRecord> send_batch(Provider& provider, const std::vector<QueryRequest>& requests,
                                    const ProviderConfig& cfg) {
    validate_provider_config(cfg);
    if (requests.empty()) throw Error(ErrorCode::InvalidArgument, "send_batch needs at least one prompt");
    std::vector<QueryRecord> out(requests.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < requests.size(); i = next++) {
            try {
                out[i] = send(provider, requests[i], cfg);
            } catch (const std::exception&) {
                out[i].prompt_fingerprint = requests[i].fingerprint();
                out[i].attempt_count = 1;
                out[i].outcome = outcome::HttpError{0};
            }
        }
    };
    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.max_parallel), requests.size());
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return out;
}

}  // namespace utilimax
