#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace utilimax {

struct ProviderConfig {
    std::string provider_name;  // mock | openai | anthropic | gemini
    std::string model_id;
    std::string endpoint_url;
    /// Name of the environment variable holding the API key. Keys never live in config files.
    std::string credential_env_var;
    int max_retries = 2;
    std::chrono::milliseconds request_timeout{60000};
    int max_parallel = 1;
    std::optional<double> temperature;
    /// First retry delay; doubles on every further retry.
    std::chrono::milliseconds backoff_initial{500};
    int max_tokens = 4096;
    /// Mock provider only: fingerprint -> response fixture.
    std::filesystem::path fixture_path;
};

/// Throws Error(Config) when an invariant (max_retries >= 0, max_parallel >= 1) fails.
void validate_provider_config(const ProviderConfig& cfg);

namespace outcome {
struct Ok {
    std::string text;
    bool operator==(const Ok&) const = default;
};
struct Timeout {
    bool operator==(const Timeout&) const = default;
};
struct HttpError {
    int code = 0;  // 0: no HTTP response at all (connection failure)
    bool operator==(const HttpError&) const = default;
};
struct RateLimited {
    bool operator==(const RateLimited&) const = default;
};
}  // namespace outcome

using QueryOutcome = std::variant<outcome::Ok, outcome::Timeout, outcome::HttpError, outcome::RateLimited>;

std::string describe(const QueryOutcome& o);
/// Timeout, 429, 5xx and connection failures are worth another attempt.
bool is_transient(const QueryOutcome& o);

struct QueryRequest {
    std::string prompt_text;
    /// Repeated queries of the same prompt (run index). Lets the mock script
    /// different responses per run.
    std::size_t sample_index = 0;

    std::string fingerprint() const;
};

struct QueryRecord {
    std::string prompt_fingerprint;
    int attempt_count = 0;
    std::chrono::milliseconds latency{0};
    QueryOutcome outcome;

    bool ok() const noexcept { return std::holds_alternative<outcome::Ok>(outcome); }
    /// Response text, or nullptr when the query failed.
    const std::string* text() const noexcept;
};

/// One provider attempt. Implementations must be safe to call concurrently.
class Provider {
public:
    virtual ~Provider() = default;
    virtual QueryOutcome attempt(const QueryRequest& request, int attempt_index,
                                 const ProviderConfig& cfg) = 0;
};

/// Deterministic provider driven by a fixture:
///
///   {"responses": {"<sha256 of prompt>": ENTRY, ...}}
///   ENTRY   := "text" | [ENTRY, ...] (indexed by sample_index, cycled)
///            | {"attempts": [ATTEMPT, ...]} (last attempt repeats)
///   ATTEMPT := {"text": "..."} | {"timeout": true} | {"http_status": N} | {"rate_limited": true}
///
/// Unknown fingerprints answer HTTP 404.
class MockProvider : public Provider {
public:
    MockProvider() = default;

    static std::unique_ptr<MockProvider> from_fixture_file(const std::filesystem::path& path);
    static std::unique_ptr<MockProvider> from_fixture_text(std::string_view text);

    void set_response(const std::string& fingerprint, std::string text);
    void set_script(const std::string& fingerprint, std::vector<QueryOutcome> attempts);
    /// Per-sample scripts; sample_index selects one, cycling.
    void set_sample_scripts(const std::string& fingerprint,
                            std::vector<std::vector<QueryOutcome>> per_sample);

    /// Artificial service time per attempt, for concurrency tests.
    void set_delay(std::chrono::milliseconds delay) { delay_ = delay; }

    QueryOutcome attempt(const QueryRequest& request, int attempt_index,
                         const ProviderConfig& cfg) override;

    std::size_t max_in_flight() const noexcept { return max_in_flight_.load(); }
    std::size_t total_attempts() const noexcept { return total_attempts_.load(); }

private:
    std::map<std::string, std::vector<std::vector<QueryOutcome>>> scripts_;
    std::chrono::milliseconds delay_{0};
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> max_in_flight_{0};
    std::atomic<std::size_t> total_attempts_{0};
};

/// Chat-completion adapters over HTTP(S). Resolves the credential at
/// construction; throws Error(Provider) when it is missing or the endpoint is
/// malformed.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(const ProviderConfig& cfg);

    QueryOutcome attempt(const QueryRequest& request, int attempt_index,
                         const ProviderConfig& cfg) override;

    /// Request body for the configured vendor API (exposed for tests).
    std::string request_body(const std::string& prompt, const ProviderConfig& cfg) const;
    /// Pulls the assistant text out of a vendor response body.
    std::optional<std::string> extract_text(const std::string& body) const;

private:
    enum class Api { OpenAi, Anthropic, Gemini };
    Api api_;
    std::string credential_;
    std::string scheme_host_port_;
    std::string path_;
};

/// Provider for cfg.provider_name ("mock" loads cfg.fixture_path).
std::unique_ptr<Provider> make_provider(const ProviderConfig& cfg);

/// Blocking send with retries: transient failures are retried with
/// exponential backoff, other 4xx responses are returned immediately.
QueryRecord send(Provider& provider, const QueryRequest& request, const ProviderConfig& cfg);

/// At most cfg.max_parallel requests in flight; output order matches input
/// order. Per-item failures stay in their record.
std::vector<QueryRecord> send_batch(Provider& provider, const std::vector<QueryRequest>& requests,
                                    const ProviderConfig& cfg);

}  // namespace utilimax
