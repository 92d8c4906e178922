#include "utilimax/experiment.hpp"

#include "json_util.hpp"
#include "utilimax/error.hpp"
#include "utilimax/hash.hpp"
#include "utilimax/metrics.hpp"
#include "utilimax/wilcoxon.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

namespace utilimax {

using detail::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(GainMode g) { return g == GainMode::Binary ? "binary" : "graded"; }
std::string_view to_string(StdOver s) { return s == StdOver::Users ? "users" : "cells"; }

namespace {

constexpr ErrorCode kCfg = ErrorCode::Config;

std::size_t get_count(const json& j, const char* key, const std::string& where, std::size_t fallback,
                      bool allow_zero = false) {
    if (!j.contains(key)) return fallback;
    const auto v = detail::get_integer(j, key, where, kCfg);
    if (v < 0 || (!allow_zero && v == 0)) {
        throw Error(kCfg, where + "." + key + ": must be " + (allow_zero ? "non-negative" : "positive"));
    }
    return static_cast<std::size_t>(v);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

ProviderConfig parse_provider(const json& j, const std::filesystem::path& base) {
    const std::string where = "provider";
    detail::require_object(j, where, kCfg);
    for (const auto& item : j.items()) {
        if (item.key() == "api_key" || item.key() == "key" || item.key() == "token") {
            throw Error(kCfg, "provider." + item.key() +
                                  ": credentials are read from the environment variable named by credential_env");
        }
    }
    detail::reject_unknown_keys(j,
                                {"name", "model", "endpoint", "credential_env", "max_retries", "request_timeout_ms",
                                 "max_parallel", "temperature", "backoff_initial_ms", "max_tokens", "fixture"},
                                where, kCfg);
    ProviderConfig p;
    p.provider_name = detail::get_string(j, "name", where, kCfg);
    static const std::set<std::string> known{"mock", "openai", "anthropic", "gemini"};
    if (!known.count(p.provider_name)) throw Error(kCfg, "provider.name: unknown provider '" + p.provider_name + "'");
    p.model_id = detail::get_string_or(j, "model", "", where, kCfg);
    p.endpoint_url = detail::get_string_or(j, "endpoint", "", where, kCfg);
    p.credential_env_var = detail::get_string_or(j, "credential_env", "", where, kCfg);
    if (j.contains("max_retries")) p.max_retries = static_cast<int>(detail::get_integer(j, "max_retries", where, kCfg));
    if (j.contains("request_timeout_ms")) {
        p.request_timeout = std::chrono::milliseconds(detail::get_integer(j, "request_timeout_ms", where, kCfg));
    }
    if (j.contains("max_parallel")) {
        p.max_parallel = static_cast<int>(detail::get_integer(j, "max_parallel", where, kCfg));
    }
    if (j.contains("temperature")) p.temperature = detail::get_number(j, "temperature", where, kCfg);
    if (j.contains("backoff_initial_ms")) {
        p.backoff_initial = std::chrono::milliseconds(detail::get_integer(j, "backoff_initial_ms", where, kCfg));
    }
    if (j.contains("max_tokens")) p.max_tokens = static_cast<int>(detail::get_integer(j, "max_tokens", where, kCfg));
    if (j.contains("fixture")) p.fixture_path = resolve(base, detail::get_string(j, "fixture", where, kCfg));
    if (p.provider_name == "mock" && p.fixture_path.empty()) {
        throw Error(kCfg, "provider.fixture: required for the mock provider");
    }
    if (p.provider_name != "mock" && p.model_id.empty()) throw Error(kCfg, "provider.model: required");
    validate_provider_config(p);
    return p;
}

// Shortest round-trip decimal form.
std::string num(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string failure_category(const std::string& reason) { return reason.substr(0, reason.find(':')); }

struct Stats {
    double mean = 0.0;
    double std = 0.0;
};

// Population statistics.
Stats stats_of(const std::vector<double>& xs) {
    Stats s;
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(xs.size()));
    return s;
}

const MetricSummary& pick(const VariantAggregate& a, std::string_view metric) {
    if (metric == "precision") return a.precision;
    if (metric == "ndcg") return a.ndcg;
    throw Error(ErrorCode::InvalidArgument, "unknown metric: " + std::string(metric));
}

std::vector<ImprovementEntry> compute_improvements(const std::map<PromptVariant, VariantAggregate>& aggregates) {
    std::vector<ImprovementEntry> out;
    auto treat = aggregates.find(PromptVariant::UtilityMax);
    if (treat == aggregates.end()) return out;
    for (const auto& [variant, agg] : aggregates) {
        if (variant == PromptVariant::UtilityMax) continue;
        for (const char* metric : {"precision", "ndcg"}) {
            ImprovementEntry e;
            e.treatment = PromptVariant::UtilityMax;
            e.baseline = variant;
            e.metric = metric;
            const auto& a = pick(treat->second, metric);
            const auto& b = pick(agg, metric);
            if (a.n == 0 || b.n == 0) {
                e.note = "no scored cells";
            } else if (b.mean == 0.0) {
                e.note = "baseline mean is 0";
            } else {
                e.percent = relative_improvement(a.mean, b.mean);
            }
            out.push_back(std::move(e));
        }
    }
    return out;
}

PromptVariant variant_from(const std::string& s, ErrorCode code) {
    auto v = parse_variant(s);
    if (!v) throw Error(code, "unknown variant: " + s);
    return *v;
}

std::string display_name(PromptVariant v) {
    switch (v) {
        case PromptVariant::UtilityMax: return "UtilityMax";
        case PromptVariant::Basic: return "Basic";
        case PromptVariant::Harsh: return "Harsh";
    }
    return "?";
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base_dir) {
    const json doc = detail::parse_json_text(text, kCfg);
    detail::require_object(doc, "config", kCfg);
    detail::reject_unknown_keys(doc,
                                {"data", "diagram", "provider", "seed", "users", "runs", "variants", "k",
                                 "eligibility", "genres", "gain", "std_over", "out_dir"},
                                "config", kCfg);
    ExperimentConfig c;

    auto dit = doc.find("data");
    if (dit == doc.end()) throw Error(kCfg, "config: missing key 'data'");
    detail::require_object(*dit, "data", kCfg);
    detail::reject_unknown_keys(*dit, {"ratings", "movies", "encoding"}, "data", kCfg);
    c.ratings_path = resolve(base_dir, detail::get_string(*dit, "ratings", "data", kCfg));
    c.movies_path = resolve(base_dir, detail::get_string(*dit, "movies", "data", kCfg));
    const auto enc = detail::get_string_or(*dit, "encoding", "latin1", "data", kCfg);
    if (enc == "latin1") {
        c.encoding = TextEncoding::Latin1;
    } else if (enc == "utf8") {
        c.encoding = TextEncoding::Utf8;
    } else {
        throw Error(kCfg, "data.encoding: expected 'latin1' or 'utf8'");
    }

    if (doc.contains("diagram")) c.diagram_path = resolve(base_dir, detail::get_string(doc, "diagram", "config", kCfg));

    auto pit = doc.find("provider");
    if (pit == doc.end()) throw Error(kCfg, "config: missing key 'provider'");
    c.provider = parse_provider(*pit, base_dir);

    if (doc.contains("seed")) {
        auto it = doc.find("seed");
        if (!it->is_number_unsigned()) throw Error(kCfg, "config.seed: expected a non-negative integer");
        c.seed = it->get<std::uint64_t>();
    }
    c.users = get_count(doc, "users", "config", c.users);
    c.runs = get_count(doc, "runs", "config", c.runs);
    c.k = get_count(doc, "k", "config", c.k);

    if (auto it = doc.find("variants"); it != doc.end()) {
        if (!it->is_array() || it->empty()) throw Error(kCfg, "config.variants: expected a non-empty array");
        c.variants.clear();
        for (const auto& v : *it) {
            if (!v.is_string()) throw Error(kCfg, "config.variants: expected strings");
            const auto pv = variant_from(v.get<std::string>(), kCfg);
            if (std::find(c.variants.begin(), c.variants.end(), pv) != c.variants.end()) {
                throw Error(kCfg, "config.variants: duplicate variant " + v.get<std::string>());
            }
            c.variants.push_back(pv);
        }
    }

    if (auto it = doc.find("eligibility"); it != doc.end()) {
        const std::string where = "eligibility";
        detail::require_object(*it, where, kCfg);
        detail::reject_unknown_keys(*it,
                                    {"min_history", "min_positive_in_window", "train_size", "candidate_size",
                                     "min_positive_rating"},
                                    where, kCfg);
        auto& e = c.eligibility;
        e.min_history = get_count(*it, "min_history", where, e.min_history);
        e.min_positive_in_window = get_count(*it, "min_positive_in_window", where, e.min_positive_in_window, true);
        e.train_size = get_count(*it, "train_size", where, e.train_size);
        e.candidate_size = get_count(*it, "candidate_size", where, e.candidate_size);
        if (it->contains("min_positive_rating")) {
            const auto r = detail::get_integer(*it, "min_positive_rating", where, kCfg);
            if (r < 1 || r > 5) throw Error(kCfg, "eligibility.min_positive_rating: must be in 1..5");
            e.min_positive_rating = static_cast<int>(r);
        }
    }
    if (auto it = doc.find("genres"); it != doc.end()) {
        if (!it->is_array() || it->empty()) throw Error(kCfg, "config.genres: expected a non-empty array");
        c.eligibility.required_genres.clear();
        for (const auto& g : *it) {
            if (!g.is_string()) throw Error(kCfg, "config.genres: expected strings");
            c.eligibility.required_genres.push_back(g.get<std::string>());
        }
    }
    c.eligibility.validate();
    if (c.k > c.eligibility.candidate_size) throw Error(kCfg, "config.k: exceeds the candidate pool size");

    const auto gain = detail::get_string_or(doc, "gain", "binary", "config", kCfg);
    if (gain == "binary") {
        c.gain = GainMode::Binary;
    } else if (gain == "graded") {
        c.gain = GainMode::Graded;
    } else {
        throw Error(kCfg, "config.gain: expected 'binary' or 'graded'");
    }
    const auto over = detail::get_string_or(doc, "std_over", "users", "config", kCfg);
    if (over == "users") {
        c.std_over = StdOver::Users;
    } else if (over == "cells") {
        c.std_over = StdOver::Cells;
    } else {
        throw Error(kCfg, "config.std_over: expected 'users' or 'cells'");
    }
    c.out_dir = resolve(base_dir, detail::get_string_or(doc, "out_dir", "out", "config", kCfg));
    c.config_hash = sha256_hex(text);
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = detail::read_text_file(path);
    } catch (const Error& e) {
        throw Error(kCfg, e.what());
    }
    return parse_experiment_config(text, path.parent_path());
}

// ---------------------------------------------------------------------------
// Movie task

InfluenceDiagram movie_diagram() {
    static const char* kSpec = R"({
  "task": "Recommend movies the user will rate highly that are both comedies and romances",
  "nodes": [
    {"id": "A", "kind": "decision", "description": "the recommended movie"},
    {"id": "S", "kind": "chance", "domain": "categorical", "labels": ["1", "2", "3", "4", "5"],
     "description": "the rating from 1 to 5 that the user would give the movie", "factor": "identity"},
    {"id": "G1", "kind": "chance", "domain": "binary",
     "description": "the movie belongs to the comedy genre", "factor": "identity"},
    {"id": "G2", "kind": "chance", "domain": "binary",
     "description": "the movie belongs to the romance genre", "factor": "identity"}
  ],
  "edges": [["A", "S"], ["A", "G1"], ["A", "G2"]]
})";
    return parse_diagram_spec(kSpec);
}

std::string movie_candidate_id(std::int64_t movie_id) { return "m" + std::to_string(movie_id); }

TaskSpec build_movie_task(const UserTask& user, std::size_t k) {
    TaskSpec t;
    t.description = "Recommend the top " + std::to_string(k) +
                    " movies for this user from the candidate movies listed below";
    std::string ctx = "The user has watched and rated the following movies on a scale from 1 to 5:\n";
    for (const auto& m : user.train) ctx += "\n- " + m.title + " (rating: " + std::to_string(m.rating) + ")";
    t.context = ctx;
    t.candidate_instruction = "Candidate movies:";
    for (const auto& c : user.candidates) t.candidates.push_back({movie_candidate_id(c.movie_id), c.title});
    t.preference = "comedy and romance movies";
    t.preference_scope = "these genres";
    t.top_k = k;
    return t;
}

// ---------------------------------------------------------------------------
// Running

ExperimentPlan plan_experiment(const ExperimentConfig& cfg) {
    ExperimentPlan plan;
    if (cfg.diagram_path.empty()) {
        plan.diagram = movie_diagram();
    } else {
        plan.diagram = load_diagram_file(cfg.diagram_path);
    }
    const auto ratings = load_ratings(cfg.ratings_path);
    const auto movies = load_movies(cfg.movies_path, cfg.encoding);
    const RatingsIndex index(ratings, movies);
    plan.users = select_eligible_users(index, cfg.eligibility, cfg.users, cfg.seed);

    std::map<std::pair<std::int64_t, PromptVariant>, std::string> prompts;
    for (auto user : plan.users) {
        auto task = build_user_task(user, index, cfg.eligibility);
        auto spec = build_movie_task(task, cfg.k);
        for (auto v : cfg.variants) {
            auto artifact = v == PromptVariant::UtilityMax ? compile_utilitymax_prompt(spec, plan.diagram)
                                                           : compile_baseline_prompt(spec, v);
            prompts[{user, v}] = std::move(artifact.text);
        }
        plan.tasks.emplace(user, std::move(task));
    }
    for (auto user : plan.users) {
        for (std::size_t run = 0; run < cfg.runs; ++run) {
            for (auto v : cfg.variants) {
                plan.cells.push_back({CellKey{user, run, v}, QueryRequest{prompts.at({user, v}), run}});
            }
        }
    }
    return plan;
}

CellResult score_cell(const std::string* response_text, PromptVariant variant, const UserTask& user,
                      const InfluenceDiagram& d, std::size_t k, GainMode gain) {
    CellResult r;
    const bool audited = variant == PromptVariant::UtilityMax;
    auto fail = [&](const std::string& reason) {
        r.failed = true;
        r.failure_reason = reason;
        r.ranking.clear();
        return r;
    };
    if (!response_text) {
        if (audited) r.verdict = Verdict::Unparseable;
        return fail("query_failed");
    }

    std::vector<std::string> ranking;
    try {
        const auto parsed = parse_response(*response_text, d, variant);
        if (audited) {
            const auto audit = audit_consistency(parsed, d);
            r.verdict = audit.verdict;
            if (audit.recomputed_ranking.empty()) return fail("audit_failed: objective could not be recomputed");
            ranking = audit.recomputed_ranking;
        } else {
            ranking = parsed.declared_answer;
        }
    } catch (const ResponseError& e) {
        if (audited) r.verdict = Verdict::Unparseable;
        return fail(std::string(to_string(e.kind())) + ": " + e.what());
    }

    std::set<std::string> pool;
    for (const auto& c : user.candidates) pool.insert(movie_candidate_id(c.movie_id));
    std::set<std::string> seen;
    for (const auto& id : ranking) {
        if (!pool.count(id)) return fail("unknown_candidate: " + id);
        if (!seen.insert(id).second) return fail("duplicate_id: " + id);
    }
    if (ranking.size() < k) {
        return fail("too_few_results: " + std::to_string(ranking.size()) + " of " + std::to_string(k));
    }
    ranking.resize(k);

    std::set<std::string> relevant;
    std::map<std::string, double> gains;
    for (const auto& c : user.candidates) {
        if (!user.relevant.count(c.movie_id)) continue;
        relevant.insert(movie_candidate_id(c.movie_id));
        gains[movie_candidate_id(c.movie_id)] = static_cast<double>(c.rating);
    }
    r.precision = precision_at_k(ranking, relevant, k);
    r.ndcg = gain == GainMode::Binary ? ndcg_at_k(ranking, relevant, k) : ndcg_at_k_graded(ranking, gains, k);
    r.ranking = std::move(ranking);
    return r;
}

void summarize(MetricsReport& report) {
    auto& m = report.manifest;
    report.aggregates.clear();
    report.p_values.clear();
    m.failure_counts.clear();
    m.verdict_counts.clear();

    // user -> variant -> scored (precision, ndcg) values
    std::map<PromptVariant, std::map<std::int64_t, std::vector<std::pair<double, double>>>> by_user;
    for (const auto& [key, cell] : report.per_cell) {
        auto& agg = report.aggregates[key.variant];
        ++agg.cells;
        if (cell.verdict) ++m.verdict_counts[std::string(to_string(*cell.verdict))];
        if (cell.failed) {
            ++agg.failed;
            ++m.failure_counts[failure_category(cell.failure_reason)];
            continue;
        }
        by_user[key.variant][key.user_id].emplace_back(cell.precision, cell.ndcg);
    }
    for (auto v : m.variants) report.aggregates[v];  // variants with no cells still get a row

    std::map<PromptVariant, std::map<std::int64_t, double>> user_ndcg;
    for (auto& [variant, agg] : report.aggregates) {
        std::vector<double> cell_p, cell_n, user_p, user_n;
        for (const auto& [user, values] : by_user[variant]) {
            std::vector<double> up, un;
            for (const auto& [p, n] : values) {
                cell_p.push_back(p);
                cell_n.push_back(n);
                up.push_back(p);
                un.push_back(n);
            }
            user_p.push_back(stats_of(up).mean);
            user_n.push_back(stats_of(un).mean);
            user_ndcg[variant][user] = user_n.back();
        }
        const bool over_users = m.std_over == StdOver::Users;
        const auto& spread_p = over_users ? user_p : cell_p;
        const auto& spread_n = over_users ? user_n : cell_n;
        agg.precision = {stats_of(cell_p).mean, stats_of(spread_p).std, spread_p.size()};
        agg.ndcg = {stats_of(cell_n).mean, stats_of(spread_n).std, spread_n.size()};
    }

    if (report.aggregates.count(PromptVariant::UtilityMax)) {
        for (const auto& [variant, agg] : report.aggregates) {
            if (variant == PromptVariant::UtilityMax) continue;
            PValueEntry e;
            e.treatment = PromptVariant::UtilityMax;
            e.baseline = variant;
            std::vector<double> x, y;
            for (const auto& [user, value] : user_ndcg[PromptVariant::UtilityMax]) {
                auto it = user_ndcg[variant].find(user);
                if (it == user_ndcg[variant].end()) continue;
                x.push_back(value);
                y.push_back(it->second);
            }
            e.n_users = x.size();
            if (x.size() < 5) {
                e.note = "fewer than 5 paired users";
            } else {
                const auto w = wilcoxon_one_sided_paired(x, y);
                e.p_value = w.p_value;
                e.note = w.note;
            }
            report.p_values.push_back(std::move(e));
        }
    }
    report.improvements = compute_improvements(report.aggregates);
}

MetricsReport run_experiment(const ExperimentConfig& cfg, Provider& provider) {
    const auto plan = plan_experiment(cfg);
    std::vector<QueryRequest> requests;
    requests.reserve(plan.cells.size());
    for (const auto& c : plan.cells) requests.push_back(c.request);
    const auto records = send_batch(provider, requests, cfg.provider);

    MetricsReport report;
    auto& m = report.manifest;
    m.seed = cfg.seed;
    m.config_hash = cfg.config_hash;
    m.provider = cfg.provider.provider_name;
    m.model = cfg.provider.model_id;
    m.users = plan.users;
    m.runs = cfg.runs;
    m.variants = cfg.variants;
    m.k = cfg.k;
    m.gain = cfg.gain;
    m.std_over = cfg.std_over;

    for (std::size_t i = 0; i < plan.cells.size(); ++i) {
        const auto& key = plan.cells[i].key;
        auto cell = score_cell(records[i].text(), key.variant, plan.tasks.at(key.user_id), plan.diagram, cfg.k,
                               cfg.gain);
        if (!records[i].ok()) cell.failure_reason = "query_failed: " + describe(records[i].outcome);
        cell.attempts = records[i].attempt_count;
        report.per_cell.emplace(key, std::move(cell));
    }
    summarize(report);
    return report;
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
    auto provider = make_provider(cfg.provider);
    return run_experiment(cfg, *provider);
}

// ---------------------------------------------------------------------------
// Improvements

double relative_improvement(double mean_a, double mean_b) {
    if (mean_b == 0.0) throw Error(ErrorCode::InvalidArgument, "relative improvement: baseline mean is 0");
    return 100.0 * (mean_a / mean_b - 1.0);
}

double relative_improvement(const MetricsReport& report, PromptVariant a, PromptVariant b, std::string_view metric) {
    auto ia = report.aggregates.find(a);
    auto ib = report.aggregates.find(b);
    if (ia == report.aggregates.end() || ib == report.aggregates.end()) {
        throw Error(ErrorCode::InvalidArgument, "relative improvement: variant missing from aggregates");
    }
    return relative_improvement(pick(ia->second, metric).mean, pick(ib->second, metric).mean);
}

std::string format_percentage(double percent) {
    double rounded = std::round(percent * 10.0) / 10.0;
    if (rounded == 0.0) rounded = 0.0;  // no "-0.0%"
    return fixed(rounded, 1) + "%";
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ojson manifest_json(const RunManifest& m) {
    ojson j;
    j["seed"] = m.seed;
    j["config_hash"] = m.config_hash;
    j["provider"] = m.provider;
    j["model"] = m.model;
    j["users"] = m.users;
    j["runs"] = m.runs;
    j["variants"] = ojson::array();
    for (auto v : m.variants) j["variants"].push_back(std::string(to_string(v)));
    j["k"] = m.k;
    j["gain"] = std::string(to_string(m.gain));
    j["std_over"] = std::string(to_string(m.std_over));
    j["failure_counts"] = ojson::object();
    for (const auto& [k, v] : m.failure_counts) j["failure_counts"][k] = v;
    j["verdict_counts"] = ojson::object();
    for (const auto& [k, v] : m.verdict_counts) j["verdict_counts"][k] = v;
    return j;
}

ojson summary_json(const MetricSummary& s) {
    ojson j;
    j["mean"] = s.mean;
    j["std"] = s.std;
    j["n"] = s.n;
    return j;
}

constexpr ErrorCode kRep = ErrorCode::Parse;

MetricSummary summary_from(const json& j, const std::string& where) {
    detail::require_object(j, where, kRep);
    MetricSummary s;
    s.mean = detail::get_number(j, "mean", where, kRep);
    s.std = j.contains("std") ? detail::get_number(j, "std", where, kRep) : 0.0;
    s.n = j.contains("n") ? static_cast<std::size_t>(detail::get_integer(j, "n", where, kRep)) : 1;
    return s;
}

std::optional<Verdict> verdict_from(const std::string& s) {
    for (auto v : {Verdict::Consistent, Verdict::ArithmeticDrift, Verdict::RankingMismatch, Verdict::Unparseable}) {
        if (to_string(v) == s) return v;
    }
    throw Error(kRep, "report: unknown verdict " + s);
}

std::size_t size_of(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) return 0;
    const auto v = detail::get_integer(j, key, where, kRep);
    if (v < 0) throw Error(kRep, where + "." + key + ": must be non-negative");
    return static_cast<std::size_t>(v);
}

}  // namespace

std::string serialize_manifest(const MetricsReport& report) { return manifest_json(report.manifest).dump(2) + "\n"; }

std::string serialize_report(const MetricsReport& report) {
    ojson doc;
    doc["manifest"] = manifest_json(report.manifest);
    doc["aggregates"] = ojson::object();
    for (const auto& [v, agg] : report.aggregates) {
        ojson a;
        a["cells"] = agg.cells;
        a["failed"] = agg.failed;
        a["precision"] = summary_json(agg.precision);
        a["ndcg"] = summary_json(agg.ndcg);
        doc["aggregates"][std::string(to_string(v))] = a;
    }
    doc["p_values"] = ojson::array();
    for (const auto& e : report.p_values) {
        ojson j;
        j["treatment"] = std::string(to_string(e.treatment));
        j["baseline"] = std::string(to_string(e.baseline));
        j["p_value"] = e.p_value ? ojson(*e.p_value) : ojson(nullptr);
        j["n_users"] = e.n_users;
        j["note"] = e.note;
        doc["p_values"].push_back(std::move(j));
    }
    doc["improvements"] = ojson::array();
    for (const auto& e : report.improvements) {
        ojson j;
        j["treatment"] = std::string(to_string(e.treatment));
        j["baseline"] = std::string(to_string(e.baseline));
        j["metric"] = e.metric;
        j["percent"] = e.percent ? ojson(*e.percent) : ojson(nullptr);
        j["note"] = e.note;
        doc["improvements"].push_back(std::move(j));
    }
    doc["per_cell"] = ojson::array();
    for (const auto& [key, cell] : report.per_cell) {
        ojson j;
        j["user"] = key.user_id;
        j["run"] = key.run;
        j["variant"] = std::string(to_string(key.variant));
        j["failed"] = cell.failed;
        j["failure_reason"] = cell.failure_reason;
        j["precision"] = cell.precision;
        j["ndcg"] = cell.ndcg;
        j["verdict"] = cell.verdict ? ojson(std::string(to_string(*cell.verdict))) : ojson(nullptr);
        j["ranking"] = cell.ranking;
        j["attempts"] = cell.attempts;
        doc["per_cell"].push_back(std::move(j));
    }
    return doc.dump(2) + "\n";
}

MetricsReport parse_report(std::string_view text) {
    const json doc = detail::parse_json_text(text, kRep);
    detail::require_object(doc, "report", kRep);
    MetricsReport r;

    auto ait = doc.find("aggregates");
    if (ait == doc.end()) throw Error(kRep, "report: missing key 'aggregates'");
    detail::require_object(*ait, "aggregates", kRep);
    for (const auto& item : ait->items()) {
        const std::string where = "aggregates." + item.key();
        detail::require_object(item.value(), where, kRep);
        VariantAggregate a;
        a.cells = size_of(item.value(), "cells", where);
        a.failed = size_of(item.value(), "failed", where);
        auto pit = item.value().find("precision");
        auto nit = item.value().find("ndcg");
        if (pit == item.value().end() || nit == item.value().end()) {
            throw Error(kRep, where + ": needs 'precision' and 'ndcg'");
        }
        a.precision = summary_from(*pit, where + ".precision");
        a.ndcg = summary_from(*nit, where + ".ndcg");
        r.aggregates[variant_from(item.key(), kRep)] = a;
    }

    if (auto mit = doc.find("manifest"); mit != doc.end()) {
        detail::require_object(*mit, "manifest", kRep);
        auto& m = r.manifest;
        const json& j = *mit;
        if (j.contains("seed") && j["seed"].is_number_unsigned()) m.seed = j["seed"].get<std::uint64_t>();
        m.config_hash = detail::get_string_or(j, "config_hash", "", "manifest", kRep);
        m.provider = detail::get_string_or(j, "provider", "", "manifest", kRep);
        m.model = detail::get_string_or(j, "model", "", "manifest", kRep);
        if (j.contains("users")) m.users = j["users"].get<std::vector<std::int64_t>>();
        m.runs = size_of(j, "runs", "manifest");
        if (j.contains("variants")) {
            for (const auto& v : j["variants"]) m.variants.push_back(variant_from(v.get<std::string>(), kRep));
        }
        m.k = size_of(j, "k", "manifest");
        m.gain = detail::get_string_or(j, "gain", "binary", "manifest", kRep) == "graded" ? GainMode::Graded
                                                                                         : GainMode::Binary;
        m.std_over = detail::get_string_or(j, "std_over", "users", "manifest", kRep) == "cells" ? StdOver::Cells
                                                                                              : StdOver::Users;
        if (j.contains("failure_counts")) m.failure_counts = j["failure_counts"].get<std::map<std::string, std::size_t>>();
        if (j.contains("verdict_counts")) m.verdict_counts = j["verdict_counts"].get<std::map<std::string, std::size_t>>();
    }

    if (auto pit = doc.find("p_values"); pit != doc.end()) {
        if (!pit->is_array()) throw Error(kRep, "report.p_values: expected an array");
        for (const auto& j : *pit) {
            PValueEntry e;
            e.treatment = variant_from(detail::get_string(j, "treatment", "p_values", kRep), kRep);
            e.baseline = variant_from(detail::get_string(j, "baseline", "p_values", kRep), kRep);
            if (j.contains("p_value") && j["p_value"].is_number()) e.p_value = j["p_value"].get<double>();
            e.n_users = size_of(j, "n_users", "p_values");
            e.note = detail::get_string_or(j, "note", "", "p_values", kRep);
            r.p_values.push_back(std::move(e));
        }
    }

    if (auto cit = doc.find("per_cell"); cit != doc.end()) {
        if (!cit->is_array()) throw Error(kRep, "report.per_cell: expected an array");
        for (const auto& j : *cit) {
            CellKey key;
            key.user_id = j.at("user").get<std::int64_t>();
            key.run = j.at("run").get<std::size_t>();
            key.variant = variant_from(j.at("variant").get<std::string>(), kRep);
            CellResult c;
            c.failed = j.value("failed", false);
            c.failure_reason = j.value("failure_reason", std::string());
            c.precision = j.value("precision", 0.0);
            c.ndcg = j.value("ndcg", 0.0);
            if (j.contains("verdict") && j["verdict"].is_string()) c.verdict = verdict_from(j["verdict"].get<std::string>());
            if (j.contains("ranking")) c.ranking = j["ranking"].get<std::vector<std::string>>();
            c.attempts = j.value("attempts", 0);
            r.per_cell.emplace(key, std::move(c));
        }
    }

    r.improvements = compute_improvements(r.aggregates);
    return r;
}

MetricsReport load_report(const std::filesystem::path& path) {
    try {
        return parse_report(detail::read_text_file(path));
    } catch (const json::exception& e) {
        throw Error(kRep, std::string("report: ") + e.what());
    }
}

std::string cells_csv(const MetricsReport& report) {
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + "\"";
    };
    std::string out = "user_id,run,variant,failed,failure_reason,precision,ndcg,verdict,attempts\n";
    for (const auto& [key, cell] : report.per_cell) {
        out += std::to_string(key.user_id) + "," + std::to_string(key.run) + "," + std::string(to_string(key.variant)) +
               "," + (cell.failed ? "1" : "0") + "," + quote(cell.failure_reason) + "," + num(cell.precision) + "," +
               num(cell.ndcg) + "," + (cell.verdict ? std::string(to_string(*cell.verdict)) : "") + "," +
               std::to_string(cell.attempts) + "\n";
    }
    return out;
}

void write_experiment_outputs(const MetricsReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create directory " + dir.string() + ": " + ec.message());
    detail::write_text_file(dir / "report.json", serialize_report(report));
    detail::write_text_file(dir / "cells.csv", cells_csv(report));
    detail::write_text_file(dir / "manifest.json", serialize_manifest(report));
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_report_tables(const MetricsReport& report) {
    const auto& m = report.manifest;
    const std::string k = m.k ? std::to_string(m.k) : "K";
    const std::string p_label = "Precision@" + k;
    const std::string n_label = "NDCG@" + k;
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    auto cell = [](const MetricSummary& s) { return s.n ? fixed(s.mean, 3) + " +/- " + fixed(s.std, 3) : "n/a"; };

    std::string out = "Table 1: " + p_label + " and " + n_label + " (mean +/- population std over " +
                      (m.std_over == StdOver::Users ? "per-user means" : "cells") + ")\n";
    out += pad("Variant", 12) + pad(p_label, 20) + pad(n_label, 20) + "Failed\n";
    for (const auto& [v, agg] : report.aggregates) {
        out += pad(display_name(v), 12) + pad(cell(agg.precision), 20) + pad(cell(agg.ndcg), 20) +
               (agg.cells ? std::to_string(agg.failed) + "/" + std::to_string(agg.cells) : "-") + "\n";
    }

    out += "\nTable 2: one-sided paired Wilcoxon signed-rank p-values on per-user mean " + n_label + "\n";
    if (report.p_values.empty()) {
        const bool comparable = report.aggregates.count(PromptVariant::UtilityMax) && report.aggregates.size() > 1;
        out += comparable ? "n/a (no per-user results in this report)\n"
                          : "n/a (needs UtilityMax and at least one baseline)\n";
    } else {
        for (const auto& e : report.p_values) {
            std::string value = "n/a";
            if (e.p_value) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.6g", *e.p_value);
                value = buf;
            }
            if (!e.note.empty() && !e.p_value) value += " (" + e.note + ")";
            out += pad(display_name(e.treatment) + " vs " + display_name(e.baseline), 24) + value + "\n";
        }
    }

    out += "\nRelative improvement of UtilityMax\n";
    if (report.improvements.empty()) {
        out += "n/a\n";
    } else {
        for (const auto& e : report.improvements) {
            const std::string label = (e.metric == "precision" ? p_label : n_label) + " vs " + display_name(e.baseline);
            out += pad(label, 24) + (e.percent ? format_percentage(*e.percent) : "n/a (" + e.note + ")") + "\n";
        }
    }

    if (!m.failure_counts.empty()) {
        out += "\nFailed cells by reason\n";
        for (const auto& [reason, count] : m.failure_counts) out += pad(reason, 24) + std::to_string(count) + "\n";
    }
    if (!m.verdict_counts.empty()) {
        out += "\nConsistency verdicts (UtilityMax)\n";
        for (const auto& [verdict, count] : m.verdict_counts) out += pad(verdict, 24) + std::to_string(count) + "\n";
    }
    return out;
}

}  // namespace utilimax
