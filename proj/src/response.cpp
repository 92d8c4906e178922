#include "utilimax/response.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace utilimax {

using json = nlohmann::json;

std::string_view to_string(ResponseErrorKind kind) {
    switch (kind) {
        case ResponseErrorKind::NoBlock: return "no_block";
        case ResponseErrorKind::MalformedBlock: return "malformed_block";
        case ResponseErrorKind::ProbabilityOutOfRange: return "probability_out_of_range";
        case ResponseErrorKind::InvalidEstimate: return "invalid_estimate";
        case ResponseErrorKind::UnknownNode: return "unknown_node";
        case ResponseErrorKind::MissingEstimate: return "missing_estimate";
        case ResponseErrorKind::DuplicateCandidate: return "duplicate_candidate";
        case ResponseErrorKind::UnknownAnswerId: return "unknown_answer_id";
        case ResponseErrorKind::EmptyAnswer: return "empty_answer";
    }
    return "?";
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Consistent: return "Consistent";
        case Verdict::ArithmeticDrift: return "ArithmeticDrift";
        case Verdict::RankingMismatch: return "RankingMismatch";
        case Verdict::Unparseable: return "Unparseable";
    }
    return "?";
}

namespace {

constexpr std::string_view kFence = "```";
constexpr std::string_view kOpen = "```utilimax-json";

[[noreturn]] void fail(ResponseErrorKind kind, const std::string& msg) {
    throw ResponseError(kind, msg);
}

std::string_view last_block(std::string_view text) {
    std::size_t open = std::string_view::npos;
    for (std::size_t pos = text.find(kOpen); pos != std::string_view::npos;
         pos = text.find(kOpen, pos + 1)) {
        // Only a whole info string counts: "```utilimax-jsonx" is a different tag.
        const std::size_t after = pos + kOpen.size();
        if (after == text.size() || text[after] == '\n' || text[after] == '\r' ||
            text[after] == ' ' || text[after] == '\t') {
            open = pos;
        }
    }
    if (open == std::string_view::npos) fail(ResponseErrorKind::NoBlock, "no utilimax-json block found");
    std::size_t body = text.find('\n', open);
    if (body == std::string_view::npos) fail(ResponseErrorKind::MalformedBlock, "unterminated utilimax-json block");
    ++body;
    const std::size_t close = text.find(kFence, body);
    if (close == std::string_view::npos) {
        fail(ResponseErrorKind::MalformedBlock, "unterminated utilimax-json block");
    }
    return text.substr(body, close - body);
}

std::string id_string(const json& j, const std::string& where) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    fail(ResponseErrorKind::MalformedBlock, where + ": id must be a string");
}

EstimateEntry decode_estimate(const NodeSpec& node, const json& v, bool internal) {
    if (v.is_number()) {
        const double x = v.get<double>();
        if (node.domain.kind == DomainKind::Binary || internal) {
            if (!(x >= 0.0 && x <= 1.0)) {
                fail(ResponseErrorKind::ProbabilityOutOfRange, "probability out of range: " + node.id);
            }
            return Probability{x};
        }
        return ScalarValue{x};
    }
    if (v.is_object() && node.domain.kind == DomainKind::Categorical && !internal) {
        CategoricalDist dist;
        for (const auto& item : v.items()) {
            if (!item.value().is_number()) {
                fail(ResponseErrorKind::MalformedBlock,
                     "estimate for " + node.id + "." + item.key() + " is not a number");
            }
            const double p = item.value().get<double>();
            if (!(p >= 0.0 && p <= 1.0)) {
                fail(ResponseErrorKind::ProbabilityOutOfRange, "probability out of range: " + node.id);
            }
            dist.probs[item.key()] = p;
        }
        return dist;
    }
    fail(ResponseErrorKind::MalformedBlock, "estimate for " + node.id + " has the wrong type");
}

}  // namespace

ParsedResponse parse_response(std::string_view text, const InfluenceDiagram& d,
                              PromptVariant variant) {
    const std::string_view body = last_block(text);
    json doc;
    try {
        doc = json::parse(body.begin(), body.end());
    } catch (const json::parse_error& e) {
        fail(ResponseErrorKind::MalformedBlock, std::string("block is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) fail(ResponseErrorKind::MalformedBlock, "block must be a JSON object");

    ParsedResponse out;
    out.raw_text = std::string(text);

    auto ait = doc.find("answer");
    if (ait == doc.end() || !ait->is_array()) {
        fail(ResponseErrorKind::MalformedBlock, "block needs an \"answer\" array");
    }
    for (std::size_t i = 0; i < ait->size(); ++i) {
        out.declared_answer.push_back(id_string((*ait)[i], "answer[" + std::to_string(i) + "]"));
    }
    if (out.declared_answer.empty()) fail(ResponseErrorKind::EmptyAnswer, "answer list is empty");

    if (variant != PromptVariant::UtilityMax) return out;

    auto cit = doc.find("candidates");
    if (cit == doc.end() || !cit->is_array() || cit->empty()) {
        fail(ResponseErrorKind::MalformedBlock, "block needs a non-empty \"candidates\" array");
    }

    const auto chance = d.chance_ids();
    std::set<std::string> ids;
    for (std::size_t i = 0; i < cit->size(); ++i) {
        const auto& c = (*cit)[i];
        const std::string where = "candidates[" + std::to_string(i) + "]";
        if (!c.is_object()) fail(ResponseErrorKind::MalformedBlock, where + " must be an object");

        CandidateEstimates est;
        auto idit = c.find("id");
        if (idit == c.end()) fail(ResponseErrorKind::MalformedBlock, where + ": missing id");
        est.candidate_id = id_string(*idit, where);
        if (!ids.insert(est.candidate_id).second) {
            fail(ResponseErrorKind::DuplicateCandidate, "duplicate candidate id: " + est.candidate_id);
        }
        if (auto t = c.find("text"); t != c.end() && t->is_string()) est.answer_text = t->get<std::string>();

        auto eit = c.find("estimates");
        if (eit == c.end() || !eit->is_object()) {
            fail(ResponseErrorKind::MalformedBlock, where + ": missing estimates object");
        }
        for (const auto& item : eit->items()) {
            const NodeSpec* node = d.find(item.key());
            if (!node || node->is_decision()) {
                fail(ResponseErrorKind::UnknownNode, "unknown node id: " + item.key());
            }
            auto entry = decode_estimate(*node, item.value(), !d.is_leaf(node->id));
            try {
                (void)node_expectation(*node, entry);
            } catch (const Error& e) {
                fail(ResponseErrorKind::InvalidEstimate, e.what());
            }
            est.per_node.emplace(node->id, std::move(entry));
        }
        for (const auto& id : chance) {
            if (!est.per_node.count(id)) {
                fail(ResponseErrorKind::MissingEstimate,
                     "missing estimate: " + id + " for candidate " + est.candidate_id);
            }
        }

        auto oit = c.find("objective");
        if (oit == c.end() || !oit->is_number()) {
            fail(ResponseErrorKind::MalformedBlock, where + ": missing numeric objective");
        }
        est.objective = oit->get<double>();
        out.candidates.push_back(std::move(est));
    }

    for (const auto& id : out.declared_answer) {
        if (!ids.count(id)) fail(ResponseErrorKind::UnknownAnswerId, "answer id not among candidates: " + id);
    }
    return out;
}

std::string serialize_response(const ParsedResponse& p) {
    nlohmann::ordered_json doc;
    if (!p.candidates.empty()) {
        doc["candidates"] = nlohmann::ordered_json::array();
        for (const auto& c : p.candidates) {
            nlohmann::ordered_json j;
            j["id"] = c.candidate_id;
            if (!c.answer_text.empty()) j["text"] = c.answer_text;
            nlohmann::ordered_json est = nlohmann::ordered_json::object();
            for (const auto& [id, entry] : c.per_node) {
                if (const auto* pr = std::get_if<Probability>(&entry)) {
                    est[id] = pr->p;
                } else if (const auto* s = std::get_if<ScalarValue>(&entry)) {
                    est[id] = s->v;
                } else {
                    nlohmann::ordered_json dist = nlohmann::ordered_json::object();
                    for (const auto& [label, prob] : std::get<CategoricalDist>(entry).probs) {
                        dist[label] = prob;
                    }
                    est[id] = dist;
                }
            }
            j["estimates"] = est;
            if (c.objective) j["objective"] = *c.objective;
            doc["candidates"].push_back(std::move(j));
        }
    }
    doc["answer"] = p.declared_answer;
    return std::string(kOpen) + "\n" + doc.dump() + "\n" + std::string(kFence) + "\n";
}

ConsistencyReport audit_consistency(const ParsedResponse& p, const InfluenceDiagram& d) {
    ConsistencyReport r;
    if (p.candidates.empty()) return r;

    std::vector<CandidateEstimates> scored;
    try {
        for (const auto& c : p.candidates) {
            CandidateEstimates copy = c;
            copy.objective = expected_utility(d, c);
            r.recomputed[c.candidate_id] = *copy.objective;
            scored.push_back(std::move(copy));
        }
    } catch (const Error&) {
        r.recomputed.clear();
        return r;
    }

    const auto selection = select_optimal(scored);
    for (const auto& [id, value] : selection.ranked) r.recomputed_ranking.push_back(id);

    for (const auto& c : p.candidates) {
        const double model = c.objective.value_or(std::nan(""));
        const double exact = r.recomputed.at(c.candidate_id);
        if (!(std::abs(model - exact) <= kDriftTolerance * std::max(1.0, std::abs(exact)))) {
            r.arithmetic_deviations.push_back({c.candidate_id, model, exact});
        }
    }
    std::sort(r.arithmetic_deviations.begin(), r.arithmetic_deviations.end(),
              [](const auto& a, const auto& b) { return a.candidate_id < b.candidate_id; });

    const auto& declared = p.declared_answer;
    r.declared_matches_recomputed_ranking =
        !declared.empty() && declared.size() <= r.recomputed_ranking.size() &&
        std::equal(declared.begin(), declared.end(), r.recomputed_ranking.begin());

    if (!r.arithmetic_deviations.empty()) {
        r.verdict = Verdict::ArithmeticDrift;
    } else if (!r.declared_matches_recomputed_ranking) {
        r.verdict = Verdict::RankingMismatch;
    } else {
        r.verdict = Verdict::Consistent;
    }
    return r;
}

}  // namespace utilimax
