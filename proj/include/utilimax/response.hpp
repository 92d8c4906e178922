#pragma once

#include "utilimax/diagram.hpp"
#include "utilimax/error.hpp"
#include "utilimax/prompt.hpp"
#include "utilimax/utility.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace utilimax {

struct ParsedResponse {
    std::vector<CandidateEstimates> candidates;
    std::vector<std::string> declared_answer;
    std::string raw_text;
};

/// Distinguishable parse failures, so a run report can count them.
enum class ResponseErrorKind {
    NoBlock,
    MalformedBlock,
    ProbabilityOutOfRange,
    InvalidEstimate,
    UnknownNode,
    MissingEstimate,
    DuplicateCandidate,
    UnknownAnswerId,
    EmptyAnswer,
};

std::string_view to_string(ResponseErrorKind kind);

class ResponseError : public Error {
public:
    ResponseError(ResponseErrorKind kind, const std::string& msg)
        : Error(ErrorCode::Parse, msg), kind_(kind) {}

    ResponseErrorKind kind() const noexcept { return kind_; }

private:
    ResponseErrorKind kind_;
};

enum class Verdict { Consistent, ArithmeticDrift, RankingMismatch, Unparseable };

std::string_view to_string(Verdict v);

struct ArithmeticDeviation {
    std::string candidate_id;
    double model_value = 0.0;
    double recomputed_value = 0.0;
};

struct ConsistencyReport {
    std::map<std::string, double> recomputed;
    /// Candidates by recomputed objective, descending, ties by id.
    std::vector<std::string> recomputed_ranking;
    bool declared_matches_recomputed_ranking = false;
    std::vector<ArithmeticDeviation> arithmetic_deviations;
    Verdict verdict = Verdict::Unparseable;
};

/// Relative tolerance for a model's own O(a) arithmetic.
inline constexpr double kDriftTolerance = 1e-3;

/// Decodes the last fenced `utilimax-json` block of a model response.
/// Throws ResponseError.
ParsedResponse parse_response(std::string_view text, const InfluenceDiagram& d,
                              PromptVariant variant);

/// Renders a response whose block parses back to `p`.
std::string serialize_response(const ParsedResponse& p);

/// Recomputes every objective with the diagram's regime formula and compares
/// the model's arithmetic and declared ranking against it. Never throws for
/// anomalies; they land in the verdict.
ConsistencyReport audit_consistency(const ParsedResponse& p, const InfluenceDiagram& d);

}  // namespace utilimax
