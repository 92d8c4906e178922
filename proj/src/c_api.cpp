#include "utilimax/utilimax.h"

#include "json_util.hpp"
#include "utilimax/diagram.hpp"
#include "utilimax/error.hpp"
#include "utilimax/experiment.hpp"
#include "utilimax/oracle.hpp"
#include "utilimax/prompt.hpp"
#include "utilimax/response.hpp"
#include "utilimax/utility.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

struct um_diagram {
    utilimax::InfluenceDiagram diagram;
};

namespace {

using utilimax::ErrorCode;

thread_local std::string g_last_error;

um_status status_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return UM_ERR_INVALID_ARGUMENT;
        case ErrorCode::Io: return UM_ERR_IO;
        case ErrorCode::Parse: return UM_ERR_PARSE;
        case ErrorCode::Validation: return UM_ERR_VALIDATION;
        case ErrorCode::Intractable: return UM_ERR_INTRACTABLE;
        case ErrorCode::JointTooLarge: return UM_ERR_JOINT_TOO_LARGE;
        case ErrorCode::Estimate: return UM_ERR_ESTIMATE;
        case ErrorCode::Config: return UM_ERR_CONFIG;
        case ErrorCode::Provider: return UM_ERR_PROVIDER;
        case ErrorCode::Data: return UM_ERR_DATA;
    }
    return UM_ERR_INTERNAL;
}

um_status fail(um_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

// Runs `fn`, translating exceptions into a status and the thread's last error.
template <typename Fn>
um_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        fn();
        return UM_OK;
    } catch (const utilimax::Error& e) {
        return fail(status_of(e.code()), e.what());
    } catch (const nlohmann::json::exception& e) {
        return fail(UM_ERR_PARSE, e.what());
    } catch (const std::bad_alloc&) {
        return fail(UM_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(UM_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(UM_ERR_INTERNAL, "unknown error");
    }
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void need(const void* p, const char* name) {
    if (!p) throw utilimax::Error(ErrorCode::InvalidArgument, std::string(name) + " is NULL");
}

utilimax::CandidateEstimates decode_estimates(const utilimax::InfluenceDiagram& d, const char* text) {
    using namespace utilimax;
    const auto doc = detail::parse_json_text(text, ErrorCode::Estimate);
    detail::require_object(doc, "estimates", ErrorCode::Estimate);
    CandidateEstimates est;
    est.candidate_id = "candidate";
    for (const auto& item : doc.items()) {
        const NodeSpec* node = d.find(item.key());
        if (!node || node->is_decision()) throw Error(ErrorCode::Estimate, "unknown node id: " + item.key());
        const auto& v = item.value();
        if (v.is_number()) {
            const double x = v.get<double>();
            if (node->domain.kind == DomainKind::Binary || !d.is_leaf(node->id)) {
                est.per_node[node->id] = Probability{x};
            } else {
                est.per_node[node->id] = ScalarValue{x};
            }
        } else if (v.is_object()) {
            CategoricalDist dist;
            for (const auto& p : v.items()) {
                if (!p.value().is_number()) throw Error(ErrorCode::Estimate, "non-numeric probability: " + node->id);
                dist.probs[p.key()] = p.value().get<double>();
            }
            est.per_node[node->id] = dist;
        } else {
            throw Error(ErrorCode::Estimate, "estimate for " + node->id + " has the wrong type");
        }
    }
    return est;
}

}  // namespace

extern "C" {

const char* um_last_error(void) { return g_last_error.c_str(); }

const char* um_status_name(um_status status) {
    switch (status) {
        case UM_OK: return "ok";
        case UM_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case UM_ERR_IO: return "io";
        case UM_ERR_PARSE: return "parse";
        case UM_ERR_VALIDATION: return "validation";
        case UM_ERR_INTRACTABLE: return "intractable";
        case UM_ERR_JOINT_TOO_LARGE: return "joint_too_large";
        case UM_ERR_ESTIMATE: return "estimate";
        case UM_ERR_CONFIG: return "config";
        case UM_ERR_PROVIDER: return "provider";
        case UM_ERR_DATA: return "data";
        case UM_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

void um_string_free(char* s) { std::free(s); }

um_status um_diagram_parse(const char* text, um_diagram** out) {
    return guarded([&] {
        need(text, "text");
        need(out, "out");
        *out = new um_diagram{utilimax::parse_diagram_spec(text)};
    });
}

um_status um_diagram_load(const char* path, um_diagram** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new um_diagram{utilimax::load_diagram_file(path)};
    });
}

void um_diagram_free(um_diagram* d) { delete d; }

um_status um_diagram_validate(const um_diagram* d, int* ok, char** report) {
    return guarded([&] {
        need(d, "diagram");
        need(ok, "ok");
        const auto r = utilimax::validate_structure(d->diagram);
        std::string text;
        for (const auto& v : r.violations) text += v.rule + ": " + v.message + "\n";
        *ok = r.ok() ? 1 : 0;
        if (report) *report = dup(text);
    });
}

um_status um_diagram_classify(const um_diagram* d, char** tag, char** detail) {
    return guarded([&] {
        need(d, "diagram");
        const auto c = utilimax::classify_tractability(d->diagram);
        char* t = dup(std::string(utilimax::to_string(c.tag)));
        if (detail) {
            try {
                *detail = dup(c.detail);
            } catch (...) {
                std::free(t);
                throw;
            }
        }
        if (tag) {
            *tag = t;
        } else {
            std::free(t);
        }
    });
}

um_status um_diagram_fingerprint(const um_diagram* d, char** out) {
    return guarded([&] {
        need(d, "diagram");
        need(out, "out");
        *out = dup(utilimax::diagram_fingerprint(d->diagram));
    });
}

um_status um_diagram_to_dot(const um_diagram* d, char** out) {
    return guarded([&] {
        need(d, "diagram");
        need(out, "out");
        *out = dup(utilimax::to_dot(d->diagram));
    });
}

um_status um_diagram_objective(const um_diagram* d, char** out) {
    return guarded([&] {
        need(d, "diagram");
        need(out, "out");
        *out = dup(utilimax::render_objective(d->diagram));
    });
}

um_status um_compile_prompt(const um_diagram* d, const char* task_json, const char* variant, char** prompt,
                            char** fingerprint) {
    return guarded([&] {
        need(task_json, "task_json");
        need(variant, "variant");
        need(prompt, "prompt");
        const auto v = utilimax::parse_variant(variant);
        if (!v) throw utilimax::Error(ErrorCode::InvalidArgument, std::string("unknown variant: ") + variant);
        const auto task = utilimax::parse_task_spec(task_json);
        utilimax::PromptArtifact artifact;
        if (*v == utilimax::PromptVariant::UtilityMax) {
            need(d, "diagram");
            artifact = utilimax::compile_utilitymax_prompt(task, d->diagram);
        } else {
            artifact = utilimax::compile_baseline_prompt(task, *v);
        }
        char* text = dup(artifact.text);
        if (fingerprint) {
            try {
                *fingerprint = dup(artifact.fingerprint());
            } catch (...) {
                std::free(text);
                throw;
            }
        }
        *prompt = text;
    });
}

um_status um_oracle_check(const um_diagram* d, uint64_t trials, uint64_t seed, double* max_abs_deviation) {
    return guarded([&] {
        need(d, "diagram");
        need(max_abs_deviation, "max_abs_deviation");
        if (trials == 0) throw utilimax::Error(ErrorCode::InvalidArgument, "trials must be positive");
        *max_abs_deviation = utilimax::oracle_check(d->diagram, trials, seed).max_abs_deviation;
    });
}

um_status um_expected_utility(const um_diagram* d, const char* estimates_json, double* out) {
    return guarded([&] {
        need(d, "diagram");
        need(estimates_json, "estimates_json");
        need(out, "out");
        *out = utilimax::expected_utility(d->diagram, decode_estimates(d->diagram, estimates_json));
    });
}

um_status um_audit_response(const um_diagram* d, const char* response_text, char** audit_json) {
    return guarded([&] {
        need(d, "diagram");
        need(response_text, "response_text");
        need(audit_json, "audit_json");
        nlohmann::ordered_json j;
        try {
            const auto parsed =
                utilimax::parse_response(response_text, d->diagram, utilimax::PromptVariant::UtilityMax);
            const auto audit = utilimax::audit_consistency(parsed, d->diagram);
            j["verdict"] = std::string(utilimax::to_string(audit.verdict));
            j["recomputed"] = audit.recomputed;
            j["recomputed_ranking"] = audit.recomputed_ranking;
            j["declared_answer"] = parsed.declared_answer;
            j["declared_matches_recomputed_ranking"] = audit.declared_matches_recomputed_ranking;
            j["arithmetic_deviations"] = nlohmann::ordered_json::array();
            for (const auto& dev : audit.arithmetic_deviations) {
                j["arithmetic_deviations"].push_back(
                    {{"candidate", dev.candidate_id}, {"model", dev.model_value}, {"recomputed", dev.recomputed_value}});
            }
        } catch (const utilimax::ResponseError& e) {
            j["verdict"] = std::string(utilimax::to_string(utilimax::Verdict::Unparseable));
            j["error_kind"] = std::string(utilimax::to_string(e.kind()));
            j["error"] = e.what();
        }
        *audit_json = dup(j.dump(2) + "\n");
    });
}

um_status um_eval_run(const char* config_path, const char* out_dir_override, char** tables) {
    return guarded([&] {
        need(config_path, "config_path");
        auto cfg = utilimax::load_experiment_config(config_path);
        if (out_dir_override) cfg.out_dir = out_dir_override;
        const auto report = utilimax::run_experiment(cfg);
        utilimax::write_experiment_outputs(report, cfg.out_dir);
        if (tables) *tables = dup(utilimax::render_report_tables(report));
    });
}

um_status um_report_render(const char* report_path, char** tables) {
    return guarded([&] {
        need(report_path, "report_path");
        need(tables, "tables");
        *tables = dup(utilimax::render_report_tables(utilimax::load_report(report_path)));
    });
}

}  // extern "C"
