#include "utilimax/prompt.hpp"

#include "json_util.hpp"
#include "utilimax/error.hpp"
#include "utilimax/hash.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

namespace utilimax {

using detail::json;

std::string_view to_string(PromptVariant v) {
    switch (v) {
        case PromptVariant::UtilityMax: return "utilitymax";
        case PromptVariant::Basic: return "basic";
        case PromptVariant::Harsh: return "harsh";
    }
    return "?";
}

std::optional<PromptVariant> parse_variant(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "utilitymax") return PromptVariant::UtilityMax;
    if (lower == "basic") return PromptVariant::Basic;
    if (lower == "harsh") return PromptVariant::Harsh;
    return std::nullopt;
}

std::string PromptArtifact::fingerprint() const { return sha256_hex(text); }

// ---------------------------------------------------------------------------
// Task files

TaskSpec parse_task_spec(std::string_view text) {
    constexpr ErrorCode kParse = ErrorCode::Parse;
    const json doc = detail::parse_json_text(text);
    detail::require_object(doc, "task", kParse);
    detail::reject_unknown_keys(doc,
                                {"description", "context", "candidate_instruction", "candidates",
                                 "preference", "preference_scope", "top_k"},
                                "task", kParse);
    TaskSpec t;
    t.description = detail::get_string(doc, "description", "task", kParse);
    if (doc.contains("context")) t.context = detail::get_string(doc, "context", "task", kParse);
    t.candidate_instruction = detail::get_string_or(doc, "candidate_instruction", "", "task", kParse);
    t.preference = detail::get_string_or(doc, "preference", "", "task", kParse);
    t.preference_scope =
        detail::get_string_or(doc, "preference_scope", t.preference_scope, "task", kParse);
    if (doc.contains("top_k")) {
        const auto k = detail::get_integer(doc, "top_k", "task", kParse);
        if (k < 0) throw Error(kParse, "task.top_k: must be non-negative");
        t.top_k = static_cast<std::size_t>(k);
    }
    if (auto it = doc.find("candidates"); it != doc.end()) {
        if (!it->is_array()) throw Error(kParse, "task.candidates: expected an array");
        std::set<std::string> seen;
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& c = (*it)[i];
            const std::string where = "task.candidates[" + std::to_string(i) + "]";
            detail::require_object(c, where, kParse);
            detail::reject_unknown_keys(c, {"id", "text"}, where, kParse);
            CandidateOption opt{detail::get_string(c, "id", where, kParse),
                                detail::get_string_or(c, "text", "", where, kParse)};
            if (!seen.insert(opt.id).second) {
                throw Error(kParse, where + ": duplicate candidate id '" + opt.id + "'");
            }
            t.candidates.push_back(std::move(opt));
        }
    }
    return t;
}

TaskSpec load_task_file(const std::filesystem::path& path) {
    return parse_task_spec(detail::read_text_file(path));
}

// ---------------------------------------------------------------------------
// Rendering helpers

namespace {

std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string join_list(const std::vector<std::string>& items) {
    if (items.empty()) return {};
    if (items.size() == 1) return items.front();
    if (items.size() == 2) return items[0] + " and " + items[1];
    std::string out;
    for (std::size_t i = 0; i + 1 < items.size(); ++i) out += items[i] + ", ";
    return out + "and " + items.back();
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

/// "X1=1, X3=1, A=a" for gated nodes, "A=a" otherwise.
std::string conditioning(const std::vector<std::string>& chance_parents) {
    std::string out;
    for (const auto& p : chance_parents) out += p + "=1, ";
    return out + "A=a";
}

bool ends_with_terminal_punct(const std::string& s) {
    return !s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?');
}

std::string task_statement(const TaskSpec& task) {
    std::string s = "I want you to solve the following task: " + task.description;
    if (!ends_with_terminal_punct(task.description)) s += ".";
    return s;
}

std::string candidate_section(const TaskSpec& task) {
    if (task.candidate_instruction.empty() && task.candidates.empty()) return {};
    std::string s = task.candidate_instruction;
    if (!task.candidates.empty()) {
        if (!s.empty()) s += "\n\n";
        for (std::size_t i = 0; i < task.candidates.size(); ++i) {
            const auto& c = task.candidates[i];
            if (i) s += "\n";
            s += "- " + c.id;
            if (!c.text.empty()) s += ": " + c.text;
        }
    }
    return s;
}

/// Paragraphs shared verbatim by all three variants, in order.
std::vector<std::string> shared_preamble(const TaskSpec& task) {
    std::vector<std::string> parts{task_statement(task)};
    if (task.context && !task.context->empty()) parts.push_back(*task.context);
    if (auto pool = candidate_section(task); !pool.empty()) parts.push_back(std::move(pool));
    return parts;
}

const char* const kBlockOpen = "```utilimax-json";

std::string response_format_utilitymax(const TaskSpec& task, const InfluenceDiagram& d,
                                       const std::vector<std::string>& chance) {
    std::vector<std::string> fields;
    for (const auto& id : chance) {
        fields.push_back("\"" + id + "\": <" + render_objective_term(d, id) + ">");
    }
    std::ostringstream os;
    os << "Finish your response with a fenced code block tagged utilimax-json in exactly this "
          "form:\n\n"
       << kBlockOpen << "\n"
       << "{\"candidates\": [{\"id\": \"<candidate id>\", \"estimates\": {" << join(fields, ", ")
       << "}, \"objective\": <O(a)>}], \"answer\": [\"<candidate id>\""
       << (task.top_k > 1 ? ", ..." : "") << "]}\n"
       << "```\n\n"
       << "Include one entry in \"candidates\" for every candidate answer you evaluated. Report "
          "every estimate and O(a) as a plain number. ";
    if (task.top_k > 0) {
        os << "List the " << task.top_k
           << " candidate ids with the highest O(a) in \"answer\", in descending order of O(a).";
    } else {
        os << "Put the id of a* in \"answer\".";
    }
    return os.str();
}

std::string response_format_baseline(const TaskSpec& task) {
    std::ostringstream os;
    os << "Finish your response with a fenced code block tagged utilimax-json in exactly this "
          "form:\n\n"
       << kBlockOpen << "\n"
       << "{\"answer\": [\"<candidate id>\"" << (task.top_k > 1 ? ", ..." : "") << "]}\n"
       << "```\n\n";
    if (task.top_k > 0) {
        os << "List your " << task.top_k << " chosen candidate ids in \"answer\", best first.";
    } else {
        os << "Put the id of your chosen answer in \"answer\".";
    }
    return os.str();
}

std::string join_paragraphs(const std::vector<std::string>& parts) {
    return join(parts, "\n\n") + "\n";
}

}  // namespace

std::string render_objective_term(const InfluenceDiagram& d, const std::string& node_id) {
    const auto& node = d.at(node_id);
    const auto cond = conditioning(d.chance_parents(node_id));
    if (node.domain.kind == DomainKind::Binary && node.factor.form != FactorForm::ScoreMap) {
        return "P(" + node_id + "=1 | " + cond + ")";
    }
    if (node.factor.form == FactorForm::ScoreMap) {
        return "E[f(" + node_id + ") | " + cond + "]";
    }
    return "E[" + node_id + " | " + cond + "]";
}

std::string render_objective(const InfluenceDiagram& d) {
    std::vector<std::string> terms;
    for (const auto& id : declaration_order(d)) {
        if (id == d.decision_id()) continue;
        terms.push_back(render_objective_term(d, id));
    }
    return "O(a) = " + join(terms, " x ");
}

std::string render_variable_block(const NodeSpec& node, const std::vector<NodeSpec>& parents) {
    std::vector<std::string> gate_ids;
    for (const auto& p : parents) {
        if (!p.is_decision()) gate_ids.push_back(p.id);
    }

    std::string what = node.description;
    if (node.domain.kind == DomainKind::Binary && what.rfind("whether ", 0) != 0) {
        what = "whether " + what;
    }

    std::string s = "Let " + node.id + " | " + conditioning(gate_ids) +
                    " be a random variable representing " + what;
    if (gate_ids.empty()) {
        s += " given answer a.";
    } else {
        std::vector<std::string> conds;
        for (const auto& g : gate_ids) conds.push_back(g + " = 1");
        s += " given that " + join(conds, " and ") + " and given answer a.";
    }

    if (node.domain.kind == DomainKind::Categorical) {
        bool numeric_labels = node.domain.labels.size() == node.domain.scores.size();
        for (std::size_t i = 0; numeric_labels && i < node.domain.labels.size(); ++i) {
            numeric_labels = node.domain.labels[i] == format_number(node.domain.scores[i]);
        }
        std::vector<std::string> items;
        if (numeric_labels) {
            for (double sc : node.domain.scores) items.push_back(format_number(sc));
            s += " " + node.id + " takes one of the scores " + join(items, ", ") + ".";
        } else {
            for (std::size_t i = 0; i < node.domain.labels.size(); ++i) {
                const double sc = i < node.domain.scores.size() ? node.domain.scores[i] : 0.0;
                items.push_back(node.domain.labels[i] + " (score " + format_number(sc) + ")");
            }
            s += " " + node.id + " takes one of the values " + join(items, ", ") + ".";
        }
    }
    return s;
}

PromptArtifact compile_utilitymax_prompt(const TaskSpec& task, const InfluenceDiagram& d) {
    if (task.description.empty()) {
        throw Error(ErrorCode::InvalidArgument, "empty task description");
    }
    const auto cls = classify_tractability(d);
    if (cls.tag == StructureTag::Intractable) {
        throw Error(ErrorCode::Intractable, "cannot compile an intractable diagram: " + cls.detail);
    }

    std::vector<std::string> chance;
    for (const auto& id : declaration_order(d)) {
        if (id != d.decision_id()) chance.push_back(id);
    }

    auto parts = shared_preamble(task);
    parts.push_back(
        "Formally, let K represent your knowledge. This includes all your internal knowledge "
        "stored through your parameters as well as any external knowledge provided in this prompt "
        "or chat history.");
    parts.push_back(
        "Let P(A | K) represent your probability distribution over answers given K. Let a be an "
        "answer in A.");
    for (const auto& id : chance) {
        std::vector<NodeSpec> parents;
        for (const auto& p : d.chance_parents(id)) parents.push_back(d.at(p));
        parts.push_back(render_variable_block(d.at(id), parents));
    }

    const auto objective = render_objective(d);
    std::vector<std::string> terms;
    for (const auto& id : chance) terms.push_back(render_objective_term(d, id));

    std::ostringstream steps;
    steps << "Your task is to use your domain expertise to find the optimal answer a* that "
             "maximises "
          << objective << ". To do this you must:\n\n"
          << "1. Generate a set of candidate answers.\n"
          << "2. For each candidate answer, estimate " << join_list(terms)
          << " individually using your internal knowledge then compute O(a) for that "
             "candidate.\n";
    if (task.top_k > 0) {
        steps << "3. Return the " << task.top_k
              << " answers with the highest O(a), in descending order of O(a).";
    } else {
        steps << "3. Return the answer a* that maximises O.";
    }
    parts.push_back(steps.str());
    parts.push_back(response_format_utilitymax(task, d, chance));

    PromptArtifact out;
    out.variant = PromptVariant::UtilityMax;
    out.text = join_paragraphs(parts);
    out.diagram_fingerprint = diagram_fingerprint(d);
    out.objective_rendering = objective;
    return out;
}

PromptArtifact compile_baseline_prompt(const TaskSpec& task, PromptVariant variant) {
    if (variant == PromptVariant::UtilityMax) {
        throw Error(ErrorCode::InvalidArgument, "baseline variant must be basic or harsh");
    }
    auto parts = shared_preamble(task);
    if (!task.preference.empty()) {
        if (variant == PromptVariant::Basic) {
            parts.push_back("The user is in the mood for " + task.preference + ".");
        } else {
            parts.push_back("The user is only interested in " + task.preference +
                            ". You should not suggest anything outside of " +
                            task.preference_scope + ".");
        }
    }
    parts.push_back(response_format_baseline(task));

    PromptArtifact out;
    out.variant = variant;
    out.text = join_paragraphs(parts);
    return out;
}

}  // namespace utilimax
