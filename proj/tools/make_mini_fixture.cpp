// Generates the miniature MovieLens-format dataset, the mock-provider
// fixture and the experiment config under data/mini.
//
//   make_mini_fixture <out_dir>

#include "utilimax/experiment.hpp"
#include "utilimax/oracle.hpp"
#include "utilimax/response.hpp"
#include "utilimax/utility.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

namespace {

using namespace utilimax;
using ojson = nlohmann::ordered_json;

constexpr int kMovies = 240;
constexpr std::int64_t kBaseTime = 978300000;

const char* genres_for(int movie_id) {
    switch (movie_id % 6) {
        case 0: return "Comedy|Romance";
        case 1: return "Comedy";
        case 2: return "Drama|Romance";
        case 3: return "Comedy|Drama|Romance";
        case 4: return "Action|Adventure";
        default: return "Drama|Thriller";
    }
}

bool both_genres(int movie_id) { return movie_id % 6 == 0 || movie_id % 6 == 3; }

std::string movies_dat() {
    std::string out;
    for (int id = 1; id <= kMovies; ++id) {
        std::string title = "Synthetic Feature " + std::to_string(id) + " (" + std::to_string(1950 + id % 50) + ")";
        if (id == 6) title = "Am\xE9lie (2001)";  // Latin-1 e-acute
        if (id == 12) title = "Caf\xE9 Society (1995)";
        out += std::to_string(id) + "::" + title + "::" + genres_for(id) + "\n";
    }
    return out;
}

struct UserPlan {
    int user_id;
    int history;
    int window_positives;  // positive matches placed in positions 101..150
    bool comedy_only_decoys = false;
};

int below(std::mt19937_64& rng, int n) { return static_cast<int>(unit_uniform(rng) * n); }

std::string ratings_dat(std::mt19937_64& rng) {
    const std::vector<UserPlan> users{
        {1, 160, 7},  {2, 170, 6},  {3, 155, 8},  {4, 165, 5},  {5, 180, 9},  {6, 160, 6},  {7, 158, 7},
        {8, 175, 10},
        {9, 149, 12},      // one short of the history threshold
        {10, 200, 4},      // one short of the window threshold
        {11, 150, 5},      // exactly at both thresholds
        {12, 150, 0, true} // high ratings on comedies that are not romances
    };
    std::vector<std::string> lines;
    for (const auto& u : users) {
        std::vector<int> movies(kMovies);
        for (int i = 0; i < kMovies; ++i) movies[i] = i + 1;
        for (int i = kMovies - 1; i > 0; --i) std::swap(movies[i], movies[below(rng, i + 1)]);
        movies.resize(u.history);

        std::vector<int> rating(u.history);
        for (auto& r : rating) r = 1 + below(rng, 5);
        int positives = 0;
        for (int pos = 100; pos < 150 && pos < u.history; ++pos) {
            if (both_genres(movies[pos])) {
                if (positives < u.window_positives) {
                    rating[pos] = 4 + below(rng, 2);
                    ++positives;
                } else {
                    rating[pos] = 1 + below(rng, 3);
                }
            } else if (u.comedy_only_decoys && movies[pos] % 6 == 1) {
                rating[pos] = 5;
            }
        }
        // A thin window gets topped up with unused comedy-romances.
        for (int pos = 100; pos < 150 && pos < u.history && positives < u.window_positives; ++pos) {
            if (both_genres(movies[pos])) continue;
            for (int cand = 6; cand <= kMovies; cand += 3) {
                if (!both_genres(cand) || std::find(movies.begin(), movies.end(), cand) != movies.end()) continue;
                movies[pos] = cand;
                rating[pos] = 4 + below(rng, 2);
                ++positives;
                break;
            }
        }

        for (int pos = 0; pos < u.history; ++pos) {
            // Every tenth pair shares a timestamp so the movie-id tie break matters.
            const int slot = pos % 10 == 1 ? pos - 1 : pos;
            const std::int64_t t = kBaseTime + u.user_id * 100000 + slot * 60;
            lines.push_back(std::to_string(u.user_id) + "::" + std::to_string(movies[pos]) + "::" +
                            std::to_string(rating[pos]) + "::" + std::to_string(t));
        }
    }
    // File order is not timestamp order.
    for (std::size_t i = lines.size() - 1; i > 0; --i) {
        std::swap(lines[i], lines[static_cast<std::size_t>(below(rng, static_cast<int>(i + 1)))]);
    }
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

const char* kConfig = R"({
  "data": {"ratings": "ratings.dat", "movies": "movies.dat", "encoding": "latin1"},
  "provider": {
    "name": "mock",
    "model": "scripted-fixture",
    "fixture": "fixture.json",
    "max_retries": 2,
    "max_parallel": 4,
    "request_timeout_ms": 1000,
    "backoff_initial_ms": 0
  },
  "seed": 2024,
  "users": 5,
  "runs": 3,
  "variants": ["utilitymax", "basic", "harsh"],
  "k": 10,
  "gain": "binary",
  "std_over": "users",
  "out_dir": "out"
}
)";

double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

std::string fenced(const ojson& block) {
    return "Here is my recommendation.\n\n```utilimax-json\n" + block.dump() + "\n```\n";
}

// Model-like estimates: informative about genres and rating, with noise.
std::string utilitymax_response(const UserTask& task, const InfluenceDiagram& d, std::mt19937_64& rng,
                                std::size_t k, bool drift, bool swap_top) {
    std::vector<CandidateEstimates> scored;
    ojson candidates = ojson::array();
    for (std::size_t i = 0; i < task.candidates.size(); ++i) {
        const auto& c = task.candidates[i];
        const int g = static_cast<int>(c.movie_id % 6);
        const bool comedy = g == 0 || g == 1 || g == 3;
        const bool romance = g == 0 || g == 2 || g == 3;
        CandidateEstimates est;
        est.candidate_id = movie_candidate_id(c.movie_id);
        const double p1 = round3(comedy ? 0.6 + 0.39 * unit_uniform(rng) : 0.02 + 0.4 * unit_uniform(rng));
        const double p2 = round3(romance ? 0.6 + 0.39 * unit_uniform(rng) : 0.02 + 0.4 * unit_uniform(rng));
        est.per_node["G1"] = Probability{p1};
        est.per_node["G2"] = Probability{p2};
        ojson e = ojson::object();
        const double guess = std::clamp(c.rating + 2.0 * (unit_uniform(rng) - 0.5), 1.0, 5.0);
        if (i % 4 == 0) {
            est.per_node["S"] = ScalarValue{round3(guess)};
            e["S"] = round3(guess);
        } else {
            CategoricalDist dist;
            std::vector<double> w(5);
            double total = 0.0;
            for (int s = 0; s < 5; ++s) total += (w[s] = std::exp(-std::abs(s + 1 - guess)));
            double assigned = 0.0;
            for (int s = 0; s < 4; ++s) assigned += (w[s] = round3(w[s] / total));
            w[4] = round3(1.0 - assigned);
            ojson dj = ojson::object();
            for (int s = 0; s < 5; ++s) {
                dist.probs[std::to_string(s + 1)] = w[s];
                dj[std::to_string(s + 1)] = w[s];
            }
            est.per_node["S"] = dist;
            e["S"] = dj;
        }
        e["G1"] = p1;
        e["G2"] = p2;
        double objective = expected_utility(d, est);
        if (drift && i == 0) objective *= 1.05;
        est.objective = objective;
        scored.push_back(est);
        candidates.push_back({{"id", est.candidate_id}, {"text", c.title}, {"estimates", e}, {"objective", objective}});
    }
    const auto selection = select_optimal(scored);
    std::vector<std::string> answer;
    for (std::size_t i = 0; i < k && i < selection.ranked.size(); ++i) answer.push_back(selection.ranked[i].first);
    if (swap_top && answer.size() > 1) std::swap(answer[0], answer[1]);
    return fenced({{"candidates", candidates}, {"answer", answer}});
}

// Ranks candidates by a noisy blend of rating and genre fit.
std::string baseline_response(const UserTask& task, std::mt19937_64& rng, std::size_t k, double genre_weight,
                              std::size_t emit, const std::string& intruder) {
    std::vector<std::pair<double, std::string>> order;
    for (const auto& c : task.candidates) {
        const double fit = both_genres(static_cast<int>(c.movie_id)) ? 1.0 : 0.0;
        order.emplace_back(c.rating / 5.0 + genre_weight * fit + 1.2 * unit_uniform(rng), movie_candidate_id(c.movie_id));
    }
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::string> answer;
    for (std::size_t i = 0; i < emit && i < order.size(); ++i) answer.push_back(order[i].second);
    if (!intruder.empty()) answer[k / 2] = intruder;
    return fenced({{"answer", answer}});
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_mini_fixture <out_dir>\n";
        return 2;
    }
    try {
        const std::filesystem::path dir = argv[1];
        std::filesystem::create_directories(dir);
        std::mt19937_64 rng(20240601);
        auto write = [&](const char* name, const std::string& text) {
            std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
            out << text;
            if (!out) throw std::runtime_error(std::string("cannot write ") + name);
        };
        write("movies.dat", movies_dat());
        write("ratings.dat", ratings_dat(rng));
        write("eval_config.json", kConfig);

        const auto cfg = load_experiment_config(dir / "eval_config.json");
        const auto plan = plan_experiment(cfg);

        ojson responses = ojson::object();
        std::set<std::string> done;
        for (std::size_t ui = 0; ui < plan.users.size(); ++ui) {
            const auto user = plan.users[ui];
            const auto& task = plan.tasks.at(user);
            for (auto variant : cfg.variants) {
                std::string fp;
                for (const auto& cell : plan.cells) {
                    if (cell.key.user_id == user && cell.key.variant == variant) {
                        fp = cell.request.fingerprint();
                        break;
                    }
                }
                if (!done.insert(fp).second) continue;
                ojson per_run = ojson::array();
                for (std::size_t run = 0; run < cfg.runs; ++run) {
                    std::string text;
                    if (variant == PromptVariant::UtilityMax) {
                        if (run == 2 && ui == 0) {
                            text = "I would recommend the first few comedies on the list.";
                        } else {
                            text = utilitymax_response(task, plan.diagram, rng, cfg.k, run == 1 && ui == 1,
                                                       run == 1 && ui == 2);
                        }
                    } else {
                        const double weight = variant == PromptVariant::Harsh ? 0.5 : 0.3;
                        const bool short_list = variant == PromptVariant::Harsh && run == 2 && ui == 3;
                        const bool intruder = variant == PromptVariant::Basic && run == 0 && ui == 4;
                        text = baseline_response(task, rng, cfg.k, weight, short_list ? cfg.k - 1 : cfg.k,
                                                 intruder ? "m99999" : "");
                    }
                    if (run == 1 && ui == 3 && variant == PromptVariant::UtilityMax) {
                        per_run.push_back({{"attempts", ojson::array({{{"http_status", 503}}, {{"text", text}}})}});
                    } else {
                        per_run.push_back(text);
                    }
                }
                responses[fp] = per_run;
            }
        }
        write("fixture.json", ojson{{"responses", responses}}.dump(1) + "\n");
        std::cout << "wrote " << plan.cells.size() << "-cell fixture for users";
        for (auto u : plan.users) std::cout << " " << u;
        std::cout << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
