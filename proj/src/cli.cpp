// SPDX-License-Identifier: Apache-2.0
#include "xici/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "xici/ablation.hpp"
#include "xici/errors.hpp"
#include "xici/identify.hpp"
#include "xici/json_io.hpp"
#include "xici/parallel.hpp"
#include "xici/preprocess.hpp"
#include "xici/synth.hpp"
#include "xici/trace_model.hpp"

namespace xici::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kIdentificationFile = "identification.json";
constexpr const char* kGroundTruthFile = "ground_truth.json";

std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string rate_str(const std::optional<double>& v) { return v ? fixed3(*v) : "undefined"; }

/// "0-5,42,44-47" -> {0..5, 42, 44..47}
std::set<int> parse_layer_list(const std::string& text) {
    std::set<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
        if (item.empty()) continue;
        try {
            const auto dash = item.find('-', 1);
            if (dash == std::string::npos) {
                out.insert(std::stoi(item));
            } else {
                const int lo = std::stoi(item.substr(0, dash));
                const int hi = std::stoi(item.substr(dash + 1));
                if (hi < lo) throw ConfigError("empty layer range '" + item + "'");
                for (int l = lo; l <= hi; ++l) out.insert(l);
            }
        } catch (const std::logic_error& e) {
            if (dynamic_cast<const ConfigError*>(&e)) throw;
            throw ConfigError("cannot parse layer list entry '" + item + "'");
        }
    }
    return out;
}

std::vector<std::size_t> parse_caps(const std::string& text) {
    std::vector<std::size_t> caps;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            const long v = std::stol(item);
            if (v < 1) throw ConfigError("--max-experts values must be >= 1");
            caps.push_back(static_cast<std::size_t>(v));
        } catch (const std::logic_error& e) {
            if (dynamic_cast<const ConfigError*>(&e)) throw;
            throw ConfigError("cannot parse --max-experts entry '" + item + "'");
        }
    }
    if (caps.empty()) throw ConfigError("--max-experts needs at least one value");
    return caps;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw DataError("write failure on " + path.string());
}

fs::path identification_path(const fs::path& results) {
    return fs::is_directory(results) ? results / kIdentificationFile : results;
}

std::optional<GroundTruth> load_truth_if_present(const fs::path& path) {
    if (!fs::exists(path)) return std::nullopt;
    const auto j = read_json_file(path);
    try {
        return truth_from_json(j.at("truth"));
    } catch (const json::exception& e) {
        throw DataError("corrupt ground truth " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::string preset = "qwen3-30b";
    std::size_t questions = 50, variants = 12, tokens = 8, planted = 10, generalists = 0;
    double plant_boost = 0.5, generalist_boost = 3.0, noise = 0.0, correct_fraction = 0.5;
    double answer_threshold = 0.1;
    bool overlap = false;
    std::string excluded;
};

int cmd_synth(const SynthArgs& a, std::uint64_t seed, std::ostream& out) {
    SynthConfig cfg;
    const Preset preset = parse_preset(a.preset);
    if (preset == Preset::Custom) throw ConfigError("synth needs a model preset (glm-air or qwen3-30b)");
    cfg.meta = preset == Preset::GlmAir ? glm_air_meta() : qwen3_30b_meta();
    cfg.excluded_layers =
        a.excluded.empty() ? default_excluded_layers(cfg.meta, preset) : parse_layer_list(a.excluded);
    cfg.n_questions = a.questions;
    cfg.n_variants = a.variants;
    cfg.tokens_per_sequence = a.tokens;
    cfg.planted_per_question = a.planted;
    cfg.plant_boost = a.plant_boost;
    cfg.n_generalists = a.generalists;
    cfg.generalist_boost = a.generalist_boost;
    cfg.noise_std = a.noise;
    cfg.correct_fraction = a.correct_fraction;
    cfg.answer_threshold = a.answer_threshold;
    cfg.allow_plant_overlap = a.overlap;
    cfg.seed = seed;

    const auto gen = generate(cfg);
    write_traceset(gen.traces, a.out);
    write_json_file(fs::path(a.out) / kGroundTruthFile,
                    json{{"config", synth_config_to_json(cfg)}, {"truth", truth_to_json(gen.truth)}});
    out << "wrote " << gen.traces.sequences.size() << " sequences (" << cfg.n_questions
        << " questions x " << cfg.n_variants << " variants) to " << a.out << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_classify(const std::string& traces, const std::string& out_dir, std::ostream& out) {
    const auto set = read_traceset(traces);
    const auto outcomes = set.outcomes();
    const auto classes = classify_questions(outcomes);

    std::map<std::string, std::pair<std::size_t, std::size_t>> per_variant; // correct, total
    for (const auto& [key, ok] : outcomes.cells()) {
        auto& v = per_variant[key.second];
        v.first += ok ? 1 : 0;
        ++v.second;
    }
    std::size_t n_correct = 0;
    for (const auto& [key, ok] : outcomes.cells()) n_correct += ok ? 1 : 0;

    out << "Num. Questions   " << outcomes.questions().size() << "\n";
    out << "Num. Variants    " << outcomes.variants().size() << "\n";
    out << "Avg. Acc         "
        << (outcomes.empty() ? std::string("undefined")
                             : fixed3(static_cast<double>(n_correct) / static_cast<double>(outcomes.size())))
        << "\n";
    out << "All Correct      " << classes.all_correct.size() << "\n";
    out << "All Incorrect    " << classes.all_incorrect.size() << "\n";
    out << "Mixed Results    " << classes.mixed.size() << "\n";
    out << "\nper-variant accuracy\n";
    json acc = json::object();
    for (const auto& [v, c] : per_variant) {
        const double a = static_cast<double>(c.first) / static_cast<double>(c.second);
        out << "  " << v << "  " << fixed3(a) << "  (" << c.first << "/" << c.second << ")\n";
        acc[v] = {{"correct", c.first}, {"total", c.second}, {"accuracy", a}};
    }

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        write_json_file(fs::path(out_dir) / "classify.json",
                        json{{"num_questions", outcomes.questions().size()},
                             {"num_variants", outcomes.variants().size()},
                             {"all_correct", classes.all_correct},
                             {"all_incorrect", classes.all_incorrect},
                             {"mixed", classes.mixed},
                             {"per_variant", acc}});
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct AnalysisArgs {
    std::string traces;
    std::string out;
    std::string preset = "custom";
    std::string excluded;
    std::optional<double> tau;
    double p_threshold = 0.05;
    std::string max_experts = "25";
    bool bh = false;
    double top_fraction = 0.01;
    double frequency_threshold = 0.05;
    std::string ranking = "weight";
};

struct TruthScore {
    std::size_t hits = 0, found = 0, planted = 0, exact_questions = 0;
};

TruthScore score_against_truth(const std::vector<IdentificationResult>& results,
                               const GroundTruth& truth) {
    TruthScore s;
    for (const auto& r : results) {
        const auto it = truth.planted.find(r.question_id);
        const std::set<ExpertRef> planted = it == truth.planted.end() ? std::set<ExpertRef>{} : it->second;
        std::set<ExpertRef> found;
        for (const auto& f : r.findings) found.insert(f.expert);
        for (const auto& f : found) s.hits += planted.count(f);
        s.found += found.size();
        s.planted += planted.size();
        s.exact_questions += found == planted ? 1 : 0;
    }
    return s;
}

std::vector<IdentificationResult> truncate_results(std::vector<IdentificationResult> results,
                                                   std::size_t cap) {
    for (auto& r : results)
        if (r.findings.size() > cap) r.findings.resize(cap);
    return results;
}

int cmd_identify(const AnalysisArgs& a, std::ostream& out) {
    if (a.out.empty()) throw ConfigError("identify needs --out");
    const auto set = read_traceset(a.traces);
    const Preset preset = parse_preset(a.preset);

    FilterConfig fcfg;
    fcfg.excluded_layers =
        a.excluded.empty() ? default_excluded_layers(set.meta, preset) : parse_layer_list(a.excluded);
    fcfg.blacklist_top_fraction = a.top_fraction;
    fcfg.blacklist_frequency_threshold = a.frequency_threshold;
    if (a.ranking == "weight") fcfg.ranking = BlacklistRanking::Weight;
    else if (a.ranking == "frequency") fcfg.ranking = BlacklistRanking::SelectionFrequency;
    else throw ConfigError("--blacklist-ranking must be weight or frequency");
    fcfg.validate(set.meta);

    auto caps = parse_caps(a.max_experts);
    IdentifyConfig icfg;
    icfg.p_threshold = a.p_threshold;
    icfg.tau = a.tau ? *a.tau : default_tau(preset);
    icfg.bh_correction = a.bh;
    icfg.max_experts = *std::max_element(caps.begin(), caps.end());
    icfg.validate();

    const auto classes = classify_questions(set.outcomes());
    if (classes.mixed.empty())
        throw NotApplicableError("no mixed questions: every question is all-correct or all-incorrect");

    const RoutingAnalysis analysis(set);
    const auto blacklist = build_blacklist(set, analysis.responsibilities(), fcfg);
    std::vector<IdentificationResult> full;
    for (const auto& q : classes.mixed)
        full.push_back(identify_experts(analysis, q, blacklist, fcfg, icfg));

    const fs::path out_dir(a.out);
    ensure_dir(out_dir);
    write_json_file(out_dir / "blacklist.json", experts_to_json(blacklist));
    const auto truth = load_truth_if_present(fs::path(a.traces) / kGroundTruthFile);

    const std::size_t total_experts = set.meta.num_moe_layers() *
                                      static_cast<std::size_t>(set.meta.experts_per_layer);
    std::ostringstream sweep;
    sweep << "max_experts,questions_with_experts,avg_experts_per_question,fraction_capped";
    if (truth) sweep << ",precision,recall,ablation_success_rate,spurious_gain_rate,rate_difference";
    sweep << "\n";

    json summaries = json::array();
    for (std::size_t cap : caps) {
        const auto results = truncate_results(full, cap);
        std::size_t with = 0, n_found = 0, capped = 0;
        for (const auto& r : results) {
            with += r.findings.empty() ? 0 : 1;
            n_found += r.findings.size();
            capped += r.survivors > cap ? 1 : 0;
        }
        const double avg = with ? static_cast<double>(n_found) / static_cast<double>(with) : 0.0;
        json summary{{"max_experts", cap},
                     {"mixed_questions", classes.mixed.size()},
                     {"all_correct_questions", classes.all_correct.size()},
                     {"all_incorrect_questions", classes.all_incorrect.size()},
                     {"blacklisted_experts", blacklist.size()},
                     {"blacklisted_fraction",
                      static_cast<double>(blacklist.size()) / static_cast<double>(total_experts)},
                     {"questions_with_experts", with},
                     {"avg_experts_per_question", with ? json(avg) : json(nullptr)},
                     {"questions_capped", capped}};
        sweep << cap << "," << with << "," << fixed3(avg) << ","
              << fixed3(static_cast<double>(capped) / static_cast<double>(results.size()));
        if (truth) {
            const auto s = score_against_truth(results, *truth);
            const std::optional<double> precision =
                s.found ? std::optional<double>(static_cast<double>(s.hits) / static_cast<double>(s.found))
                        : std::nullopt;
            const std::optional<double> recall =
                s.planted ? std::optional<double>(static_cast<double>(s.hits) / static_cast<double>(s.planted))
                          : std::nullopt;
            summary["truth"] = {{"precision", precision ? json(*precision) : json(nullptr)},
                                {"recall", recall ? json(*recall) : json(nullptr)},
                                {"exact_questions", s.exact_questions}};
            const auto sim = simulate_ablation(set, *truth, plan_from_results(results), classes.mixed);
            const auto m = ablation_metrics(sim.pre, sim.post);
            sweep << "," << rate_str(precision) << "," << rate_str(recall) << ","
                  << rate_str(m.ablation_success_rate) << "," << rate_str(m.spurious_gain_rate) << ","
                  << rate_str(m.rate_difference);
        }
        sweep << "\n";

        json results_json = json::array();
        for (const auto& r : results) results_json.push_back(result_to_json(r));
        json doc{{"meta", meta_to_json(set.meta)},
                 {"preset", to_string(preset)},
                 {"filter",
                  {{"excluded_layers", fcfg.excluded_layers},
                   {"blacklist_top_fraction", fcfg.blacklist_top_fraction},
                   {"blacklist_frequency_threshold", fcfg.blacklist_frequency_threshold},
                   {"blacklist_ranking", a.ranking}}},
                 {"identify",
                  {{"p_threshold", icfg.p_threshold},
                   {"tau", icfg.tau},
                   {"max_experts", cap},
                   {"bh_correction", icfg.bh_correction}}},
                 {"results", results_json}};
        const fs::path dir = caps.size() == 1 ? out_dir : out_dir / ("cap_" + std::to_string(cap));
        ensure_dir(dir);
        write_json_file(dir / kIdentificationFile, doc);
        write_json_file(dir / "summary.json", summary);
        summaries.push_back(summary);
    }
    if (caps.size() > 1) write_text(out_dir / "sweep.csv", sweep.str());

    const auto& first = summaries.front();
    out << "Num. Q's w/ Inconsistency   " << classes.mixed.size() << "\n";
    out << "Blacklisted experts         " << blacklist.size() << " ("
        << fixed3(first["blacklisted_fraction"].get<double>()) << " of all)\n";
    for (const auto& s : summaries) {
        out << "max " << s["max_experts"].get<std::size_t>() << ":\n";
        out << "  Num. Q's w/ Experts ID'd  " << s["questions_with_experts"].get<std::size_t>() << "\n";
        out << "  Avg. Experts ID'd per Q   "
            << (s["avg_experts_per_question"].is_null()
                    ? std::string("undefined")
                    : fixed3(s["avg_experts_per_question"].get<double>()))
            << "\n";
        if (s.contains("truth")) {
            const auto& t = s["truth"];
            out << "  precision / recall        "
                << (t["precision"].is_null() ? "undefined" : fixed3(t["precision"].get<double>())) << " / "
                << (t["recall"].is_null() ? "undefined" : fixed3(t["recall"].get<double>())) << "\n";
        }
    }
    if (caps.size() > 1) out << "\n" << sweep.str();
    return kOk;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
    std::vector<std::string> traces;
    std::vector<std::string> results;
    std::string ground_truth;
    std::string out;
    std::string plans = "xici,random,shuffle";
    std::string shuffle_mode = "derangement";
};

const char* plan_title(const std::string& src) {
    if (src == "xici") return "XICI";
    if (src == "shuffle") return "Random Question-Shuffling (baseline)";
    return "Random Expert Set of Same Size (baseline)";
}

int cmd_ablate_sim(const AblateArgs& a, std::uint64_t seed, std::ostream& out) {
    if (a.traces.empty()) throw ConfigError("ablate-sim needs --traces");
    if (a.results.size() != a.traces.size())
        throw ConfigError("give one --results per --traces");
    if (!a.ground_truth.empty() && a.traces.size() != 1)
        throw ConfigError("--ground-truth is only valid with a single dataset");
    if (a.out.empty()) throw ConfigError("ablate-sim needs --out");
    std::vector<std::string> sources;
    {
        std::stringstream ss(a.plans);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) {
                if (item != "xici" && item != "random" && item != "shuffle")
                    throw ConfigError("--plan entries must be xici, random or shuffle");
                sources.push_back(item);
            }
    }
    if (sources.empty()) throw ConfigError("--plan needs at least one source");
    ShuffleMode mode;
    if (a.shuffle_mode == "derangement") mode = ShuffleMode::Derangement;
    else if (a.shuffle_mode == "independent") mode = ShuffleMode::Independent;
    else throw ConfigError("--shuffle-mode must be derangement or independent");

    const fs::path out_dir(a.out);
    ensure_dir(out_dir / "plans");

    std::vector<std::string> names;
    std::map<std::string, std::vector<MetricsReport>> by_source;
    json datasets = json::array();
    for (std::size_t d = 0; d < a.traces.size(); ++d) {
        std::string name = fs::path(a.traces[d]).filename().string();
        if (name.empty()) name = fs::path(a.traces[d]).parent_path().filename().string();
        if (std::find(names.begin(), names.end(), name) != names.end()) name += "_" + std::to_string(d);
        names.push_back(name);

        const auto set = read_traceset(a.traces[d]);
        const fs::path truth_path =
            a.ground_truth.empty() ? fs::path(a.traces[d]) / kGroundTruthFile : fs::path(a.ground_truth);
        const auto truth = load_truth_if_present(truth_path);
        if (!truth) throw DataError("simulated ablation needs ground truth at " + truth_path.string());

        const auto doc = read_json_file(identification_path(a.results[d]));
        std::vector<IdentificationResult> results;
        std::set<int> excluded;
        try {
            for (const auto& r : doc.at("results")) results.push_back(result_from_json(r));
            excluded = doc.at("filter").at("excluded_layers").get<std::set<int>>();
            if (meta_from_json(doc.at("meta")) != set.meta)
                throw DataError("identification results were produced for a different topology");
        } catch (const json::exception& e) {
            throw DataError("corrupt identification results: " + std::string(e.what()));
        }
        const auto universe = classify_questions(set.outcomes()).mixed;
        for (const auto& r : results)
            if (!universe.count(r.question_id))
                throw DataError("result for question '" + r.question_id +
                                "' does not match a mixed question of the traces");

        const auto xici_plan = plan_from_results(results);
        json plans_json = json::object();
        for (const auto& src : sources) {
            AblationPlan plan;
            if (src == "xici" || xici_plan.empty()) plan = xici_plan;
            else if (src == "random") plan = baseline_random_same_size(xici_plan, set.meta, excluded, seed);
            else plan = baseline_question_shuffle(xici_plan, seed, mode);

            write_json_file(out_dir / "plans" / (name + "_" + src + ".json"),
                            json{{"source", src}, {"seed", seed}, {"plan", plan_to_json(plan)}});
            const auto sim = simulate_ablation(set, *truth, plan, universe);
            const auto m = ablation_metrics(sim.pre, sim.post);
            by_source[src].push_back(m);
            plans_json[src] = metrics_to_json(m);
        }
        datasets.push_back({{"name", name},
                            {"questions_evaluated", universe.size()},
                            {"questions_with_plan", xici_plan.size()},
                            {"metrics", plans_json}});
    }

    json totals = json::object();
    for (const auto& src : sources) totals[src] = metrics_to_json(pool_metrics(by_source[src]));
    write_json_file(out_dir / "metrics.json",
                    json{{"seed", seed}, {"datasets", datasets}, {"total", totals}});

    // One block per plan source, one column per dataset plus the pooled total.
    auto cell = [](const std::string& s) {
        std::string c = s;
        if (c.size() < 12) c.insert(0, 12 - c.size(), ' ');
        return c;
    };
    out << std::string(28, ' ');
    for (const auto& n : names) out << cell(n);
    out << cell("Total") << "\n";
    for (const auto& src : sources) {
        out << plan_title(src) << "\n";
        const auto total = pool_metrics(by_source[src]);
        auto row = [&](const char* label, auto get) {
            std::string l = std::string("  ") + label;
            l.resize(28, ' ');
            out << l;
            for (const auto& m : by_source[src]) out << cell(get(m));
            out << cell(get(total)) << "\n";
        };
        row("Ablation Success Rate", [](const MetricsReport& m) { return rate_str(m.ablation_success_rate); });
        row("Spurious Gain Rate", [](const MetricsReport& m) { return rate_str(m.spurious_gain_rate); });
        row("Rate Difference", [](const MetricsReport& m) { return rate_str(m.rate_difference); });
        if (src == "xici")
            row("Num Q's All Incorrect",
                [](const MetricsReport& m) { return std::to_string(m.questions_all_incorrect_after); });
    }
    return kOk;
}

// ---------------------------------------------------------------------------

std::string histogram_svg(const std::vector<std::pair<int, std::size_t>>& hist) {
    const int bar = 14, gap = 2, left = 50, top = 20, height = 240, bottom = 40;
    std::size_t peak = 1;
    for (const auto& [l, c] : hist) peak = std::max(peak, c);
    const int width = left + static_cast<int>(hist.size()) * (bar + gap) + 20;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << top + height + bottom << "\" font-family=\"sans-serif\" font-size=\"9\">\n";
    s << "  <line x1=\"" << left << "\" y1=\"" << top + height << "\" x2=\"" << width - 10
      << "\" y2=\"" << top + height << "\" stroke=\"black\"/>\n";
    s << "  <text x=\"" << left - 6 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">" << peak
      << "</text>\n";
    s << "  <text x=\"" << left - 6 << "\" y=\"" << top + height << "\" text-anchor=\"end\">0</text>\n";
    for (std::size_t i = 0; i < hist.size(); ++i) {
        const auto [layer, count] = hist[i];
        const int h = static_cast<int>(static_cast<double>(count) / static_cast<double>(peak) * height + 0.5);
        const int x = left + static_cast<int>(i) * (bar + gap);
        s << "  <rect x=\"" << x << "\" y=\"" << top + height - h << "\" width=\"" << bar
          << "\" height=\"" << h << "\" fill=\"#4878a8\"><title>layer " << layer << ": " << count
          << "</title></rect>\n";
        s << "  <text x=\"" << x + bar / 2 << "\" y=\"" << top + height + 12
          << "\" text-anchor=\"middle\">" << layer << "</text>\n";
    }
    s << "  <text x=\"" << width / 2 << "\" y=\"" << top + height + 30
      << "\" text-anchor=\"middle\">layer (number of times identified)</text>\n";
    s << "</svg>\n";
    return s.str();
}

int cmd_report(const std::string& results_path, const std::string& out_dir, std::ostream& out) {
    if (out_dir.empty()) throw ConfigError("report needs --out");
    const auto doc = read_json_file(identification_path(results_path));
    std::vector<IdentificationResult> results;
    TraceMeta meta;
    try {
        meta = meta_from_json(doc.at("meta"));
        for (const auto& r : doc.at("results")) results.push_back(result_from_json(r));
    } catch (const json::exception& e) {
        throw DataError("corrupt identification results: " + std::string(e.what()));
    }
    const auto hist = layer_distribution_report(results, meta);

    std::ostringstream csv;
    csv << "layer,count\n";
    std::size_t total = 0;
    for (const auto& [l, c] : hist) {
        csv << l << "," << c << "\n";
        total += c;
    }
    ensure_dir(out_dir);
    write_text(fs::path(out_dir) / "layer_histogram.csv", csv.str());
    write_text(fs::path(out_dir) / "layer_histogram.svg", histogram_svg(hist));

    std::size_t with = 0;
    for (const auto& r : results) with += r.findings.empty() ? 0 : 1;
    out << "questions analysed        " << results.size() << "\n";
    out << "questions with experts    " << with << "\n";
    out << "total identifications     " << total << "\n";
    auto sorted = hist;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });
    out << "busiest layers           ";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, sorted.size()); ++i)
        out << " " << sorted[i].first << "(" << sorted[i].second << ")";
    out << "\n";
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cross-variant knowledge-expert localization for MoE routing traces", "xici"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int threads = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "Random seed")->envname("XICI_SEED");
        sub->add_option("--threads", threads, "Worker threads (default: OpenMP runtime)");
    };

    SynthArgs synth;
    auto* s_synth = app.add_subcommand("synth", "Generate a synthetic trace set with planted experts");
    s_synth->add_option("--out", synth.out, "Output trace directory")->required();
    s_synth->add_option("--preset", synth.preset, "Topology: qwen3-30b or glm-air");
    s_synth->add_option("--excluded-layers", synth.excluded, "Layers plants avoid, e.g. 0-5,42-47");
    s_synth->add_option("--questions", synth.questions);
    s_synth->add_option("--variants", synth.variants);
    s_synth->add_option("--tokens", synth.tokens);
    s_synth->add_option("--planted", synth.planted, "Planted experts per question");
    s_synth->add_option("--plant-boost", synth.plant_boost);
    s_synth->add_option("--generalists", synth.generalists);
    s_synth->add_option("--generalist-boost", synth.generalist_boost);
    s_synth->add_option("--noise", synth.noise, "Logit noise standard deviation");
    s_synth->add_option("--correct-fraction", synth.correct_fraction);
    s_synth->add_option("--answer-threshold", synth.answer_threshold);
    s_synth->add_flag("--allow-overlap", synth.overlap, "Let planted sets of questions overlap");
    add_common(s_synth);

    std::string classify_traces, classify_out;
    auto* s_classify = app.add_subcommand("classify", "Count all-correct / all-incorrect / mixed questions");
    s_classify->add_option("--traces", classify_traces)->required();
    s_classify->add_option("--out", classify_out);
    add_common(s_classify);

    AnalysisArgs an;
    auto* s_identify = app.add_subcommand("identify", "Blacklist and per-question expert identification");
    s_identify->add_option("--traces", an.traces)->required();
    s_identify->add_option("--out", an.out)->required();
    s_identify->add_option("--preset", an.preset, "glm-air, qwen3-30b or custom");
    s_identify->add_option("--excluded-layers", an.excluded, "Overrides the preset, e.g. 0-5,42-47");
    s_identify->add_option("--tau", an.tau, "Median-difference threshold (default from preset)");
    s_identify->add_option("--p-threshold", an.p_threshold);
    s_identify->add_option("--max-experts", an.max_experts, "Cap, or comma list for a sweep");
    s_identify->add_flag("--bh", an.bh, "Benjamini-Hochberg cutoff instead of the fixed p threshold");
    s_identify->add_option("--blacklist-top-fraction", an.top_fraction);
    s_identify->add_option("--blacklist-frequency", an.frequency_threshold);
    s_identify->add_option("--blacklist-ranking", an.ranking, "weight or frequency");
    add_common(s_identify);

    AblateArgs ab;
    auto* s_ablate = app.add_subcommand("ablate-sim", "Simulated re-ask under XICI and baseline plans");
    s_ablate->add_option("--traces", ab.traces, "Trace directory (repeatable)")->required();
    s_ablate->add_option("--results", ab.results, "identify output (repeatable)")->required();
    s_ablate->add_option("--ground-truth", ab.ground_truth);
    s_ablate->add_option("--out", ab.out)->required();
    s_ablate->add_option("--plan", ab.plans, "Comma list of xici, random, shuffle");
    s_ablate->add_option("--shuffle-mode", ab.shuffle_mode, "derangement or independent");
    add_common(s_ablate);

    std::string report_results, report_out;
    auto* s_report = app.add_subcommand("report", "Per-layer histogram of identified experts");
    s_report->add_option("--results", report_results)->required();
    s_report->add_option("--out", report_out)->required();
    add_common(s_report);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        set_thread_count(threads);
        if (s_synth->parsed()) return cmd_synth(synth, seed, out);
        if (s_classify->parsed()) return cmd_classify(classify_traces, classify_out, out);
        if (s_identify->parsed()) return cmd_identify(an, out);
        if (s_ablate->parsed()) return cmd_ablate_sim(ab, seed, out);
        if (s_report->parsed()) return cmd_report(report_results, report_out, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const NotApplicableError& e) {
        err << "nothing to do: " << e.what() << "\n";
        return kNotApplicable;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << "\n";
        return kDataError;
    }
    return kConfigError;
}

} // namespace xici::cli
