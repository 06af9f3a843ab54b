// SPDX-License-Identifier: Apache-2.0
#include "xici/json_io.hpp"

#include <fstream>

#include "xici/errors.hpp"

namespace xici {

json meta_to_json(const TraceMeta& meta) {
    return {{"model_id", meta.model_id},
            {"num_layers_total", meta.num_layers_total},
            {"moe_layer_indices", meta.moe_layer_indices},
            {"experts_per_layer", meta.experts_per_layer},
            {"top_k", meta.top_k},
            {"gating", to_string(meta.gating)},
            {"has_shared_expert", meta.has_shared_expert}};
}

TraceMeta meta_from_json(const json& j) {
    TraceMeta m;
    m.model_id = j.at("model_id").get<std::string>();
    m.num_layers_total = j.at("num_layers_total").get<int>();
    m.moe_layer_indices = j.at("moe_layer_indices").get<std::vector<int>>();
    m.experts_per_layer = j.at("experts_per_layer").get<int>();
    m.top_k = j.at("top_k").get<int>();
    m.gating = parse_gating_kind(j.at("gating").get<std::string>());
    m.has_shared_expert = j.value("has_shared_expert", false);
    return m;
}

json experts_to_json(const std::set<ExpertRef>& experts) {
    json arr = json::array();
    for (const auto& e : experts) arr.push_back({{"layer", e.layer}, {"expert", e.expert}});
    return arr;
}

std::set<ExpertRef> experts_from_json(const json& j) {
    std::set<ExpertRef> out;
    for (const auto& e : j) out.insert(ExpertRef{e.at("layer").get<int>(), e.at("expert").get<int>()});
    return out;
}

json result_to_json(const IdentificationResult& r) {
    json findings = json::array();
    for (const auto& f : r.findings)
        findings.push_back({{"layer", f.expert.layer},
                            {"expert", f.expert.expert},
                            {"u", f.u_statistic},
                            {"p", f.p_value},
                            {"median_diff", f.median_diff},
                            {"combined_score", f.combined_score},
                            {"rank", f.rank}});
    return {{"question", r.question_id},
            {"correct_variants", r.correct_variants},
            {"wrong_variants", r.wrong_variants},
            {"survivors", r.survivors},
            {"findings", findings}};
}

IdentificationResult result_from_json(const json& j) {
    IdentificationResult r;
    r.question_id = j.at("question").get<std::string>();
    r.correct_variants = j.at("correct_variants").get<std::vector<std::string>>();
    r.wrong_variants = j.at("wrong_variants").get<std::vector<std::string>>();
    r.survivors = j.value("survivors", std::size_t{0});
    for (const auto& f : j.at("findings")) {
        ExpertFinding x;
        x.expert = ExpertRef{f.at("layer").get<int>(), f.at("expert").get<int>()};
        x.u_statistic = f.at("u").get<double>();
        x.p_value = f.at("p").get<double>();
        x.median_diff = f.at("median_diff").get<double>();
        x.combined_score = f.value("combined_score", 0.0);
        x.rank = f.at("rank").get<std::size_t>();
        r.findings.push_back(x);
    }
    return r;
}

json plan_to_json(const AblationPlan& plan) {
    json arr = json::array();
    for (const auto& [q, experts] : plan)
        arr.push_back({{"question", q}, {"experts", experts_to_json(experts)}});
    return arr;
}

AblationPlan plan_from_json(const json& j) {
    AblationPlan plan;
    for (const auto& entry : j)
        plan[entry.at("question").get<std::string>()] = experts_from_json(entry.at("experts"));
    return plan;
}

json metrics_to_json(const MetricsReport& m) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"ablation_success_rate", opt(m.ablation_success_rate)},
            {"spurious_gain_rate", opt(m.spurious_gain_rate)},
            {"rate_difference", opt(m.rate_difference)},
            {"questions_all_incorrect_after", m.questions_all_incorrect_after},
            {"n_originally_correct_pairs", m.n_originally_correct_pairs},
            {"n_originally_wrong_pairs", m.n_originally_wrong_pairs},
            {"n_correct_to_wrong", m.n_correct_to_wrong},
            {"n_wrong_to_correct", m.n_wrong_to_correct},
            {"n_questions", m.n_questions}};
}

json truth_to_json(const GroundTruth& truth) {
    json planted = json::array();
    for (const auto& [q, experts] : truth.planted)
        planted.push_back({{"question", q}, {"experts", experts_to_json(experts)}});
    return {{"answer_threshold", truth.answer_threshold},
            {"generalists", experts_to_json(truth.generalists)},
            {"planted", planted}};
}

GroundTruth truth_from_json(const json& j) {
    GroundTruth t;
    t.answer_threshold = j.at("answer_threshold").get<double>();
    t.generalists = experts_from_json(j.at("generalists"));
    for (const auto& entry : j.at("planted"))
        t.planted[entry.at("question").get<std::string>()] = experts_from_json(entry.at("experts"));
    return t;
}

json synth_config_to_json(const SynthConfig& cfg) {
    return {{"meta", meta_to_json(cfg.meta)},
            {"excluded_layers", cfg.excluded_layers},
            {"n_questions", cfg.n_questions},
            {"n_variants", cfg.n_variants},
            {"tokens_per_sequence", cfg.tokens_per_sequence},
            {"planted_per_question", cfg.planted_per_question},
            {"plant_boost", cfg.plant_boost},
            {"n_generalists", cfg.n_generalists},
            {"generalist_boost", cfg.generalist_boost},
            {"correct_fraction", cfg.correct_fraction},
            {"noise_std", cfg.noise_std},
            {"answer_threshold", cfg.answer_threshold},
            {"allow_plant_overlap", cfg.allow_plant_overlap},
            {"seed", cfg.seed}};
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write failure on " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("corrupt JSON in " + path.string() + ": " + e.what());
    }
}

} // namespace xici
