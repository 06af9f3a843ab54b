// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace xici {

enum class GatingKind { SoftmaxRenorm, SigmoidRenorm };

std::string to_string(GatingKind kind);
GatingKind parse_gating_kind(const std::string& s);

/// Model topology. Logits of a sequence are stored per MoE layer in the order
/// of moe_layer_indices; positions into that list are called layer positions.
struct TraceMeta {
    std::string model_id;
    int num_layers_total = 0;
    std::vector<int> moe_layer_indices;
    int experts_per_layer = 0;
    int top_k = 0;
    GatingKind gating = GatingKind::SoftmaxRenorm;
    // Carried for provenance only; a shared expert never enters any statistic.
    bool has_shared_expert = false;

    std::size_t num_moe_layers() const { return moe_layer_indices.size(); }
    /// Position of `layer` in moe_layer_indices, or -1 when it is not an MoE layer.
    int layer_position(int layer) const;
    bool is_moe_layer(int layer) const { return layer_position(layer) >= 0; }
    void validate() const;

    bool operator==(const TraceMeta&) const = default;
};

/// Router logits of one (question, variant) forward pass, layout [moe_layer][token][expert].
struct SequenceTrace {
    std::string question_id;
    std::string variant_id;
    bool correct = false;
    std::size_t token_count = 0;
    std::vector<float> logits;

    std::span<const float> token_logits(const TraceMeta& meta, std::size_t layer_pos,
                                        std::size_t token) const;
    void validate(const TraceMeta& meta) const;

    bool operator==(const SequenceTrace&) const = default;
};

struct ExpertRef {
    int layer = 0;
    int expert = 0;

    auto operator<=>(const ExpertRef&) const = default;
};

using Blacklist = std::set<ExpertRef>;

/// (question_id, variant_id) -> correctness. Missing cells are simply absent.
class OutcomeMatrix {
public:
    using Key = std::pair<std::string, std::string>;

    void set(const std::string& question, const std::string& variant, bool correct);
    const std::map<Key, bool>& cells() const { return cells_; }
    bool contains(const std::string& question, const std::string& variant) const;
    bool at(const std::string& question, const std::string& variant) const;
    std::set<std::string> questions() const;
    std::set<std::string> variants() const;
    std::size_t size() const { return cells_.size(); }
    bool empty() const { return cells_.empty(); }

    bool operator==(const OutcomeMatrix&) const = default;

private:
    std::map<Key, bool> cells_;
};

struct QuestionClasses {
    std::set<std::string> all_correct;
    std::set<std::string> all_incorrect;
    std::set<std::string> mixed;
};

QuestionClasses classify_questions(const OutcomeMatrix& outcomes);

/// A collection of traces sharing one topology; at most one sequence per cell.
struct TraceSet {
    TraceMeta meta;
    std::vector<SequenceTrace> sequences;

    OutcomeMatrix outcomes() const;
    /// Throws DataError on any invariant violation.
    void validate() const;
    /// Index of the sequence for (question, variant), or -1.
    std::ptrdiff_t find(const std::string& question, const std::string& variant) const;

    bool operator==(const TraceSet&) const = default;
};

/// Writes `manifest.json` and `logits.bin` into `dir` (created if needed).
void write_traceset(const TraceSet& set, const std::filesystem::path& dir);
TraceSet read_traceset(const std::filesystem::path& dir);

} // namespace xici
