// SPDX-License-Identifier: Apache-2.0
#include "xici/trace_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "xici/errors.hpp"
#include "xici/json_io.hpp"

namespace xici {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kLogitsName = "logits.bin";
constexpr const char* kFormatTag = "xici-trace";
constexpr int kFormatVersion = 1;

std::string cell_name(const std::string& q, const std::string& v) {
    return "sequence (" + q + ", " + v + ")";
}

std::size_t expected_values(const TraceMeta& meta, std::size_t tokens) {
    return meta.num_moe_layers() * tokens * static_cast<std::size_t>(meta.experts_per_layer);
}

void write_le_floats(std::ofstream& out, std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size_bytes()));
    } else {
        for (float f : values) {
            auto bits = std::bit_cast<std::uint32_t>(f);
            char b[4];
            for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
            out.write(b, 4);
        }
    }
}

void read_le_floats(std::ifstream& in, std::span<float> values) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
    if constexpr (std::endian::native != std::endian::little) {
        for (float& f : values) {
            auto bits = std::bit_cast<std::uint32_t>(f);
            bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) |
                   (bits >> 24);
            f = std::bit_cast<float>(bits);
        }
    }
}

} // namespace

std::string to_string(GatingKind kind) {
    return kind == GatingKind::SoftmaxRenorm ? "softmax-renorm" : "sigmoid-renorm";
}

GatingKind parse_gating_kind(const std::string& s) {
    if (s == "softmax-renorm") return GatingKind::SoftmaxRenorm;
    if (s == "sigmoid-renorm") return GatingKind::SigmoidRenorm;
    throw ConfigError("unknown gating kind '" + s + "'");
}

int TraceMeta::layer_position(int layer) const {
    auto it = std::lower_bound(moe_layer_indices.begin(), moe_layer_indices.end(), layer);
    if (it == moe_layer_indices.end() || *it != layer) return -1;
    return static_cast<int>(it - moe_layer_indices.begin());
}

void TraceMeta::validate() const {
    if (experts_per_layer < 1) throw DataError("experts_per_layer must be >= 1");
    if (top_k < 1 || top_k > experts_per_layer)
        throw DataError("top_k must satisfy 1 <= k <= experts_per_layer");
    for (std::size_t i = 0; i < moe_layer_indices.size(); ++i) {
        int l = moe_layer_indices[i];
        if (l < 0 || l >= num_layers_total)
            throw DataError("MoE layer index " + std::to_string(l) + " outside [0, num_layers_total)");
        if (i > 0 && moe_layer_indices[i - 1] >= l)
            throw DataError("moe_layer_indices must be strictly increasing");
    }
}

std::span<const float> SequenceTrace::token_logits(const TraceMeta& meta, std::size_t layer_pos,
                                                   std::size_t token) const {
    const auto e = static_cast<std::size_t>(meta.experts_per_layer);
    return std::span<const float>(logits).subspan((layer_pos * token_count + token) * e, e);
}

void SequenceTrace::validate(const TraceMeta& meta) const {
    const auto name = cell_name(question_id, variant_id);
    if (token_count < 1) throw DataError(name + ": token_count must be >= 1");
    if (logits.size() != expected_values(meta, token_count))
        throw DataError(name + ": logits length " + std::to_string(logits.size()) +
                        " does not match layers x tokens x experts = " +
                        std::to_string(expected_values(meta, token_count)));
    for (float v : logits)
        if (!std::isfinite(v)) throw DataError(name + ": non-finite logit");
}

void OutcomeMatrix::set(const std::string& question, const std::string& variant, bool correct) {
    cells_[{question, variant}] = correct;
}

bool OutcomeMatrix::contains(const std::string& question, const std::string& variant) const {
    return cells_.count({question, variant}) != 0;
}

bool OutcomeMatrix::at(const std::string& question, const std::string& variant) const {
    auto it = cells_.find({question, variant});
    if (it == cells_.end()) throw DataError("no outcome for " + cell_name(question, variant));
    return it->second;
}

std::set<std::string> OutcomeMatrix::questions() const {
    std::set<std::string> out;
    for (const auto& [key, _] : cells_) out.insert(key.first);
    return out;
}

std::set<std::string> OutcomeMatrix::variants() const {
    std::set<std::string> out;
    for (const auto& [key, _] : cells_) out.insert(key.second);
    return out;
}

QuestionClasses classify_questions(const OutcomeMatrix& outcomes) {
    std::map<std::string, std::pair<bool, bool>> seen; // any correct, any wrong
    for (const auto& [key, ok] : outcomes.cells()) {
        auto& s = seen[key.first];
        (ok ? s.first : s.second) = true;
    }
    QuestionClasses out;
    for (const auto& [q, s] : seen) {
        if (s.first && s.second) out.mixed.insert(q);
        else if (s.first) out.all_correct.insert(q);
        else out.all_incorrect.insert(q);
    }
    return out;
}

OutcomeMatrix TraceSet::outcomes() const {
    OutcomeMatrix m;
    for (const auto& s : sequences) m.set(s.question_id, s.variant_id, s.correct);
    return m;
}

void TraceSet::validate() const {
    meta.validate();
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& s : sequences) {
        if (!keys.insert({s.question_id, s.variant_id}).second)
            throw DataError("duplicate " + cell_name(s.question_id, s.variant_id));
        s.validate(meta);
    }
}

std::ptrdiff_t TraceSet::find(const std::string& question, const std::string& variant) const {
    for (std::size_t i = 0; i < sequences.size(); ++i)
        if (sequences[i].question_id == question && sequences[i].variant_id == variant)
            return static_cast<std::ptrdiff_t>(i);
    return -1;
}

void write_traceset(const TraceSet& set, const fs::path& dir) {
    set.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

    json manifest;
    manifest["format"] = kFormatTag;
    manifest["version"] = kFormatVersion;
    manifest["meta"] = meta_to_json(set.meta);
    manifest["sequences"] = json::array();

    std::ofstream bin(dir / kLogitsName, std::ios::binary | std::ios::trunc);
    if (!bin) throw DataError("cannot open " + (dir / kLogitsName).string() + " for writing");
    std::uint64_t offset = 0;
    for (const auto& s : set.sequences) {
        const std::uint64_t length = s.logits.size() * sizeof(float);
        manifest["sequences"].push_back({{"question_id", s.question_id},
                                         {"variant_id", s.variant_id},
                                         {"correct", s.correct},
                                         {"token_count", s.token_count},
                                         {"offset", offset},
                                         {"length", length}});
        write_le_floats(bin, s.logits);
        offset += length;
    }
    bin.close();
    if (!bin) throw DataError("write failure on " + (dir / kLogitsName).string());
    write_json_file(dir / kManifestName, manifest);
}

TraceSet read_traceset(const fs::path& dir) {
    const json manifest = read_json_file(dir / kManifestName);
    TraceSet set;
    std::uintmax_t bin_size = 0;
    try {
        if (manifest.at("format").get<std::string>() != kFormatTag)
            throw DataError("manifest format tag is not '" + std::string(kFormatTag) + "'");
        if (manifest.at("version").get<int>() != kFormatVersion)
            throw DataError("unsupported manifest version");
        set.meta = meta_from_json(manifest.at("meta"));
        set.meta.validate();

        const fs::path bin_path = dir / kLogitsName;
        std::error_code ec;
        bin_size = fs::file_size(bin_path, ec);
        if (ec) throw DataError("cannot stat " + bin_path.string() + ": " + ec.message());
        std::ifstream bin(bin_path, std::ios::binary);
        if (!bin) throw DataError("cannot open " + bin_path.string());

        std::set<std::pair<std::string, std::string>> keys;
        std::uint64_t expected_offset = 0;
        for (const auto& rec : manifest.at("sequences")) {
            SequenceTrace s;
            s.question_id = rec.at("question_id").get<std::string>();
            s.variant_id = rec.at("variant_id").get<std::string>();
            s.correct = rec.at("correct").get<bool>();
            s.token_count = rec.at("token_count").get<std::size_t>();
            const auto offset = rec.at("offset").get<std::uint64_t>();
            const auto length = rec.at("length").get<std::uint64_t>();
            const auto name = cell_name(s.question_id, s.variant_id);

            if (!keys.insert({s.question_id, s.variant_id}).second)
                throw DataError("duplicate " + name + " in manifest");
            if (s.token_count < 1) throw DataError(name + ": token_count must be >= 1");
            const std::size_t n = expected_values(set.meta, s.token_count);
            if (length != n * sizeof(float))
                throw DataError(name + ": byte length " + std::to_string(length) +
                                " inconsistent with topology (expected " +
                                std::to_string(n * sizeof(float)) + ")");
            if (offset != expected_offset)
                throw DataError(name + ": byte offset " + std::to_string(offset) +
                                " breaks contiguous layout (expected " +
                                std::to_string(expected_offset) + ")");
            if (offset + length > bin_size)
                throw DataError(name + ": logits.bin truncated (needs " +
                                std::to_string(offset + length) + " bytes, file has " +
                                std::to_string(bin_size) + ")");
            s.logits.resize(n);
            read_le_floats(bin, s.logits);
            if (!bin) throw DataError(name + ": read failure");
            for (float v : s.logits)
                if (!std::isfinite(v)) throw DataError(name + ": non-finite logit");
            expected_offset += length;
            set.sequences.push_back(std::move(s));
        }
        if (expected_offset != bin_size)
            throw DataError("logits.bin has " + std::to_string(bin_size - expected_offset) +
                            " trailing bytes not described by the manifest");
    } catch (const json::exception& e) {
        throw DataError("corrupt manifest in " + dir.string() + ": " + e.what());
    }
    return set;
}

} // namespace xici
