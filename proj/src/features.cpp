#include "bugseg/features.hpp"

#include "bugseg/csv.hpp"
#include "bugseg/error.hpp"
#include "bugseg/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

namespace bugseg {

std::vector<double> SegmentFeatures::concatenated() const {
    std::vector<double> out;
    out.reserve(size());
    out.insert(out.end(), visual.begin(), visual.end());
    out.insert(out.end(), text.begin(), text.end());
    return out;
}

FeatureSet assemble_features(const VisualFeatures& visual, std::span<const TextEmbedding> texts,
                             std::span<const Segment> segments) {
    std::map<SegmentKey, const std::vector<double>*> visual_by_key;
    for (std::size_t i = 0; i < visual.keys.size(); ++i) visual_by_key.emplace(visual.keys[i], &visual.weights[i]);
    std::map<SegmentKey, const TextVector*> text_by_key;
    for (const auto& t : texts) text_by_key.emplace(t.segment(), &t.vector);

    FeatureSet out;
    out.k = visual.k;
    for (const auto& s : segments) {
        if (!s.label) continue;
        const auto key = key_of(s);
        auto v = visual_by_key.find(key);
        auto t = text_by_key.find(key);
        if (v == visual_by_key.end() || t == text_by_key.end()) {
            std::string missing = v == visual_by_key.end() ? "visual features" : "";
            if (t == text_by_key.end()) missing += missing.empty() ? "text embedding" : " and text embedding";
            out.warnings.push_back("segment " + to_string(key) + " excluded: missing " + missing);
            continue;
        }
        SegmentFeatures row;
        row.video_id = s.video_id;
        row.segment_index = s.index;
        row.visual = *v->second;
        row.text.assign(t->second->begin(), t->second->end());
        row.label = *s.label;
        out.rows.push_back(std::move(row));
    }
    return out;
}

TextVector fallback_text_encode(std::string_view text, std::uint64_t seed) {
    TextVector v{};
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        const std::uint64_t h1 = splitmix64(fnv1a64(token) ^ splitmix64(seed));
        const std::uint64_t h2 = splitmix64(h1);
        const std::size_t b1 = h1 % kTextDim;
        const std::size_t b2 = (b1 + 1 + (h2 % (kTextDim - 1))) % kTextDim;
        v[b1] += (h1 >> 63) ? 1.0 : -1.0;
        v[b2] += (h2 >> 63) ? 1.0 : -1.0;
        token.clear();
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    flush();

    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    if (n2 > 0.0) {
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& x : v) x *= inv;
    }
    return v;
}

Standardizer Standardizer::fit(std::span<const SegmentFeatures> rows) {
    if (rows.empty()) throw ParameterError("cannot fit a standardizer on zero rows");
    Standardizer s;
    s.k_ = rows.front().visual.size();
    const std::size_t dim = rows.front().size();
    s.mean_.assign(dim, 0.0);
    s.scale_.assign(dim, 0.0);
    for (const auto& r : rows) {
        if (r.size() != dim) throw DimensionError("feature rows have inconsistent widths");
        const auto x = r.concatenated();
        for (std::size_t j = 0; j < dim; ++j) s.mean_[j] += x[j];
    }
    const auto n = static_cast<double>(rows.size());
    for (auto& m : s.mean_) m /= n;
    for (const auto& r : rows) {
        const auto x = r.concatenated();
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = x[j] - s.mean_[j];
            s.scale_[j] += d * d;
        }
    }
    for (auto& sc : s.scale_) {
        sc = std::sqrt(sc / n);
        if (!(sc > 0.0)) sc = 1.0;
    }
    return s;
}

SegmentFeatures Standardizer::apply(const SegmentFeatures& row) const {
    if (row.visual.size() != k_ || row.size() != mean_.size()) throw DimensionError("feature row width does not match standardizer");
    SegmentFeatures out = row;
    for (std::size_t j = 0; j < out.visual.size(); ++j) out.visual[j] = (row.visual[j] - mean_[j]) / scale_[j];
    for (std::size_t j = 0; j < out.text.size(); ++j) {
        out.text[j] = (row.text[j] - mean_[k_ + j]) / scale_[k_ + j];
    }
    return out;
}

std::vector<SegmentFeatures> Standardizer::apply(std::span<const SegmentFeatures> rows) const {
    std::vector<SegmentFeatures> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(apply(r));
    return out;
}

nlohmann::json Standardizer::to_json() const {
    return {{"k", k_}, {"mean", mean_}, {"scale", scale_}};
}

Standardizer Standardizer::from_json(const nlohmann::json& j) {
    Standardizer s;
    try {
        s.k_ = j.at("k").get<std::size_t>();
        s.mean_ = j.at("mean").get<std::vector<double>>();
        s.scale_ = j.at("scale").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed standardizer: ") + e.what());
    }
    if (s.mean_.size() != s.scale_.size() || s.k_ > s.mean_.size()) throw DataError("malformed standardizer");
    return s;
}

void write_features_csv(const std::filesystem::path& path, const FeatureSet& features) {
    const std::size_t k = features.k;
    std::ostringstream out;
    out << "# k=" << k << " visual=0:" << k << " text=" << k << ":" << k + kTextDim << "\n";
    std::vector<std::string> header{"video_id", "segment_index", "label"};
    for (std::size_t j = 0; j < k; ++j) header.push_back("v" + std::to_string(j));
    for (std::size_t j = 0; j < kTextDim; ++j) header.push_back("t" + std::to_string(j));
    csv::write_row(out, header);
    for (const auto& r : features.rows) {
        if (r.visual.size() != k || r.text.size() != kTextDim) throw DimensionError("feature row " + to_string(r.key()) + " has the wrong width");
        std::vector<std::string> fields{r.video_id, std::to_string(r.segment_index), r.label == Label::Buggy ? "1" : "0"};
        for (double x : r.visual) fields.push_back(csv::format_double(x));
        for (double x : r.text) fields.push_back(csv::format_double(x));
        csv::write_row(out, fields);
    }
    csv::write_text_file(path, out.str());
}

FeatureSet read_features_csv(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    FeatureSet out;
    bool have_k = false;
    for (const auto& c : table.comments) {
        auto pos = c.find("k=");
        if (pos == std::string::npos) continue;
        auto end = c.find(' ', pos);
        out.k = static_cast<std::size_t>(csv::parse_int(c.substr(pos + 2, end == std::string::npos ? std::string::npos : end - pos - 2), 1, "k"));
        have_k = true;
    }
    if (!have_k) throw ParseError(path.string() + ": missing '# k=' header comment", 1);
    if (table.header.size() != 3 + out.k + kTextDim) {
        throw DimensionError(path.string() + ": expected " + std::to_string(3 + out.k + kTextDim) + " columns, found " +
                             std::to_string(table.header.size()));
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto line = table.row_lines[r];
        SegmentFeatures f;
        f.video_id = row[0];
        f.segment_index = static_cast<int>(csv::parse_int(row[1], line, "segment_index"));
        const auto label = csv::parse_int(row[2], line, "label");
        if (label != 0 && label != 1) throw ParseError("label must be 0 or 1", line);
        f.label = label ? Label::Buggy : Label::Clean;
        f.visual.reserve(out.k);
        for (std::size_t j = 0; j < out.k; ++j) f.visual.push_back(csv::parse_double(row[3 + j], line, "feature"));
        f.text.reserve(kTextDim);
        for (std::size_t j = 0; j < kTextDim; ++j) f.text.push_back(csv::parse_double(row[3 + out.k + j], line, "feature"));
        out.rows.push_back(std::move(f));
    }
    return out;
}

} // namespace bugseg
