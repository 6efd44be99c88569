#include "bugseg/csv.hpp"
#include "bugseg/error.hpp"
#include "bugseg/pipeline.hpp"
#include "bugseg/random.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>

namespace bugseg {

std::string_view version() {
    return BUGSEG_VERSION;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

class ValueParser {
public:
    ValueParser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

    nlohmann::json parse_all() {
        auto v = value();
        skip_space();
        if (pos_ < text_.size() && text_[pos_] != '#') fail("trailing characters after value");
        return v;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw ParseError("config: " + what, line_); }

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    nlohmann::json value() {
        skip_space();
        if (pos_ >= text_.size()) fail("missing value");
        const char c = text_[pos_];
        if (c == '"') return string();
        if (c == '[') return array();
        if (text_.substr(pos_, 4) == "true") {
            pos_ += 4;
            return true;
        }
        if (text_.substr(pos_, 5) == "false") {
            pos_ += 5;
            return false;
        }
        return number();
    }

    nlohmann::json string() {
        ++pos_;
        std::string out;
        while (pos_ < text_.size() && text_[pos_] != '"') {
            char c = text_[pos_++];
            if (c == '\\') {
                if (pos_ >= text_.size()) fail("unterminated escape");
                const char e = text_[pos_++];
                switch (e) {
                case '"': c = '"'; break;
                case '\\': c = '\\'; break;
                case 'n': c = '\n'; break;
                case 't': c = '\t'; break;
                default: fail(std::string("unknown escape \\") + e);
                }
            }
            out += c;
        }
        if (pos_ >= text_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    nlohmann::json array() {
        ++pos_;
        nlohmann::json out = nlohmann::json::array();
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == ']') {
            ++pos_;
            return out;
        }
        while (true) {
            out.push_back(value());
            skip_space();
            if (pos_ >= text_.size()) fail("unterminated array");
            if (text_[pos_] == ']') {
                ++pos_;
                return out;
            }
            if (text_[pos_] != ',') fail("expected ',' in array");
            ++pos_;
        }
    }

    nlohmann::json number() {
        std::size_t end = pos_;
        while (end < text_.size() && std::string_view("+-0123456789.eE_").find(text_[end]) != std::string_view::npos) ++end;
        std::string token(text_.substr(pos_, end - pos_));
        std::erase(token, '_');
        if (token.empty()) fail("unrecognized value '" + std::string(text_.substr(pos_)) + "'");
        pos_ = end;
        const char* first = token.data() + (token.front() == '+' ? 1 : 0);
        const char* last = token.data() + token.size();
        if (token.find_first_of(".eE") == std::string::npos) {
            long long v = 0;
            auto [p, ec] = std::from_chars(first, last, v);
            if (ec != std::errc{} || p != last) fail("bad integer '" + token + "'");
            return v;
        }
        double v = 0;
        auto [p, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || p != last) fail("bad number '" + token + "'");
        return v;
    }

    std::string_view text_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

// Parsed document plus the line each key came from, for error messages.
struct Document {
    nlohmann::json values = nlohmann::json::object();
    std::map<std::string, std::size_t> lines;
};

Document parse_document(std::string_view text) {
    Document doc;
    std::string section;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[') {
            const auto close = line.find(']');
            if (close == std::string_view::npos) throw ParseError("config: unterminated section header", line_no);
            const auto rest = trim(line.substr(close + 1));
            if (!rest.empty() && rest.front() != '#') throw ParseError("config: text after section header", line_no);
            section = std::string(trim(line.substr(1, close - 1)));
            if (section.empty()) throw ParseError("config: empty section name", line_no);
            static const std::set<std::string> known{"data", "codebook", "split", "classifiers",
                                                     "grid", "subset",   "stats", "run"};
            if (!known.count(section)) throw ParseError("config: unknown section [" + section + "]", line_no);
            if (!doc.values.contains(section)) doc.values[section] = nlohmann::json::object();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("config: expected key = value", line_no);
        if (section.empty()) throw ParseError("config: key outside of any section", line_no);
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) throw ParseError("config: empty key", line_no);
        auto& sec = doc.values[section];
        if (sec.contains(key)) throw ParseError("config: duplicate key " + section + "." + key, line_no);
        sec[key] = ValueParser(trim(line.substr(eq + 1)), line_no).parse_all();
        doc.lines[section + "." + key] = line_no;
    }
    return doc;
}

class Reader {
public:
    explicit Reader(const Document& doc) : doc_(doc) {}

    const nlohmann::json* get(const std::string& section, const std::string& key) {
        used_.insert(section + "." + key);
        auto s = doc_.values.find(section);
        if (s == doc_.values.end()) return nullptr;
        auto v = s->find(key);
        return v == s->end() ? nullptr : &*v;
    }

    [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& what) const {
        throw ParseError("config: " + section + "." + key + " " + what, doc_.lines.at(section + "." + key));
    }

    std::string str(const std::string& section, const std::string& key) {
        const auto* v = get(section, key);
        if (!v->is_string()) fail(section, key, "must be a string");
        return v->get<std::string>();
    }

    double num(const std::string& section, const std::string& key) {
        const auto* v = get(section, key);
        if (!v->is_number()) fail(section, key, "must be a number");
        return v->get<double>();
    }

    long long integer(const std::string& section, const std::string& key, long long min) {
        const auto* v = get(section, key);
        if (!v->is_number_integer()) fail(section, key, "must be an integer");
        const auto i = v->get<long long>();
        if (i < min) fail(section, key, "must be at least " + std::to_string(min));
        return i;
    }

    bool boolean(const std::string& section, const std::string& key) {
        const auto* v = get(section, key);
        if (!v->is_boolean()) fail(section, key, "must be true or false");
        return v->get<bool>();
    }

    template <typename T, typename F>
    std::vector<T> list(const std::string& section, const std::string& key, F&& convert) {
        const auto* v = get(section, key);
        if (!v->is_array() || v->empty()) fail(section, key, "must be a non-empty array");
        std::vector<T> out;
        for (const auto& e : *v) out.push_back(convert(e));
        return out;
    }

    void reject_unknown() const {
        for (const auto& [section, keys] : doc_.values.items()) {
            for (const auto& [key, value] : keys.items()) {
                if (!used_.count(section + "." + key)) {
                    throw ParseError("config: unknown key " + section + "." + key, doc_.lines.at(section + "." + key));
                }
            }
        }
    }

    bool has(const std::string& section, const std::string& key) {
        const auto* v = get(section, key);
        return v != nullptr;
    }

private:
    const Document& doc_;
    std::set<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    return (path.is_absolute() ? path : base / path).lexically_normal();
}

} // namespace

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
    const auto doc = parse_document(text);
    Reader r(doc);
    RunConfig c;
    const auto base = std::filesystem::absolute(base_dir);

    for (auto [key, field] : {std::pair{"transcripts", &c.data.transcripts}, std::pair{"meta", &c.data.meta},
                              std::pair{"labels", &c.data.labels}, std::pair{"frames", &c.data.frames},
                              std::pair{"texts", &c.data.texts}, std::pair{"designations", &c.data.designations}}) {
        if (r.has("data", key)) *field = resolve(base, r.str("data", key));
    }

    if (r.has("codebook", "mode")) c.codebook_mode = parse_codebook_mode(r.str("codebook", "mode"));
    if (r.has("codebook", "k")) c.k = static_cast<std::size_t>(r.integer("codebook", "k", 1));
    if (r.has("codebook", "idf")) c.idf = parse_idf_form(r.str("codebook", "idf"));

    if (r.has("split", "train")) c.fractions.train = r.num("split", "train");
    if (r.has("split", "validation")) c.fractions.validation = r.num("split", "validation");
    if (r.has("split", "test")) c.fractions.test = r.num("split", "test");

    if (r.has("classifiers", "models")) {
        c.models = r.list<ModelKind>("classifiers", "models", [&](const nlohmann::json& e) {
            if (!e.is_string()) r.fail("classifiers", "models", "must list model names");
            return parse_model_kind(e.get<std::string>());
        });
    }
    if (r.has("classifiers", "standardize")) c.standardize = r.boolean("classifiers", "standardize");

    auto numbers = [&](const std::string& key) {
        return r.list<double>("grid", key, [&](const nlohmann::json& e) {
            if (!e.is_number()) r.fail("grid", key, "must list numbers");
            return e.get<double>();
        });
    };
    auto counts = [&](const std::string& key, long long min) {
        return r.list<long long>("grid", key, [&](const nlohmann::json& e) {
            if (!e.is_number_integer() || e.get<long long>() < min) {
                r.fail("grid", key, "must list integers of at least " + std::to_string(min));
            }
            return e.get<long long>();
        });
    };
    {
        // The linear grid is the product of its l2 and learning-rate lists.
        std::vector<double> l2s, lrs;
        for (const auto& h : c.grid.linear) {
            if (std::find(l2s.begin(), l2s.end(), h.l2) == l2s.end()) l2s.push_back(h.l2);
            if (std::find(lrs.begin(), lrs.end(), h.learning_rate) == lrs.end()) lrs.push_back(h.learning_rate);
        }
        const bool custom = r.has("grid", "linear_l2") || r.has("grid", "linear_lr") || r.has("grid", "linear_epochs");
        if (custom) {
            LinearHyper base_hyper;
            if (r.has("grid", "linear_l2")) l2s = numbers("linear_l2");
            if (r.has("grid", "linear_lr")) lrs = numbers("linear_lr");
            if (r.has("grid", "linear_epochs")) base_hyper.max_epochs = static_cast<int>(r.integer("grid", "linear_epochs", 1));
            c.grid.linear.clear();
            for (double l2 : l2s) {
                for (double lr : lrs) {
                    auto h = base_hyper;
                    h.l2 = l2;
                    h.learning_rate = lr;
                    c.grid.linear.push_back(h);
                }
            }
        }
    }
    if (r.has("grid", "knn_k")) {
        c.grid.knn.clear();
        for (auto k : counts("knn_k", 1)) c.grid.knn.push_back(KnnHyper{static_cast<std::size_t>(k)});
    }
    if (r.has("grid", "forest_trees") || r.has("grid", "forest_max_features") || r.has("grid", "forest_min_leaf")) {
        std::vector<long long> trees{100}, features{0}, leaves{1};
        if (r.has("grid", "forest_trees")) trees = counts("forest_trees", 1);
        if (r.has("grid", "forest_max_features")) features = counts("forest_max_features", 0);
        if (r.has("grid", "forest_min_leaf")) leaves = counts("forest_min_leaf", 1);
        c.grid.forest.clear();
        for (auto t : trees) {
            for (auto f : features) {
                for (auto l : leaves) {
                    ForestHyper h;
                    h.trees = static_cast<int>(t);
                    h.max_features = static_cast<std::size_t>(f);
                    h.min_leaf = static_cast<std::size_t>(l);
                    c.grid.forest.push_back(h);
                }
            }
        }
    }
    if (r.has("grid", "ensemble_rounds")) c.grid.ensemble.rounds = static_cast<int>(r.integer("grid", "ensemble_rounds", 1));

    if (r.has("subset", "filter")) {
        const auto f = r.str("subset", "filter");
        if (!f.empty()) c.subset = parse_subset_filter(f);
    }

    if (r.has("stats", "alpha")) c.alpha = r.num("stats", "alpha");
    if (r.has("stats", "t_test")) {
        const auto v = r.str("stats", "t_test");
        if (v == "welch") c.t_test = TTestVariant::Welch;
        else if (v == "student") c.t_test = TTestVariant::Student;
        else r.fail("stats", "t_test", "must be \"welch\" or \"student\"");
    }

    if (r.has("run", "seed")) c.seed = static_cast<std::uint64_t>(r.integer("run", "seed", 0));
    if (r.has("run", "output")) c.output = resolve(base, r.str("run", "output"));
    if (r.has("run", "jobs")) c.jobs = static_cast<int>(r.integer("run", "jobs", 1));

    r.reject_unknown();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("config file not found: " + path.string());
    auto c = parse_run_config(csv::read_text_file(path), path.parent_path().empty() ? "." : path.parent_path());
    return c;
}

nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json linear = nlohmann::json::array();
    for (const auto& h : c.grid.linear) {
        linear.push_back({{"l2", h.l2}, {"learning_rate", h.learning_rate}, {"max_epochs", h.max_epochs},
                          {"tolerance", h.tolerance}});
    }
    nlohmann::json knn = nlohmann::json::array();
    for (const auto& h : c.grid.knn) knn.push_back({{"k", h.k}});
    nlohmann::json forest = nlohmann::json::array();
    for (const auto& h : c.grid.forest) {
        nlohmann::json f = {{"trees", h.trees}, {"max_features", h.max_features}, {"min_leaf", h.min_leaf}};
        f["bootstrap"] = h.bootstrap ? nlohmann::json(*h.bootstrap) : nlohmann::json(nullptr);
        forest.push_back(std::move(f));
    }
    nlohmann::json models = nlohmann::json::array();
    for (auto m : c.models) models.push_back(std::string(to_string(m)));

    return {
        {"data",
         {{"transcripts", c.data.transcripts.string()},
          {"meta", c.data.meta.string()},
          {"labels", c.data.labels.string()},
          {"frames", c.data.frames.string()},
          {"texts", c.data.texts.string()},
          {"designations", c.data.designations.string()}}},
        {"codebook", {{"mode", std::string(to_string(c.codebook_mode))}, {"k", c.k}, {"idf", std::string(to_string(c.idf))}}},
        {"split", {{"train", c.fractions.train}, {"validation", c.fractions.validation}, {"test", c.fractions.test}}},
        {"classifiers", {{"models", models}, {"standardize", c.standardize}}},
        {"grid", {{"linear", linear}, {"knn", knn}, {"forest", forest}, {"ensemble_rounds", c.grid.ensemble.rounds}}},
        {"subset", c.subset ? c.subset->label() : ""},
        {"stats", {{"alpha", c.alpha}, {"t_test", c.t_test == TTestVariant::Welch ? "welch" : "student"}}},
        {"seed", c.seed},
    };
}

RunConfig config_from_json(const nlohmann::json& j) {
    try {
        RunConfig c;
        const auto& d = j.at("data");
        c.data.transcripts = d.at("transcripts").get<std::string>();
        c.data.meta = d.at("meta").get<std::string>();
        c.data.labels = d.at("labels").get<std::string>();
        c.data.frames = d.at("frames").get<std::string>();
        c.data.texts = d.at("texts").get<std::string>();
        c.data.designations = d.at("designations").get<std::string>();
        c.codebook_mode = parse_codebook_mode(j.at("codebook").at("mode").get<std::string>());
        c.k = j.at("codebook").at("k").get<std::size_t>();
        c.idf = parse_idf_form(j.at("codebook").at("idf").get<std::string>());
        c.fractions.train = j.at("split").at("train").get<double>();
        c.fractions.validation = j.at("split").at("validation").get<double>();
        c.fractions.test = j.at("split").at("test").get<double>();
        c.models.clear();
        for (const auto& m : j.at("classifiers").at("models")) c.models.push_back(parse_model_kind(m.get<std::string>()));
        c.standardize = j.at("classifiers").at("standardize").get<bool>();
        const auto& g = j.at("grid");
        c.grid.linear.clear();
        for (const auto& h : g.at("linear")) {
            c.grid.linear.push_back({h.at("l2").get<double>(), h.at("learning_rate").get<double>(),
                                     h.at("max_epochs").get<int>(), h.at("tolerance").get<double>()});
        }
        c.grid.knn.clear();
        for (const auto& h : g.at("knn")) c.grid.knn.push_back({h.at("k").get<std::size_t>()});
        c.grid.forest.clear();
        for (const auto& h : g.at("forest")) {
            ForestHyper f;
            f.trees = h.at("trees").get<int>();
            f.max_features = h.at("max_features").get<std::size_t>();
            f.min_leaf = h.at("min_leaf").get<std::size_t>();
            if (!h.at("bootstrap").is_null()) f.bootstrap = h.at("bootstrap").get<bool>();
            c.grid.forest.push_back(f);
        }
        c.grid.ensemble.rounds = g.at("ensemble_rounds").get<int>();
        const auto subset = j.at("subset").get<std::string>();
        if (!subset.empty()) c.subset = parse_subset_filter(subset);
        c.alpha = j.at("stats").at("alpha").get<double>();
        c.t_test = j.at("stats").at("t_test").get<std::string>() == "student" ? TTestVariant::Student : TTestVariant::Welch;
        c.seed = j.at("seed").get<std::uint64_t>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed run config: ") + e.what());
    }
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    std::string hex;
    hex.reserve(2 * len);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string file_sha256(const std::filesystem::path& path) {
    return sha256_hex(csv::read_text_file(path));
}

std::string config_hash(const RunConfig& config) {
    return sha256_hex(config_to_json(config).dump());
}

void validate_config(const RunConfig& c) {
    std::vector<std::string> problems;
    auto need = [&](const std::filesystem::path& p, const char* what, bool dir) {
        if (p.empty()) problems.push_back(std::string(what) + " path is not set");
        else if (!std::filesystem::exists(p)) problems.push_back(std::string(what) + " not found: " + p.string());
        else if (dir != std::filesystem::is_directory(p))
            problems.push_back(std::string(what) + (dir ? " is not a directory: " : " is a directory: ") + p.string());
    };
    need(c.data.transcripts, "transcripts", true);
    need(c.data.meta, "meta", false);
    need(c.data.labels, "labels", false);
    need(c.data.frames, "frames", false);
    need(c.data.texts, "texts", false);
    if (c.codebook_mode == CodebookMode::Manual) need(c.data.designations, "designations", false);
    if (c.codebook_mode == CodebookMode::Automatic && c.k < 2) problems.push_back("automatic codebook needs k >= 2");
    if (c.models.empty()) problems.push_back("no classifiers selected");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) problems.push_back("stats alpha must lie in (0, 1)");
    if (c.jobs < 1) problems.push_back("jobs must be at least 1");
    if (!problems.empty()) {
        std::string msg = "invalid run config:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw DataError(msg);
    }
}

nlohmann::json stage_seeds(std::uint64_t root) {
    return {{"root", root},
            {"codebook", derive_seed(root, "codebook")},
            {"split", derive_seed(root, "split")},
            {"linear", derive_seed(root, "linear")},
            {"random_forest", derive_seed(root, "random_forest")},
            {"extra_trees", derive_seed(root, "extra_trees")}};
}

} // namespace bugseg
