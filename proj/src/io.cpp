#include "hdmi/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hdmi/error.hpp"

namespace hdmi::io {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Confusion matrices

estimators::ConfusionMatrix parse_confusion_csv(std::string_view text) {
    std::vector<std::vector<std::int64_t>> rows;
    std::vector<std::size_t> line_numbers;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = std::min(text.find('\n', pos), text.size());
        const auto line = trim(text.substr(pos, nl - pos));
        ++line_no;
        pos = nl + 1;
        if (line.empty()) {
            if (nl == text.size()) break;
            continue;
        }
        std::vector<std::int64_t> row;
        std::size_t start = 0, col = 0;
        while (true) {
            const auto comma = std::min(line.find(',', start), line.size());
            const auto cell = trim(line.substr(start, comma - start));
            ++col;
            std::int64_t v = 0;
            const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || end != cell.data() + cell.size())
                throw ParseError("confusion matrix cell '" + std::string(cell) + "' is not an integer", line_no, col);
            if (v < 0) throw ParseError("confusion matrix counts must be nonnegative", line_no, col);
            row.push_back(v);
            if (comma == line.size()) break;
            start = comma + 1;
        }
        rows.push_back(std::move(row));
        line_numbers.push_back(line_no);
        if (nl == text.size()) break;
    }
    if (rows.empty()) throw ParseError("confusion matrix file is empty");
    const std::size_t k = rows.size();
    if (k < 2) throw ParseError("confusion matrix needs at least 2 rows", line_numbers[0]);
    for (std::size_t i = 0; i < k; ++i)
        if (rows[i].size() != k)
            throw ParseError("row has " + std::to_string(rows[i].size()) + " columns but the matrix has " +
                                 std::to_string(k) + " rows",
                             line_numbers[i], std::min(rows[i].size(), k) + 1);
    std::int64_t r = 0;
    for (std::size_t i = 0; i < k; ++i) {
        std::int64_t s = 0;
        for (auto v : rows[i]) s += v;
        if (i == 0) r = s;
        if (s != r)
            throw ParseError("row sums to " + std::to_string(s) + " but the first row sums to " + std::to_string(r),
                             line_numbers[i]);
    }
    if (r == 0) throw ParseError("confusion matrix rows sum to 0", line_numbers[0]);
    return estimators::ConfusionMatrix::from_rows(rows);
}

estimators::ConfusionMatrix read_confusion_csv(const std::filesystem::path& path) {
    return parse_confusion_csv(read_text(path));
}

std::string format_confusion_csv(const estimators::ConfusionMatrix& m) {
    std::string out;
    for (int i = 0; i < m.k(); ++i) {
        for (int j = 0; j < m.k(); ++j) {
            if (j) out += ',';
            out += std::to_string(m(i, j));
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Files

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path.string() + "'");
    return ss.str();
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out.flush()) throw IoError("error writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move output into place at '" + path.string() + "'");
    }
}

json parse_json(std::string_view text, std::string_view what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string(what) + " is not valid JSON: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Models

namespace {

const json& require_field(const json& spec, const char* key) {
    if (!spec.contains(key)) throw ConfigError(std::string("model spec is missing '") + key + "'");
    return spec.at(key);
}

double number(const json& v, const char* key) {
    if (!v.is_number()) throw ConfigError(std::string("model field '") + key + "' must be a number");
    return v.get<double>();
}

int integer(const json& v, const char* key) {
    if (!v.is_number_integer()) throw ConfigError(std::string("model field '") + key + "' must be an integer");
    return v.get<int>();
}

models::Vector per_coordinate(const json& spec, const char* key, std::optional<int> d) {
    const json& v = require_field(spec, key);
    if (v.is_array()) {
        models::Vector out;
        for (const auto& e : v) out.push_back(number(e, key));
        if (d && static_cast<int>(out.size()) != *d)
            throw ConfigError(std::string("model field '") + key + "' has the wrong length");
        return out;
    }
    if (!d) throw ConfigError(std::string("scalar '") + key + "' needs the dimension 'd'");
    return models::Vector(*d, number(v, key));
}

}  // namespace

models::StimulusResponseModel parse_model(const json& spec) {
    if (!spec.is_object()) throw ConfigError("model spec must be a JSON object");
    const json& kind_v = require_field(spec, "kind");
    if (!kind_v.is_string()) throw ConfigError("model 'kind' must be a string");
    const auto kind = kind_v.get<std::string>();

    if (kind == "gaussian_sequence") {
        std::optional<int> d;
        if (spec.contains("d")) d = integer(spec.at("d"), "d");
        if (!d && spec.contains("sigma_x") && spec.at("sigma_x").is_array())
            d = static_cast<int>(spec.at("sigma_x").size());
        return models::StimulusResponseModel::gaussian_sequence(per_coordinate(spec, "sigma_x", d),
                                                                per_coordinate(spec, "sigma_e", d));
    }
    if (kind == "multi_logistic") {
        const json& B = require_field(spec, "B");
        if (B.is_object()) {
            if (!B.contains("scaled_identity")) throw ConfigError("matrix object must be {\"scaled_identity\": s}");
            const int p = integer(require_field(spec, "p"), "p");
            if (spec.contains("q") && integer(spec.at("q"), "q") != p)
                throw ConfigError("scaled_identity needs p == q");
            return models::StimulusResponseModel::scaled_identity_logistic(p, number(B.at("scaled_identity"), "B"));
        }
        if (!B.is_array() || B.empty()) throw ConfigError("'B' must be a nonempty array or {\"scaled_identity\": s}");
        Eigen::MatrixXd M;
        if (B.front().is_array()) {
            const auto p = B.size(), q = B.front().size();
            M.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
            for (std::size_t i = 0; i < p; ++i) {
                if (!B[i].is_array() || B[i].size() != q) throw ConfigError("'B' rows must have equal length");
                for (std::size_t j = 0; j < q; ++j) M(i, j) = number(B[i][j], "B");
            }
        } else {
            const int p = integer(require_field(spec, "p"), "p");
            const int q = integer(require_field(spec, "q"), "q");
            if (p < 1 || q < 1 || B.size() != static_cast<std::size_t>(p) * q)
                throw ConfigError("flat 'B' must have p * q entries (row-major)");
            M.resize(p, q);
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < q; ++j) M(i, j) = number(B[static_cast<std::size_t>(i) * q + j], "B");
        }
        if (spec.contains("p") && integer(spec.at("p"), "p") != M.rows()) throw ConfigError("'p' disagrees with 'B'");
        if (spec.contains("q") && integer(spec.at("q"), "q") != M.cols()) throw ConfigError("'q' disagrees with 'B'");
        return models::StimulusResponseModel::multi_logistic(std::move(M));
    }
    if (kind == "exp_family") {
        const json& inst = require_field(spec, "instance");
        models::ExpFamilyInstance instance;
        if (inst == "gaussian_product")
            instance = models::ExpFamilyInstance::GaussianProduct;
        else if (inst == "logistic_product")
            instance = models::ExpFamilyInstance::LogisticProduct;
        else
            throw ConfigError("exp_family 'instance' must be gaussian_product or logistic_product");
        return models::StimulusResponseModel::exp_family(instance, integer(require_field(spec, "d"), "d"),
                                                         number(require_field(spec, "kappa"), "kappa"));
    }
    if (kind == "staircase")
        return models::StimulusResponseModel::staircase(integer(require_field(spec, "k_bins"), "k_bins"));
    throw ConfigError("unknown model kind '" + kind +
                      "' (expected gaussian_sequence, multi_logistic, exp_family, staircase)");
}

json model_to_json(const models::StimulusResponseModel& m) {
    json j;
    if (const auto* g = m.get<models::GaussianSequenceParams>()) {
        j["kind"] = "gaussian_sequence";
        j["sigma_x"] = g->sigma_x;
        j["sigma_e"] = g->sigma_e;
    } else if (const auto* l = m.get<models::MultiLogisticParams>()) {
        j["kind"] = "multi_logistic";
        j["p"] = l->B.rows();
        j["q"] = l->B.cols();
        const double s = l->B.rows() == l->B.cols() && l->B.size() > 0 ? l->B(0, 0) : 0.0;
        if (l->B.rows() == l->B.cols() &&
            l->B.isApprox(s * Eigen::MatrixXd::Identity(l->B.rows(), l->B.cols()), 0.0)) {
            j["B"] = {{"scaled_identity", s}};
        } else {
            json rows = json::array();
            for (Eigen::Index i = 0; i < l->B.rows(); ++i) {
                json row = json::array();
                for (Eigen::Index c = 0; c < l->B.cols(); ++c) row.push_back(l->B(i, c));
                rows.push_back(row);
            }
            j["B"] = rows;
        }
    } else if (const auto* e = m.get<models::ExpFamilySequenceParams>()) {
        j["kind"] = "exp_family";
        j["instance"] =
            e->instance == models::ExpFamilyInstance::GaussianProduct ? "gaussian_product" : "logistic_product";
        j["d"] = e->d;
        j["kappa"] = e->kappa;
    } else if (const auto* s = m.get<models::StaircaseParams>()) {
        j["kind"] = "staircase";
        j["k_bins"] = s->k_bins;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Records

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

json to_json(const estimators::EstimateRecord& r) {
    json j{{"schema_version", kSchemaVersion},
           {"method", estimators::to_string(r.method)},
           {"value", r.value},
           {"k", r.k}};
    j["alpha"] = r.alpha ? json(*r.alpha) : json(nullptr);
    if (r.error) j["smoothed_error"] = *r.error;
    j["seed"] = r.seed ? json(*r.seed) : json(nullptr);
    j["model_tag"] = r.model_tag ? json(*r.model_tag) : json(nullptr);
    return j;
}

json to_json(const estimators::SmoothedError& e) {
    return {{"e_test", e.e_test}, {"alpha", e.alpha}, {"k", e.k}, {"smoothed_error", e.value}};
}

json to_json(const oracles::McEstimate& e) {
    return {{"value", e.value}, {"std_error", e.std_error}, {"n_samples", e.n_samples}, {"seed", e.seed}};
}

json to_json(const oracles::MomentCheck& m) {
    return {{"name", m.name},
            {"estimate", m.estimate},
            {"std_error", m.std_error},
            {"target", m.target},
            {"deviation_se", m.std_error > 0 ? json(m.deviation_se()) : json(nullptr)}};
}

json to_json(const oracles::ZMomentReport& r) {
    json moments = json::array();
    for (const auto& m : r.moments) moments.push_back(to_json(m));
    return {{"schema_version", kSchemaVersion}, {"iota", r.iota}, {"k", r.k},
            {"n", r.n},                         {"seed", r.seed}, {"moments", moments}};
}

json to_json(const oracles::NormalityReport& r) {
    json marginals = json::array();
    for (const auto& m : r.marginals)
        marginals.push_back({{"index", m.index},
                             {"skewness", m.skewness},
                             {"skewness_se", m.skewness_se},
                             {"excess_kurtosis", m.excess_kurtosis},
                             {"excess_kurtosis_se", m.excess_kurtosis_se}});
    return {{"schema_version", kSchemaVersion}, {"k", r.k}, {"n", r.n}, {"seed", r.seed}, {"marginals", marginals}};
}

json to_json(const oracles::ConvergenceRow& r) {
    return {{"d", r.d}, {"estimate", to_json(r.estimate)}, {"prediction", r.prediction}, {"gap", r.gap}};
}

}  // namespace hdmi::io
