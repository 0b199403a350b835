#include "hcb/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace hcb {

using json = nlohmann::ordered_json;

namespace {

double curve_eval(const ParamCurve& p, double x) {
    const auto& c = p.c;
    switch (p.kind) {
        case ParamCurve::Kind::RationalQuad:
            return c[0] / (x * x + c[1] * x + c[2]);
        case ParamCurve::Kind::Gauss2: {
            const double a = (x - c[1]) / c[2];
            const double b = (x - c[4]) / c[5];
            return c[0] * std::exp(-a * a) + c[3] * std::exp(-b * b);
        }
        case ParamCurve::Kind::Reciprocal:
            return c[0] / (x + c[1]);
        case ParamCurve::Kind::Quadratic:
            return c[0] * x * x + c[1] * x + c[2];
        case ParamCurve::Kind::RationalLin:
            return (c[0] * x + c[1]) / (x + c[2]);
    }
    return 0;
}

double hist_eval(const Histogram& h, double x) {
    if (h.edges.size() < 2 || h.masses.size() + 1 != h.edges.size()) return 0;
    auto it = std::upper_bound(h.edges.begin(), h.edges.end(), x);
    std::ptrdiff_t bin = (it - h.edges.begin()) - 1;
    bin = std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(h.masses.size()) - 1);
    const double width = h.edges[bin + 1] - h.edges[bin];
    if (width <= 0) return 0;
    return h.masses[bin] / width;
}

}  // namespace

double density_eval(const Density& d, double x) {
    double v = std::holds_alternative<ParamCurve>(d) ? curve_eval(std::get<ParamCurve>(d), x)
                                                     : hist_eval(std::get<Histogram>(d), x);
    return std::max(v, kDensityFloor);
}

BayesModel paper_model() {
    BayesModel m;
    m.prior_present = 0.92;
    m.prior_missing = 0.08;
    m.cond[0][0] = ParamCurve{ParamCurve::Kind::RationalQuad, {0.6222, -0.1143, 0.8207}};
    m.cond[0][1] = ParamCurve{ParamCurve::Kind::RationalQuad, {0.5636, -0.2979, 0.7611}};
    m.cond[1][0] = ParamCurve{ParamCurve::Kind::Gauss2, {0.0275, 6.447, 5.632, 0.02145, 13.44, 20.46}};
    m.cond[1][1] = ParamCurve{ParamCurve::Kind::Reciprocal, {0.0306, 0.04501}};
    m.cond[2][0] = ParamCurve{ParamCurve::Kind::Quadratic, {-0.003665, 0.004119, 0.009356}};
    m.cond[2][1] = ParamCurve{ParamCurve::Kind::RationalLin, {0.0047, 0.001141, 0.01187}};
    m.x4_present = {0.99, 0.23};
    m.x4_missing = {0.01, 0.77};
    return m;
}

ConfusionMatrix paper_confusion() { return ConfusionMatrix{9385, 12182, 483, 177950}; }

ClassifyResult classify(const BayesModel& model, const FeatureVector& f) {
    const double xs[3] = {f.fee_gwei, f.age_s, f.rank_ratio};
    const double priors[2] = {model.prior_present, model.prior_missing};
    double score[2];
    for (int k = 0; k < 2; ++k) {
        double s = std::log(priors[k]);
        for (int i = 0; i < 3; ++i) s += std::log(density_eval(model.cond[i][k], xs[i]));
        const double px4 = f.present_at_sender ? model.x4_present[k] : model.x4_missing[k];
        s += std::log(std::max(px4, kDensityFloor));
        score[k] = s;
    }
    ClassifyResult r;
    r.score_present = score[0];
    r.score_missing = score[1];
    r.label = score[1] >= score[0] ? TxClass::Missing : TxClass::Present;
    return r;
}

FeatureVector extract_features(const Transaction& tx, std::size_t n, std::size_t m,
                               std::optional<SimMs> received_at, bool present_now, SimMs now) {
    if (n < 1 || n > m) throw std::invalid_argument("extract_features: need 1 <= n <= m");
    FeatureVector f;
    f.fee_gwei = static_cast<double>(tx.effective_fee);
    f.rank_ratio = static_cast<double>(n) / static_cast<double>(m);
    f.age_s = received_at ? std::max(0.0, (now - *received_at) / 1000.0) : 0.0;
    f.present_at_sender = present_now;
    return f;
}

FeatureVector extract_features(const Transaction& tx, std::size_t n, std::size_t m,
                               std::optional<SimMs> received_at, SimMs now) {
    return extract_features(tx, n, m, received_at, received_at.has_value(), now);
}

namespace {

Histogram make_hist(std::size_t bins, double max, const std::vector<double>& xs) {
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        h.edges[i] = max * static_cast<double>(i) / static_cast<double>(bins);
    h.masses.assign(bins, 0.0);
    for (double x : xs) {
        auto bin = static_cast<std::ptrdiff_t>(std::floor(x / max * static_cast<double>(bins)));
        bin = std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(bins) - 1);
        h.masses[bin] += 1.0;
    }
    const auto total = static_cast<double>(xs.size());
    if (total > 0)
        for (double& v : h.masses) v /= total;
    return h;
}

}  // namespace

BayesModel train(const std::vector<LabeledSample>& samples, const BinsConfig& bins) {
    std::array<std::vector<double>, 2> fee, age, rank;
    std::array<std::uint64_t, 2> count{0, 0}, x4_present_count{0, 0};
    for (const auto& s : samples) {
        const int k = s.label == TxClass::Present ? 0 : 1;
        ++count[k];
        x4_present_count[k] += s.features.present_at_sender;
        fee[k].push_back(s.features.fee_gwei);
        age[k].push_back(s.features.age_s);
        rank[k].push_back(s.features.rank_ratio);
    }
    if (count[0] == 0 || count[1] == 0)
        throw std::invalid_argument("train: need at least one sample of each class");

    BayesModel m;
    const auto total = static_cast<double>(count[0] + count[1]);
    m.prior_present = static_cast<double>(count[0]) / total;
    m.prior_missing = static_cast<double>(count[1]) / total;
    for (int k = 0; k < 2; ++k) {
        m.cond[0][k] = make_hist(bins.fee_bins, bins.fee_max, fee[k]);
        m.cond[1][k] = make_hist(bins.age_bins, bins.age_max, age[k]);
        m.cond[2][k] = make_hist(bins.rank_bins, 1.0, rank[k]);
        // Laplace smoothing keeps both pmf entries off zero.
        m.x4_present[k] = static_cast<double>(x4_present_count[k] + 1) /
                          static_cast<double>(count[k] + 2);
        m.x4_missing[k] = 1.0 - m.x4_present[k];
    }
    return m;
}

BayesModel train(const std::vector<LabeledSample>& samples) { return train(samples, BinsConfig{}); }

ConfusionMatrix evaluate(const BayesModel& model, const std::vector<LabeledSample>& test) {
    ConfusionMatrix cm;
    for (const auto& s : test) {
        const bool predicted_missing = classify(model, s.features).label == TxClass::Missing;
        const bool is_missing = s.label == TxClass::Missing;
        if (is_missing && predicted_missing) ++cm.tp;
        else if (is_missing) ++cm.fn;
        else if (predicted_missing) ++cm.fp;
        else ++cm.tn;
    }
    return cm;
}

// --- serialization ---

namespace {

constexpr const char* kCurveNames[] = {"rational_quad", "gauss2", "reciprocal", "quadratic",
                                       "rational_lin"};
constexpr std::size_t kCurveArity[] = {3, 6, 2, 3, 3};

json density_to_json(const Density& d) {
    if (const auto* p = std::get_if<ParamCurve>(&d)) {
        const auto idx = static_cast<std::size_t>(p->kind);
        json coeffs = json::array();
        for (std::size_t i = 0; i < kCurveArity[idx]; ++i) coeffs.push_back(p->c[i]);
        return json{{"curve", kCurveNames[idx]}, {"coeffs", coeffs}};
    }
    const auto& h = std::get<Histogram>(d);
    return json{{"bins", json{{"edges", h.edges}, {"masses", h.masses}}}};
}

Density density_from_json(const json& j) {
    if (j.contains("curve")) {
        const std::string name = j.at("curve").get<std::string>();
        ParamCurve p;
        bool found = false;
        for (std::size_t i = 0; i < std::size(kCurveNames); ++i) {
            if (name == kCurveNames[i]) {
                p.kind = static_cast<ParamCurve::Kind>(i);
                const auto coeffs = j.at("coeffs").get<std::vector<double>>();
                if (coeffs.size() != kCurveArity[i])
                    throw std::runtime_error("model: curve '" + name + "' expects " +
                                             std::to_string(kCurveArity[i]) + " coefficients");
                std::copy(coeffs.begin(), coeffs.end(), p.c.begin());
                found = true;
                break;
            }
        }
        if (!found) throw std::runtime_error("model: unknown curve '" + name + "'");
        return p;
    }
    if (j.contains("bins")) {
        Histogram h;
        h.edges = j.at("bins").at("edges").get<std::vector<double>>();
        h.masses = j.at("bins").at("masses").get<std::vector<double>>();
        if (h.edges.size() != h.masses.size() + 1)
            throw std::runtime_error("model: histogram needs masses.size()+1 edges");
        if (!std::is_sorted(h.edges.begin(), h.edges.end()))
            throw std::runtime_error("model: histogram edges must be ascending");
        for (double v : h.masses)
            if (v < 0) throw std::runtime_error("model: histogram masses must be non-negative");
        return h;
    }
    throw std::runtime_error("model: density needs either 'curve' or 'bins'");
}

constexpr const char* kFeatureKeys[3] = {"fee", "age", "rank"};
constexpr const char* kClassKeys[2] = {"present", "missing"};

}  // namespace

std::string model_to_json(const BayesModel& model) {
    json j;
    j["priors"] = {{"present", model.prior_present}, {"missing", model.prior_missing}};
    json cond;
    for (int f = 0; f < 3; ++f) {
        json per_class;
        for (int k = 0; k < 2; ++k) per_class[kClassKeys[k]] = density_to_json(model.cond[f][k]);
        cond[kFeatureKeys[f]] = per_class;
    }
    j["cond"] = cond;
    json x4;
    for (int k = 0; k < 2; ++k)
        x4[kClassKeys[k]] = {{"present", model.x4_present[k]}, {"missing", model.x4_missing[k]}};
    j["x4"] = x4;
    return j.dump(2) + "\n";
}

BayesModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("model: bad json: ") + e.what());
    }
    try {
        BayesModel m;
        m.prior_present = j.at("priors").at("present").get<double>();
        m.prior_missing = j.at("priors").at("missing").get<double>();
        if (std::abs(m.prior_present + m.prior_missing - 1.0) > 1e-9)
            throw std::runtime_error("model: priors must sum to 1");
        for (int f = 0; f < 3; ++f)
            for (int k = 0; k < 2; ++k)
                m.cond[f][k] = density_from_json(j.at("cond").at(kFeatureKeys[f]).at(kClassKeys[k]));
        for (int k = 0; k < 2; ++k) {
            m.x4_present[k] = j.at("x4").at(kClassKeys[k]).at("present").get<double>();
            m.x4_missing[k] = j.at("x4").at(kClassKeys[k]).at("missing").get<double>();
            if (m.x4_present[k] < 0 || m.x4_missing[k] < 0)
                throw std::runtime_error("model: x4 probabilities must be non-negative");
        }
        return m;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("model: ") + e.what());
    }
}

void save_model(const BayesModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << model_to_json(model);
}

BayesModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

std::string dataset_to_jsonl(const std::vector<LabeledSample>& samples) {
    std::string out;
    for (const auto& s : samples) {
        json j{{"fee_gwei", s.features.fee_gwei},
               {"age_s", s.features.age_s},
               {"rank_ratio", s.features.rank_ratio},
               {"present_at_sender", s.features.present_at_sender},
               {"label", s.label == TxClass::Present ? "present" : "missing"}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<LabeledSample> dataset_from_jsonl(std::istream& in) {
    std::vector<LabeledSample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            LabeledSample s;
            s.features.fee_gwei = j.at("fee_gwei").get<double>();
            s.features.age_s = j.at("age_s").get<double>();
            s.features.rank_ratio = j.at("rank_ratio").get<double>();
            s.features.present_at_sender = j.at("present_at_sender").get<bool>();
            const std::string label = j.at("label").get<std::string>();
            if (label == "present") s.label = TxClass::Present;
            else if (label == "missing") s.label = TxClass::Missing;
            else throw std::runtime_error("unknown label '" + label + "'");
            out.push_back(s);
        } catch (const json::exception& e) {
            throw std::runtime_error("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_dataset(const std::vector<LabeledSample>& samples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << dataset_to_jsonl(samples);
}

std::vector<LabeledSample> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    return dataset_from_jsonl(in);
}

}  // namespace hcb
