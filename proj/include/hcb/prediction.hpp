#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hcb/tx.hpp"

namespace hcb {

enum class TxClass : std::uint8_t { Present, Missing };

/// Features of one in-block transaction, as known to the node that is about
/// to forward the block.
struct FeatureVector {
    double fee_gwei = 0;            // x1: effective fee
    double age_s = 0;               // x2: seconds since this node received the tx
    double rank_ratio = 0;          // x3: n/m for the n-th of m block txs
    bool present_at_sender = true;  // x4: held in Tx-Pool or Secondary Pool here
};

struct LabeledSample {
    FeatureVector features;
    TxClass label = TxClass::Present;
};

/// Closed-form likelihood shape, evaluated pointwise (not normalized).
struct ParamCurve {
    enum class Kind : std::uint8_t {
        RationalQuad,  // c0 / (x^2 + c1*x + c2)
        Gauss2,        // c0*exp(-((x-c1)/c2)^2) + c3*exp(-((x-c4)/c5)^2)
        Reciprocal,    // c0 / (x + c1)
        Quadratic,     // c0*x^2 + c1*x + c2
        RationalLin,   // (c0*x + c1) / (x + c2)
    };
    Kind kind = Kind::Quadratic;
    std::array<double, 6> c{};
};

/// Piecewise-constant density: masses[i] covers [edges[i], edges[i+1]).
/// Evaluation outside the edge range clamps into the first / last bin.
struct Histogram {
    std::vector<double> edges;   // ascending, masses.size() + 1 entries
    std::vector<double> masses;  // non-negative; sum 1 for a trained density
};

using Density = std::variant<ParamCurve, Histogram>;

/// Smallest value any density evaluation (and any pmf entry fed to a log)
/// is allowed to return; keeps the score finite on fitted-curve tails.
inline constexpr double kDensityFloor = 1e-12;

/// Density at x, floored at kDensityFloor.
double density_eval(const Density& d, double x);

struct BayesModel {
    double prior_present = 0.5;
    double prior_missing = 0.5;
    /// cond[f][k]: continuous feature f (0:fee, 1:age, 2:rank), class k
    /// (0: present, 1: missing).
    std::array<std::array<Density, 2>, 3> cond{};
    /// x4 pmf per class, same class indexing.
    std::array<double, 2> x4_present{0.5, 0.5};
    std::array<double, 2> x4_missing{0.5, 0.5};
};

struct ClassifyResult {
    TxClass label = TxClass::Missing;
    double score_present = 0;  // log prior + sum of log conditionals
    double score_missing = 0;
};

/// The fitted model shipped with the protocol: priors 0.92 / 0.08, rational
/// fee curves, two-Gaussian / reciprocal age curves, quadratic / rational
/// rank curves, and the 0.99/0.01, 0.23/0.77 presence pmf.
BayesModel paper_model();

/// Held-out validation counts shipped with the fitted model
/// (positive = missing): tp 9385, fn 12182, fp 483, tn 177950.
struct ConfusionMatrix {
    std::uint64_t tp = 0, fn = 0, fp = 0, tn = 0;

    std::optional<double> precision() const {
        if (tp + fp == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    std::optional<double> recall() const {
        if (tp + fn == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
};
ConfusionMatrix paper_confusion();

/// Log-domain Naive Bayes decision per the product rule; a tie classifies
/// as Missing (a spurious full tx costs bytes, a spurious short id costs a
/// round trip).
ClassifyResult classify(const BayesModel& model, const FeatureVector& f);

/// Features for the n-th of m block transactions. received_at is when this
/// node first saw the tx (nullopt if it never did -> age 0); present_now is
/// current Tx-Pool / Secondary Pool membership and becomes x4, so a tx that
/// was seen but has since been dropped keeps its age with x4 = false.
/// Throws std::invalid_argument unless 1 <= n <= m.
FeatureVector extract_features(const Transaction& tx, std::size_t n, std::size_t m,
                               std::optional<SimMs> received_at, bool present_now, SimMs now);
/// Shorthand for the common case where seen-ever and held-now coincide.
FeatureVector extract_features(const Transaction& tx, std::size_t n, std::size_t m,
                               std::optional<SimMs> received_at, SimMs now);

struct BinsConfig {
    std::size_t fee_bins = 50;
    double fee_max = 200;  // gWei; overflow lands in the last bin
    std::size_t age_bins = 50;
    double age_max = 200;  // seconds
    std::size_t rank_bins = 20;
};

/// Histogram-estimated model: priors and x4 pmf by frequency (x4 Laplace
/// smoothed), continuous conditionals as per-class normalized histograms.
/// Throws std::invalid_argument unless both classes appear.
BayesModel train(const std::vector<LabeledSample>& samples, const BinsConfig& bins);
BayesModel train(const std::vector<LabeledSample>& samples);

/// Confusion counts of model over test, with Missing as the positive class.
ConfusionMatrix evaluate(const BayesModel& model, const std::vector<LabeledSample>& test);

/// Model file: JSON with priors, per-feature density descriptors (curve
/// name + coefficients, or bin edges + masses) and the x4 pmf.
std::string model_to_json(const BayesModel& model);
BayesModel model_from_json(const std::string& text);  // throws std::runtime_error
void save_model(const BayesModel& model, const std::string& path);
BayesModel load_model(const std::string& path);

/// Dataset file: one JSON object per line with keys fee_gwei, age_s,
/// rank_ratio, present_at_sender, label ("present" | "missing").
std::string dataset_to_jsonl(const std::vector<LabeledSample>& samples);
std::vector<LabeledSample> dataset_from_jsonl(std::istream& in);  // throws std::runtime_error
void save_dataset(const std::vector<LabeledSample>& samples, const std::string& path);
std::vector<LabeledSample> load_dataset(const std::string& path);

}  // namespace hcb
