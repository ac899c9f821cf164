#pragma once

#include "relia/imbalance.hpp"
#include "relia/space.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace relia {

enum class ModelKind { logistic, tree, knn };

ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind kind);

struct ModelHyper {
    std::size_t epochs = 500;
    double learning_rate = 0.1;
    std::size_t max_depth = 8;
    std::size_t min_leaf = 5;
    std::size_t knn_k = 5;
};

/// Training data on unit-cube features.
struct TrainingData {
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    std::vector<double> weights;

    std::size_t size() const { return labels.size(); }
};

TrainingData to_training_data(const RebalancedSet& set, const SearchSpace& space);

// ---------------------------------------------------------------------------
// Logistic regression

struct LogisticParams {
    std::vector<double> weights;
    double bias = 0.0;
};

/// Weighted mean binary cross-entropy.
double logistic_loss(const LogisticParams& p, const TrainingData& data);
/// Gradient of logistic_loss; the last entry is the bias derivative.
std::vector<double> logistic_gradient(const LogisticParams& p, const TrainingData& data);

struct LogisticModel {
    LogisticParams params;
    double probability(std::span<const double> unit) const;
};

// ---------------------------------------------------------------------------
// CART

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;  // feature value <= threshold
    int right = -1; // feature value > threshold
    int label = 0;
};

struct TreeModel {
    std::vector<TreeNode> nodes; // nodes[0] is the root
    std::size_t depth() const;
    int predict(std::span<const double> unit) const;
};

// ---------------------------------------------------------------------------
// k-NN

struct KnnModel {
    std::size_t k = 5;
    std::vector<std::vector<double>> points;
    std::vector<int> labels;
    /// Majority of the k nearest rows (ties in distance by row order); an
    /// even vote goes to label 0.
    int predict(std::span<const double> unit) const;
};

// ---------------------------------------------------------------------------

struct TrainingReport {
    std::size_t epochs = 0;
    double learning_rate = 0.0;
    double final_loss = 0.0;
    double gradient_norm = 0.0;
    std::vector<double> loss_history;
    std::vector<std::string> warnings;
};

/// Binary classifier over distortion levels. Features are unit-cube
/// coordinates of the search space captured at training time.
class DistortionClassifier {
public:
    using Params = std::variant<LogisticModel, TreeModel, KnnModel>;

    DistortionClassifier(ModelKind kind, ModelHyper hyper, SearchSpace space, Params params);

    ModelKind kind() const { return kind_; }
    const ModelHyper& hyper() const { return hyper_; }
    const SearchSpace& space() const { return space_; }
    const Params& params() const { return params_; }

    /// Throws ValidationError when `level` is not in the training space.
    int predict_label(const DistortionLevel& level) const;
    int predict_unit(std::span<const double> unit) const;

    nlohmann::json to_json() const;
    static DistortionClassifier from_json(const nlohmann::json& doc);

    const TrainingReport& report() const { return report_; }
    void set_report(TrainingReport r) { report_ = std::move(r); }

private:
    ModelKind kind_;
    ModelHyper hyper_;
    SearchSpace space_;
    Params params_;
    TrainingReport report_;
};

/// Logistic regression: full-batch gradient descent on the weighted loss.
/// The loss must not rise between epochs (1e-9 slack); on a rise training
/// restarts once at half the rate, and a second rise raises NumericalError.
/// Decision tree: CART with weighted Gini impurity. k-NN: stores the rows;
/// weights are ignored with a warning in the report. `seed` is accepted for
/// interface stability; all three learners are deterministic.
/// Throws ValidationError when either class is missing.
DistortionClassifier train(ModelKind kind, const RebalancedSet& data, const SearchSpace& space,
                           const ModelHyper& hyper, std::uint64_t seed = 0);

DistortionClassifier train(ModelKind kind, const TrainingData& data, const SearchSpace& space,
                           const ModelHyper& hyper);

inline int predict_label(const DistortionClassifier& model, const DistortionLevel& level)
{
    return model.predict_label(level);
}

} // namespace relia
