#include "relia/predictor.hpp"

#include "relia/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace relia {

ModelKind parse_model_kind(const std::string& name)
{
    if (name == "logistic-regression")
        return ModelKind::logistic;
    if (name == "decision-tree")
        return ModelKind::tree;
    if (name == "k-nn" || name == "knn")
        return ModelKind::knn;
    throw ValidationError("unknown model kind '" + name + "'");
}

std::string to_string(ModelKind kind)
{
    switch (kind) {
    case ModelKind::logistic: return "logistic-regression";
    case ModelKind::tree: return "decision-tree";
    case ModelKind::knn: return "k-nn";
    }
    return "unknown";
}

TrainingData to_training_data(const RebalancedSet& set, const SearchSpace& space)
{
    TrainingData data;
    data.features.reserve(set.samples.size());
    for (const auto& s : set.samples) {
        data.features.push_back(space.normalize(DistortionLevel{s.coords}));
        data.labels.push_back(s.label);
        data.weights.push_back(s.weight);
    }
    return data;
}

// ---------------------------------------------------------------------------

namespace {

double linear_score(const LogisticParams& p, std::span<const double> x)
{
    double z = p.bias;
    for (std::size_t j = 0; j < x.size(); ++j)
        z += p.weights[j] * x[j];
    return z;
}

double sigmoid(double z)
{
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z)
{
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double total_weight(const TrainingData& data)
{
    return std::accumulate(data.weights.begin(), data.weights.end(), 0.0);
}

} // namespace

double logistic_loss(const LogisticParams& p, const TrainingData& data)
{
    double loss = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double z = linear_score(p, data.features[i]);
        loss += data.weights[i] * (softplus(z) - data.labels[i] * z);
    }
    return loss / total_weight(data);
}

std::vector<double> logistic_gradient(const LogisticParams& p, const TrainingData& data)
{
    const std::size_t d = p.weights.size();
    std::vector<double> grad(d + 1, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double r = data.weights[i] * (sigmoid(linear_score(p, data.features[i])) - data.labels[i]);
        for (std::size_t j = 0; j < d; ++j)
            grad[j] += r * data.features[i][j];
        grad[d] += r;
    }
    const double w = total_weight(data);
    for (double& g : grad)
        g /= w;
    return grad;
}

double LogisticModel::probability(std::span<const double> unit) const
{
    return sigmoid(linear_score(params, unit));
}

std::size_t TreeModel::depth() const
{
    std::vector<std::size_t> level(nodes.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, level[i]);
        if (nodes[i].feature >= 0) {
            level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
            level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
        }
    }
    return deepest;
}

int TreeModel::predict(std::span<const double> unit) const
{
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(unit[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                              : n.right);
    }
    return nodes[i].label;
}

int KnnModel::predict(std::span<const double> unit) const
{
    std::vector<std::pair<double, std::size_t>> dist(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < unit.size(); ++j) {
            const double d = points[i][j] - unit[j];
            sq += d * d;
        }
        dist[i] = {sq, i};
    }
    const std::size_t kk = std::min(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    std::size_t positives = 0;
    for (std::size_t i = 0; i < kk; ++i)
        positives += labels[dist[i].second] == 1 ? 1 : 0;
    return 2 * positives > kk ? 1 : 0;
}

// ---------------------------------------------------------------------------

DistortionClassifier::DistortionClassifier(ModelKind kind, ModelHyper hyper, SearchSpace space,
                                           Params params)
    : kind_(kind), hyper_(hyper), space_(std::move(space)), params_(std::move(params))
{
}

int DistortionClassifier::predict_unit(std::span<const double> unit) const
{
    if (unit.size() != space_.dim())
        throw ValidationError("feature vector has " + std::to_string(unit.size()) +
                              " entries, model expects " + std::to_string(space_.dim()));
    return std::visit(
        [&](const auto& m) -> int {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, LogisticModel>)
                return m.probability(unit) >= 0.5 ? 1 : 0;
            else
                return m.predict(unit);
        },
        params_);
}

int DistortionClassifier::predict_label(const DistortionLevel& level) const
{
    space_.check(level);
    return predict_unit(space_.normalize(level));
}

nlohmann::json DistortionClassifier::to_json() const
{
    nlohmann::json doc;
    doc["format"] = "relia-distortion-classifier";
    doc["version"] = 1;
    doc["kind"] = to_string(kind_);
    doc["hyper"] = {{"epochs", hyper_.epochs},       {"learning_rate", hyper_.learning_rate},
                    {"max_depth", hyper_.max_depth}, {"min_leaf", hyper_.min_leaf},
                    {"knn_k", hyper_.knn_k}};
    auto& dims = doc["space"] = nlohmann::json::array();
    for (const auto& d : space_.dims())
        dims.push_back({{"name", d.name}, {"lower", d.lower}, {"upper", d.upper}});

    nlohmann::json params;
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, LogisticModel>) {
                params["weights"] = m.params.weights;
                params["bias"] = m.params.bias;
            } else if constexpr (std::is_same_v<M, TreeModel>) {
                auto& nodes = params["nodes"] = nlohmann::json::array();
                for (const auto& n : m.nodes)
                    nodes.push_back({{"feature", n.feature},
                                     {"threshold", n.threshold},
                                     {"left", n.left},
                                     {"right", n.right},
                                     {"label", n.label}});
            } else {
                params["k"] = m.k;
                params["points"] = m.points;
                params["labels"] = m.labels;
            }
        },
        params_);
    doc["params"] = std::move(params);
    return doc;
}

DistortionClassifier DistortionClassifier::from_json(const nlohmann::json& doc)
{
    try {
        if (doc.at("format").get<std::string>() != "relia-distortion-classifier")
            throw ValidationError("not a distortion-classifier document");
        if (doc.at("version").get<int>() != 1)
            throw ValidationError("unsupported model version " + doc.at("version").dump());
        const ModelKind kind = parse_model_kind(doc.at("kind").get<std::string>());
        ModelHyper hyper;
        const auto& h = doc.at("hyper");
        hyper.epochs = h.at("epochs").get<std::size_t>();
        hyper.learning_rate = h.at("learning_rate").get<double>();
        hyper.max_depth = h.at("max_depth").get<std::size_t>();
        hyper.min_leaf = h.at("min_leaf").get<std::size_t>();
        hyper.knn_k = h.at("knn_k").get<std::size_t>();
        std::vector<Dimension> dims;
        for (const auto& d : doc.at("space"))
            dims.push_back({d.at("name").get<std::string>(), d.at("lower").get<double>(),
                            d.at("upper").get<double>()});
        SearchSpace space(std::move(dims));

        const auto& p = doc.at("params");
        Params params;
        switch (kind) {
        case ModelKind::logistic: {
            LogisticModel m;
            m.params.weights = p.at("weights").get<std::vector<double>>();
            m.params.bias = p.at("bias").get<double>();
            if (m.params.weights.size() != space.dim())
                throw ValidationError("logistic weights do not match the space dimension");
            params = m;
            break;
        }
        case ModelKind::tree: {
            TreeModel m;
            for (const auto& n : p.at("nodes"))
                m.nodes.push_back({n.at("feature").get<int>(), n.at("threshold").get<double>(),
                                   n.at("left").get<int>(), n.at("right").get<int>(),
                                   n.at("label").get<int>()});
            const auto count = static_cast<int>(m.nodes.size());
            if (count == 0)
                throw ValidationError("tree has no nodes");
            for (int i = 0; i < count; ++i) {
                const auto& n = m.nodes[static_cast<std::size_t>(i)];
                if (n.feature >= static_cast<int>(space.dim()) ||
                    (n.feature >= 0 && (n.left <= i || n.right <= i || n.left >= count || n.right >= count)))
                    throw ValidationError("tree node " + std::to_string(i) + " is malformed");
            }
            params = std::move(m);
            break;
        }
        case ModelKind::knn: {
            KnnModel m;
            m.k = p.at("k").get<std::size_t>();
            m.points = p.at("points").get<std::vector<std::vector<double>>>();
            m.labels = p.at("labels").get<std::vector<int>>();
            if (m.points.size() != m.labels.size() || m.points.empty())
                throw ValidationError("k-NN points and labels disagree");
            params = std::move(m);
            break;
        }
        }
        return DistortionClassifier(kind, hyper, std::move(space), std::move(params));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model document: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

namespace {

void check_training_data(const TrainingData& data, std::size_t dim)
{
    if (data.labels.size() != data.features.size() || data.weights.size() != data.features.size())
        throw ValidationError("training data columns have different lengths");
    std::size_t pos = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.features[i].size() != dim)
            throw ValidationError("training row " + std::to_string(i) + " has the wrong dimension");
        if (data.labels[i] != 0 && data.labels[i] != 1)
            throw ValidationError("training labels must be 0 or 1");
        if (!(data.weights[i] > 0.0))
            throw ValidationError("training weights must be positive");
        pos += data.labels[i] == 1 ? 1 : 0;
    }
    if (pos == 0 || pos == data.size())
        throw ValidationError("training data needs both classes, got " + std::to_string(pos) +
                              " positive of " + std::to_string(data.size()));
}

struct DescentResult {
    LogisticParams params;
    std::vector<double> history;
    double gradient_norm = 0.0;
    bool monotone = true;
};

DescentResult gradient_descent(const TrainingData& data, std::size_t dim, std::size_t epochs,
                               double rate)
{
    DescentResult r;
    r.params.weights.assign(dim, 0.0);
    r.history.reserve(epochs + 1);
    r.history.push_back(logistic_loss(r.params, data));
    for (std::size_t e = 0; e < epochs; ++e) {
        const auto grad = logistic_gradient(r.params, data);
        for (std::size_t j = 0; j < dim; ++j)
            r.params.weights[j] -= rate * grad[j];
        r.params.bias -= rate * grad[dim];
        r.history.push_back(logistic_loss(r.params, data));
        if (r.history.back() > r.history[r.history.size() - 2] + 1e-9)
            r.monotone = false;
    }
    const auto grad = logistic_gradient(r.params, data);
    r.gradient_norm = std::sqrt(std::inner_product(grad.begin(), grad.end(), grad.begin(), 0.0));
    return r;
}

double gini(double w0, double w1)
{
    const double w = w0 + w1;
    if (w <= 0.0)
        return 0.0;
    const double p0 = w0 / w;
    const double p1 = w1 / w;
    return 1.0 - p0 * p0 - p1 * p1;
}

class TreeBuilder {
public:
    TreeBuilder(const TrainingData& data, const ModelHyper& hyper) : data_(data), hyper_(hyper) {}

    TreeModel build()
    {
        std::vector<std::size_t> rows(data_.size());
        std::iota(rows.begin(), rows.end(), 0);
        model_.nodes.emplace_back();
        grow(0, rows, 0);
        return std::move(model_);
    }

private:
    void grow(std::size_t node, const std::vector<std::size_t>& rows, std::size_t depth)
    {
        double w0 = 0.0, w1 = 0.0;
        for (std::size_t r : rows)
            (data_.labels[r] == 1 ? w1 : w0) += data_.weights[r];
        model_.nodes[node].label = w1 > w0 ? 1 : 0;
        if (w0 == 0.0 || w1 == 0.0 || depth >= hyper_.max_depth || rows.size() < 2 * hyper_.min_leaf)
            return;

        const double parent = (w0 + w1) * gini(w0, w1);
        double best = parent - 1e-12;
        int best_feature = -1;
        double best_threshold = 0.0;
        const std::size_t dim = data_.features.front().size();
        std::vector<std::size_t> order = rows;
        for (std::size_t f = 0; f < dim; ++f) {
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return data_.features[a][f] < data_.features[b][f];
            });
            double l0 = 0.0, l1 = 0.0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                const std::size_t r = order[i];
                (data_.labels[r] == 1 ? l1 : l0) += data_.weights[r];
                const double v = data_.features[r][f];
                const double next = data_.features[order[i + 1]][f];
                if (i + 1 < hyper_.min_leaf || order.size() - i - 1 < hyper_.min_leaf || !(v < next))
                    continue;
                const double r0 = w0 - l0;
                const double r1 = w1 - l1;
                const double impurity = (l0 + l1) * gini(l0, l1) + (r0 + r1) * gini(r0, r1);
                if (impurity < best) {
                    best = impurity;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (v + next);
                    if (!(best_threshold < next))
                        best_threshold = v;
                }
            }
        }
        if (best_feature < 0)
            return;

        std::vector<std::size_t> left, right;
        for (std::size_t r : rows)
            (data_.features[r][static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right)
                .push_back(r);
        const auto left_id = model_.nodes.size();
        model_.nodes.emplace_back();
        const auto right_id = model_.nodes.size();
        model_.nodes.emplace_back();
        auto& n = model_.nodes[node];
        n.feature = best_feature;
        n.threshold = best_threshold;
        n.left = static_cast<int>(left_id);
        n.right = static_cast<int>(right_id);
        grow(left_id, left, depth + 1);
        grow(right_id, right, depth + 1);
    }

    const TrainingData& data_;
    const ModelHyper& hyper_;
    TreeModel model_;
};

} // namespace

DistortionClassifier train(ModelKind kind, const TrainingData& data, const SearchSpace& space,
                           const ModelHyper& hyper)
{
    check_training_data(data, space.dim());
    TrainingReport report;
    DistortionClassifier::Params params;
    switch (kind) {
    case ModelKind::logistic: {
        if (hyper.epochs < 1 || !(hyper.learning_rate > 0.0))
            throw ValidationError("logistic regression needs positive epochs and learning rate");
        double rate = hyper.learning_rate;
        auto run = gradient_descent(data, space.dim(), hyper.epochs, rate);
        if (!run.monotone) {
            rate *= 0.5;
            run = gradient_descent(data, space.dim(), hyper.epochs, rate);
            if (!run.monotone)
                throw NumericalError("logistic loss increased during training even at rate " +
                                     std::to_string(rate));
            report.warnings.push_back("loss rose at the configured rate; retrained at half rate");
        }
        report.epochs = hyper.epochs;
        report.learning_rate = rate;
        report.final_loss = run.history.back();
        report.gradient_norm = run.gradient_norm;
        report.loss_history = std::move(run.history);
        params = LogisticModel{std::move(run.params)};
        break;
    }
    case ModelKind::tree:
        if (hyper.min_leaf < 1)
            throw ValidationError("decision tree min_leaf must be positive");
        params = TreeBuilder(data, hyper).build();
        break;
    case ModelKind::knn: {
        if (hyper.knn_k < 1)
            throw ValidationError("k-NN k must be positive");
        const bool uniform = std::all_of(data.weights.begin(), data.weights.end(),
                                         [&](double w) { return w == data.weights.front(); });
        if (!uniform)
            report.warnings.push_back("k-NN ignores sample weights");
        params = KnnModel{hyper.knn_k, data.features, data.labels};
        break;
    }
    }
    DistortionClassifier model(kind, hyper, space, std::move(params));
    model.set_report(std::move(report));
    return model;
}

DistortionClassifier train(ModelKind kind, const RebalancedSet& data, const SearchSpace& space,
                           const ModelHyper& hyper, std::uint64_t /*seed*/)
{
    return train(kind, to_training_data(data, space), space, hyper);
}

} // namespace relia
