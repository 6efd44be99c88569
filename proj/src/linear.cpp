#include "bugseg/error.hpp"
#include "bugseg/learners.hpp"

#include <cmath>

namespace bugseg {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) - y z without overflow.
double log_loss(double z, int y) {
    return std::max(z, 0.0) - (y ? z : 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double margin(std::span<const double> w, double b, std::span<const double> x) {
    double z = b;
    for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * x[j];
    return z;
}

} // namespace

LinearModel::LinearModel(std::vector<double> weights, double bias, LinearHyper hyper, int epochs, std::uint64_t seed)
    : weights_(std::move(weights)), bias_(bias), hyper_(hyper), epochs_(epochs), seed_(seed) {}

double LinearModel::predict_proba(std::span<const double> features) const {
    if (features.size() != weights_.size()) throw DimensionError("linear model: wrong feature count");
    return sigmoid(margin(weights_, bias_, features));
}

nlohmann::json LinearModel::hyperparameters() const {
    return {{"l2", hyper_.l2},
            {"learning_rate", hyper_.learning_rate},
            {"max_epochs", hyper_.max_epochs},
            {"tolerance", hyper_.tolerance}};
}

nlohmann::json LinearModel::state() const {
    return {{"weights", weights_}, {"bias", bias_}, {"epochs", epochs_}};
}

LinearHyper LinearModel::hyper_from_json(const nlohmann::json& j) {
    LinearHyper h;
    h.l2 = j.value("l2", h.l2);
    h.learning_rate = j.value("learning_rate", h.learning_rate);
    h.max_epochs = j.value("max_epochs", h.max_epochs);
    h.tolerance = j.value("tolerance", h.tolerance);
    return h;
}

LogisticObjective logistic_objective(std::span<const double> weights, double bias, const Dataset& data, double l2) {
    if (weights.size() != data.dim) throw DimensionError("weight count does not match data width");
    LogisticObjective obj;
    obj.grad_weights.assign(data.dim, 0.0);
    const auto n = static_cast<double>(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto x = data.row(i);
        const double z = margin(weights, bias, x);
        obj.loss += log_loss(z, data.y[i]);
        const double r = sigmoid(z) - data.y[i];
        for (std::size_t j = 0; j < data.dim; ++j) obj.grad_weights[j] += r * x[j];
        obj.grad_bias += r;
    }
    obj.loss /= n;
    obj.grad_bias /= n;
    double w2 = 0.0;
    for (std::size_t j = 0; j < data.dim; ++j) {
        obj.grad_weights[j] = obj.grad_weights[j] / n + l2 * weights[j];
        w2 += weights[j] * weights[j];
    }
    obj.loss += 0.5 * l2 * w2;
    return obj;
}

std::shared_ptr<LinearModel> train_linear(const Dataset& train, const LinearHyper& hyper, std::uint64_t seed) {
    if (train.empty()) throw ParameterError("linear model: empty training set");
    if (!(hyper.learning_rate > 0.0) || !(hyper.l2 >= 0.0) || hyper.max_epochs < 0) {
        throw ParameterError("linear model: learning rate must be positive, l2 non-negative");
    }
    std::vector<double> w(train.dim, 0.0);
    double b = 0.0;
    const double shrink = 1.0 / (1.0 + hyper.learning_rate * hyper.l2);
    int epoch = 0;
    for (; epoch < hyper.max_epochs; ++epoch) {
        auto obj = logistic_objective(w, b, train, hyper.l2);
        if (!std::isfinite(obj.loss)) {
            throw DivergenceError("logistic regression diverged at epoch " + std::to_string(epoch) +
                                  "; try a smaller learning rate");
        }
        double g2 = obj.grad_bias * obj.grad_bias;
        for (double g : obj.grad_weights) g2 += g * g;
        if (std::sqrt(g2) < hyper.tolerance) break;

        // Gradient step on the data term, then the closed-form L2 prox.
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double data_grad = obj.grad_weights[j] - hyper.l2 * w[j];
            w[j] = (w[j] - hyper.learning_rate * data_grad) * shrink;
        }
        b -= hyper.learning_rate * obj.grad_bias;
    }
    for (double v : w) {
        if (!std::isfinite(v)) throw DivergenceError("logistic regression diverged; try a smaller learning rate");
    }
    return std::make_shared<LinearModel>(std::move(w), b, hyper, epoch, seed);
}

} // namespace bugseg
