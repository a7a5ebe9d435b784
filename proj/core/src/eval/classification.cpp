#include "beesense/eval/classification.hpp"

#include "beesense/error.hpp"

namespace beesense::eval {

ConfusionMatrix::ConfusionMatrix(std::size_t n_classes, std::vector<std::string> class_names)
    : n_(n_classes), counts_(n_classes * n_classes, 0), names_(std::move(class_names)) {
    require(n_classes > 0, ErrorKind::Parameter, "confusion matrix needs at least one class");
    if (names_.empty()) {
        for (std::size_t i = 0; i < n_; ++i) {
            names_.push_back("class_" + std::to_string(i));
        }
    }
    require(names_.size() == n_, ErrorKind::Parameter, "class name count does not match class count");
}

ConfusionMatrix ConfusionMatrix::from_predictions(const std::vector<std::size_t>& truth,
                                                  const std::vector<std::size_t>& predicted, std::size_t n_classes,
                                                  std::vector<std::string> class_names) {
    require(truth.size() == predicted.size(), ErrorKind::Shape, "truth and prediction counts differ");
    ConfusionMatrix cm(n_classes, std::move(class_names));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        cm.add(truth[i], predicted[i]);
    }
    return cm;
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::size_t count) {
    require(truth < n_ && predicted < n_, ErrorKind::Range, "class index outside the confusion matrix");
    counts_[truth * n_ + predicted] += count;
}

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (auto c : counts_) {
        t += c;
    }
    return t;
}

std::size_t ConfusionMatrix::trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < n_; ++i) {
        t += counts_[i * n_ + i];
    }
    return t;
}

ClassificationReport classification_metrics(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    if (total == 0) {
        fail(ErrorKind::EmptyInput, "confusion matrix is empty");
    }
    const std::size_t n = cm.size();
    ClassificationReport r;
    r.total = total;
    r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t predicted = 0;
        std::size_t actual = 0;
        for (std::size_t k = 0; k < n; ++k) {
            predicted += cm.at(k, c);
            actual += cm.at(c, k);
        }
        const double tp = static_cast<double>(cm.at(c, c));
        ClassMetrics m;
        m.support = actual;
        if (predicted) {
            m.precision = tp / static_cast<double>(predicted);
        } else {
            m.zero_division = true;
        }
        if (actual) {
            m.recall = tp / static_cast<double>(actual);
        } else {
            m.zero_division = true;
        }
        if (m.precision + m.recall > 0.0) {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        } else {
            m.zero_division = true;
        }
        const double w = static_cast<double>(actual) / static_cast<double>(total);
        r.weighted_precision += w * m.precision;
        r.weighted_recall += w * m.recall;
        r.weighted_f1 += w * m.f1;
        r.per_class.push_back(m);
    }
    return r;
}

double complementarity(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& model_a,
                       const std::vector<std::size_t>& model_b) {
    require(truth.size() == model_a.size() && truth.size() == model_b.size(), ErrorKind::Shape,
            "prediction lists differ in length");
    std::size_t wrong = 0;
    std::size_t rescued = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (model_a[i] != truth[i]) {
            ++wrong;
            rescued += model_b[i] == truth[i] ? 1 : 0;
        }
    }
    return wrong ? static_cast<double>(rescued) / static_cast<double>(wrong) : 0.0;
}

}  // namespace beesense::eval
