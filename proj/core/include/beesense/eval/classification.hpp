#pragma once

#include <string>
#include <vector>

namespace beesense::eval {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t n_classes, std::vector<std::string> class_names = {});

    static ConfusionMatrix from_predictions(const std::vector<std::size_t>& truth,
                                            const std::vector<std::size_t>& predicted, std::size_t n_classes,
                                            std::vector<std::string> class_names = {});

    void add(std::size_t truth, std::size_t predicted, std::size_t count = 1);

    std::size_t size() const noexcept { return n_; }
    std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * n_ + predicted); }
    std::size_t total() const;
    std::size_t trace() const;
    const std::vector<std::string>& class_names() const noexcept { return names_; }

private:
    std::size_t n_;
    std::vector<std::size_t> counts_;
    std::vector<std::string> names_;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    /// Set when a ratio had a zero denominator and was reported as 0.
    bool zero_division = false;
};

struct ClassificationReport {
    double accuracy = 0.0;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    std::vector<ClassMetrics> per_class;
    std::size_t total = 0;
};

/// accuracy = trace / total; per-class ratios with 0/0 = 0; aggregates
/// weighted by class support. An all-zero matrix raises an empty-input error.
ClassificationReport classification_metrics(const ConfusionMatrix& cm);

/// Of the samples model A gets wrong, the fraction model B gets right.
double complementarity(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& model_a,
                       const std::vector<std::size_t>& model_b);

}  // namespace beesense::eval
