#include "beesense/eval/crossval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "beesense/error.hpp"
#include "beesense/ingest/split.hpp"

namespace beesense::eval {

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) {
        return out;
    }
    // Welford updates: a constant sequence keeps mean == value and m2 == 0.
    double m2 = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        ++n;
        const double delta = v - out.mean;
        out.mean += delta / static_cast<double>(n);
        m2 += delta * (v - out.mean);
    }
    if (n > 1) {
        out.std = std::sqrt(m2 / static_cast<double>(n - 1));
    }
    return out;
}

CrossValReport run_cross_validation(const ModelFactory& factory, const nn::Dataset& data,
                                    const std::vector<std::string>& ids, const CrossValOptions& options) {
    data.validate();
    require(ids.size() == data.size(), ErrorKind::Data, "one id per dataset row is required");
    require(options.val_fraction >= 0.0 && options.val_fraction < 1.0, ErrorKind::Parameter,
            "validation fraction must lie in [0, 1)");
    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!row_of.emplace(ids[i], i).second) {
            fail(ErrorKind::Data, "duplicate id '" + ids[i] + "'");
        }
    }
    std::vector<int> labels;
    for (auto l : data.labels) {
        labels.push_back(static_cast<int>(l));
    }
    const auto plans = options.stratified ? ingest::stratified_kfold_ids(ids, labels, options.k, options.seed)
                                          : ingest::kfold_ids(ids, options.k, options.seed);

    auto rows_for = [&](const std::vector<std::string>& list) {
        std::vector<std::size_t> rows;
        rows.reserve(list.size());
        for (const auto& id : list) {
            rows.push_back(row_of.at(id));
        }
        return rows;
    };

    CrossValReport report;
    Rng root(options.seed);
    std::vector<double> acc, prec, rec, f1;
    for (std::size_t f = 0; f < plans.size(); ++f) {
        const auto& plan = plans[f];
        Rng fold_rng = root.fork(f + 1);

        std::vector<std::string> train_ids = plan.train_ids;
        fold_rng.shuffle(std::span<std::string>(train_ids));
        const auto n_val = static_cast<std::size_t>(std::floor(options.val_fraction * static_cast<double>(train_ids.size())));
        std::vector<std::string> val_ids(train_ids.begin(), train_ids.begin() + static_cast<std::ptrdiff_t>(n_val));
        train_ids.erase(train_ids.begin(), train_ids.begin() + static_cast<std::ptrdiff_t>(n_val));
        std::sort(train_ids.begin(), train_ids.end());
        std::sort(val_ids.begin(), val_ids.end());

        const auto train_rows = rows_for(train_ids);
        const auto val_rows = rows_for(val_ids);
        const auto test_rows = rows_for(plan.test_ids);
        const nn::Dataset train_set = data.subset(train_rows);
        const nn::Dataset val_set = data.subset(val_rows);
        const nn::Dataset test_set = data.subset(test_rows);

        for (std::size_t c = 0; c < data.n_classes; ++c) {
            if (std::find(test_set.labels.begin(), test_set.labels.end(), c) == test_set.labels.end()) {
                report.warnings.push_back("fold " + std::to_string(f + 1) + ": test set has no samples of class " +
                                          std::to_string(c));
            }
        }

        nn::NetworkGraph graph = factory();
        graph.initialize(fold_rng.next());
        nn::Optimizer optimizer(options.optimizer);
        nn::TrainOptions topt = options.train;
        topt.seed = fold_rng.next();
        const auto history = nn::train(graph, train_set, val_set.empty() ? nullptr : &val_set, options.loss,
                                       optimizer, topt);
        const auto result = nn::evaluate(graph, test_set, options.loss, std::max<std::size_t>(1, topt.batch_size));

        FoldResult fr;
        fr.fold = f + 1;
        fr.n_train = train_set.size();
        fr.n_val = val_set.size();
        fr.n_test = test_set.size();
        fr.test_loss = result.loss;
        fr.test_ids = plan.test_ids;
        fr.truth = test_set.labels;
        fr.predicted = result.predictions;
        fr.metrics = classification_metrics(ConfusionMatrix::from_predictions(fr.truth, fr.predicted, data.n_classes));
        fr.epochs_run = history.epochs.size();
        fr.train_seconds = history.seconds;
        acc.push_back(fr.metrics.accuracy);
        prec.push_back(fr.metrics.weighted_precision);
        rec.push_back(fr.metrics.weighted_recall);
        f1.push_back(fr.metrics.weighted_f1);
        report.folds.push_back(std::move(fr));
    }
    report.accuracy = mean_std(acc);
    report.precision = mean_std(prec);
    report.recall = mean_std(rec);
    report.f1 = mean_std(f1);
    return report;
}

}  // namespace beesense::eval
