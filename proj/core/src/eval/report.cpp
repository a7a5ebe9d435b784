#include "beesense/eval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "beesense/error.hpp"

namespace beesense::eval {
namespace {

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pct(double v) { return fixed(100.0 * v, 2); }

/// Left-aligned first column, right-aligned rest, separated by two spaces.
std::string render(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& r : rows) {
            width[c] = std::max(width[c], r[c].size());
        }
    }
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c) {
                out << "  ";
            }
            const std::string pad(width[c] - cells[c].size(), ' ');
            out << (c == 0 ? cells[c] + pad : pad + cells[c]);
        }
        out << '\n';
    };
    line(header);
    std::size_t total = 0;
    for (auto w : width) {
        total += w;
    }
    out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    for (const auto& r : rows) {
        line(r);
    }
    return out.str();
}

}  // namespace

std::string classification_csv(const std::vector<ClassificationRow>& rows) {
    std::ostringstream out;
    out << "model,feature,accuracy,precision,recall,f1,support\n";
    for (const auto& r : rows) {
        out << r.model << ',' << r.feature << ',' << fixed(r.metrics.accuracy) << ','
            << fixed(r.metrics.weighted_precision) << ',' << fixed(r.metrics.weighted_recall) << ','
            << fixed(r.metrics.weighted_f1) << ',' << r.metrics.total << '\n';
    }
    return out.str();
}

std::string per_class_csv(const std::string& model, const ClassificationReport& report,
                          const std::vector<std::string>& class_names) {
    std::ostringstream out;
    out << "model,class,precision,recall,f1,support\n";
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const auto& m = report.per_class[c];
        out << model << ',' << (c < class_names.size() ? class_names[c] : std::to_string(c)) << ','
            << fixed(m.precision) << ',' << fixed(m.recall) << ',' << fixed(m.f1) << ',' << m.support << '\n';
    }
    return out.str();
}

std::string crossval_csv(const std::string& model, const CrossValReport& report) {
    std::ostringstream out;
    out << "model,fold,n_train,n_val,n_test,accuracy,precision,recall,f1\n";
    for (const auto& f : report.folds) {
        out << model << ',' << f.fold << ',' << f.n_train << ',' << f.n_val << ',' << f.n_test << ','
            << fixed(f.metrics.accuracy) << ',' << fixed(f.metrics.weighted_precision) << ','
            << fixed(f.metrics.weighted_recall) << ',' << fixed(f.metrics.weighted_f1) << '\n';
    }
    out << model << ",mean,,,," << fixed(report.accuracy.mean) << ',' << fixed(report.precision.mean) << ','
        << fixed(report.recall.mean) << ',' << fixed(report.f1.mean) << '\n';
    out << model << ",std,,,," << fixed(report.accuracy.std) << ',' << fixed(report.precision.std) << ','
        << fixed(report.recall.std) << ',' << fixed(report.f1.std) << '\n';
    return out.str();
}

std::string detection_csv(const std::vector<DetectionRow>& rows) {
    std::ostringstream out;
    out << "model,precision,recall,map50,map50_95\n";
    for (const auto& r : rows) {
        out << r.model << ',' << fixed(r.result.precision50) << ',' << fixed(r.result.recall50) << ','
            << fixed(r.result.map50) << ',' << fixed(r.result.map_range) << '\n';
    }
    return out.str();
}

std::string timing_csv(const TimingReport& report) {
    std::ostringstream out;
    out << "model,training_s,inference_s,inference_std_s,repetitions,batch_size\n";
    for (const auto& e : report.entries) {
        out << e.model << ',' << fixed(e.training_seconds) << ',' << fixed(e.inference_seconds, 9) << ','
            << fixed(e.inference_stddev, 9) << ',' << e.repetitions << ',' << e.batch_size << '\n';
    }
    return out.str();
}

std::string classification_table(const std::vector<ClassificationRow>& rows) {
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
        cells.push_back({r.model, r.feature, pct(r.metrics.accuracy), pct(r.metrics.weighted_precision),
                         pct(r.metrics.weighted_recall), pct(r.metrics.weighted_f1)});
    }
    return render({"Model", "Feature", "Accuracy (%)", "Precision (%)", "Recall (%)", "F1-score (%)"}, cells);
}

std::string confusion_table(const ConfusionMatrix& cm) {
    std::vector<std::string> header{"truth \\ predicted"};
    for (const auto& n : cm.class_names()) {
        header.push_back(n);
    }
    std::vector<std::vector<std::string>> cells;
    for (std::size_t t = 0; t < cm.size(); ++t) {
        std::vector<std::string> row{cm.class_names()[t]};
        for (std::size_t p = 0; p < cm.size(); ++p) {
            row.push_back(std::to_string(cm.at(t, p)));
        }
        cells.push_back(std::move(row));
    }
    return render(header, cells);
}

std::string crossval_table(const std::string& model, const CrossValReport& report) {
    std::vector<std::vector<std::string>> cells;
    for (const auto& f : report.folds) {
        cells.push_back({model, std::to_string(f.fold), pct(f.metrics.accuracy), pct(f.metrics.weighted_precision),
                         pct(f.metrics.weighted_recall), pct(f.metrics.weighted_f1)});
    }
    auto pm = [](const MeanStd& m) { return pct(m.mean) + " +/- " + pct(m.std); };
    cells.push_back({model, "mean +/- std", pm(report.accuracy), pm(report.precision), pm(report.recall), pm(report.f1)});
    std::string text = render({"Model", "Fold", "Accuracy (%)", "Precision (%)", "Recall (%)", "F1-score (%)"}, cells);
    for (const auto& w : report.warnings) {
        text += "warning: " + w + '\n';
    }
    return text;
}

std::string detection_table(const std::vector<DetectionRow>& rows) {
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
        cells.push_back({r.model, pct(r.result.precision50), pct(r.result.recall50), pct(r.result.map50),
                         pct(r.result.map_range)});
    }
    return render({"Model", "Precision (%)", "Recall (%)", "mAP@50 (%)", "mAP@50-95 (%)"}, cells);
}

std::string timing_table(const TimingReport& report) {
    std::vector<std::vector<std::string>> cells;
    for (const auto& e : report.entries) {
        cells.push_back({e.model, fixed(e.training_seconds, 2), fixed(e.inference_seconds, 4)});
    }
    return render({"Model", "Training Time (s)", "Inference Time (s)"}, cells) + "environment: " + report.environment +
           '\n';
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorKind::Io, "cannot write " + path.string());
    }
    out << text;
    if (!out) {
        fail(ErrorKind::Io, "failed writing " + path.string());
    }
}

}  // namespace beesense::eval
