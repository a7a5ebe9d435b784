#include "beesense/eval/timing.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "beesense/error.hpp"

namespace beesense::eval {

std::string environment_note() {
    std::string note;
#if defined(__clang__)
    note += "clang " __clang_version__;
#elif defined(__GNUC__)
    note += "gcc " + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__);
#else
    note += "unknown compiler";
#endif
#ifdef NDEBUG
    note += ", optimized";
#else
    note += ", debug";
#endif
    note += ", " + std::to_string(std::thread::hardware_concurrency()) + " hardware thread(s), single-threaded inference";
    return note;
}

TimingReport measure_times(const std::vector<TimedModel>& models, std::size_t repetitions) {
    require(repetitions >= 1, ErrorKind::Parameter, "need at least one repetition");
    TimingReport report;
    report.environment = environment_note();
    std::vector<std::vector<double>> samples(models.size());
    for (const auto& m : models) {
        require(m.graph != nullptr, ErrorKind::Parameter, "timed model '" + m.name + "' has no graph");
        (void)m.graph->predict(m.batch);
    }
    for (std::size_t r = 0; r < repetitions; ++r) {
        for (std::size_t i = 0; i < models.size(); ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto out = models[i].graph->predict(models[i].batch);
            const auto t1 = std::chrono::steady_clock::now();
            samples[i].push_back(std::chrono::duration<double>(t1 - t0).count());
        }
    }
    for (std::size_t i = 0; i < models.size(); ++i) {
        TimingEntry e;
        e.model = models[i].name;
        e.training_seconds = models[i].training_seconds;
        e.repetitions = repetitions;
        e.batch_size = models[i].batch.empty() ? 0 : models[i].batch.begin()->second.dim(0);
        double sum = 0.0;
        for (double s : samples[i]) {
            sum += s;
        }
        e.inference_seconds = sum / static_cast<double>(repetitions);
        double ss = 0.0;
        for (double s : samples[i]) {
            ss += (s - e.inference_seconds) * (s - e.inference_seconds);
        }
        e.inference_stddev = repetitions > 1 ? std::sqrt(ss / static_cast<double>(repetitions - 1)) : 0.0;
        report.entries.push_back(e);
    }
    return report;
}

}  // namespace beesense::eval
