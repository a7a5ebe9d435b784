#include "beesense/ingest/split.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "beesense/error.hpp"
#include "beesense/rng.hpp"

namespace beesense::ingest {
namespace {

void sort_unique(std::vector<std::string>& ids) {
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        fail(ErrorKind::Data, "duplicate ids in split input");
    }
}

std::vector<SplitPlan> plans_from_folds(const std::vector<std::vector<std::string>>& folds,
                                        std::uint64_t seed) {
    std::vector<SplitPlan> plans(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        plans[f].seed = seed;
        plans[f].test_ids = folds[f];
        for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g != f) {
                plans[f].train_ids.insert(plans[f].train_ids.end(), folds[g].begin(), folds[g].end());
            }
        }
    }
    return plans;
}

void check_k(std::size_t k, std::size_t n) {
    require(k >= 2, ErrorKind::Parameter, "k-fold needs k >= 2");
    if (n < k) {
        fail(ErrorKind::InsufficientData,
             std::to_string(n) + " entries cannot fill " + std::to_string(k) + " folds");
    }
}

}  // namespace

SplitPlan split_ids(std::vector<std::string> ids, std::uint64_t seed) {
    if (ids.size() < 10) {
        fail(ErrorKind::InsufficientData, "an 80/10/10 split needs at least 10 entries");
    }
    sort_unique(ids);
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(ids));

    const std::size_t n = ids.size();
    const std::size_t n_train = n * 8 / 10;
    const std::size_t n_val = n / 10;

    SplitPlan plan;
    plan.seed = seed;
    plan.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    plan.val_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                        ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    plan.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
    return plan;
}

std::vector<SplitPlan> kfold_ids(std::vector<std::string> ids, std::size_t k, std::uint64_t seed) {
    check_k(k, ids.size());
    sort_unique(ids);
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(ids));

    const std::size_t base = ids.size() / k;
    const std::size_t extra = ids.size() % k;
    std::vector<std::vector<std::string>> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        folds[f].assign(ids.begin() + static_cast<std::ptrdiff_t>(pos),
                        ids.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    }
    return plans_from_folds(folds, seed);
}

std::vector<SplitPlan> stratified_kfold_ids(std::vector<std::string> ids, const std::vector<int>& labels,
                                            std::size_t k, std::uint64_t seed) {
    require(ids.size() == labels.size(), ErrorKind::Shape, "ids and labels differ in length");
    check_k(k, ids.size());

    std::map<int, std::vector<std::string>> groups;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        groups[labels[i]].push_back(ids[i]);
    }
    Rng rng(seed);
    std::vector<std::string> dealt;
    dealt.reserve(ids.size());
    std::set<std::string> all;
    for (auto& [label, members] : groups) {
        std::sort(members.begin(), members.end());
        rng.shuffle(std::span<std::string>(members));
        dealt.insert(dealt.end(), members.begin(), members.end());
        all.insert(members.begin(), members.end());
    }
    if (all.size() != ids.size()) {
        fail(ErrorKind::Data, "duplicate ids in split input");
    }

    std::vector<std::vector<std::string>> folds(k);
    for (std::size_t p = 0; p < dealt.size(); ++p) {
        folds[p % k].push_back(dealt[p]);
    }
    return plans_from_folds(folds, seed);
}

SplitPlan make_split(const DatasetManifest& manifest, std::uint64_t seed) {
    if (manifest.entries.empty()) {
        fail(ErrorKind::EmptyInput, "manifest has no entries");
    }
    return split_ids(manifest.ids(), seed);
}

std::vector<SplitPlan> make_kfold(const DatasetManifest& manifest, std::size_t k, std::uint64_t seed) {
    return kfold_ids(manifest.ids(), k, seed);
}

std::vector<SplitPlan> make_stratified_kfold(const DatasetManifest& manifest, std::size_t k,
                                             std::uint64_t seed) {
    std::vector<int> labels;
    labels.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        labels.push_back(e.label);
    }
    return stratified_kfold_ids(manifest.ids(), labels, k, seed);
}

}  // namespace beesense::ingest
