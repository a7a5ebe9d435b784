#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "beesense/ingest/manifest.hpp"

namespace beesense::ingest {

/// Disjoint id sets. k-fold plans leave val_ids empty.
struct SplitPlan {
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> test_ids;
    std::uint64_t seed = 0;
};

// All splitters sort ids first, so the result depends only on the id set and
// the seed, never on input order. Shuffles use SplitMix64 (see rng.hpp).

/// 80/10/10 with train = floor(0.8 n), val = floor(0.1 n), test = the rest.
SplitPlan split_ids(std::vector<std::string> ids, std::uint64_t seed);

/// Contiguous chunks of one shuffled order; the first n mod k folds get one
/// extra id.
std::vector<SplitPlan> kfold_ids(std::vector<std::string> ids, std::size_t k,
                                 std::uint64_t seed);

/// Ids grouped by label (ascending), each group shuffled, then the groups are
/// concatenated and dealt round-robin onto the folds.
std::vector<SplitPlan> stratified_kfold_ids(std::vector<std::string> ids,
                                            const std::vector<int>& labels, std::size_t k,
                                            std::uint64_t seed);

SplitPlan make_split(const DatasetManifest& manifest, std::uint64_t seed);
std::vector<SplitPlan> make_kfold(const DatasetManifest& manifest, std::size_t k,
                                  std::uint64_t seed);
std::vector<SplitPlan> make_stratified_kfold(const DatasetManifest& manifest, std::size_t k,
                                             std::uint64_t seed);

}  // namespace beesense::ingest
