#pragma once

#include <string>
#include <vector>

#include "cmc/observations.hpp"

namespace cmc {

// Tab-separated "user<TAB>item<TAB>rating<TAB>timestamp" with 1-indexed ids
// and integer ratings 1..5. Duplicate (user, item) pairs keep the last value
// (a warning goes to stderr). No clip spec is attached.
ObservedEntries load_movielens(const std::string& path);

// Whitespace-separated "user item rating" with ratings on the 0.5..4.0 grid
// (stride 0.5). With double_ratings the values become integers 1..8.
ObservedEntries load_filmtrust(const std::string& path, bool double_ratings);

struct PruneResult {
  ObservedEntries train;
  ObservedEntries val;
  ObservedEntries test;
  std::vector<Index> kept_rows;  // new index -> old index
  std::vector<Index> kept_cols;
};

// Rows/columns without training entries are removed from all three sets.
PruneResult prune_empty(const ObservedEntries& train, const ObservedEntries& val,
                        const ObservedEntries& test);

// Public download locations; nothing is fetched automatically.
std::string dataset_urls();

}  // namespace cmc
