#include "cmc/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "cmc/error.hpp"

namespace cmc {

namespace {

double parse_rating(const std::string& token, std::size_t line_no, const char* what) {
  double v = 0.0;
  const auto* begin = token.data();
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    fail(Errc::io_failure,
         std::string(what) + ": malformed rating at line " + std::to_string(line_no));
  return v;
}

long parse_id(const std::string& token, std::size_t line_no, const char* what) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || v < 1)
    fail(Errc::io_failure, std::string(what) + ": malformed id at line " + std::to_string(line_no));
  return v;
}

ObservedEntries from_keep_last(std::map<std::pair<Index, Index>, double>& last, Index min_rows,
                               Index min_cols) {
  Index rows = min_rows, cols = min_cols;
  std::vector<Observation> triples;
  triples.reserve(last.size());
  for (const auto& [ij, v] : last) {
    rows = std::max(rows, ij.first + 1);
    cols = std::max(cols, ij.second + 1);
    triples.push_back({ij.first, ij.second, v});
  }
  return ObservedEntries(rows, cols, std::move(triples));
}

}  // namespace

ObservedEntries load_movielens(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_failure, "load_movielens: cannot open " + path);
  std::map<std::pair<Index, Index>, double> last;
  std::size_t duplicates = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string user, item, rating;
    if (!std::getline(fields, user, '\t') || !std::getline(fields, item, '\t') ||
        !std::getline(fields, rating, '\t'))
      fail(Errc::io_failure, "load_movielens: malformed line " + std::to_string(line_no));
    const Index i = parse_id(user, line_no, "load_movielens") - 1;
    const Index j = parse_id(item, line_no, "load_movielens") - 1;
    const double v = parse_rating(rating, line_no, "load_movielens");
    if (v < 1.0 || v > 5.0 || v != std::floor(v))
      fail(Errc::io_failure,
           "load_movielens: rating outside the 1..5 integer scale at line " +
               std::to_string(line_no));
    if (!last.emplace(std::make_pair(i, j), v).second) {
      last[{i, j}] = v;
      ++duplicates;
    }
  }
  if (last.empty()) fail(Errc::io_failure, "load_movielens: no entries in " + path);
  if (duplicates > 0)
    std::cerr << "load_movielens: " << duplicates << " duplicate (user,item) pairs, kept last\n";
  return from_keep_last(last, 943, 1682);
}

ObservedEntries load_filmtrust(const std::string& path, bool double_ratings) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_failure, "load_filmtrust: cannot open " + path);
  std::map<std::pair<Index, Index>, double> last;
  std::size_t duplicates = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string user, item, rating;
    if (!(fields >> user >> item >> rating))
      fail(Errc::io_failure, "load_filmtrust: malformed line " + std::to_string(line_no));
    const Index i = parse_id(user, line_no, "load_filmtrust") - 1;
    const Index j = parse_id(item, line_no, "load_filmtrust") - 1;
    double v = parse_rating(rating, line_no, "load_filmtrust");
    const double doubled = 2.0 * v;
    if (v < 0.5 || v > 4.0 || std::abs(doubled - std::round(doubled)) > 1e-9)
      fail(Errc::io_failure, "load_filmtrust: rating off the 0.5..4.0 half-step grid at line " +
                                 std::to_string(line_no));
    if (double_ratings) v = std::round(doubled);
    if (!last.emplace(std::make_pair(i, j), v).second) {
      last[{i, j}] = v;
      ++duplicates;
    }
  }
  if (last.empty()) fail(Errc::io_failure, "load_filmtrust: no entries in " + path);
  if (duplicates > 0)
    std::cerr << "load_filmtrust: " << duplicates << " duplicate (user,item) pairs, kept last\n";
  return from_keep_last(last, 1508, 2071);
}

PruneResult prune_empty(const ObservedEntries& train, const ObservedEntries& val,
                        const ObservedEntries& test) {
  if (val.rows() != train.rows() || val.cols() != train.cols() || test.rows() != train.rows() ||
      test.cols() != train.cols())
    fail(Errc::invalid_argument, "prune_empty: inconsistent dimensions");

  std::vector<bool> row_used(train.rows(), false), col_used(train.cols(), false);
  for (const Observation& t : train.triples()) {
    row_used[t.row] = true;
    col_used[t.col] = true;
  }
  PruneResult out{train, val, test, {}, {}};
  std::vector<Index> row_map(train.rows(), -1), col_map(train.cols(), -1);
  for (Index i = 0; i < train.rows(); ++i)
    if (row_used[i]) {
      row_map[i] = static_cast<Index>(out.kept_rows.size());
      out.kept_rows.push_back(i);
    }
  for (Index j = 0; j < train.cols(); ++j)
    if (col_used[j]) {
      col_map[j] = static_cast<Index>(out.kept_cols.size());
      out.kept_cols.push_back(j);
    }
  if (out.kept_rows.empty() || out.kept_cols.empty())
    fail(Errc::invalid_argument, "prune_empty: no training entries at all");

  auto remap = [&](const ObservedEntries& obs) {
    std::vector<Observation> kept;
    kept.reserve(obs.size());
    for (const Observation& t : obs.triples())
      if (row_map[t.row] >= 0 && col_map[t.col] >= 0)
        kept.push_back({row_map[t.row], col_map[t.col], t.value});
    return ObservedEntries(static_cast<Index>(out.kept_rows.size()),
                           static_cast<Index>(out.kept_cols.size()), std::move(kept), obs.spec());
  };
  out.train = remap(train);
  out.val = remap(val);
  out.test = remap(test);
  return out;
}

std::string dataset_urls() {
  return "MovieLens 100K: https://files.grouplens.org/datasets/movielens/ml-100k.zip (file u.data)\n"
         "FilmTrust: https://guoguibing.github.io/librec/datasets.html (ratings.txt)\n";
}

}  // namespace cmc
