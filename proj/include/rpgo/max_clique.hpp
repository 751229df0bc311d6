// Exact maximum clique by branch and bound with a greedy-colouring bound.
#pragma once

#include <cstddef>
#include <vector>

#include "rpgo/errors.hpp"

namespace rpgo {

using Adjacency = std::vector<std::vector<bool>>;

namespace detail {

class CliqueSearch {
 public:
  explicit CliqueSearch(const Adjacency& adj) : adj_(adj) {}

  // Largest clique inside `candidates`; stops as soon as one of size `target`
  // is found when target > 0. Only cliques larger than `floor` are reported.
  std::vector<int> run(const std::vector<int>& candidates, std::size_t floor, std::size_t target) {
    best_.clear();
    best_size_ = floor;
    target_ = target;
    done_ = false;
    std::vector<int> current;
    if (!candidates.empty()) expand(current, candidates);
    return best_;
  }

 private:
  void colour_sort(const std::vector<int>& P, std::vector<int>& order, std::vector<int>& colour) {
    std::vector<std::vector<int>> classes;
    for (int v : P) {
      std::size_t c = 0;
      for (; c < classes.size(); ++c) {
        bool clash = false;
        for (int u : classes[c]) {
          if (adj_[v][u]) {
            clash = true;
            break;
          }
        }
        if (!clash) break;
      }
      if (c == classes.size()) classes.emplace_back();
      classes[c].push_back(v);
    }
    order.clear();
    colour.clear();
    for (std::size_t c = 0; c < classes.size(); ++c) {
      for (int v : classes[c]) {
        order.push_back(v);
        colour.push_back(static_cast<int>(c) + 1);
      }
    }
  }

  void expand(std::vector<int>& R, const std::vector<int>& P) {
    std::vector<int> order, colour;
    colour_sort(P, order, colour);
    for (int i = static_cast<int>(order.size()) - 1; i >= 0; --i) {
      if (R.size() + static_cast<std::size_t>(colour[i]) <= best_size_) return;
      const int v = order[i];
      R.push_back(v);
      std::vector<int> next;
      for (int j = 0; j < i; ++j) {
        if (adj_[v][order[j]]) next.push_back(order[j]);
      }
      if (next.empty()) {
        if (R.size() > best_size_) {
          best_ = R;
          best_size_ = R.size();
          if (target_ > 0 && best_size_ >= target_) done_ = true;
        }
      } else {
        expand(R, next);
      }
      R.pop_back();
      if (done_) return;
    }
  }

  const Adjacency& adj_;
  std::vector<int> best_;
  std::size_t best_size_ = 0;
  std::size_t target_ = 0;
  bool done_ = false;
};

}  // namespace detail

// Maximum clique of a symmetric, zero-diagonal boolean adjacency matrix.
// Among maximum cliques the lexicographically smallest sorted vertex list is
// returned.
inline std::vector<std::size_t> max_clique(const Adjacency& adj) {
  const std::size_t n = adj.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (adj[i].size() != n) throw InvalidArgument("max_clique: adjacency is not square");
    if (adj[i][i]) throw InvalidArgument("max_clique: adjacency has a non-zero diagonal");
    for (std::size_t j = 0; j < i; ++j) {
      if (adj[i][j] != adj[j][i]) throw InvalidArgument("max_clique: adjacency is not symmetric");
    }
  }
  if (n == 0) return {};

  detail::CliqueSearch search(adj);
  std::vector<int> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);
  const std::size_t omega = search.run(all, 0, 0).size();

  // Fix vertices greedily in ascending order while a maximum clique can
  // still be completed from the remaining higher-numbered neighbours.
  std::vector<std::size_t> chosen;
  std::vector<int> pool = all;
  while (chosen.size() < omega) {
    const std::size_t need = omega - chosen.size() - 1;
    bool extended = false;
    for (int v : pool) {
      std::vector<int> next;
      for (int u : pool) {
        if (u > v && adj[v][u]) next.push_back(u);
      }
      if (need == 0 || (next.size() >= need && search.run(next, need - 1, need).size() >= need)) {
        chosen.push_back(static_cast<std::size_t>(v));
        pool = std::move(next);
        extended = true;
        break;
      }
    }
    if (!extended) throw NumericalFailure("max_clique: internal search inconsistency");
  }
  return chosen;
}

}  // namespace rpgo
