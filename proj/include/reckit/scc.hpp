#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "reckit/relation.hpp"

namespace reckit {

// Strongly connected components of a relation viewed as a digraph, with the
// condensation DAG. Component ids are assigned in reverse topological order by
// Tarjan (a component's successors always have smaller ids).
struct Condensation {
  int ncomp = 0;
  std::vector<int> comp;                    // point -> component id
  std::vector<std::vector<int>> members;    // component -> points, ascending
  std::vector<std::vector<int>> succ;       // condensation edges, deduplicated
  std::vector<bool> cyclic;                 // size > 1 or a self loop

  // Components in topological order: edges go from earlier to later entries.
  // Tarjan ids are reverse-topological, so descending id works.
  std::vector<int> topo_order() const {
    std::vector<int> order(ncomp);
    for (int i = 0; i < ncomp; ++i) order[i] = ncomp - 1 - i;
    return order;
  }
};

// Iterative Tarjan; recursion depth on grid-sized inputs would be unsafe.
inline Condensation condense(const Relation& f) {
  const int n = f.size();
  Condensation c;
  c.comp.assign(n, -1);
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> onstack(n, false);
  std::vector<int> stack;
  stack.reserve(n);
  int next_index = 0;

  struct Frame {
    int v;
    int word;
    uint64_t bits;
  };
  std::vector<Frame> call;

  auto first_frame = [&](int v) {
    return Frame{v, 0, f.words_per_row() > 0 ? f.row(v)[0] : 0};
  };

  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    call.push_back(first_frame(root));
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    onstack[root] = true;

    while (!call.empty()) {
      Frame& fr = call.back();
      int v = fr.v;
      int child = -1;
      while (fr.word < f.words_per_row()) {
        if (fr.bits) {
          int b = __builtin_ctzll(fr.bits);
          fr.bits &= fr.bits - 1;
          int w = fr.word * 64 + b;
          if (index[w] == -1) {
            child = w;
            break;
          }
          if (onstack[w]) low[v] = std::min(low[v], index[w]);
        } else {
          ++fr.word;
          if (fr.word < f.words_per_row()) fr.bits = f.row(v)[fr.word];
        }
      }
      if (child != -1) {
        call.push_back(first_frame(child));
        index[child] = low[child] = next_index++;
        stack.push_back(child);
        onstack[child] = true;
        continue;
      }
      if (low[v] == index[v]) {
        std::vector<int> comp_members;
        while (true) {
          int w = stack.back();
          stack.pop_back();
          onstack[w] = false;
          c.comp[w] = c.ncomp;
          comp_members.push_back(w);
          if (w == v) break;
        }
        std::sort(comp_members.begin(), comp_members.end());
        c.members.push_back(std::move(comp_members));
        ++c.ncomp;
      }
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
    }
  }

  c.succ.assign(c.ncomp, {});
  c.cyclic.assign(c.ncomp, false);
  for (int i = 0; i < c.ncomp; ++i) c.cyclic[i] = c.members[i].size() > 1;
  for (auto& [u, v] : f.pairs()) {
    int cu = c.comp[u], cv = c.comp[v];
    if (cu == cv) {
      if (u == v || c.members[cu].size() > 1) c.cyclic[cu] = true;
      continue;
    }
    c.succ[cu].push_back(cv);
  }
  for (auto& s : c.succ) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  return c;
}

// Transitive closure via condensation reachability: down[C] holds every point
// in a strict successor component of C plus, when C is cyclic, C's own points.
// Visiting components in ascending Tarjan id handles successors first.
inline Relation transitive_closure(const Relation& f) {
  const int n = f.size();
  Condensation c = condense(f);
  int words = (n + 63) / 64;
  std::vector<std::vector<uint64_t>> down(c.ncomp, std::vector<uint64_t>(words, 0));
  std::vector<std::vector<uint64_t>> own(c.ncomp, std::vector<uint64_t>(words, 0));
  for (int k = 0; k < c.ncomp; ++k)
    for (int p : c.members[k]) own[k][p >> 6] |= uint64_t{1} << (p & 63);
  for (int k = 0; k < c.ncomp; ++k) {
    for (int s : c.succ[k])
      for (int w = 0; w < words; ++w) down[k][w] |= own[s][w] | down[s][w];
    if (c.cyclic[k])
      for (int w = 0; w < words; ++w) down[k][w] |= own[k][w];
  }
  Relation r(n);
  for (int u = 0; u < n; ++u) {
    const std::vector<uint64_t>& d = down[c.comp[u]];
    std::copy(d.begin(), d.end(), r.row(u));
  }
  return r;
}

}  // namespace reckit
