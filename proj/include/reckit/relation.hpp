#pragma once

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "reckit/space.hpp"

namespace reckit {

// Binary relation on a finite space, stored as word-packed adjacency rows.
// row(u) bit v set means (u,v) is in the relation.
class Relation {
 public:
  Relation() = default;
  explicit Relation(int n) : n_(n), words_((n + 63) / 64), rows_(size_t(n) * words_, 0) {
    if (n < 0) throw std::invalid_argument("negative universe size");
  }

  static Relation identity(int n) {
    Relation r(n);
    for (int i = 0; i < n; ++i) r.add(i, i);
    return r;
  }
  static Relation full(int n) {
    Relation r(n);
    for (int u = 0; u < n; ++u)
      for (int w = 0; w < r.words_; ++w) r.row(u)[w] = ~uint64_t{0};
    r.trim();
    return r;
  }
  static Relation from_pairs(int n, const std::vector<std::pair<PointId, PointId>>& ps) {
    Relation r(n);
    for (auto& [u, v] : ps) r.add(u, v);
    return r;
  }

  int size() const { return n_; }
  int words_per_row() const { return words_; }

  void add(PointId u, PointId v) {
    check(u), check(v);
    row(u)[v >> 6] |= uint64_t{1} << (v & 63);
  }
  void remove(PointId u, PointId v) {
    check(u), check(v);
    row(u)[v >> 6] &= ~(uint64_t{1} << (v & 63));
  }
  bool has(PointId u, PointId v) const {
    check(u), check(v);
    return (row(u)[v >> 6] >> (v & 63)) & 1;
  }

  uint64_t* row(PointId u) { return rows_.data() + size_t(u) * words_; }
  const uint64_t* row(PointId u) const { return rows_.data() + size_t(u) * words_; }

  long long pair_count() const {
    long long c = 0;
    for (uint64_t w : rows_) c += __builtin_popcountll(w);
    return c;
  }
  bool empty() const {
    for (uint64_t w : rows_)
      if (w) return false;
    return true;
  }

  // Image of a single point as a set.
  PointSet image(PointId u) const {
    check(u);
    PointSet s(n_);
    std::copy(row(u), row(u) + words_, s.words().begin());
    return s;
  }
  // f(A) = union of rows over A.
  PointSet image(const PointSet& a) const {
    match_set(a);
    PointSet s(n_);
    for (PointId u : a.members())
      for (int w = 0; w < words_; ++w) s.words()[w] |= row(u)[w];
    return s;
  }
  PointSet preimage(const PointSet& b) const { return inverse().image(b); }

  Relation inverse() const {
    Relation r(n_);
    for (int u = 0; u < n_; ++u) {
      const uint64_t* ru = row(u);
      for (int w = 0; w < words_; ++w) {
        uint64_t x = ru[w];
        while (x) {
          int b = __builtin_ctzll(x);
          r.add(w * 64 + b, u);
          x &= x - 1;
        }
      }
    }
    return r;
  }

  Relation operator|(const Relation& o) const {
    match(o);
    Relation r(n_);
    for (size_t i = 0; i < rows_.size(); ++i) r.rows_[i] = rows_[i] | o.rows_[i];
    return r;
  }
  Relation operator&(const Relation& o) const {
    match(o);
    Relation r(n_);
    for (size_t i = 0; i < rows_.size(); ++i) r.rows_[i] = rows_[i] & o.rows_[i];
    return r;
  }
  Relation operator-(const Relation& o) const {
    match(o);
    Relation r(n_);
    for (size_t i = 0; i < rows_.size(); ++i) r.rows_[i] = rows_[i] & ~o.rows_[i];
    return r;
  }

  bool operator==(const Relation& o) const { return n_ == o.n_ && rows_ == o.rows_; }
  bool operator!=(const Relation& o) const { return !(*this == o); }
  bool subset_of(const Relation& o) const {
    match(o);
    for (size_t i = 0; i < rows_.size(); ++i)
      if (rows_[i] & ~o.rows_[i]) return false;
    return true;
  }

  // Pairs in ascending (u, v) order.
  std::vector<std::pair<PointId, PointId>> pairs() const {
    std::vector<std::pair<PointId, PointId>> out;
    out.reserve(size_t(pair_count()));
    for (int u = 0; u < n_; ++u) {
      const uint64_t* ru = row(u);
      for (int w = 0; w < words_; ++w) {
        uint64_t x = ru[w];
        while (x) {
          int b = __builtin_ctzll(x);
          out.emplace_back(u, w * 64 + b);
          x &= x - 1;
        }
      }
    }
    return out;
  }

 private:
  void check(PointId p) const {
    if (p < 0 || p >= n_) throw std::out_of_range("point id out of range");
  }
  void match(const Relation& o) const {
    if (n_ != o.n_) throw std::invalid_argument("relations over different spaces");
  }
  void match_set(const PointSet& s) const {
    if (n_ != s.universe_size()) throw std::invalid_argument("set over a different space");
  }
  void trim() {
    if (n_ % 64 == 0 || words_ == 0) return;
    uint64_t mask = (uint64_t{1} << (n_ % 64)) - 1;
    for (int u = 0; u < n_; ++u) row(u)[words_ - 1] &= mask;
  }

  int n_ = 0;
  int words_ = 0;
  std::vector<uint64_t> rows_;
};

// g after f: pairs (x,z) with some y where (x,y) in f and (y,z) in g.
inline Relation compose(const Relation& g, const Relation& f) {
  if (g.size() != f.size()) throw std::invalid_argument("relations over different spaces");
  int n = f.size(), words = f.words_per_row();
  Relation r(n);
  for (int x = 0; x < n; ++x) {
    const uint64_t* fx = f.row(x);
    uint64_t* rx = r.row(x);
    for (int w = 0; w < words; ++w) {
      uint64_t bits = fx[w];
      while (bits) {
        int b = __builtin_ctzll(bits);
        const uint64_t* gy = g.row(w * 64 + b);
        for (int k = 0; k < words; ++k) rx[k] |= gy[k];
        bits &= bits - 1;
      }
    }
  }
  return r;
}

inline Relation inverse(const Relation& f) { return f.inverse(); }

// f restricted to D x D, reindexed over the members of D in ascending order.
inline Relation restriction(const Relation& f, const PointSet& d) {
  if (f.size() != d.universe_size()) throw std::invalid_argument("set over a different space");
  std::vector<PointId> mem = d.members();
  std::vector<int> local(f.size(), -1);
  for (size_t i = 0; i < mem.size(); ++i) local[mem[i]] = static_cast<int>(i);
  Relation r(static_cast<int>(mem.size()));
  for (size_t i = 0; i < mem.size(); ++i)
    for (size_t j = 0; j < mem.size(); ++j)
      if (f.has(mem[i], mem[j])) r.add(static_cast<int>(i), static_cast<int>(j));
  return r;
}

// Sorted "u v" edge-list text, one pair per line.
inline std::string to_edge_text(const Relation& f) {
  std::ostringstream os;
  for (auto& [u, v] : f.pairs()) os << u << ' ' << v << '\n';
  return os.str();
}

inline Relation from_edge_text(int n, const std::string& text) {
  Relation r(n);
  std::istringstream is(text);
  long long u, v;
  while (is >> u >> v) r.add(static_cast<PointId>(u), static_cast<PointId>(v));
  return r;
}

}  // namespace reckit
