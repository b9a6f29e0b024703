#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace reckit {

using PointId = int;

// Finite point universe with optional display labels. Cores operate on raw
// indices; labels matter only for reports.
class FiniteSpace {
 public:
  FiniteSpace() = default;
  explicit FiniteSpace(int n) : n_(n) {
    if (n < 0) throw std::invalid_argument("space size must be nonnegative");
  }
  explicit FiniteSpace(std::vector<std::string> labels)
      : n_(static_cast<int>(labels.size())), labels_(std::move(labels)) {}

  int size() const { return n_; }

  std::string label(PointId p) const {
    if (p < 0 || p >= n_) throw std::out_of_range("point id out of range");
    if (p < static_cast<int>(labels_.size())) return labels_[p];
    return std::to_string(p);
  }

  void set_label(PointId p, std::string s) {
    if (p < 0 || p >= n_) throw std::out_of_range("point id out of range");
    if (static_cast<int>(labels_.size()) < n_) labels_.resize(n_);
    labels_[p] = std::move(s);
  }

 private:
  int n_ = 0;
  std::vector<std::string> labels_;
};

// Subset of a finite space, stored as a word-packed bitset.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(int n) : n_(n), bits_((n + 63) / 64, 0) {
    if (n < 0) throw std::invalid_argument("negative universe size");
  }

  static PointSet all(int n) {
    PointSet s(n);
    for (int i = 0; i < n; ++i) s.add(i);
    return s;
  }

  int universe_size() const { return n_; }

  void add(PointId p) {
    check(p);
    bits_[p >> 6] |= uint64_t{1} << (p & 63);
  }
  void remove(PointId p) {
    check(p);
    bits_[p >> 6] &= ~(uint64_t{1} << (p & 63));
  }
  bool contains(PointId p) const {
    check(p);
    return (bits_[p >> 6] >> (p & 63)) & 1;
  }

  int count() const {
    int c = 0;
    for (uint64_t w : bits_) c += __builtin_popcountll(w);
    return c;
  }
  bool empty() const {
    for (uint64_t w : bits_)
      if (w) return false;
    return true;
  }

  // Members in ascending id order.
  std::vector<PointId> members() const {
    std::vector<PointId> out;
    out.reserve(count());
    for (int w = 0; w < static_cast<int>(bits_.size()); ++w) {
      uint64_t x = bits_[w];
      while (x) {
        int b = __builtin_ctzll(x);
        out.push_back(w * 64 + b);
        x &= x - 1;
      }
    }
    return out;
  }

  PointSet operator|(const PointSet& o) const {
    PointSet r = matched(o);
    for (size_t i = 0; i < bits_.size(); ++i) r.bits_[i] = bits_[i] | o.bits_[i];
    return r;
  }
  PointSet operator&(const PointSet& o) const {
    PointSet r = matched(o);
    for (size_t i = 0; i < bits_.size(); ++i) r.bits_[i] = bits_[i] & o.bits_[i];
    return r;
  }
  // Set difference.
  PointSet operator-(const PointSet& o) const {
    PointSet r = matched(o);
    for (size_t i = 0; i < bits_.size(); ++i) r.bits_[i] = bits_[i] & ~o.bits_[i];
    return r;
  }
  PointSet complement() const {
    PointSet r(n_);
    for (int i = 0; i < n_; ++i)
      if (!contains(i)) r.add(i);
    return r;
  }

  bool operator==(const PointSet& o) const { return n_ == o.n_ && bits_ == o.bits_; }
  bool operator!=(const PointSet& o) const { return !(*this == o); }

  bool subset_of(const PointSet& o) const {
    matched(o);
    for (size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i] & ~o.bits_[i]) return false;
    return true;
  }
  bool intersects(const PointSet& o) const {
    matched(o);
    for (size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i] & o.bits_[i]) return true;
    return false;
  }

  const std::vector<uint64_t>& words() const { return bits_; }
  std::vector<uint64_t>& words() { return bits_; }

 private:
  void check(PointId p) const {
    if (p < 0 || p >= n_) throw std::out_of_range("point id out of range");
  }
  PointSet matched(const PointSet& o) const {
    if (n_ != o.n_) throw std::invalid_argument("point sets over different spaces");
    return PointSet(n_);
  }

  int n_ = 0;
  std::vector<uint64_t> bits_;
};

inline PointSet make_set(int n, std::initializer_list<PointId> pts) {
  PointSet s(n);
  for (PointId p : pts) s.add(p);
  return s;
}

}  // namespace reckit
