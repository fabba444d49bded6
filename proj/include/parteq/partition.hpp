// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "parteq/combinatorics.hpp"
#include "parteq/rng.hpp"

namespace parteq {

// A set partition of groups {0..k-1} in canonical restricted-growth form:
// label(0) == 0 and each later label is at most one past the running max.
class Partition {
 public:
  Partition() = default;

  // Canonicalizes an arbitrary labeling (any ints, any order).
  static Partition from_labels(const std::vector<int>& labels);
  // Accepts only a valid restricted-growth string; throws data_error.
  static Partition from_rgs(std::vector<int> rgs);
  // Parses "0,1,1,0" (must already be in restricted-growth form).
  static Partition parse(const std::string& text);
  static Partition pooled(int k);      // one block, full equality
  static Partition singletons(int k);  // k blocks, full inequality

  int k_groups() const { return static_cast<int>(rgs_.size()); }
  int n_blocks() const { return n_blocks_; }
  int label(int j) const { return rgs_[j]; }
  bool same_block(int i, int j) const { return rgs_[i] == rgs_[j]; }
  const std::vector<int>& rgs() const { return rgs_; }
  std::vector<int> block_sizes() const;
  std::vector<std::vector<int>> blocks() const;
  std::string to_string() const;  // "0,1,1,0"

  friend bool operator==(const Partition&, const Partition&) = default;
  friend auto operator<=>(const Partition& a, const Partition& b) {
    return a.rgs_ <=> b.rgs_;
  }

 private:
  std::vector<int> rgs_;
  int n_blocks_ = 0;
};

struct PartitionHash {
  std::size_t operator()(const Partition& p) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int v : p.rgs()) {
      h ^= static_cast<std::uint64_t>(v) + 1;
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

inline Partition canonicalize(const std::vector<int>& labels) {
  return Partition::from_labels(labels);
}

// Number of distinct label vectors representing the partition: k!/(k-d)!.
combinatorics::BigCount count_representations(const Partition& p);
double log_count_representations(int k, int d);

// Exhaustive enumeration is capped; bell(12) ~ 4.2e6 already.
inline constexpr int kMaxEnumerationGroups = 12;

// Visits every partition of k groups in lexicographic restricted-growth
// order; returns the number visited. Throws capacity_error past the cap.
std::uint64_t for_each_partition(
    int k, const std::function<void(const Partition&)>& fn,
    int max_groups = kMaxEnumerationGroups);
std::uint64_t for_each_partition_with_blocks(
    int k, int d, const std::function<void(const Partition&)>& fn,
    int max_groups = kMaxEnumerationGroups);
std::vector<Partition> all_partitions(int k,
                                      int max_groups = kMaxEnumerationGroups);

// Restricted-growth strings pack into 4-bit nibbles for k <= 16.
std::uint64_t pack_rgs(const std::vector<int>& rgs);
void unpack_rgs(std::uint64_t code, int k, std::vector<int>* out);

// Exact uniform draws over partitions via completion counts; k <= kMaxLogN.
Partition sample_uniform_partition(int k, Rng& rng);
Partition sample_uniform_partition_with_blocks(int k, int d, Rng& rng);

}  // namespace parteq
