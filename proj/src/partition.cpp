// Apache License, Version 2.0, refer to LICENSE.txt
#include "parteq/partition.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "parteq/errors.hpp"
#include "parteq/numeric.hpp"

namespace parteq {

namespace c10s = combinatorics;

Partition Partition::from_labels(const std::vector<int>& labels) {
  if (labels.empty()) throw data_error("partition: empty label vector");
  Partition p;
  p.rgs_.resize(labels.size());
  std::unordered_map<int, int> relabel;
  int next = 0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    auto [it, inserted] = relabel.emplace(labels[j], next);
    if (inserted) ++next;
    p.rgs_[j] = it->second;
  }
  p.n_blocks_ = next;
  return p;
}

Partition Partition::from_rgs(std::vector<int> rgs) {
  if (rgs.empty()) throw data_error("partition: empty label vector");
  int maxv = -1;
  for (int v : rgs) {
    if (v < 0 || v > maxv + 1)
      throw data_error("partition: not a restricted-growth string");
    maxv = std::max(maxv, v);
  }
  Partition p;
  p.rgs_ = std::move(rgs);
  p.n_blocks_ = maxv + 1;
  return p;
}

Partition Partition::parse(const std::string& text) {
  std::vector<int> rgs;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(tok, &pos);
      while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
      if (pos != tok.size()) throw data_error("partition: bad token '" + tok + "'");
      rgs.push_back(v);
    } catch (const std::invalid_argument&) {
      throw data_error("partition: bad token '" + tok + "'");
    } catch (const std::out_of_range&) {
      throw data_error("partition: bad token '" + tok + "'");
    }
  }
  return from_rgs(std::move(rgs));
}

Partition Partition::pooled(int k) {
  return from_rgs(std::vector<int>(k, 0));
}

Partition Partition::singletons(int k) {
  std::vector<int> rgs(k);
  for (int j = 0; j < k; ++j) rgs[j] = j;
  return from_rgs(std::move(rgs));
}

std::vector<int> Partition::block_sizes() const {
  std::vector<int> sizes(n_blocks_, 0);
  for (int v : rgs_) ++sizes[v];
  return sizes;
}

std::vector<std::vector<int>> Partition::blocks() const {
  std::vector<std::vector<int>> out(n_blocks_);
  for (std::size_t j = 0; j < rgs_.size(); ++j) out[rgs_[j]].push_back(int(j));
  return out;
}

std::string Partition::to_string() const {
  std::string s;
  for (std::size_t j = 0; j < rgs_.size(); ++j) {
    if (j) s += ',';
    s += std::to_string(rgs_[j]);
  }
  return s;
}

c10s::BigCount count_representations(const Partition& p) {
  const int k = p.k_groups();
  const int d = p.n_blocks();
  return c10s::factorial(k) / c10s::factorial(k - d);
}

double log_count_representations(int k, int d) {
  return std::lgamma(double(k) + 1.0) - std::lgamma(double(k - d) + 1.0);
}

namespace {

void check_enum_cap(int k, int max_groups) {
  if (k < 1) throw data_error("enumeration: k must be >= 1");
  if (k > max_groups)
    throw capacity_error("enumeration: k=" + std::to_string(k) +
                         " exceeds cap " + std::to_string(max_groups));
}

}  // namespace

std::uint64_t for_each_partition(
    int k, const std::function<void(const Partition&)>& fn, int max_groups) {
  check_enum_cap(k, max_groups);
  std::vector<int> rgs(k, 0), prefix_max(k, 0);
  std::uint64_t count = 0;
  for (;;) {
    fn(Partition::from_rgs(rgs));
    ++count;
    int j = k - 1;
    while (j > 0 && rgs[j] > prefix_max[j - 1]) {
      rgs[j] = 0;
      --j;
    }
    if (j == 0) break;
    ++rgs[j];
    prefix_max[j] = std::max(prefix_max[j - 1], rgs[j]);
    for (int t = j + 1; t < k; ++t) prefix_max[t] = prefix_max[j];
  }
  return count;
}

std::uint64_t for_each_partition_with_blocks(
    int k, int d, const std::function<void(const Partition&)>& fn,
    int max_groups) {
  if (d < 1 || d > k) throw data_error("enumeration: d out of range");
  std::uint64_t count = 0;
  for_each_partition(
      k,
      [&](const Partition& p) {
        if (p.n_blocks() == d) {
          fn(p);
          ++count;
        }
      },
      max_groups);
  return count;
}

std::vector<Partition> all_partitions(int k, int max_groups) {
  std::vector<Partition> out;
  for_each_partition(k, [&](const Partition& p) { out.push_back(p); },
                     max_groups);
  return out;
}

std::uint64_t pack_rgs(const std::vector<int>& rgs) {
  if (rgs.size() > 16) throw capacity_error("pack_rgs: k > 16");
  std::uint64_t code = 0;
  for (std::size_t j = 0; j < rgs.size(); ++j)
    code |= static_cast<std::uint64_t>(rgs[j] & 0xf) << (4 * j);
  return code;
}

void unpack_rgs(std::uint64_t code, int k, std::vector<int>* out) {
  out->resize(k);
  for (int j = 0; j < k; ++j)
    (*out)[j] = static_cast<int>((code >> (4 * j)) & 0xf);
}

Partition sample_uniform_partition(int k, Rng& rng) {
  if (k < 1 || k > c10s::kMaxLogN)
    throw capacity_error("sample_uniform_partition: k out of range");
  std::vector<int> rgs(k, 0);
  int b = 1;
  for (int j = 1; j < k; ++j) {
    // completions when element j starts a new block vs joins one of b
    const double log_new = c10s::log_r_bell(k - j - 1, b + 1);
    const double log_old = std::log(double(b)) + c10s::log_r_bell(k - j - 1, b);
    const double p_new = std::exp(log_new - log_sum_exp(log_new, log_old));
    if (rng.uniform() < p_new) {
      rgs[j] = b++;
    } else {
      rgs[j] = rng.uniform_int(b);
    }
  }
  return Partition::from_labels(rgs);
}

Partition sample_uniform_partition_with_blocks(int k, int d, Rng& rng) {
  if (k < 1 || k > c10s::kMaxLogN)
    throw capacity_error("sample_uniform_partition_with_blocks: k out of range");
  if (d < 1 || d > k) throw data_error("sample: d out of range");
  std::vector<int> rgs(k, 0);
  int b = 1;
  for (int j = 1; j < k; ++j) {
    const int m = k - j;  // elements left to place, including j
    // completions counted with current blocks as distinguished elements;
    // log_sum_exp of the two branches keeps forced moves at exactly 0 or 1
    const double log_new = c10s::log_r_stirling2(m + b, d, b + 1);
    const double log_old =
        std::log(double(b)) + c10s::log_r_stirling2(m + b - 1, d, b);
    const double p_new = std::exp(log_new - log_sum_exp(log_new, log_old));
    if (rng.uniform() < p_new) {
      rgs[j] = b++;
    } else {
      rgs[j] = rng.uniform_int(b);
    }
  }
  if (b != d) throw numerical_error("sample with blocks: ended with wrong d");
  return Partition::from_labels(rgs);
}

}  // namespace parteq
