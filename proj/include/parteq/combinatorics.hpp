// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

namespace parteq::combinatorics {

using BigCount = boost::multiprecision::cpp_int;

// Exact values are served from cached tables up to kMaxExactN; log-space
// values up to kMaxLogN. Beyond that we raise capacity_error.
inline constexpr int kMaxExactN = 64;
inline constexpr int kMaxLogN = 512;

BigCount binomial(int n, int k);
BigCount factorial(int n);
BigCount stirling2(int n, int k);
BigCount bell(int n);

// Partitions of {1..n} into k blocks with elements 1..r in distinct blocks;
// zero when n < r. r = 0 reduces to stirling2(n, k), and so does r = 1 once
// n >= 1 (element 1 always sits in some block).
BigCount r_stirling2(int n, int k, int r);

// Partitions of {1..n+r} with elements 1..r in distinct blocks, any block
// count. r = 0 reduces to bell(n); r_bell(0, r) = 1.
BigCount r_bell(int n, int r);

// Explicit-sum forms of the same quantities; the recurrence-based tables are
// cross-checked against these in tests.
BigCount r_stirling2_sum(int n, int k, int r);
BigCount r_bell_sum(int n, int r);

// Natural logs; -inf for zero counts.
double log_binomial(int n, int k);
double log_factorial(int n);
double log_stirling2(int n, int k);
double log_bell(int n);
double log_r_stirling2(int n, int k, int r);
double log_r_bell(int n, int r);

double to_log(const BigCount& v);

}  // namespace parteq::combinatorics
