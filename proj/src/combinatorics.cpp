// Apache License, Version 2.0, refer to LICENSE.txt
#include "parteq/combinatorics.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "parteq/errors.hpp"
#include "parteq/numeric.hpp"

namespace parteq::combinatorics {

namespace {

void check_exact(int n, const char* fn) {
  if (n < 0) throw data_error(std::string(fn) + ": negative n");
  if (n > kMaxExactN)
    throw capacity_error(std::string(fn) + ": n=" + std::to_string(n) +
                         " exceeds exact cap " + std::to_string(kMaxExactN));
}

void check_log(int n, const char* fn) {
  if (n < 0) throw data_error(std::string(fn) + ": negative n");
  if (n > kMaxLogN)
    throw capacity_error(std::string(fn) + ": n=" + std::to_string(n) +
                         " exceeds log-table cap " + std::to_string(kMaxLogN));
}

const std::vector<std::vector<BigCount>>& stirling_table() {
  static const std::vector<std::vector<BigCount>> table = [] {
    std::vector<std::vector<BigCount>> t(kMaxExactN + 1);
    t[0] = {BigCount(1)};
    for (int n = 1; n <= kMaxExactN; ++n) {
      t[n].assign(n + 1, BigCount(0));
      for (int k = 1; k <= n; ++k)
        t[n][k] = BigCount(k) * (k <= n - 1 ? t[n - 1][k] : BigCount(0)) +
                  t[n - 1][k - 1];
    }
    return t;
  }();
  return table;
}

const std::vector<BigCount>& bell_table() {
  static const std::vector<BigCount> table = [] {
    std::vector<BigCount> b(kMaxExactN + 1, BigCount(0));
    const auto& s = stirling_table();
    for (int n = 0; n <= kMaxExactN; ++n)
      for (int k = 0; k <= n; ++k) b[n] += s[n][k];
    return b;
  }();
  return table;
}

const std::vector<std::vector<double>>& log_stirling_table() {
  static const std::vector<std::vector<double>> table = [] {
    std::vector<std::vector<double>> t(kMaxLogN + 1);
    t[0] = {0.0};
    for (int n = 1; n <= kMaxLogN; ++n) {
      t[n].assign(n + 1, kNegInf);
      for (int k = 1; k <= n; ++k) {
        const double up = k <= n - 1 ? std::log(double(k)) + t[n - 1][k] : kNegInf;
        t[n][k] = log_sum_exp(up, t[n - 1][k - 1]);
      }
    }
    return t;
  }();
  return table;
}

const std::vector<double>& log_bell_table() {
  static const std::vector<double> table = [] {
    std::vector<double> b(kMaxLogN + 1, kNegInf);
    const auto& s = log_stirling_table();
    for (int n = 0; n <= kMaxLogN; ++n) b[n] = log_sum_exp(s[n]);
    return b;
  }();
  return table;
}

}  // namespace

BigCount binomial(int n, int k) {
  check_exact(n, "binomial");
  if (k < 0 || k > n) return 0;
  BigCount v = 1;
  for (int i = 0; i < std::min(k, n - k); ++i) {
    v *= n - i;
    v /= i + 1;
  }
  return v;
}

BigCount factorial(int n) {
  check_exact(n, "factorial");
  BigCount v = 1;
  for (int i = 2; i <= n; ++i) v *= i;
  return v;
}

BigCount stirling2(int n, int k) {
  check_exact(n, "stirling2");
  if (k < 0) throw data_error("stirling2: negative k");
  if (k > n) return 0;
  return stirling_table()[n][k];
}

BigCount bell(int n) {
  check_exact(n, "bell");
  return bell_table()[n];
}

BigCount r_stirling2(int n, int k, int r) {
  check_exact(n, "r_stirling2");
  if (r < 0) throw data_error("r_stirling2: negative r");
  if (r == 0) return stirling2(n, k);
  if (n < r || k < r || k > n) return 0;
  // rows from n'=r up, recurrence in the non-distinguished elements
  std::vector<BigCount> row(k + 1, BigCount(0));
  if (r <= k) row[r] = 1;
  for (int m = r + 1; m <= n; ++m) {
    for (int j = std::min(m, k); j >= r; --j) {
      row[j] = BigCount(j) * row[j] + (j > r ? row[j - 1] : BigCount(0));
    }
  }
  return row[k];
}

BigCount r_bell(int n, int r) {
  check_exact(n, "r_bell");
  if (r < 0) throw data_error("r_bell: negative r");
  if (r == 0) return bell(n);
  BigCount total = 0;
  BigCount rpow = 1;  // r^(n-m), built from m=n downward
  for (int m = n; m >= 0; --m) {
    total += binomial(n, m) * rpow * bell(m);
    rpow *= r;
  }
  return total;
}

BigCount r_stirling2_sum(int n, int k, int r) {
  check_exact(n, "r_stirling2_sum");
  if (r == 0) return stirling2(n, k);
  if (n < r || k < r || k > n) return 0;
  BigCount total = 0;
  for (int i = 0; i <= n - r; ++i) {
    BigCount rpow = 1;
    for (int t = 0; t < n - r - i; ++t) rpow *= r;
    total += binomial(n - r, i) * stirling2(i, k - r) * rpow;
  }
  return total;
}

BigCount r_bell_sum(int n, int r) {
  check_exact(n + r, "r_bell_sum");
  BigCount total = 0;
  for (int i = 0; i <= n; ++i) total += r_stirling2(n + r, i + r, r);
  return total;
}

double log_binomial(int n, int k) {
  check_log(n, "log_binomial");
  return lchoose(n, k);
}

double log_factorial(int n) {
  check_log(n, "log_factorial");
  return std::lgamma(double(n) + 1.0);
}

double log_stirling2(int n, int k) {
  check_log(n, "log_stirling2");
  if (k < 0) throw data_error("log_stirling2: negative k");
  if (k > n) return kNegInf;
  return log_stirling_table()[n][k];
}

double log_bell(int n) {
  check_log(n, "log_bell");
  return log_bell_table()[n];
}

double log_r_stirling2(int n, int k, int r) {
  check_log(n, "log_r_stirling2");
  if (r < 0) throw data_error("log_r_stirling2: negative r");
  if (r == 0) return log_stirling2(n, k);
  if (n < r || k < r || k > n) return kNegInf;
  const double logr = std::log(double(r));
  std::vector<double> terms;
  terms.reserve(n - r + 1);
  for (int i = k - r; i <= n - r; ++i) {
    if (i < 0) continue;
    terms.push_back(lchoose(n - r, i) + log_stirling2(i, k - r) +
                    double(n - r - i) * logr);
  }
  return log_sum_exp(terms);
}

double log_r_bell(int n, int r) {
  check_log(n, "log_r_bell");
  if (r < 0) throw data_error("log_r_bell: negative r");
  if (r == 0) return log_bell(n);
  const double logr = std::log(double(r));
  std::vector<double> terms;
  terms.reserve(n + 1);
  for (int m = 0; m <= n; ++m)
    terms.push_back(lchoose(n, m) + double(n - m) * logr + log_bell(m));
  return log_sum_exp(terms);
}

double to_log(const BigCount& v) {
  if (v < 0) throw numerical_error("to_log: negative count");
  if (v == 0) return kNegInf;
  const auto bits = boost::multiprecision::msb(v);
  if (bits <= 512) return std::log(v.convert_to<double>());
  const unsigned shift = bits - 512;
  const double m = BigCount(v >> shift).convert_to<double>();
  return std::log(m) + double(shift) * std::log(2.0);
}

}  // namespace parteq::combinatorics
