// Apache License, Version 2.0, refer to LICENSE.txt
#include "parteq/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "parteq/errors.hpp"

namespace parteq {

namespace {

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && issp(s[i])) ++i;
  return s.substr(i);
}

std::string lower(std::string s) {
  for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

[[noreturn]] void row_error(const std::string& name, int line,
                            const std::string& what) {
  throw data_error(name + " line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& s, const std::string& name, int line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || !std::isfinite(v))
    row_error(name, line, "bad number '" + s + "'");
  return v;
}

long long parse_ll(const std::string& s, const std::string& name, int line) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    row_error(name, line, "bad integer '" + s + "'");
  return v;
}

double json_num(double v) { return std::isfinite(v) ? v : kNaN; }

Json number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

GroupedData parse_grouped_csv(std::istream& in, const std::string& name) {
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    header = split_csv_row(lower(line));
    break;
  }
  if (header.empty()) throw data_error(name + ": empty file");

  enum class Schema { kCounts, kSummary, kRaw };
  Schema schema;
  if (header == std::vector<std::string>{"group", "successes", "trials"}) {
    schema = Schema::kCounts;
  } else if (header == std::vector<std::string>{"group", "n", "mean", "sd"}) {
    schema = Schema::kSummary;
  } else if (header == std::vector<std::string>{"group", "value"}) {
    schema = Schema::kRaw;
  } else {
    throw data_error(name + ": unrecognized header; expected "
                     "'group,successes,trials', 'group,n,mean,sd' or "
                     "'group,value'");
  }

  std::vector<std::string> order;
  std::unordered_map<std::string, int> index;
  const auto group_index = [&](const std::string& g, bool allow_repeat,
                               int row) {
    auto it = index.find(g);
    if (it != index.end()) {
      if (!allow_repeat) row_error(name, row, "duplicate group '" + g + "'");
      return it->second;
    }
    const int idx = int(order.size());
    index.emplace(g, idx);
    order.push_back(g);
    return idx;
  };

  GroupedCounts counts;
  GroupedGaussian gauss;
  struct Welford {
    long long n = 0;
    double mean = 0.0, m2 = 0.0;
  };
  std::vector<Welford> raw;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto f = split_csv_row(line);
    switch (schema) {
      case Schema::kCounts: {
        if (f.size() != 3) row_error(name, lineno, "expected 3 fields");
        group_index(f[0], false, lineno);
        const long long e = parse_ll(f[1], name, lineno);
        const long long n = parse_ll(f[2], name, lineno);
        if (n < 1) row_error(name, lineno, "trials must be >= 1");
        if (e < 0 || e > n)
          row_error(name, lineno, "successes outside [0, trials]");
        counts.successes.push_back(e);
        counts.trials.push_back(n);
        break;
      }
      case Schema::kSummary: {
        if (f.size() != 4) row_error(name, lineno, "expected 4 fields");
        group_index(f[0], false, lineno);
        const long long n = parse_ll(f[1], name, lineno);
        const double mean = parse_double(f[2], name, lineno);
        const double sd = parse_double(f[3], name, lineno);
        if (n < 1) row_error(name, lineno, "n must be >= 1");
        if (sd < 0) row_error(name, lineno, "sd must be >= 0");
        if (n == 1 && sd != 0)
          row_error(name, lineno, "sd must be 0 when n = 1");
        gauss.n.push_back(n);
        gauss.mean.push_back(mean);
        gauss.sse.push_back(sd * sd * double(n - 1));
        break;
      }
      case Schema::kRaw: {
        if (f.size() != 2) row_error(name, lineno, "expected 2 fields");
        const int idx = group_index(f[0], true, lineno);
        const double v = parse_double(f[1], name, lineno);
        if (idx == int(raw.size())) raw.push_back({});
        auto& w = raw[idx];
        ++w.n;
        const double delta = v - w.mean;
        w.mean += delta / double(w.n);
        w.m2 += delta * (v - w.mean);
        break;
      }
    }
  }
  if (order.empty()) throw data_error(name + ": no data rows");

  if (schema == Schema::kCounts) {
    counts.names = order;
    validate(counts);
    return counts;
  }
  if (schema == Schema::kRaw) {
    for (const auto& w : raw) {
      gauss.n.push_back(w.n);
      gauss.mean.push_back(w.mean);
      gauss.sse.push_back(w.m2);
    }
  }
  gauss.names = order;
  validate(gauss);
  return gauss;
}

GroupedData read_grouped_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path);
  return parse_grouped_csv(in, path);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

Json result_json(const PosteriorSummary& summary, const std::string& prior,
                 const std::string& model) {
  constexpr double kClamp = 1e-12;
  bool clamped = false;
  const auto clamp_prob = [&](double p) {
    if (p != 0.0 && p < kClamp) {
      clamped = true;
      return 0.0;
    }
    return p;
  };

  Json j;
  j["k"] = summary.k;
  j["prior"] = prior;
  j["model"] = model;
  j["method"] = summary.method;
  Json tops = Json::array();
  for (const auto& t : summary.top) {
    Json e;
    e["rgs"] = t.partition.to_string();
    e["prob"] = clamp_prob(t.prob);
    tops.push_back(std::move(e));
  }
  j["top_partitions"] = std::move(tops);
  j["top_truncated"] = summary.top_truncated;
  Json sizes = Json::array();
  for (double p : summary.size_probs) sizes.push_back(clamp_prob(p));
  j["size_probs"] = std::move(sizes);
  Json pw = Json::array();
  for (double p : summary.pairwise_equal) pw.push_back(clamp_prob(p));
  j["pairwise_equal"] = std::move(pw);
  j["group_means"] = summary.group_means;
  if (!summary.param_draws.empty()) j["param_draws"] = summary.param_draws;

  double ess_logpost = kNaN, ess_d = kNaN;
  if (!summary.diagnostics.per_chain.empty()) {
    ess_logpost = ess_d = 0.0;
    for (const auto& c : summary.diagnostics.per_chain) {
      ess_logpost += c.ess_logpost;
      ess_d += c.ess_blocks;
    }
  }
  Json diag;
  diag["ess_logpost"] = number_or_null(json_num(ess_logpost));
  diag["ess_d"] = number_or_null(json_num(ess_d));
  diag["rhat_logpost"] = number_or_null(summary.diagnostics.rhat_logpost);
  j["diagnostics"] = std::move(diag);
  j["seeds"] = summary.chain_seeds;
  j["log_normalizer"] = number_or_null(summary.log_normalizer);
  j["clamped_small_probs"] = clamped;
  return j;
}

Json study_summary_json(const StudyResult& result) {
  const auto& cfg = result.config;
  Json j;
  j["k"] = cfg.k;
  j["n_per_group"] = cfg.n_per_group;
  j["reps"] = cfg.reps;
  j["equality_fraction"] = cfg.equality_fraction;
  j["effect_step"] = cfg.effect_step;
  j["decision_threshold"] = cfg.decision_threshold;
  j["model"] = model_label(cfg.model);
  j["seed"] = cfg.seed;
  Json truth;
  truth["partition"] = result.truth.partition.to_string();
  truth["blocks"] = result.truth.requested_blocks;
  truth["group_means"] = result.truth.group_means;
  j["truth"] = std::move(truth);
  j["failed_reps"] = result.failed_reps;
  Json sums = Json::array();
  for (const auto& s : result.summaries) {
    Json e;
    e["method"] = s.method;
    e["fwer"] = s.fwer;
    e["false_null_rate"] = s.false_null_rate;
    e["mean_claims"] = s.mean_claims;
    sums.push_back(std::move(e));
  }
  j["summaries"] = std::move(sums);
  return j;
}

std::string study_csv(const StudyResult& result) {
  const auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      out += c;
      if (c == '"') out += '"';
    }
    out += '"';
    return out;
  };
  const auto field = [&](const std::string& s) {
    return s.find_first_of(",\"") == std::string::npos ? s : quote(s);
  };
  std::ostringstream os;
  os << "rep,seed,method,claimed_different,false_differences,"
        "missed_differences,transitive,runtime_ms,failed,error\n";
  char runtime[32];
  for (const auto& rec : result.reps) {
    if (rec.failed) {
      os << rec.rep << ',' << rec.seed << ",,,,,,," << 1 << ','
         << quote(rec.error) << '\n';
      continue;
    }
    for (const auto& mo : rec.outcomes) {
      std::snprintf(runtime, sizeof(runtime), "%.3f", mo.runtime_ms);
      os << rec.rep << ',' << rec.seed << ',' << field(mo.method) << ','
         << mo.claimed_different << ',' << mo.false_differences << ','
         << mo.missed_differences << ',' << (mo.transitive ? 1 : 0) << ','
         << runtime << ",0,\n";
    }
  }
  return os.str();
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json make_manifest(const std::vector<std::string>& argv, std::uint64_t seed,
                   const Json& config_echo,
                   const std::vector<std::pair<std::string, std::string>>&
                       input_digests,
                   const std::string& output_path,
                   const std::string& output_digest,
                   const std::string& started_utc,
                   const std::string& finished_utc) {
  Json j;
  j["tool_version"] = kToolVersion;
  j["command"] = argv;
  j["seed"] = seed;
  j["config"] = config_echo;
  Json inputs = Json::array();
  for (const auto& [path, digest] : input_digests) {
    Json e;
    e["path"] = path;
    e["fnv1a64"] = digest;
    inputs.push_back(std::move(e));
  }
  j["inputs"] = std::move(inputs);
  Json out;
  out["path"] = output_path;
  out["fnv1a64"] = output_digest;
  j["output"] = std::move(out);
  j["started_utc"] = started_utc;
  j["finished_utc"] = finished_utc;
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write " + path);
  out.write(content.data(), std::streamsize(content.size()));
  if (!out) throw data_error("write failed for " + path);
}

}  // namespace parteq
