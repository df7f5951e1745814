#include "flexrl/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace flexrl {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

std::string result_key(const ResultRow& r) {
  return r.env + '|' + r.mixture + '|' + r.algorithm + '|' + r.divergence + '|' +
         std::to_string(r.seed);
}

}  // namespace

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_config_file: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  std::vector<ResultRow> rows;
  if (!in) return rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ResultRow r;
    std::string seed, fnr, mean, stddev;
    if (!std::getline(ss, r.env, ',') || !std::getline(ss, r.mixture, ',') ||
        !std::getline(ss, r.algorithm, ',') || !std::getline(ss, r.divergence, ',') ||
        !std::getline(ss, seed, ',') || !std::getline(ss, fnr, ',') ||
        !std::getline(ss, mean, ',') || !std::getline(ss, stddev, ','))
      throw IoError("read_results_csv: bad row: " + line);
    r.seed = std::stoull(seed);
    r.final_norm_return = std::stod(fnr);
    r.mean_over_seeds = std::stod(mean);
    r.std_over_seeds = std::stod(stddev);
    rows.push_back(r);
  }
  return rows;
}

void append_results(const std::string& path, const std::vector<ResultRow>& rows,
                    bool allow_overwrite) {
  std::vector<ResultRow> existing = read_results_csv(path);
  for (const ResultRow& r : rows) {
    auto it = std::find_if(existing.begin(), existing.end(), [&](const ResultRow& e) {
      return result_key(e) == result_key(r);
    });
    if (it != existing.end()) {
      if (!allow_overwrite)
        throw IoError("append_results: duplicate key " + result_key(r) +
                      " (pass the overwrite flag to replace)");
      *it = r;
    } else {
      existing.push_back(r);
    }
  }
  std::ofstream out(path);
  if (!out) throw IoError("append_results: cannot write " + path);
  out << "env,mixture,algorithm,divergence,seed,final_norm_return,mean_over_seeds,"
         "std_over_seeds\n";
  char buf[128];
  for (const ResultRow& r : existing) {
    std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g",
                  static_cast<unsigned long long>(r.seed), r.final_norm_return,
                  r.mean_over_seeds, r.std_over_seeds);
    out << r.env << ',' << r.mixture << ',' << r.algorithm << ',' << r.divergence << ','
        << buf << '\n';
  }
}

std::string output_root(const std::string& fallback) {
  const char* env = std::getenv("FLEXRL_OUT");
  if (env && *env) return env;
  return fallback;
}

}  // namespace flexrl
