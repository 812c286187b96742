// Configuration, orchestration, seeding, and output for all experiments.
#pragma once

#include "rwre/estimators.hpp"

namespace rwre {

extern const char* kCodeVersion;

struct ExperimentConfig {
  EnvironmentSpec env;
  Regime regime = Regime::A;
  DVec v = dzero();          // regime direction/strength (macroscopic)
  int p_override = 0;        // 0 = derive from the model
  std::string kind = "invariant-measure";
  std::vector<long long> n_grid{10000};
  double t = 1.0;
  std::uint64_t replicas = 1000;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  double rel_tol = 0.10;
  TestFunction phi;
  std::string f_kind = "indicator0";  // indicator0 | zeta | vartheta
  std::string starts_kind = "together";  // together | bounded | well_separated
  double starts_c = 1.0;
  bool profile_dirac = true;
  double profile_width = 1.0;
  double v2_scale = 1.3;  // second strength for the regime-C ordering check
  std::string chain = "environment";  // environment | independent | simple-walk
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
std::string canonical_config(const ExperimentConfig& cfg);  // round-trips

struct ResultRow {
  std::string name;
  double N = 0;
  double estimate = 0;
  double stderror = 0;
  double target = 0;
  double tolerance = 0;  // <= 0: informational row
  bool pass = true;
  std::string note;
};

struct RunOutput {
  std::vector<ResultRow> rows;
  bool all_pass() const {
    for (auto& r : rows)
      if (r.tolerance > 0 && !r.pass) return false;
    return true;
  }
};

RunOutput run_experiment(const ExperimentConfig& cfg);

// write manifest.json / results.csv / summary.json under a fresh run
// directory; returns the process exit status (0 iff all verdicts pass)
int run_and_write(const ExperimentConfig& cfg);

// merge summary.json files into a pooled verdict table; refuses to pool
// conflicting configs
int report_merge(const std::vector<std::string>& summaries, const std::string& out_csv);

// helpers shared with the acceptance suite
SiteMap<double> make_f_table(const TwoPointTables& tables, const std::string& kind,
                             const DVec& varsigma, int p);
std::pair<IVec, IVec> make_starts(const TwoPointTables& tables, const std::string& kind,
                                  double c, long long N);

}  // namespace rwre
