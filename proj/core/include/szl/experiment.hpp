#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "szl/asymptotics.hpp"

namespace szl {

inline constexpr int kSchemaVersion = 1;

struct LegendrianSpec {
  std::string family;
  std::vector<double> params;
  // f_lambda(t) = sum_m c_m e^{i m.t}; empty means f = 1.
  std::vector<std::pair<std::vector<int>, cplx>> f_modes;

  LegendrianImmersion build() const;
};

struct ProbeSpec {
  std::string id;
  std::optional<CVec> coords;             // explicit point (normalized on load)
  std::optional<std::vector<double>> on;  // parameter on Lambda
  CVec w;                                 // displacement, may be empty
  bool adapted_frame = false;             // w in the chart adapted to Lambda at the probe
  bool check_fit = false;                 // compare the raw fit against the report expectations
};

struct ReportThresholds {
  double prediction_rel_tol = 0.05;
  double zero_abs_tol = 1e-8;
  long compare_k_min = 0;
  int rapid_decay_n_max = 5;
  double rapid_decay_drop = 1e3;
  double noise_floor = 1e-12;
  std::optional<double> expect_exponent, exponent_tol;
  std::optional<double> expect_coefficient, coefficient_tol;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string id;
  int n = 1;
  std::string normalization = "dsigma/2pi";
  LegendrianSpec legendrian;
  std::optional<TorusAction> action;
  std::vector<Eigen::VectorXi> varpi_list;
  std::vector<ProbeSpec> probes;
  std::optional<LegendrianSpec> pairing_sigma;
  long k_min = 1, k_max = 1, k_step = 1;
  std::string parity = "all";  // all | even | odd
  QuadratureOptions quadrature;
  ReportThresholds thresholds;
  std::string output_dir = "results";

  std::vector<long> ks() const;
};

// Parses and validates; throws Error with a path-qualified message.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& file);
void validate(const ExperimentConfig& cfg);

std::vector<std::string> builtin_config_names();
std::string builtin_config_text(const std::string& name);

struct ResultRecord {
  std::string experiment_id;
  std::string probe_id;
  long k = 0;
  std::vector<int> varpi;
  cplx value;
  cplx predicted;
  bool has_prediction = false;
  double w_norm = 0.0;
  std::string base_key;  // probes sharing a base point share this key
  double timing_ms = 0.0;
  std::string error;     // nonempty marks a failed evaluation
};

struct ResultSet {
  std::string experiment_id;
  std::string config_hash;
  std::vector<ResultRecord> records;
  std::vector<std::string> report_lines;
  bool all_passed = true;
};

struct RunOptions {
  int threads = 1;
  std::filesystem::path out_dir;  // empty: config output_dir
  bool use_cache = true;
};

ResultSet run(const ExperimentConfig& cfg, const RunOptions& opt = {});

// Canonical hash of everything that changes computed values.
std::string config_hash(const ExperimentConfig& cfg);

void write_results(const ResultSet& rs, const std::filesystem::path& dir);
ResultSet read_results(const std::filesystem::path& dir);

// kind: growth | profile | pairing | decay. Returns the written file.
std::filesystem::path emit_plot_data(const ResultSet& rs, const std::string& kind,
                                     const std::filesystem::path& dir);

}  // namespace szl
