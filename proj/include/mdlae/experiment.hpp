#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mdlae/train.hpp"

// Experiment plumbing behind the command-line tool: strict flat key=value
// configs, headerless CSV dataset io, seeded synthetic generators with
// ground-truth sidecars, and the four commands (synth, train, compare-bounds,
// grad-check) as library functions that write their artifacts and return
// what they print.

namespace mdlae {

// Parsed key=value pairs.  Lookups throw std::invalid_argument naming the
// key when it is missing or cannot be parsed as the requested type.
struct ExperimentConfig {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const;
  const std::string& require(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double as_double(const std::string& key) const;
  double as_double_or(const std::string& key, double fallback) const;
  int as_int(const std::string& key) const;
  int as_int_or(const std::string& key, int fallback) const;
  std::uint64_t as_u64_or(const std::string& key, std::uint64_t fallback) const;
  bool as_bool_or(const std::string& key, bool fallback) const;
  std::vector<double> as_doubles(const std::string& key) const;  // comma separated
  std::vector<int> as_shape(const std::string& key) const;       // dash separated
};

// `key = value` lines, `#` starts a comment, blank lines ignored.  Unknown
// keys, duplicates and malformed lines are errors naming the key and line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// headerless CSV, one sample per row
Matrix load_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const Matrix& m);

// Typed pieces materialized from the config.  Shape consistency (encoder
// output = decoder input, decoder output = encoder input, prior dimension)
// is checked here with the offending keys named.  Scalar prior and noise
// entries broadcast over the feature dimension.
AutoEncoder autoencoder_from_config(const ExperimentConfig& cfg, const Rng& rng);
Prior prior_from_config(const ExperimentConfig& cfg, int dy);
Objective objective_from_config(const ExperimentConfig& cfg, int dy);
TrainConfig train_config_from_config(const ExperimentConfig& cfg, std::uint64_t seed);

// --seed beats the config's `seed`, which defaults to 1
std::uint64_t resolve_seed(const ExperimentConfig& cfg,
                           std::optional<std::uint64_t> cli_seed);

// Report serialization: every sample object carries the full fixed key set
// (l_rec, e_l_rec, kl_feat_prior, l_f_gen, l_two_part, l_gen_oracle,
// bound_gap); bounds that were not computed are null, non-finite values are
// the strings "inf", "-inf", "nan".  The aggregate object has the same keys.
std::string report_to_json(const CodelengthReport& rep);

// Writes the dataset CSV named by `dataset` plus a `<dataset>.truth.json`
// sidecar with the generative parameters.  Tasks: linear-gaussian
// (x = A y + b + noise eps, y standard normal), discrete-mixture (affine
// images of the {0,1}^dy corners, corners visited round-robin), two-scale
// (independent components at variances 1 and 1e-4).
std::string cmd_synth(const ExperimentConfig& cfg, std::uint64_t seed);

// Trains per the config and writes report.json and log.tsv under out_dir.
std::string cmd_train(const ExperimentConfig& cfg, std::uint64_t seed,
                      const std::filesystem::path& out_dir);

// Per-sample bound table against the exact generative codelength, written
// as bounds.csv under out_dir; returns the aligned text table.  Discrete
// feature rows compare l_gen <= l_f_gen <= l_two_part, continuous rows
// l_gen <= denoising / taylor / contractive.  An infeasible oracle is an
// error, never a silent downgrade.
std::string cmd_compare_bounds(const ExperimentConfig& cfg, std::uint64_t seed,
                               const std::filesystem::path& out_dir);

struct GradCheckOutput {
  std::string text;
  bool all_pass = false;
};

// Analytic-vs-differenced audit of every objective; `corrupt = true` in the
// config skews one entry per objective to prove the audit can fail.
GradCheckOutput cmd_grad_check(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace mdlae
