#pragma once

#include "flis/pipeline.hpp"

#include <filesystem>
#include <string>

namespace flis {

/// Settings of a CLI run. Plain-text form, one `key = value` per line, '#'
/// starts a comment:
///
///   method, w, P, K, beta, rho, lambda, lambda1, max_iters, tol,
///   odl_epochs, odl_batch, quota, bins, seed, normalize_distance (0/1),
///   lambda_infer, src_atoms, mask_source (candidate|truth),
///   train_dir, model, threads
struct RunConfig {
    TrainConfig train;
    std::string train_dir; // directory holding one sub-directory per patient
    std::string model;     // model file path
    int threads = 0;       // 0 = OpenMP default
};

/// Sets one key; throws InvalidArgument naming the key when it is unknown or
/// the value does not parse.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Applies every line of `text` on top of `cfg`.
void apply_text(RunConfig& cfg, const std::string& text);

/// Reads a config file (InputError if missing) on top of the defaults.
RunConfig load_config(const std::filesystem::path& path);

/// "key=value" override as given on the command line.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Canonical text form that apply_text reads back to the same config.
std::string to_text(const RunConfig& cfg);

} // namespace flis
