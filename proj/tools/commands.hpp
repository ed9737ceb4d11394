#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pcc::cli {

/// Flag overrides shared by all commands; unset values fall back to the
/// config file, then to built-in defaults.
struct Flags {
    std::optional<std::filesystem::path> config;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out = "out";
    std::optional<int> setting;
    std::optional<int> k;
    std::optional<int> force_k;
    bool true_clustering = false;
    std::optional<std::string> learner;
    std::optional<std::string> methods;  // comma separated
    std::optional<int> reps;

    // Dataset inputs for fit / predict.
    std::optional<std::filesystem::path> data;
    std::optional<std::filesystem::path> labeled;
    std::optional<std::filesystem::path> unlabeled;
    std::optional<std::filesystem::path> groundtruth;
    std::optional<std::filesystem::path> model;
    std::optional<std::filesystem::path> input;
};

void cmd_generate(const Flags& flags);
void cmd_fit(const Flags& flags);
void cmd_predict(const Flags& flags);
void cmd_benchmark(const Flags& flags);
/// Returns false when an error bound is violated.
bool cmd_verify(const Flags& flags);

/// Maps an exception to the documented exit code.
int exit_code_for(const std::exception& e);

}  // namespace pcc::cli
