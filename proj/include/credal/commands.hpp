#pragma once

#include "credal/verify.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

// Subcommand bodies shared by the CLI and the tests. Each returns the process
// exit code: 0 success, 1 runtime failure, 2 config or schema error.
namespace credal::cli {

struct Overrides {
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
};

/// CREDAL_JOBS wins over the flag; the default is one job.
int resolve_jobs(std::optional<int> flag);

int cmd_train(const std::filesystem::path& config, const Overrides& overrides, std::ostream& out,
              std::ostream& err);
int cmd_eval_ood(const std::filesystem::path& config, const Overrides& overrides, std::ostream& out,
                 std::ostream& err);
int cmd_gen_synthetic(const std::filesystem::path& config, const Overrides& overrides, std::ostream& out,
                      std::ostream& err);
int cmd_verify(const verify::VerifyOptions& options, std::ostream& out);

} // namespace credal::cli
