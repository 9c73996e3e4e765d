#pragma once

#include "credal/model.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>

namespace credal::training {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Writes `<dir>/manifest.json` (model config, parameter names, shapes,
/// dtype) and one little-endian float64 blob per parameter, row-major.
void save_checkpoint(const model::GnnModel& model, const std::filesystem::path& dir);

/// Reads a checkpoint back bit-exactly. Throws CheckpointError on a missing
/// or truncated blob, or when `expected_kind` disagrees with the manifest.
model::GnnModel load_checkpoint(const std::filesystem::path& dir,
                                std::optional<model::ModelKind> expected_kind = std::nullopt);

} // namespace credal::training
