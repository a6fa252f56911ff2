#pragma once

#include <filesystem>
#include <iosfwd>

#include "sce/model.hpp"

namespace sce {

/// Line-oriented text container, version 1:
///
///   sce-checkpoint 1
///   feature_dim F / embed_dim D / conditions M / text_dim T   (one per line)
///   branch_mode <mode>
///   encoder_hidden <w...> / branch_hidden <w...>
///   weight_source <source> / random_seed <u64>
///   condition_labels <label...>
///   masks_trainable <0|1>
///   param <name> <rows> <cols>     followed by `rows` lines of `cols` numbers
///   ...
///   end
///
/// Numbers are written in shortest round-trip decimal form, so a save/load
/// cycle reproduces every parameter bit for bit.
inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const SceModel& model);
SceModel read_checkpoint(std::istream& in, const std::string& source = "<checkpoint>");

void save_checkpoint(const SceModel& model, const std::filesystem::path& path);
SceModel load_checkpoint(const std::filesystem::path& path);

/// Throws CheckpointError naming the first field in which `model` differs
/// from `expected` (F, D, M, T, mode, hidden widths).
void require_shape(const SceModel& model, const ModelShape& expected);

}  // namespace sce
