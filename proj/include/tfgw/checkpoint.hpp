#pragma once

#include <filesystem>
#include <ostream>

#include "tfgw/trainer.hpp"

namespace tfgw {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout (little-endian):
///   "TFGW" | u32 version | u64 meta length | meta (key=value lines)
///   | u32 block count | blocks: u32 name length | name | u64 rows | u64 cols | rows*cols f64, column-major
/// Blocks appear in the order gin.*, template.*, alpha, head.*.
void save_model(const TfgwModel& model, const std::filesystem::path& file);
TfgwModel load_model(const std::filesystem::path& file);

/// One JSON object per line: {"epoch","fold","train_loss","val_acc","alpha"}.
std::string history_line(const HistoryRecord& record);
void write_history(const std::vector<HistoryRecord>& records, std::ostream& out);

}  // namespace tfgw
