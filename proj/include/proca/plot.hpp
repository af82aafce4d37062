#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace proca {

// Numeric columns of an NDJSON loss log (header line skipped).
struct LossLog {
  std::vector<std::string> columns;          // every numeric key except "step"
  std::vector<int64_t> steps;
  std::vector<std::vector<double>> values;   // values[row][column]

  std::size_t size() const { return steps.size(); }
  std::vector<double> series(const std::string& column) const;
};

// Throws DataError for an unreadable file, malformed lines or no step lines.
LossLog read_loss_log(const std::filesystem::path& file);

// Generator and discriminator totals against the step index, one vertex per
// logged step. Returns the number of points drawn per curve.
std::size_t plot_loss_curve(const LossLog& log, const std::filesystem::path& file, int width = 800,
                            int height = 480);

// Square matrix rendered cell by cell on a fixed [-1, 1] color scale.
void write_heatmap(const torch::Tensor& matrix, const std::filesystem::path& file, int cell_pixels = 8);

}  // namespace proca
