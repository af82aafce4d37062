#include "proca/plot.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <fstream>

#include "proca/errors.hpp"

namespace proca {

std::vector<double> LossLog::series(const std::string& column) const {
  const auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) throw DataError("loss log has no column '" + column + "'");
  const auto c = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  for (const auto& row : values) out.push_back(row[c]);
  return out;
}

LossLog read_loss_log(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open loss log " + file.string());
  LossLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": not a JSON object");
    }
    if (!j.is_object() || !j.contains("step")) continue;
    std::vector<double> row;
    std::vector<std::string> cols;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "step" || !it.value().is_number()) continue;
      cols.push_back(it.key());
      row.push_back(it.value().get<double>());
    }
    if (log.steps.empty()) {
      log.columns = cols;
    } else if (cols != log.columns) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": columns differ from the first line");
    }
    log.steps.push_back(j["step"].get<int64_t>());
    log.values.push_back(std::move(row));
  }
  if (log.steps.empty()) throw DataError("loss log " + file.string() + " has no step lines");
  return log;
}

std::size_t plot_loss_curve(const LossLog& log, const std::filesystem::path& file, int width, int height) {
  if (log.size() == 0) throw DataError("empty loss log");
  const std::vector<std::pair<std::string, cv::Scalar>> curves = {{"total", {180, 90, 30}},
                                                                   {"d_total", {40, 40, 200}}};
  const int left = 60, right = 20, top = 20, bottom = 40;
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));

  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& [name, colour] : curves) {
    for (double v : log.series(name)) {
      lo = first ? v : std::min(lo, v);
      hi = first ? v : std::max(hi, v);
      first = false;
    }
  }
  if (hi <= lo) hi = lo + 1.0;
  const int64_t s0 = log.steps.front(), s1 = std::max(log.steps.back(), s0 + 1);
  auto to_px = [&](int64_t step, double v) {
    const double fx = static_cast<double>(step - s0) / static_cast<double>(s1 - s0);
    const double fy = (v - lo) / (hi - lo);
    return cv::Point(left + static_cast<int>(fx * (width - left - right)),
                     height - bottom - static_cast<int>(fy * (height - top - bottom)));
  };

  cv::rectangle(img, {left, top}, {width - right, height - bottom}, cv::Scalar(0, 0, 0), 1);
  char label[64];
  std::snprintf(label, sizeof label, "%.3g", hi);
  cv::putText(img, label, {4, top + 10}, cv::FONT_HERSHEY_PLAIN, 0.9, cv::Scalar(0, 0, 0));
  std::snprintf(label, sizeof label, "%.3g", lo);
  cv::putText(img, label, {4, height - bottom}, cv::FONT_HERSHEY_PLAIN, 0.9, cv::Scalar(0, 0, 0));
  std::snprintf(label, sizeof label, "step %lld .. %lld", static_cast<long long>(s0),
                static_cast<long long>(log.steps.back()));
  cv::putText(img, label, {left, height - 12}, cv::FONT_HERSHEY_PLAIN, 0.9, cv::Scalar(0, 0, 0));

  int legend_y = top + 16;
  for (const auto& [name, colour] : curves) {
    const auto ys = log.series(name);
    std::vector<cv::Point> pts;
    for (std::size_t i = 0; i < ys.size(); ++i) pts.push_back(to_px(log.steps[i], ys[i]));
    cv::polylines(img, pts, false, colour, 1, cv::LINE_8);
    cv::putText(img, name, {width - right - 80, legend_y}, cv::FONT_HERSHEY_PLAIN, 0.9, colour);
    legend_y += 14;
  }
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  if (!cv::imwrite(file.string(), img)) throw DataError("cannot write " + file.string());
  return log.size();
}

void write_heatmap(const torch::Tensor& matrix, const std::filesystem::path& file, int cell_pixels) {
  if (matrix.dim() != 2) throw ShapeError("heatmap needs a 2-D matrix");
  const auto m = matrix.to(torch::kFloat64).contiguous();
  const int rows = static_cast<int>(m.size(0)), cols = static_cast<int>(m.size(1));
  cv::Mat grey(rows, cols, CV_8UC1);
  auto a = m.accessor<double, 2>();
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double v = std::clamp((a[i][j] + 1.0) / 2.0, 0.0, 1.0);
      grey.at<uint8_t>(i, j) = static_cast<uint8_t>(std::lround(v * 255.0));
    }
  }
  cv::Mat colour, big;
  cv::applyColorMap(grey, colour, cv::COLORMAP_VIRIDIS);
  cv::resize(colour, big, {cols * cell_pixels, rows * cell_pixels}, 0, 0, cv::INTER_NEAREST);
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  if (!cv::imwrite(file.string(), big)) throw DataError("cannot write " + file.string());
}

}  // namespace proca
