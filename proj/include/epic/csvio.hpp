#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace epic {

// CSV with a mandatory header row; floats printed with 17 significant digits
// so same-seed runs are byte-identical and re-parseable without loss.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void begin_row();
  void add(double value);
  void add(int value);
  void add(const std::string& value);
  void end_row();

 private:
  std::ofstream out_;
  std::size_t columns_;
  std::size_t in_row_;
  bool row_open_ = false;
};

std::string format_double(double value);

}  // namespace epic
