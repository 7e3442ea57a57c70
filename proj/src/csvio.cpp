#include "epic/csvio.hpp"

#include <cstdio>
#include <stdexcept>

namespace epic {

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), columns_(header.size()), in_row_(0) {
  if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

void CsvWriter::begin_row() {
  if (row_open_) throw std::logic_error("CsvWriter: row already open");
  row_open_ = true;
  in_row_ = 0;
}

void CsvWriter::add(double value) { add(format_double(value)); }

void CsvWriter::add(int value) { add(std::to_string(value)); }

void CsvWriter::add(const std::string& value) {
  if (!row_open_) throw std::logic_error("CsvWriter: no open row");
  if (in_row_) out_ << ',';
  out_ << value;
  ++in_row_;
}

void CsvWriter::end_row() {
  if (in_row_ != columns_) throw std::logic_error("CsvWriter: column count mismatch");
  out_ << '\n';
  row_open_ = false;
}

}  // namespace epic
